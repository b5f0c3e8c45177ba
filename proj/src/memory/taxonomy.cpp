#include "himes/memory/taxonomy.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "himes/core/errors.hpp"

namespace himes::memory {

namespace {

bool reserved(const std::string& name) { return name.rfind(TopicTaxonomy::kReservedName, 0) == 0; }

}  // namespace

TopicTaxonomy TopicTaxonomy::from_json(const nlohmann::json& doc) {
  std::vector<std::string> issues;
  if (!doc.is_object() || !doc.contains("categories") || !doc["categories"].is_array())
    throw ValidationError("taxonomy document must be an object with a \"categories\" array");

  TopicTaxonomy t;
  std::set<std::string> seen_categories;
  std::size_t index = 0;
  for (const auto& entry : doc["categories"]) {
    const std::string where = "categories[" + std::to_string(index++) + "]";
    if (!entry.is_object() || !entry.contains("name") || !entry["name"].is_string()) {
      issues.push_back(where + ": missing string \"name\"");
      continue;
    }
    TopicCategory cat;
    cat.name = entry["name"].get<std::string>();
    if (cat.name.empty()) issues.push_back(where + ": empty category name");
    if (reserved(cat.name)) issues.push_back(where + ": name \"" + cat.name + "\" uses the reserved prefix");
    if (!seen_categories.insert(cat.name).second) issues.push_back("duplicate category \"" + cat.name + "\"");

    if (!entry.contains("subtopics") || !entry["subtopics"].is_array()) {
      issues.push_back("category \"" + cat.name + "\": missing \"subtopics\" array");
      continue;
    }
    std::set<std::string> seen_sub;
    for (const auto& sub : entry["subtopics"]) {
      if (!sub.is_string()) {
        issues.push_back("category \"" + cat.name + "\": non-string subtopic");
        continue;
      }
      auto s = sub.get<std::string>();
      if (s.empty()) issues.push_back("category \"" + cat.name + "\": empty subtopic name");
      if (reserved(s)) issues.push_back("category \"" + cat.name + "\": subtopic \"" + s + "\" uses the reserved prefix");
      if (!seen_sub.insert(s).second)
        issues.push_back("duplicate pair (\"" + cat.name + "\", \"" + s + "\")");
      cat.subtopics.push_back(std::move(s));
    }
    if (cat.subtopics.empty()) issues.push_back("category \"" + cat.name + "\" has no subtopics");
    t.categories_.push_back(std::move(cat));
  }
  if (t.categories_.empty() && issues.empty()) issues.push_back("taxonomy declares no categories");
  if (!issues.empty()) throw ValidationError("invalid taxonomy", std::move(issues));
  return t;
}

TopicTaxonomy TopicTaxonomy::from_json_text(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(std::string("taxonomy is not valid JSON: ") + e.what());
  }
  return from_json(doc);
}

TopicTaxonomy TopicTaxonomy::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read taxonomy file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return from_json_text(buf.str());
}

TopicTaxonomy TopicTaxonomy::shipped_default() { return from_json_text(shipped_taxonomy_json()); }

std::size_t TopicTaxonomy::pair_count() const noexcept {
  std::size_t n = 0;
  for (const auto& c : categories_) n += c.subtopics.size();
  return n;
}

bool TopicTaxonomy::contains(const PartitionKey& key) const {
  if (key == fallback()) return true;
  for (const auto& c : categories_) {
    if (c.name != key.topic) continue;
    for (const auto& s : c.subtopics)
      if (s == key.subtopic) return true;
  }
  return false;
}

std::vector<PartitionKey> TopicTaxonomy::partitions() const {
  std::vector<PartitionKey> out;
  out.reserve(pair_count() + 1);
  for (const auto& c : categories_)
    for (const auto& s : c.subtopics) out.push_back({c.name, s});
  out.push_back(fallback());
  return out;
}

nlohmann::json TopicTaxonomy::to_json() const {
  nlohmann::json cats = nlohmann::json::array();
  for (const auto& c : categories_) cats.push_back({{"name", c.name}, {"subtopics", c.subtopics}});
  return {{"categories", std::move(cats)}};
}

}  // namespace himes::memory
