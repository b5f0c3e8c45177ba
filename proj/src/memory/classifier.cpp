#include "himes/memory/classifier.hpp"

#include <set>

#include "himes/core/text.hpp"
#include "json.hpp"

namespace himes::memory {

Classification classify_query(std::string_view query, const TopicTaxonomy& taxonomy, TopicClassifier& classifier) {
  if (core::normalize_text(query).empty()) return {TopicTaxonomy::fallback(), std::nullopt};
  ClassifierLabel label = classifier.classify(query, taxonomy);
  PartitionKey key{std::move(label.topic), std::move(label.subtopic)};
  if (key.topic.empty() && key.subtopic.empty())
    return {TopicTaxonomy::fallback(), std::string("classifier returned no label; using fallback partition")};
  if (!taxonomy.contains(key))
    return {TopicTaxonomy::fallback(),
            "classifier label (\"" + key.topic + "\", \"" + key.subtopic + "\") is not in the taxonomy; using fallback partition"};
  return {std::move(key), std::nullopt};
}

KeywordClassifier::KeywordClassifier(std::vector<std::pair<std::string, PartitionKey>> table) {
  table_.reserve(table.size());
  for (auto& [kw, key] : table) {
    auto norm = core::normalize_text(kw);
    if (!norm.empty()) table_.emplace_back(std::move(norm), std::move(key));
  }
}

ClassifierLabel KeywordClassifier::classify(std::string_view query, const TopicTaxonomy&) {
  const std::string padded = " " + core::normalize_text(query) + " ";
  for (const auto& [kw, key] : table_)
    if (padded.find(" " + kw + " ") != std::string::npos) return {key.topic, key.subtopic};
  return {};
}

ClassifierLabel LexicalClassifier::classify(std::string_view query, const TopicTaxonomy& taxonomy) {
  const auto q = core::tokenize(query);
  const std::set<std::string> qset(q.begin(), q.end());
  auto overlap = [&](std::string_view name) {
    std::size_t n = 0;
    std::set<std::string> seen;
    for (const auto& t : core::tokenize(name))
      if (qset.count(t) && seen.insert(t).second) ++n;
    return n;
  };

  ClassifierLabel best;
  std::size_t best_score = 0;
  for (const auto& c : taxonomy.categories()) {
    const std::size_t topic_score = overlap(c.name);
    for (const auto& s : c.subtopics) {
      const std::size_t score = topic_score + 2 * overlap(s);
      if (score > best_score) {
        best_score = score;
        best = {c.name, s};
      }
    }
  }
  return best;
}

std::string ChatTopicClassifier::render_prompt(std::string_view query, const TopicTaxonomy& taxonomy) {
  std::string p =
      "Classify the user query into exactly one topic and subtopic from the taxonomy below.\n"
      "Reply with a JSON object only: {\"topic\": <topic>, \"subtopic\": <subtopic>}\n\nTaxonomy:\n";
  for (const auto& c : taxonomy.categories()) {
    p += "- " + c.name + ": ";
    for (std::size_t i = 0; i < c.subtopics.size(); ++i) p += (i ? ", " : "") + c.subtopics[i];
    p += "\n";
  }
  p += "\nUser query: ";
  p += query;
  p += "\n";
  return p;
}

ClassifierLabel ChatTopicClassifier::classify(std::string_view query, const TopicTaxonomy& taxonomy) {
  const std::string reply = client_.generate(render_prompt(query, taxonomy));
  const auto open = reply.find('{');
  const auto close = reply.rfind('}');
  if (open == std::string::npos || close == std::string::npos || close < open) return {};
  try {
    const auto j = nlohmann::json::parse(reply.substr(open, close - open + 1));
    return {j.value("topic", ""), j.value("subtopic", "")};
  } catch (const nlohmann::json::exception&) {
    return {};
  }
}

}  // namespace himes::memory
