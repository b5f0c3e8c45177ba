#pragma once

#include <compare>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace himes::memory {

/// Two-level address of a memory partition: topic, then subtopic.
struct PartitionKey {
  std::string topic;
  std::string subtopic;

  friend auto operator<=>(const PartitionKey&, const PartitionKey&) = default;
};

struct TopicCategory {
  std::string name;
  std::vector<std::string> subtopics;
};

/// Ordered topic → subtopic taxonomy used to partition stored queries.
///
/// Besides the loaded categories every taxonomy answers for one reserved
/// pseudo-partition, fallback(), which absorbs queries the classifier could
/// not place. It is not listed in categories() and documents may not declare
/// a name starting with the reserved prefix.
class TopicTaxonomy {
 public:
  static constexpr std::string_view kReservedName = "_unclassified";

  /// Validates and builds. Throws ValidationError listing every offending entry.
  static TopicTaxonomy from_json(const nlohmann::json& doc);
  static TopicTaxonomy from_json_text(std::string_view text);
  static TopicTaxonomy from_file(const std::filesystem::path& path);

  /// The 16 × 4 social-interaction taxonomy compiled into the library.
  static TopicTaxonomy shipped_default();

  static PartitionKey fallback() { return {std::string(kReservedName), std::string(kReservedName)}; }

  const std::vector<TopicCategory>& categories() const noexcept { return categories_; }
  std::size_t pair_count() const noexcept;

  /// True for every declared pair and for fallback().
  bool contains(const PartitionKey& key) const;

  /// Declared pairs in document order, then fallback().
  std::vector<PartitionKey> partitions() const;

  nlohmann::json to_json() const;

 private:
  std::vector<TopicCategory> categories_;
};

/// Raw text of the shipped taxonomy file.
std::string_view shipped_taxonomy_json();

}  // namespace himes::memory
