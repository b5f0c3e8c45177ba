#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "himes/clients/chat.hpp"
#include "himes/memory/taxonomy.hpp"

namespace himes::memory {

/// Whatever label a classifier produced; not yet checked against a taxonomy.
struct ClassifierLabel {
  std::string topic;
  std::string subtopic;
};

class TopicClassifier {
 public:
  virtual ~TopicClassifier() = default;
  /// May throw TransportError.
  virtual ClassifierLabel classify(std::string_view query, const TopicTaxonomy& taxonomy) = 0;
};

struct Classification {
  PartitionKey key;
  std::optional<std::string> warning;
};

/// Validated classification. Labels outside the taxonomy and empty queries
/// land in TopicTaxonomy::fallback(); the former also carry a warning.
/// Transport failures propagate as TransportError.
Classification classify_query(std::string_view query, const TopicTaxonomy& taxonomy, TopicClassifier& classifier);

/// First keyword (normalized, whole-token match) found in the query wins.
class KeywordClassifier final : public TopicClassifier {
 public:
  explicit KeywordClassifier(std::vector<std::pair<std::string, PartitionKey>> table);
  ClassifierLabel classify(std::string_view query, const TopicTaxonomy& taxonomy) override;

 private:
  std::vector<std::pair<std::string, PartitionKey>> table_;
};

/// Picks the pair whose topic and subtopic names share the most tokens with
/// the query (subtopic overlap weighted double, ties to document order).
/// Returns an empty label when nothing overlaps.
class LexicalClassifier final : public TopicClassifier {
 public:
  ClassifierLabel classify(std::string_view query, const TopicTaxonomy& taxonomy) override;
};

/// Asks a chat model to pick a pair; expects a JSON object
/// {"topic": ..., "subtopic": ...} somewhere in the reply.
class ChatTopicClassifier final : public TopicClassifier {
 public:
  explicit ChatTopicClassifier(clients::ChatClient& client) : client_(client) {}
  ClassifierLabel classify(std::string_view query, const TopicTaxonomy& taxonomy) override;

  static std::string render_prompt(std::string_view query, const TopicTaxonomy& taxonomy);

 private:
  clients::ChatClient& client_;
};

}  // namespace himes::memory
