#pragma once

#include <atomic>
#include <compare>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "himes/core/time.hpp"
#include "himes/core/vector.hpp"
#include "himes/kernels/matrix.hpp"
#include "himes/kernels/similarity.hpp"
#include "himes/memory/taxonomy.hpp"

namespace himes::memory {

struct RecordId {
  std::uint64_t value = 0;
  friend auto operator<=>(const RecordId&, const RecordId&) = default;
};

struct MemoryRecord {
  RecordId id;
  std::string user_id;
  std::string query_text;
  PartitionKey partition;
  core::EmbeddingVector embedding;
  core::Timestamp timestamp;
};

nlohmann::json to_json(const MemoryRecord& record);
MemoryRecord record_from_json(const nlohmann::json& j);

struct RecallResult {
  MemoryRecord record;
  double similarity = 0.0;
};

/// Which records a recall (or a candidate count) covers.
class RecallScope {
 public:
  enum class Kind { partition, global, partition_then_global };

  static RecallScope partition(PartitionKey key) { return {Kind::partition, std::move(key)}; }
  static RecallScope global() { return {Kind::global, {}}; }
  /// Search the partition; if it yields fewer than n results, top up from the rest of the store.
  static RecallScope partition_then_global(PartitionKey key) { return {Kind::partition_then_global, std::move(key)}; }

  Kind kind() const noexcept { return kind_; }
  const PartitionKey& key() const noexcept { return key_; }

 private:
  RecallScope(Kind kind, PartitionKey key) : kind_(kind), key_(std::move(key)) {}
  Kind kind_;
  PartitionKey key_;
};

struct StoreStats {
  std::uint64_t recalls = 0;
  std::uint64_t writes = 0;
};

/// Partitioned long-term memory of users' historical queries.
///
/// Records live in a two-level tree (topic → subtopic) and, inside each
/// partition, in one contiguous embedding block per user, so a recall
/// touches only the caller's rows of the addressed partition. Results are
/// ordered by similarity descending, then newer timestamp, then lower
/// record id.
///
/// Single writer, many readers: store_query takes an exclusive lock, every
/// read a shared one, so a reader never observes a half-inserted record.
/// A persistent store appends each record to a per-partition JSONL log
/// before it becomes visible; the index is rebuilt from the logs on open.
struct StoreOptions {
  kernels::Execution execution = kernels::Execution::parallel;
  bool fsync_writes = false;
};

class MemoryStore {
 public:
  using Options = StoreOptions;

  MemoryStore(TopicTaxonomy taxonomy, std::size_t dimension);
  MemoryStore(TopicTaxonomy taxonomy, std::size_t dimension, Options options);
  ~MemoryStore();

  MemoryStore(const MemoryStore&) = delete;
  MemoryStore& operator=(const MemoryStore&) = delete;

  /// Opens (creating if needed) a log directory. With exclusive_lock the
  /// directory's LOCK file is held for the store's lifetime; a second
  /// exclusive open fails with StoreUnavailableError.
  static std::unique_ptr<MemoryStore> open(const std::filesystem::path& dir, TopicTaxonomy taxonomy,
                                           std::size_t dimension, bool exclusive_lock = true, Options options = {});

  /// In-memory copy of the current contents (no log, no lock).
  std::unique_ptr<MemoryStore> clone_in_memory() const;

  /// Throws DimensionError, TaxonomyError (unknown partition), ValidationError
  /// (empty text or non-unit embedding), StoreUnavailableError (log write).
  RecordId store_query(const std::string& user_id, const std::string& query_text, const PartitionKey& partition,
                       const core::EmbeddingVector& embedding, core::Timestamp timestamp);

  /// At most n results for user_id. Throws ValidationError when n == 0 and
  /// DimensionError on a query of the wrong size.
  std::vector<RecallResult> recall_top_n(const std::string& user_id, const core::EmbeddingVector& query, std::size_t n,
                                         const RecallScope& scope) const;

  /// Records the scope's first scan covers, across all users.
  std::size_t candidate_set_size(const RecallScope& scope) const;

  std::size_t size() const;
  std::vector<MemoryRecord> records_for_user(const std::string& user_id) const;
  /// Newest first (timestamp, then higher id).
  std::vector<MemoryRecord> recent_for_user(const std::string& user_id, std::size_t n) const;

  const TopicTaxonomy& taxonomy() const noexcept { return taxonomy_; }
  std::size_t dimension() const noexcept { return dimension_; }
  bool persistent() const noexcept { return log_ != nullptr; }
  StoreStats stats() const noexcept { return {recalls_.load(), writes_.load()}; }

 private:
  struct RecordMeta {
    RecordId id;
    std::string query_text;
    core::Timestamp timestamp;
  };
  struct UserShard {
    std::vector<RecordMeta> meta;
    kernels::EmbeddingMatrix embeddings;
  };
  struct Partition {
    std::unordered_map<std::string, UserShard> users;
    std::size_t count = 0;
  };
  struct Candidate {
    double similarity;
    const PartitionKey* key;
    const UserShard* shard;
    std::size_t row;
  };
  class Log;

  void validate(const std::string& query_text, const PartitionKey& partition,
                const core::EmbeddingVector& embedding) const;
  void insert_locked(const MemoryRecord& record);
  const Partition* find_partition(const PartitionKey& key) const;
  void scan_partition(const PartitionKey& key, const Partition& p, const std::string& user_id,
                      const core::EmbeddingVector& query, std::vector<Candidate>& out) const;
  std::vector<Candidate> top(std::vector<Candidate> candidates, std::size_t n) const;
  static MemoryRecord materialize(const Candidate& c, const std::string& user_id);
  std::vector<MemoryRecord> user_records_locked(const std::string& user_id) const;

  TopicTaxonomy taxonomy_;
  std::size_t dimension_;
  Options options_;
  std::map<std::string, std::map<std::string, Partition>> tree_;
  std::vector<PartitionKey> keys_;
  std::size_t total_ = 0;
  std::uint64_t next_id_ = 1;
  std::unique_ptr<Log> log_;
  mutable std::shared_mutex mu_;
  mutable std::atomic<std::uint64_t> recalls_{0};
  std::atomic<std::uint64_t> writes_{0};
};

}  // namespace himes::memory
