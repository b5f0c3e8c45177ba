#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "himes/clients/chat.hpp"
#include "himes/clients/embedder.hpp"
#include "himes/core/errors.hpp"
#include "himes/memory/classifier.hpp"
#include "himes/memory/store.hpp"
#include "himes/pipeline/dialogue.hpp"
#include "himes/pipeline/knowledge_base.hpp"
#include "himes/rerank/rerank.hpp"
#include "himes/reward/reward.hpp"

namespace himes::pipeline {

/// Who the responder speaks for.
struct AccountProfile {
  std::string biz_id = "default";
  std::string name = "Assistant";
  std::string domain = "general knowledge";
  std::string meta_prompt;
  std::vector<std::string> comments;
};

nlohmann::json to_json(const AccountProfile& a);
AccountProfile account_from_json(const nlohmann::json& j);

struct RewriteOutcome {
  std::string query;
  bool client_called = false;
  std::optional<std::string> warning;
};

/// Short-term memory stage. Empty history returns the query untouched
/// without calling the client. A transport failure or a reply without a
/// usable {"query_rewrited": ...} object falls back to the original query
/// with a warning; it never throws for those.
RewriteOutcome rewrite_query(const DialogueHistory& history, std::string_view query, clients::ChatClient& rewriter,
                             const AccountProfile& account);

std::string render_rewrite_prompt(const DialogueHistory& history, std::string_view query,
                                  const AccountProfile& account);

/// Responder prompt. Chunks render in the order given, one
/// "Reference Historical Article {title}: {content}" line each; with no
/// chunks the knowledge base section states that retrieval came back empty.
std::string assemble_response_prompt(std::string_view meta_prompt, std::span<const rerank::ScoredChunk> golden,
                                     std::span<const std::string> comments, std::string_view query);

enum class RecallScopeMode { partition, global, partition_then_global };

struct PipelineConfig {
  bool stm_enabled = true;
  bool ltm_enabled = true;
  bool include_history_in_retrieval = false;
  std::size_t history_window = 6;  // turns concatenated when include_history_in_retrieval
  std::size_t top_r = 5;           // documents from first-stage retrieval
  std::size_t top_n = 10;          // historical queries recalled
  std::size_t top_k = 3;           // golden chunks kept
  rerank::ChunkPolicy chunk_policy;
  std::size_t context_budget_chars = 2000;
  RecallScopeMode recall_scope = RecallScopeMode::partition;
  kernels::Aggregation aggregation = kernels::Aggregation::mean;
  bool store_current_query = true;
  bool store_rewritten_query = false;  // stores the user's own words by default
  reward::RewardWeights reward_weights;

  /// Throws ValidationError listing every inconsistent field.
  void validate() const;
};

nlohmann::json to_json(const PipelineConfig& c);
/// Missing keys keep their defaults, so partial overrides work.
PipelineConfig config_from_json(const nlohmann::json& j, PipelineConfig base = {});

struct TraceDoc {
  std::string doc_id;
  double similarity = 0.0;
  friend bool operator==(const TraceDoc&, const TraceDoc&) = default;
};
struct TraceRecall {
  std::uint64_t record_id = 0;
  std::string query_text;
  double similarity = 0.0;
  friend bool operator==(const TraceRecall&, const TraceRecall&) = default;
};
struct TraceChunk {
  std::string doc_id;
  std::size_t chunk_index = 0;
  double score = 0.0;
  std::string text;  // as handed to the responder, after budgeting
  friend bool operator==(const TraceChunk&, const TraceChunk&) = default;
};
struct TraceStage {
  std::string name;
  double duration_ms = 0.0;
  friend bool operator==(const TraceStage&, const TraceStage&) = default;
};

struct PipelineTrace {
  std::string user_id;
  std::string original_query;
  std::optional<std::string> rewritten_query;
  std::string retrieval_query;
  std::vector<TraceDoc> retrieved;
  std::optional<memory::PartitionKey> partition;
  std::vector<TraceRecall> recalled;
  std::vector<TraceChunk> golden;
  bool no_memory_fallback = false;
  std::optional<std::uint64_t> stored_record_id;
  std::string prompt;
  std::string response;
  std::vector<TraceStage> stages;
  std::vector<std::string> warnings;

  bool has_stage(std::string_view name) const;
  friend bool operator==(const PipelineTrace&, const PipelineTrace&) = default;
};

nlohmann::json to_json(const PipelineTrace& t);
PipelineTrace trace_from_json(const nlohmann::json& j);

/// A stage failed; carries the trace up to (not including) that stage.
class StageError : public Error {
 public:
  /// What kind of error the stage hit, for callers that map errors to statuses.
  enum class Cause { transport, validation, conflict, store, other };

  StageError(std::string stage, const std::string& message, PipelineTrace partial, Cause cause)
      : Error("stage '" + stage + "' failed: " + message),
        stage_(std::move(stage)),
        partial_(std::move(partial)),
        cause_(cause) {}
  const std::string& stage() const noexcept { return stage_; }
  const PipelineTrace& partial_trace() const noexcept { return partial_; }
  Cause cause() const noexcept { return cause_; }
  bool transport() const noexcept { return cause_ == Cause::transport; }

 private:
  std::string stage_;
  PipelineTrace partial_;
  Cause cause_;
};

/// Non-owning handles. The rewriter is needed only with stm_enabled, the
/// classifier and store only with ltm_enabled.
struct PipelineClients {
  clients::ChatClient* rewriter = nullptr;
  clients::ChatClient* responder = nullptr;
  clients::EmbedderClient* embedder = nullptr;
  memory::TopicClassifier* classifier = nullptr;
};

struct AnswerResult {
  std::string response;
  PipelineTrace trace;
};

class Pipeline {
 public:
  /// Monotonic time source for stage durations; injectable for reproducible traces.
  using Clock = std::function<std::chrono::nanoseconds()>;
  /// Time stamp given to stored queries.
  using WallClock = std::function<core::Timestamp()>;

  Pipeline(PipelineConfig config, PipelineClients clients, const KnowledgeBase& kb, memory::MemoryStore* store,
           AccountProfile account = {});

  /// Stage order: rewrite? → retrieve → classify? → recall? → rerank? →
  /// budget → assemble → respond → store?. The current query is stored after
  /// the response, so recall only ever sees earlier queries and a failed
  /// answer leaves memory untouched. Throws StageError.
  AnswerResult answer(const std::string& user_id, const DialogueHistory& history, std::string_view query) const;

  void set_clock(Clock clock) { clock_ = std::move(clock); }
  void set_wall_clock(WallClock clock) { wall_clock_ = std::move(clock); }

  const PipelineConfig& config() const noexcept { return config_; }
  const AccountProfile& account() const noexcept { return account_; }

  /// A clock that always reads zero: every duration in the trace becomes 0.
  static Clock frozen_clock();

 private:
  PipelineConfig config_;
  PipelineClients clients_;
  const KnowledgeBase& kb_;
  memory::MemoryStore* store_;
  AccountProfile account_;
  Clock clock_;
  WallClock wall_clock_;
};

}  // namespace himes::pipeline
