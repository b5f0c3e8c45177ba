#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "himes/clients/chat.hpp"
#include "himes/clients/embedder.hpp"
#include "himes/memory/classifier.hpp"
#include "himes/memory/store.hpp"
#include "himes/pipeline/knowledge_base.hpp"
#include "himes/pipeline/pipeline.hpp"
#include "himes/reward/reward.hpp"

namespace himes::eval {

// ---- judging -------------------------------------------------------------

enum class Metric { ca, qa, qr };
std::string_view to_string(Metric m) noexcept;

/// The fields a judge prompt can draw on. CA uses response and golden
/// texts, QA response and query, QR rewritten query, history and query.
struct JudgeContext {
  std::string query;
  std::string response;
  std::vector<std::string> golden_texts;
  std::string rewritten_query;
  pipeline::DialogueHistory history;
};

std::string render_judge_prompt(Metric metric, const JudgeContext& ctx);

inline constexpr std::string_view kJudgeReminder = "\nAnswer with \"score: N\" only, N an integer from 0 to 100.";

/// Score in [0, 100], or nullopt when neither the reply nor the one
/// re-prompt yields "score: N" (a transport failure also leaves it unscored).
std::optional<int> judge_score(Metric metric, const JudgeContext& ctx, clients::ChatClient& judge);

struct MetricScores {
  std::optional<double> ca, qa, qr;  // means over scored samples; absent when nothing was scored
  std::size_t n_samples = 0;         // samples the pipeline answered
  std::size_t dropped_ca = 0, dropped_qa = 0, dropped_qr = 0;
};

/// Arithmetic mean of the scored entries, or nullopt when there are none.
std::optional<double> mean_of(std::span<const std::optional<int>> scores);

// ---- test set ------------------------------------------------------------

struct TestCase {
  std::string case_id;
  std::string user_id;
  pipeline::DialogueHistory history;
  std::string query;
  std::optional<core::Timestamp> timestamp;
  std::optional<std::string> gold_doc_id;
  std::optional<std::string> annotated_rewrite;
  std::optional<std::string> reference_answer;
};

/// JSONL of {case_id?, user_id?, history, query, timestamp?, gold_doc_id?,
/// annotated_rewrite?, reference_answer?}. Missing ids become "case-<n>",
/// missing users "user-1". Throws ValidationError naming every bad line.
std::vector<TestCase> read_test_set(std::istream& in);

// ---- ablation ------------------------------------------------------------

struct AblationSpec {
  std::string label;
  pipeline::PipelineConfig config;
};

/// The five-row comparison: history-free RAG, history-concatenated RAG,
/// rewriter RAG, and the two long-term-memory variants.
std::vector<AblationSpec> default_grid();

/// {"rows": [{"label", "config": {overrides}}]}; labels must be unique.
std::vector<AblationSpec> grid_from_json(const nlohmann::json& j, const pipeline::PipelineConfig& base = {});

struct EvalClients {
  clients::ChatClient* rewriter = nullptr;
  clients::ChatClient* responder = nullptr;
  clients::EmbedderClient* embedder = nullptr;
  memory::TopicClassifier* classifier = nullptr;
  clients::ChatClient* judge = nullptr;  // optional; without it no judge metrics
};

struct SampleResult {
  std::string case_id;
  std::optional<int> ca, qa, qr;
  std::optional<int> gold_hit;  // 1/0 when the case names a gold doc
  std::optional<std::string> error;
};

struct AblationRow {
  std::string label;
  pipeline::PipelineConfig config;
  MetricScores metrics;
  std::optional<double> retrieval_hit_rate;
  std::size_t failures = 0;
  std::optional<std::string> error;  // set when the row could not run at all
  std::vector<SampleResult> samples;
  std::vector<pipeline::PipelineTrace> traces;  // answered samples, in order
};

struct EvalOptions {
  std::uint64_t seed = 0;
  bool judge_metrics = true;
};

/// Fraction of cases with a gold doc whose trace kept a golden chunk from
/// it. Cases without a gold id or without a trace are skipped; nullopt when
/// none remain.
std::optional<double> retrieval_hit_rate(std::span<const TestCase> cases,
                                         std::span<const std::optional<pipeline::PipelineTrace>> traces);

/// Runs each row over the same cases, each on its own copy of base_store,
/// with frozen stage clocks and timestamps taken from the cases. A failing
/// case is recorded on its row and the run goes on. Throws ValidationError
/// on an empty grid or duplicate labels.
std::vector<AblationRow> run_ablation(std::span<const TestCase> cases, std::span<const AblationSpec> grid,
                                      const EvalClients& clients, const memory::MemoryStore& base_store,
                                      const pipeline::KnowledgeBase& kb, const pipeline::AccountProfile& account,
                                      const EvalOptions& options = {});

// ---- lambda sweep --------------------------------------------------------

struct LambdaRow {
  double lambda = 0.0;
  std::size_t n = 0;        // rollouts scored at this lambda
  std::size_t skipped = 0;  // no reference answer, or no annotation while lambda > 0
  std::optional<double> mean_fused, mean_hser, mean_sser;
  MetricScores metrics;
};

/// One pipeline pass over the cases, then one reward pass per lambda over
/// the identical rollouts (rewritten query, response, golden texts).
/// Throws ValidationError on an empty or repeated lambda list.
std::vector<LambdaRow> lambda_sweep(std::span<const TestCase> cases, std::span<const double> lambdas,
                                    const pipeline::PipelineConfig& config, const EvalClients& clients,
                                    const memory::MemoryStore& base_store, const pipeline::KnowledgeBase& kb,
                                    const pipeline::AccountProfile& account, const reward::RewardConfig& reward,
                                    const EvalOptions& options = {});

// ---- reports -------------------------------------------------------------

/// Values published for the reference system, carried as metadata only.
nlohmann::json published_reference();

std::string ablation_csv(std::span<const AblationRow> rows);
nlohmann::json ablation_json(std::span<const AblationRow> rows, const EvalOptions& options);
std::string lambda_csv(std::span<const LambdaRow> rows);
nlohmann::json lambda_json(std::span<const LambdaRow> rows, const EvalOptions& options);

/// Writes ablation.csv, ablation.json and traces/<NN>-<label>.jsonl under dir.
void write_ablation_report(const std::filesystem::path& dir, std::span<const AblationRow> rows,
                           const EvalOptions& options);
/// Writes lambda_sweep.csv and lambda_sweep.json under dir.
void write_lambda_report(const std::filesystem::path& dir, std::span<const LambdaRow> rows,
                         const EvalOptions& options);

}  // namespace himes::eval
