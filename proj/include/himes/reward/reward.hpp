#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "himes/clients/embedder.hpp"
#include "himes/kernels/similarity.hpp"

namespace himes::reward {

struct RewardWeights {
  double alpha = 0.5;   // exact match
  double beta = 0.5;    // hit
  double lambda = 0.0;  // soft rewrite similarity

  /// Throws ValidationError unless every weight is finite and non-negative.
  void validate() const;
};

enum class HitMode {
  coverage,  // share of distinct prediction tokens found in one content item
  substring  // normalized prediction occurs verbatim in one content item
};

enum class SserMode {
  rouge_l,          // Rouge-L F1 over tokens
  embedding_cosine  // cosine of the two embeddings, clamped to [0, 1]
};

struct RewardConfig {
  RewardWeights weights;
  HitMode hit_mode = HitMode::coverage;
  double hit_threshold = 0.8;
  SserMode sser_mode = SserMode::rouge_l;
  /// Required for SserMode::embedding_cosine; not owned.
  clients::EmbedderClient* embedder = nullptr;

  void validate() const;
};

struct RolloutSample {
  std::optional<std::string> sample_id;
  std::string rewritten_query;
  std::string predicted_answer;
  std::string reference_answer;
  std::vector<std::string> retrieved_contents;
  std::optional<std::string> annotated_rewrite;
};

struct RewardBreakdown {
  double f1_h = 0.0;
  int em_h = 0;
  int hit = 0;
  double hser = 0.0;
  std::optional<double> sser;
  double fused = 0.0;
};

int exact_match(std::string_view pred, std::string_view ref);

int hit(std::string_view pred, std::span<const std::string> contents, HitMode mode = HitMode::coverage,
        double threshold = 0.8);

/// f1 + alpha·em + beta·hit, evaluated left to right.
inline double combine_hser(double f1, int em, int hit, const RewardWeights& w) noexcept {
  return f1 + w.alpha * em + w.beta * hit;
}

/// Hard reward of one sample; sser is left empty and fused equals hser.
/// Throws ValidationError on an empty reference answer.
RewardBreakdown hser(const RolloutSample& sample, const RewardConfig& config);
RewardBreakdown hser(const RolloutSample& sample, const RewardWeights& weights);

/// Soft rewrite reward. Throws ValidationError on an empty annotation.
double sser(std::string_view rewritten_query, std::string_view annotated_rewrite, const RewardConfig& config = {});

/// hser + lambda·sser. Exactly hser when lambda is zero; throws
/// ValidationError when lambda > 0 and sser is absent.
double fused_reward(const RewardBreakdown& breakdown, const RewardWeights& weights);

/// Full breakdown: hser, sser when an annotation exists, and fused.
RewardBreakdown score_sample(const RolloutSample& sample, const RewardConfig& config);

/// score_sample over a batch; rows are independent so the parallel path
/// returns exactly what the serial one does. The first failing sample's
/// error is rethrown after the loop.
std::vector<RewardBreakdown> score_batch(std::span<const RolloutSample> samples, const RewardConfig& config,
                                         kernels::Execution execution = kernels::Execution::parallel);

inline constexpr double kAdvantageStdFloor = 1e-6;

/// Per consecutive group of g rewards: (r - mean) / max(std, floor), with
/// the population std. A group of identical rewards maps to zeros. Throws
/// ValidationError when g < 2 or the length is not a multiple of g.
std::vector<double> group_relative_advantages(std::span<const double> rewards, std::size_t group_size);

// Batch file contract for external trainers: JSONL of samples in, JSONL of
// breakdowns out.
RolloutSample sample_from_json(const nlohmann::json& j);
nlohmann::json to_json(const RolloutSample& s);
nlohmann::json to_json(const RewardBreakdown& b);

/// Parses one sample per non-blank line. Throws ValidationError naming
/// every bad line.
std::vector<RolloutSample> read_rollouts(std::istream& in);

}  // namespace himes::reward
