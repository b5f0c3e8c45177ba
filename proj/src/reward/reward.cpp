#include "himes/reward/reward.hpp"

#include <cmath>
#include <exception>
#include <istream>
#include <set>
#include <unordered_set>

#include "himes/core/errors.hpp"
#include "himes/core/rouge.hpp"
#include "himes/core/text.hpp"
#include "himes/core/vector.hpp"

namespace himes::reward {

namespace {

void check_weight(const char* name, double v, std::vector<std::string>& issues) {
  if (!std::isfinite(v) || v < 0.0) issues.push_back(std::string(name) + " must be finite and non-negative");
}

}  // namespace

void RewardWeights::validate() const {
  std::vector<std::string> issues;
  check_weight("alpha", alpha, issues);
  check_weight("beta", beta, issues);
  check_weight("lambda", lambda, issues);
  if (!issues.empty()) throw ValidationError("invalid reward weights", std::move(issues));
}

void RewardConfig::validate() const {
  weights.validate();
  if (!(hit_threshold > 0.0 && hit_threshold <= 1.0)) throw ValidationError("hit threshold must lie in (0, 1]");
  if (sser_mode == SserMode::embedding_cosine && embedder == nullptr)
    throw ValidationError("embedding-cosine SSER needs an embedder");
}

int exact_match(std::string_view pred, std::string_view ref) {
  return core::normalize_text(pred) == core::normalize_text(ref) ? 1 : 0;
}

int hit(std::string_view pred, std::span<const std::string> contents, HitMode mode, double threshold) {
  if (contents.empty()) return 0;
  if (mode == HitMode::substring) {
    const auto p = core::normalize_text(pred);
    if (p.empty()) return 0;
    for (const auto& c : contents)
      if (core::normalize_text(c).find(p) != std::string::npos) return 1;
    return 0;
  }
  const auto pred_tokens = core::tokenize(pred);
  const std::set<std::string> unique(pred_tokens.begin(), pred_tokens.end());
  if (unique.empty()) return 0;
  const double needed = threshold * static_cast<double>(unique.size());
  for (const auto& c : contents) {
    const auto ct = core::tokenize(c);
    const std::unordered_set<std::string> present(ct.begin(), ct.end());
    std::size_t covered = 0;
    for (const auto& t : unique) covered += present.count(t);
    if (static_cast<double>(covered) >= needed - 1e-9) return 1;
  }
  return 0;
}

RewardBreakdown hser(const RolloutSample& sample, const RewardConfig& config) {
  if (core::normalize_text(sample.reference_answer).empty())
    throw ValidationError("reference answer must be non-empty");
  RewardBreakdown b;
  b.f1_h = core::rouge_l_f1(core::tokenize(sample.predicted_answer), core::tokenize(sample.reference_answer));
  b.em_h = exact_match(sample.predicted_answer, sample.reference_answer);
  b.hit = hit(sample.predicted_answer, sample.retrieved_contents, config.hit_mode, config.hit_threshold);
  b.hser = combine_hser(b.f1_h, b.em_h, b.hit, config.weights);
  b.fused = b.hser;
  return b;
}

RewardBreakdown hser(const RolloutSample& sample, const RewardWeights& weights) {
  RewardConfig config;
  config.weights = weights;
  return hser(sample, config);
}

double sser(std::string_view rewritten_query, std::string_view annotated_rewrite, const RewardConfig& config) {
  if (core::normalize_text(annotated_rewrite).empty()) throw ValidationError("annotated rewrite must be non-empty");
  if (config.sser_mode == SserMode::embedding_cosine) {
    if (config.embedder == nullptr) throw ValidationError("embedding-cosine SSER needs an embedder");
    const double c = core::cosine_similarity(config.embedder->embed(rewritten_query),
                                             config.embedder->embed(annotated_rewrite));
    return c < 0.0 ? 0.0 : c;
  }
  return core::rouge_l_f1(core::tokenize(rewritten_query), core::tokenize(annotated_rewrite));
}

double fused_reward(const RewardBreakdown& breakdown, const RewardWeights& weights) {
  if (weights.lambda == 0.0) return breakdown.hser;
  if (!breakdown.sser) throw ValidationError("lambda > 0 requires an SSER value (sample has no annotated rewrite)");
  return breakdown.hser + weights.lambda * *breakdown.sser;
}

RewardBreakdown score_sample(const RolloutSample& sample, const RewardConfig& config) {
  RewardBreakdown b = hser(sample, config);
  if (sample.annotated_rewrite) b.sser = sser(sample.rewritten_query, *sample.annotated_rewrite, config);
  b.fused = fused_reward(b, config.weights);
  return b;
}

std::vector<RewardBreakdown> score_batch(std::span<const RolloutSample> samples, const RewardConfig& config,
                                         kernels::Execution execution) {
  config.validate();
  std::vector<RewardBreakdown> out(samples.size());
  std::vector<std::exception_ptr> errors(samples.size());
  const auto n = static_cast<std::ptrdiff_t>(samples.size());
  const bool parallel = execution == kernels::Execution::parallel && samples.size() >= 2;
#pragma omp parallel for schedule(dynamic, 8) if (parallel)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      out[i] = score_sample(samples[i], config);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

std::vector<double> group_relative_advantages(std::span<const double> rewards, std::size_t group_size) {
  if (group_size < 2) throw ValidationError("group size must be at least 2");
  if (rewards.size() % group_size != 0)
    throw ValidationError("reward count " + std::to_string(rewards.size()) + " is not a multiple of group size " +
                          std::to_string(group_size));
  std::vector<double> out(rewards.size(), 0.0);
  for (std::size_t g = 0; g < rewards.size(); g += group_size) {
    const auto group = rewards.subspan(g, group_size);
    bool constant = true;
    for (double r : group) constant = constant && r == group[0];
    if (constant) continue;
    double mean = 0.0;
    for (double r : group) mean += r;
    mean /= static_cast<double>(group_size);
    double var = 0.0;
    for (double r : group) var += (r - mean) * (r - mean);
    var /= static_cast<double>(group_size);
    const double sd = std::max(std::sqrt(var), kAdvantageStdFloor);
    for (std::size_t i = 0; i < group_size; ++i) out[g + i] = (group[i] - mean) / sd;
  }
  return out;
}

RolloutSample sample_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ValidationError("rollout sample must be a JSON object");
  std::vector<std::string> issues;
  auto text = [&](const char* key, bool required) -> std::string {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) {
      if (required) issues.push_back(std::string("missing field ") + key);
      return {};
    }
    if (!it->is_string()) {
      issues.push_back(std::string(key) + " must be a string");
      return {};
    }
    return it->get<std::string>();
  };
  RolloutSample s;
  if (j.contains("sample_id") && !j["sample_id"].is_null()) {
    const auto& id = j["sample_id"];
    s.sample_id = id.is_string() ? id.get<std::string>() : id.dump();
  }
  s.rewritten_query = text("rewritten_query", false);
  s.predicted_answer = text("predicted_answer", true);
  s.reference_answer = text("reference_answer", true);
  if (auto a = text("annotated_rewrite", false); j.contains("annotated_rewrite") && !j["annotated_rewrite"].is_null())
    s.annotated_rewrite = a;
  if (auto it = j.find("retrieved_contents"); it != j.end() && !it->is_null()) {
    if (!it->is_array()) {
      issues.push_back("retrieved_contents must be an array of strings");
    } else {
      for (const auto& c : *it) {
        if (!c.is_string()) {
          issues.push_back("retrieved_contents must be an array of strings");
          break;
        }
        s.retrieved_contents.push_back(c.get<std::string>());
      }
    }
  }
  if (!issues.empty()) throw ValidationError("invalid rollout sample", std::move(issues));
  return s;
}

nlohmann::json to_json(const RolloutSample& s) {
  nlohmann::json j{{"rewritten_query", s.rewritten_query},
                   {"predicted_answer", s.predicted_answer},
                   {"reference_answer", s.reference_answer},
                   {"retrieved_contents", s.retrieved_contents}};
  if (s.sample_id) j["sample_id"] = *s.sample_id;
  if (s.annotated_rewrite) j["annotated_rewrite"] = *s.annotated_rewrite;
  return j;
}

nlohmann::json to_json(const RewardBreakdown& b) {
  nlohmann::json j{{"f1_h", b.f1_h}, {"em_h", b.em_h}, {"hit", b.hit}, {"hser", b.hser}, {"fused", b.fused}};
  j["sser"] = b.sser ? nlohmann::json(*b.sser) : nlohmann::json(nullptr);
  return j;
}

std::vector<RolloutSample> read_rollouts(std::istream& in) {
  std::vector<RolloutSample> out;
  std::vector<std::string> issues;
  std::string line;
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(sample_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      issues.push_back("line " + std::to_string(lineno) + ": " + e.what());
    } catch (const ValidationError& e) {
      issues.push_back("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (!issues.empty()) throw ValidationError("invalid rollout file", std::move(issues));
  return out;
}

}  // namespace himes::reward
