#include "himes/clients/stubs.hpp"

#include <cmath>
#include <set>

#include "json.hpp"

#include "himes/core/errors.hpp"
#include "himes/core/hash.hpp"
#include "himes/core/rouge.hpp"
#include "himes/core/text.hpp"
#include "himes/pipeline/prompts.hpp"

namespace himes::clients {

namespace {

// Value of a "Label: value" line, up to the end of that line.
std::string line_after(std::string_view prompt, std::string_view label) {
  const auto at = prompt.find(label);
  if (at == std::string_view::npos) return {};
  const auto start = at + label.size();
  const auto end = prompt.find('\n', start);
  return std::string(prompt.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start));
}

std::string_view between(std::string_view text, std::string_view open, std::string_view close) {
  const auto a = text.find(open);
  if (a == std::string_view::npos) return {};
  const auto start = a + open.size();
  const auto b = text.find(close, start);
  if (b == std::string_view::npos) return {};
  return text.substr(start, b - start);
}

}  // namespace

HashingEmbedder::HashingEmbedder(std::size_t dimension, std::uint64_t seed) : dim_(dimension), seed_(seed) {
  if (dimension == 0) throw ValidationError("embedding dimension must be positive");
}

core::EmbeddingVector HashingEmbedder::embed(std::string_view text) {
  ++calls_;
  std::vector<double> v(dim_, 0.0);
  const auto tokens = core::tokenize(text);
  const std::uint64_t basis = core::fnv1a64(std::to_string(seed_));
  for (const auto& t : tokens) v[core::fnv1a64(t, basis) % dim_] += 1.0;
  if (tokens.empty()) v[basis % dim_] = 1.0;
  return core::EmbeddingVector::normalized(std::move(v));
}

std::string HashingEmbedder::identity() const {
  return "hashing-embedder/d=" + std::to_string(dim_) + "/seed=" + std::to_string(seed_);
}

ScriptedChatClient::ScriptedChatClient(std::vector<std::string> replies, std::string name)
    : replies_(std::move(replies)), name_(std::move(name)) {
  if (replies_.empty()) throw ValidationError("scripted client needs at least one reply");
}

std::string ScriptedChatClient::generate(std::string_view prompt) {
  std::lock_guard lock(mu_);
  prompts_.emplace_back(prompt);
  const auto i = next_ < replies_.size() ? next_++ : replies_.size() - 1;
  return replies_[i];
}

std::size_t ScriptedChatClient::calls() const {
  std::lock_guard lock(mu_);
  return prompts_.size();
}

std::vector<std::string> ScriptedChatClient::prompts() const {
  std::lock_guard lock(mu_);
  return prompts_;
}

std::string LookupChatClient::generate(std::string_view prompt) {
  ++calls_;
  for (const auto& [key, reply] : table_)
    if (prompt.find(key) != std::string_view::npos) return reply;
  return fallback_;
}

std::string FailingChatClient::generate(std::string_view) {
  throw TransportError("failing-stub: generate always fails", retryable_);
}

core::EmbeddingVector FailingEmbedder::embed(std::string_view) {
  throw TransportError("failing-embedder: embed always fails", true);
}

std::string HeuristicRewriter::generate(std::string_view prompt) {
  const std::string query = line_after(prompt, pipeline::kCurrentQueryLabel);
  // History occupies the lines after its label until the blank line that
  // ends the section.
  std::string_view history;
  if (auto at = prompt.find(pipeline::kHistoryLabel); at != std::string_view::npos) {
    history = prompt.substr(at + pipeline::kHistoryLabel.size());
    if (auto end = history.find("\n\n"); end != std::string_view::npos) history = history.substr(0, end);
  }
  std::string last_user;
  for (std::size_t pos = 0; pos <= history.size();) {
    auto nl = history.find('\n', pos);
    auto line = history.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    if (line.starts_with("user: ")) last_user = std::string(line.substr(6));
    if (nl == std::string_view::npos) break;
    pos = nl + 1;
  }
  const auto query_tokens = core::tokenize(query);
  std::set<std::string> seen(query_tokens.begin(), query_tokens.end());
  std::string rewritten = query;
  for (const auto& t : core::tokenize(last_user)) {
    if (!seen.insert(t).second) continue;
    rewritten += ' ';
    rewritten += t;
  }
  return nlohmann::json{{"query_rewrited", rewritten}}.dump();
}

std::string ExtractiveResponder::generate(std::string_view prompt) {
  // Only a prefix at the start of a line is a reference; the instructions
  // quote the same prefix mid-line.
  const std::string marker = "\n" + std::string(pipeline::kReferencePrefix);
  const auto at = prompt.find(marker);
  if (at == std::string_view::npos) return "I have not written an article about this yet, but here is my take from experience.";
  auto rest = prompt.substr(at + marker.size());
  if (auto colon = rest.find(": "); colon != std::string_view::npos) rest = rest.substr(colon + 2);
  auto nl = rest.find('\n');
  if (nl != std::string_view::npos) rest = rest.substr(0, nl);
  // Cut after the first sentence terminator, ASCII or full-width.
  static constexpr std::string_view kTerminators[] = {".", "!", "?", "\xE3\x80\x82", "\xEF\xBC\x81", "\xEF\xBC\x9F"};
  std::size_t cut = rest.size();
  for (auto term : kTerminators) {
    auto p = rest.find(term);
    if (p != std::string_view::npos && p + term.size() < cut) cut = p + term.size();
  }
  return std::string(rest.substr(0, cut));
}

std::string LexicalJudge::generate(std::string_view prompt) {
  const auto cand = between(prompt, pipeline::kJudgeCandidateOpen, pipeline::kJudgeCandidateClose);
  const auto ref = between(prompt, pipeline::kJudgeReferenceOpen, pipeline::kJudgeReferenceClose);
  const double f = core::rouge_l_f1(core::tokenize(cand), core::tokenize(ref));
  return "score: " + std::to_string(static_cast<int>(std::lround(100.0 * f)));
}

}  // namespace himes::clients
