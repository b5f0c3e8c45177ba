#pragma once

#include <atomic>
#include <cstdint>
#include <deque>
#include <functional>
#include <mutex>
#include <string>
#include <utility>
#include <vector>

#include "himes/clients/chat.hpp"
#include "himes/clients/embedder.hpp"

namespace himes::clients {

/// Hashed bag-of-tokens embedder: every normalized token adds its count to
/// bucket fnv1a64(token) mod d, then the vector is unit-normalized. Cosine
/// between two texts therefore tracks their token overlap. Text without any
/// token embeds as a fixed sentinel bucket.
class HashingEmbedder final : public EmbedderClient {
 public:
  explicit HashingEmbedder(std::size_t dimension = 256, std::uint64_t seed = 0);

  core::EmbeddingVector embed(std::string_view text) override;
  std::size_t dimension() const override { return dim_; }
  std::string identity() const override;

  std::size_t calls() const noexcept { return calls_.load(); }

 private:
  std::size_t dim_;
  std::uint64_t seed_;
  std::atomic<std::size_t> calls_{0};
};

/// Chat client backed by a callable. Counts calls; thread-safe as long as the
/// callable is.
class FunctionChatClient : public ChatClient {
 public:
  using Fn = std::function<std::string(std::string_view)>;
  explicit FunctionChatClient(Fn fn, std::string name = "function-stub") : fn_(std::move(fn)), name_(std::move(name)) {}

  std::string generate(std::string_view prompt) override {
    ++calls_;
    return fn_(prompt);
  }
  std::string model_name() const override { return name_; }
  std::size_t calls() const noexcept { return calls_.load(); }

 private:
  Fn fn_;
  std::string name_;
  std::atomic<std::size_t> calls_{0};
};

/// Replays a fixed list of replies in order; the last reply repeats once the
/// script is exhausted. Records every prompt it receives.
class ScriptedChatClient final : public ChatClient {
 public:
  explicit ScriptedChatClient(std::vector<std::string> replies, std::string name = "scripted-stub");

  std::string generate(std::string_view prompt) override;
  std::string model_name() const override { return name_; }

  std::size_t calls() const;
  std::vector<std::string> prompts() const;

 private:
  mutable std::mutex mu_;
  std::vector<std::string> replies_;
  std::vector<std::string> prompts_;
  std::size_t next_ = 0;
  std::string name_;
};

/// Returns the reply of the first key that occurs as a substring of the
/// prompt, else the fallback.
class LookupChatClient final : public ChatClient {
 public:
  LookupChatClient(std::vector<std::pair<std::string, std::string>> table, std::string fallback,
                   std::string name = "lookup-stub")
      : table_(std::move(table)), fallback_(std::move(fallback)), name_(std::move(name)) {}

  std::string generate(std::string_view prompt) override;
  std::string model_name() const override { return name_; }
  std::size_t calls() const noexcept { return calls_.load(); }

 private:
  std::vector<std::pair<std::string, std::string>> table_;
  std::string fallback_;
  std::string name_;
  std::atomic<std::size_t> calls_{0};
};

/// Always throws TransportError; used to exercise failure paths.
class FailingChatClient final : public ChatClient {
 public:
  explicit FailingChatClient(bool retryable = true) : retryable_(retryable) {}
  std::string generate(std::string_view prompt) override;
  std::string model_name() const override { return "failing-stub"; }

 private:
  bool retryable_;
};

/// Embedder that always throws TransportError.
class FailingEmbedder final : public EmbedderClient {
 public:
  explicit FailingEmbedder(std::size_t dimension) : dim_(dimension) {}
  core::EmbeddingVector embed(std::string_view text) override;
  std::size_t dimension() const override { return dim_; }
  std::string identity() const override { return "failing-embedder"; }

 private:
  std::size_t dim_;
};

// Deterministic stand-ins for the production models. Each one reads the
// prompt layout produced by this library's own templates, so a full
// pipeline can run hermetically and reproducibly.

/// Rewriter stub: answers the query-rewriting prompt with the current query
/// followed by the novel tokens of the most recent user turn.
class HeuristicRewriter final : public ChatClient {
 public:
  std::string generate(std::string_view prompt) override;
  std::string model_name() const override { return "heuristic-rewriter"; }
};

/// Responder stub: answers with the leading sentence of the first knowledge
/// base reference in the prompt, or a fixed no-article reply.
class ExtractiveResponder final : public ChatClient {
 public:
  explicit ExtractiveResponder(std::uint64_t seed = 0) : seed_(seed) {}
  std::string generate(std::string_view prompt) override;
  std::string model_name() const override { return "extractive-responder"; }

 private:
  std::uint64_t seed_;
};

/// Judge stub: scores the judge prompts emitted by the eval module as
/// "score: N" with N = round(100 · Rouge-L F1) between the two sections
/// being compared.
class LexicalJudge final : public ChatClient {
 public:
  std::string generate(std::string_view prompt) override;
  std::string model_name() const override { return "lexical-judge"; }
};

}  // namespace himes::clients
