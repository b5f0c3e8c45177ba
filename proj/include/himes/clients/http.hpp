#pragma once

#include <chrono>
#include <functional>
#include <string>

#include "himes/clients/chat.hpp"
#include "himes/clients/embedder.hpp"

namespace himes::clients {

struct HttpEndpoint {
  std::string url;  // http://host[:port]/path
  std::string bearer_token;
  std::chrono::milliseconds timeout{30000};
  int max_attempts = 3;
  std::chrono::milliseconds initial_backoff{200};  // doubles after every failed attempt
};

/// Splits an http URL into origin ("http://host:port") and path. Throws
/// ValidationError on anything else.
struct ParsedUrl {
  std::string origin;
  std::string path;
};
ParsedUrl parse_http_url(const std::string& url);

/// POSTs a JSON body and returns the parsed JSON reply. Connection errors,
/// timeouts, 429 and 5xx are retried with exponential backoff; other
/// statuses fail at once. Exhaustion throws TransportError.
class JsonPoster {
 public:
  using Sleep = std::function<void(std::chrono::milliseconds)>;
  explicit JsonPoster(HttpEndpoint endpoint);
  std::string post(const std::string& body) const;

  void set_sleep(Sleep sleep) { sleep_ = std::move(sleep); }
  const HttpEndpoint& endpoint() const noexcept { return endpoint_; }

 private:
  HttpEndpoint endpoint_;
  ParsedUrl url_;
  Sleep sleep_;
};

/// POST {"prompt": ...} → {"text": ...}.
class HttpChatClient final : public ChatClient {
 public:
  HttpChatClient(HttpEndpoint endpoint, std::string model_name);
  std::string generate(std::string_view prompt) override;
  std::string model_name() const override { return model_; }
  JsonPoster& poster() noexcept { return poster_; }

 private:
  JsonPoster poster_;
  std::string model_;
};

/// POST {"texts": [...]} → {"vectors": [[...], ...]}. Replies are checked
/// for count and dimension, then unit-normalized.
class HttpEmbedder final : public EmbedderClient {
 public:
  HttpEmbedder(HttpEndpoint endpoint, std::size_t dimension, std::string model_name);
  core::EmbeddingVector embed(std::string_view text) override;
  std::vector<core::EmbeddingVector> embed_batch(std::span<const std::string> texts) override;
  std::size_t dimension() const override { return dim_; }
  std::string identity() const override { return "http/" + model_ + "/d=" + std::to_string(dim_); }
  JsonPoster& poster() noexcept { return poster_; }

 private:
  JsonPoster poster_;
  std::size_t dim_;
  std::string model_;
};

}  // namespace himes::clients
