#include "himes/clients/http.hpp"

#include <thread>

#include "httplib.h"
#include "json.hpp"

#include "himes/core/errors.hpp"

namespace himes::clients {

using nlohmann::json;

ParsedUrl parse_http_url(const std::string& url) {
  constexpr std::string_view scheme = "http://";
  if (url.rfind(scheme, 0) != 0) throw ValidationError("only http:// endpoints are supported: '" + url + "'");
  const auto slash = url.find('/', scheme.size());
  ParsedUrl out;
  out.origin = url.substr(0, slash);
  out.path = slash == std::string::npos ? "/" : url.substr(slash);
  if (out.origin.size() == scheme.size()) throw ValidationError("endpoint URL has no host: '" + url + "'");
  return out;
}

JsonPoster::JsonPoster(HttpEndpoint endpoint)
    : endpoint_(std::move(endpoint)),
      url_(parse_http_url(endpoint_.url)),
      sleep_([](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); }) {
  if (endpoint_.max_attempts < 1) throw ValidationError("max_attempts must be at least 1");
}

std::string JsonPoster::post(const std::string& body) const {
  auto backoff = endpoint_.initial_backoff;
  std::string last_error;
  for (int attempt = 1; attempt <= endpoint_.max_attempts; ++attempt) {
    httplib::Client cli(url_.origin);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(endpoint_.timeout);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(endpoint_.timeout - secs);
    cli.set_connection_timeout(secs.count(), usecs.count());
    cli.set_read_timeout(secs.count(), usecs.count());
    cli.set_write_timeout(secs.count(), usecs.count());
    httplib::Headers headers;
    if (!endpoint_.bearer_token.empty()) headers.emplace("Authorization", "Bearer " + endpoint_.bearer_token);

    auto res = cli.Post(url_.path, headers, body, "application/json");
    bool retryable = true;
    if (!res) {
      last_error = "request to " + endpoint_.url + " failed: " + httplib::to_string(res.error());
    } else if (res->status >= 200 && res->status < 300) {
      return res->body;
    } else {
      last_error = "request to " + endpoint_.url + " returned HTTP " + std::to_string(res->status);
      retryable = res->status == 429 || res->status >= 500;
    }
    if (!retryable) throw TransportError(last_error, false);
    if (attempt < endpoint_.max_attempts) {
      sleep_(backoff);
      backoff *= 2;
    }
  }
  throw TransportError(last_error + " (after " + std::to_string(endpoint_.max_attempts) + " attempts)", true);
}

HttpChatClient::HttpChatClient(HttpEndpoint endpoint, std::string model_name)
    : poster_(std::move(endpoint)), model_(std::move(model_name)) {}

std::string HttpChatClient::generate(std::string_view prompt) {
  const auto reply = json::parse(poster_.post(json{{"prompt", prompt}}.dump()), nullptr, false);
  if (reply.is_discarded() || !reply.is_object() || !reply.contains("text") || !reply["text"].is_string())
    throw TransportError("chat endpoint reply lacks a string 'text' field", false);
  return reply["text"].get<std::string>();
}

HttpEmbedder::HttpEmbedder(HttpEndpoint endpoint, std::size_t dimension, std::string model_name)
    : poster_(std::move(endpoint)), dim_(dimension), model_(std::move(model_name)) {
  if (dimension == 0) throw ValidationError("embedding dimension must be positive");
}

core::EmbeddingVector HttpEmbedder::embed(std::string_view text) {
  const std::string t(text);
  return embed_batch(std::span<const std::string>(&t, 1)).front();
}

std::vector<core::EmbeddingVector> HttpEmbedder::embed_batch(std::span<const std::string> texts) {
  if (texts.empty()) return {};
  const auto reply = json::parse(poster_.post(json{{"texts", texts}}.dump()), nullptr, false);
  if (reply.is_discarded() || !reply.is_object() || !reply.contains("vectors") || !reply["vectors"].is_array())
    throw TransportError("embedding endpoint reply lacks a 'vectors' array", false);
  const auto& vectors = reply["vectors"];
  if (vectors.size() != texts.size())
    throw TransportError("embedding endpoint returned " + std::to_string(vectors.size()) + " vectors for " +
                             std::to_string(texts.size()) + " texts",
                         false);
  std::vector<core::EmbeddingVector> out;
  out.reserve(texts.size());
  for (const auto& v : vectors) {
    std::vector<double> values;
    try {
      values = v.get<std::vector<double>>();
    } catch (const json::exception&) {
      throw TransportError("embedding endpoint returned a non-numeric vector", false);
    }
    if (values.size() != dim_)
      throw TransportError("embedding endpoint returned dimension " + std::to_string(values.size()) + ", expected " +
                               std::to_string(dim_),
                           false);
    try {
      out.push_back(core::EmbeddingVector::normalized(std::move(values)));
    } catch (const ValidationError& e) {
      throw TransportError(std::string("embedding endpoint returned an unusable vector: ") + e.what(), false);
    }
  }
  return out;
}

}  // namespace himes::clients
