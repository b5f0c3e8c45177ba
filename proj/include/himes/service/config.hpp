#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "himes/clients/chat.hpp"
#include "himes/clients/embedder.hpp"
#include "himes/memory/classifier.hpp"
#include "himes/pipeline/pipeline.hpp"

namespace himes::service {

enum class ClientMode { stub, http };

struct ServiceConfig {
  // [server]
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string auth_token;  // empty: no bearer check
  std::size_t trace_capacity = 256;
  std::size_t threads = 8;

  // [store]
  std::filesystem::path store_path = "himes-store";
  std::size_t dimension = 256;
  bool fsync = false;

  // [kb]
  std::filesystem::path kb_path;  // empty: start with an empty knowledge base
  std::filesystem::path kb_cache;  // empty: no embedding cache

  // [taxonomy]
  std::filesystem::path taxonomy_path;  // empty: shipped taxonomy

  // [clients]
  ClientMode mode = ClientMode::stub;
  std::uint64_t seed = 0;
  std::string embedder_url, rewriter_url, responder_url, classifier_url, judge_url;
  std::string embedder_model = "embedder", chat_model = "chat";
  std::string client_token;
  std::chrono::milliseconds timeout{30000};
  int max_attempts = 3;
  std::string classifier = "lexical";  // lexical | chat
  std::size_t parallelism = 4;

  pipeline::PipelineConfig pipeline;
  pipeline::AccountProfile account;

  /// Throws ValidationError listing every bad field.
  void validate() const;
};

/// Every recognised "section.key".
const std::vector<std::string>& config_keys();

/// Layers an INI file (optional), then HIMES_<SECTION>_<KEY> environment
/// variables, then explicit overrides ("section.key" → value). Later
/// layers win. Unknown keys in the file or overrides are errors.
/// Throws ValidationError listing every problem.
ServiceConfig load_service_config(const std::optional<std::filesystem::path>& file,
                                  const std::function<std::optional<std::string>(const std::string&)>& getenv,
                                  const std::map<std::string, std::string>& overrides);

/// Environment lookup through std::getenv.
std::optional<std::string> process_env(const std::string& name);

/// Owned client objects for one process.
struct ClientBundle {
  std::unique_ptr<clients::EmbedderClient> embedder;
  std::unique_ptr<clients::ChatClient> rewriter;
  std::unique_ptr<clients::ChatClient> responder;
  std::unique_ptr<clients::ChatClient> judge;
  std::unique_ptr<clients::ChatClient> classifier_chat;  // backs a chat classifier
  std::unique_ptr<memory::TopicClassifier> classifier;

  pipeline::PipelineClients pipeline_clients() const {
    return {rewriter.get(), responder.get(), embedder.get(), classifier.get()};
  }
};

/// Stub mode builds the deterministic local clients; http mode builds
/// JSON-over-HTTP clients for every configured URL.
ClientBundle make_clients(const ServiceConfig& config);

}  // namespace himes::service
