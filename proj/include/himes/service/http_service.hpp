#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include "json.hpp"

#include "himes/memory/store.hpp"
#include "himes/pipeline/knowledge_base.hpp"
#include "himes/pipeline/pipeline.hpp"
#include "himes/service/config.hpp"

namespace httplib {
class Server;
}

namespace himes::service {

/// Result of one API call, independent of the transport.
struct ApiResponse {
  int status = 200;
  nlohmann::json body;
};

/// The JSON API over one store, knowledge base and client bundle. The
/// handlers are plain methods so they can be exercised without sockets;
/// HttpServer puts them on the wire.
///
/// Errors come back as {code, stage, message}: 400 validation, 401 bad
/// token, 404 unknown trace, 422 dimension or taxonomy conflicts, 502
/// upstream client failures, 503 store unavailable.
class ServiceApp {
 public:
  ServiceApp(ServiceConfig config, ClientBundle clients, pipeline::KnowledgeBase kb,
             std::unique_ptr<memory::MemoryStore> store);

  /// Opens the store (exclusively), loads the taxonomy and knowledge base
  /// and builds clients as the config says.
  static std::unique_ptr<ServiceApp> from_config(const ServiceConfig& config);

  ApiResponse health() const;
  ApiResponse memory_store(const nlohmann::json& body);
  ApiResponse memory_recall(const nlohmann::json& body) const;
  ApiResponse rerank(const nlohmann::json& body) const;
  ApiResponse answer(const nlohmann::json& body);
  ApiResponse trace(const std::string& id) const;

  /// True when the header value is acceptable for the configured token.
  bool authorized(const std::string& authorization_header) const;

  const memory::MemoryStore& store() const noexcept { return *store_; }
  const ServiceConfig& config() const noexcept { return config_; }

  /// Pins stage durations and stored timestamps, for reproducible tests.
  void set_clocks(pipeline::Pipeline::Clock clock, pipeline::Pipeline::WallClock wall);

 private:
  memory::PartitionKey partition_for(const nlohmann::json& body, const std::string& query,
                                     std::optional<std::string>& warning) const;
  std::string remember(pipeline::PipelineTrace trace);

  ServiceConfig config_;
  ClientBundle clients_;
  pipeline::KnowledgeBase kb_;
  std::unique_ptr<memory::MemoryStore> store_;
  pipeline::Pipeline::Clock clock_;
  pipeline::Pipeline::WallClock wall_clock_;

  mutable std::mutex traces_mu_;
  std::map<std::string, pipeline::PipelineTrace> traces_;
  std::deque<std::string> trace_order_;
  std::uint64_t next_trace_ = 1;
};

/// Maps an exception from a handler to an error response.
ApiResponse error_response(const std::exception& e);

/// Binds ServiceApp to an HTTP listener.
class HttpServer {
 public:
  explicit HttpServer(ServiceApp& app);
  ~HttpServer();

  /// Binds and returns the port (port 0 picks a free one). Throws Error on failure.
  int bind(const std::string& host, int port);
  /// Serves until stop(); call after bind().
  void run();
  void stop();

 private:
  ServiceApp& app_;
  std::unique_ptr<httplib::Server> server_;
};

}  // namespace himes::service
