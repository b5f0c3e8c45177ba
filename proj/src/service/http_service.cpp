#include "himes/service/http_service.hpp"

#include "httplib.h"

#include "himes/core/errors.hpp"
#include "himes/core/text.hpp"
#include "himes/rerank/rerank.hpp"

namespace himes::service {

using nlohmann::json;

namespace {

ApiResponse error_body(int status, std::string code, std::string stage, std::string message) {
  return {status, json{{"code", std::move(code)}, {"stage", std::move(stage)}, {"message", std::move(message)}}};
}

// Runs f and tags client transport failures with the stage they hit.
template <class F>
auto at_stage(const char* stage, F&& f) {
  try {
    return f();
  } catch (const TransportError& e) {
    throw pipeline::StageError(stage, e.what(), {}, pipeline::StageError::Cause::transport);
  }
}

std::string required_text(const json& body, const char* key) {
  auto it = body.find(key);
  if (it == body.end() || !it->is_string() || core::normalize_text(it->get<std::string>()).empty())
    throw ValidationError(std::string("field '") + key + "' must be a non-empty string");
  return it->get<std::string>();
}

std::size_t positive(const json& body, const char* key, std::size_t fallback) {
  auto it = body.find(key);
  if (it == body.end() || it->is_null()) return fallback;
  if (!it->is_number_integer() || it->get<long long>() < 1)
    throw ValidationError(std::string("field '") + key + "' must be a positive integer");
  return it->get<std::size_t>();
}

void require_object(const json& body) {
  if (!body.is_object()) throw ValidationError("request body must be a JSON object");
}

json record_json(const memory::MemoryRecord& r, double similarity) {
  return {{"record_id", r.id.value},
          {"user_id", r.user_id},
          {"query_text", r.query_text},
          {"topic", r.partition.topic},
          {"subtopic", r.partition.subtopic},
          {"timestamp", core::format_rfc3339(r.timestamp)},
          {"similarity", similarity}};
}

// Handlers report failures as error responses rather than exceptions.
template <class F>
ApiResponse guarded(F&& f) {
  try {
    return f();
  } catch (const std::exception& e) {
    return error_response(e);
  }
}

}  // namespace

ApiResponse error_response(const std::exception& e) {
  if (auto* s = dynamic_cast<const pipeline::StageError*>(&e)) {
    using C = pipeline::StageError::Cause;
    switch (s->cause()) {
      case C::transport: return error_body(502, "upstream_failure", s->stage(), s->what());
      case C::store: return error_body(503, "store_unavailable", s->stage(), s->what());
      case C::conflict: return error_body(422, "conflict", s->stage(), s->what());
      case C::validation: return error_body(400, "validation_error", s->stage(), s->what());
      case C::other: return error_body(500, "internal_error", s->stage(), s->what());
    }
  }
  if (dynamic_cast<const DimensionError*>(&e) || dynamic_cast<const TaxonomyError*>(&e))
    return error_body(422, "conflict", "", e.what());
  if (dynamic_cast<const ValidationError*>(&e)) return error_body(400, "validation_error", "", e.what());
  if (dynamic_cast<const json::exception*>(&e)) return error_body(400, "validation_error", "", e.what());
  if (dynamic_cast<const TransportError*>(&e)) return error_body(502, "upstream_failure", "", e.what());
  if (dynamic_cast<const StoreUnavailableError*>(&e)) return error_body(503, "store_unavailable", "", e.what());
  return error_body(500, "internal_error", "", e.what());
}

ServiceApp::ServiceApp(ServiceConfig config, ClientBundle clients, pipeline::KnowledgeBase kb,
                       std::unique_ptr<memory::MemoryStore> store)
    : config_(std::move(config)),
      clients_(std::move(clients)),
      kb_(std::move(kb)),
      store_(std::move(store)),
      clock_([] { return std::chrono::steady_clock::now().time_since_epoch(); }),
      wall_clock_(core::now_utc) {
  if (!store_) throw ValidationError("service needs a memory store");
  if (!clients_.embedder || !clients_.responder || !clients_.classifier)
    throw ValidationError("service needs embedder, responder and classifier clients");
  if (store_->dimension() != clients_.embedder->dimension())
    throw ValidationError("store and embedder dimensions differ");
}

std::unique_ptr<ServiceApp> ServiceApp::from_config(const ServiceConfig& config) {
  config.validate();
  auto taxonomy = config.taxonomy_path.empty() ? memory::TopicTaxonomy::shipped_default()
                                               : memory::TopicTaxonomy::from_file(config.taxonomy_path);
  memory::StoreOptions options;
  options.fsync_writes = config.fsync;
  auto store = memory::MemoryStore::open(config.store_path, std::move(taxonomy), config.dimension, true, options);
  auto clients = make_clients(config);
  pipeline::KnowledgeBase kb;
  if (!config.kb_path.empty()) {
    std::optional<std::filesystem::path> cache;
    if (!config.kb_cache.empty()) cache = config.kb_cache;
    kb = pipeline::KnowledgeBase::load_jsonl(config.kb_path, *clients.embedder, cache);
  }
  return std::make_unique<ServiceApp>(config, std::move(clients), std::move(kb), std::move(store));
}

void ServiceApp::set_clocks(pipeline::Pipeline::Clock clock, pipeline::Pipeline::WallClock wall) {
  clock_ = std::move(clock);
  wall_clock_ = std::move(wall);
}

bool ServiceApp::authorized(const std::string& header) const {
  return config_.auth_token.empty() || header == "Bearer " + config_.auth_token;
}

ApiResponse ServiceApp::health() const {
  return {200, json{{"status", "ok"}, {"records", store_->size()}, {"documents", kb_.size()}}};
}

memory::PartitionKey ServiceApp::partition_for(const json& body, const std::string& query,
                                               std::optional<std::string>& warning) const {
  if (body.contains("topic") || body.contains("subtopic")) {
    memory::PartitionKey key{body.value("topic", std::string{}), body.value("subtopic", std::string{})};
    if (!store_->taxonomy().contains(key))
      throw TaxonomyError("unknown partition (" + key.topic + ", " + key.subtopic + ")");
    return key;
  }
  auto c = at_stage("classify", [&] { return memory::classify_query(query, store_->taxonomy(), *clients_.classifier); });
  warning = c.warning;
  return c.key;
}

ApiResponse ServiceApp::memory_store(const json& body) {
  return guarded([&]() -> ApiResponse {
    require_object(body);
    const auto user = required_text(body, "user_id");
    const auto query = required_text(body, "query");
    const auto ts = body.contains("timestamp") ? core::parse_rfc3339(body.at("timestamp").get<std::string>())
                                               : wall_clock_();
    std::optional<std::string> warning;
    const auto key = partition_for(body, query, warning);
    const auto embedding = at_stage("embed", [&] { return clients_.embedder->embed(query); });
    const auto id = store_->store_query(user, query, key, embedding, ts);
    json out{{"record_id", id.value}, {"topic", key.topic}, {"subtopic", key.subtopic}};
    if (warning) out["warning"] = *warning;
    return {200, out};
  });
}

ApiResponse ServiceApp::memory_recall(const json& body) const {
  return guarded([&]() -> ApiResponse {
    require_object(body);
    const auto user = required_text(body, "user_id");
    const auto query = required_text(body, "query");
    const auto n = positive(body, "n", config_.pipeline.top_n);
    const std::string scope_name = body.value("scope", std::string("auto"));
    std::optional<std::string> warning;

    std::optional<memory::RecallScope> scope;
    if (scope_name == "global") {
      scope = memory::RecallScope::global();
    } else if (scope_name == "partition") {
      scope = memory::RecallScope::partition(partition_for(body, query, warning));
    } else if (scope_name == "auto") {
      scope = memory::RecallScope::partition_then_global(partition_for(body, query, warning));
    } else {
      throw ValidationError("scope must be auto, partition or global");
    }
    const auto embedding = at_stage("embed", [&] { return clients_.embedder->embed(query); });
    json results = json::array();
    for (const auto& r : store_->recall_top_n(user, embedding, n, *scope)) results.push_back(record_json(r.record, r.similarity));
    json out{{"results", results}, {"scope", scope_name}};
    if (scope->kind() != memory::RecallScope::Kind::global)
      out["partition"] = {{"topic", scope->key().topic}, {"subtopic", scope->key().subtopic}};
    if (warning) out["warning"] = *warning;
    return {200, out};
  });
}

ApiResponse ServiceApp::rerank(const json& body) const {
  return guarded([&]() -> ApiResponse {
    require_object(body);
    const auto user = required_text(body, "user_id");
    const auto k = positive(body, "k", config_.pipeline.top_k);
    const auto n = positive(body, "n", config_.pipeline.top_n);
    if (!body.contains("docs") || !body["docs"].is_array()) throw ValidationError("field 'docs' must be an array");
    std::vector<rerank::RetrievedDocument> docs;
    for (const auto& d : body["docs"]) {
      if (!d.is_object()) throw ValidationError("each doc must be an object");
      rerank::RetrievedDocument doc{required_text(d, "doc_id"), d.value("title", std::string{}), required_text(d, "body")};
      docs.push_back(std::move(doc));
    }

    std::vector<memory::MemoryRecord> history;
    std::optional<std::string> warning;
    if (body.contains("query") && !body["query"].is_null()) {
      const auto query = required_text(body, "query");
      const auto scope = memory::RecallScope::partition_then_global(partition_for(body, query, warning));
      const auto embedding = at_stage("embed", [&] { return clients_.embedder->embed(query); });
      for (auto& r : store_->recall_top_n(user, embedding, n, scope)) history.push_back(std::move(r.record));
    } else {
      history = store_->recent_for_user(user, n);
    }
    rerank::RerankOptions options;
    options.aggregation = config_.pipeline.aggregation;
    auto result = at_stage("rerank", [&] {
      return rerank::rerank_top_k(docs, history, k, config_.pipeline.chunk_policy, *clients_.embedder, options);
    });
    json chunks = json::array();
    for (const auto& c : result.chunks)
      chunks.push_back({{"doc_id", c.chunk.doc_id},
                        {"chunk_index", c.chunk.chunk_index},
                        {"title", c.chunk.title},
                        {"text", c.chunk.text},
                        {"score", c.score}});
    json out{{"chunks", chunks}, {"no_memory_fallback", result.no_memory_fallback}, {"history_size", history.size()}};
    if (warning) out["warning"] = *warning;
    return {200, out};
  });
}

std::string ServiceApp::remember(pipeline::PipelineTrace trace) {
  std::lock_guard lock(traces_mu_);
  const std::string id = "t-" + std::to_string(next_trace_++);
  traces_.emplace(id, std::move(trace));
  trace_order_.push_back(id);
  while (trace_order_.size() > config_.trace_capacity) {
    traces_.erase(trace_order_.front());
    trace_order_.pop_front();
  }
  return id;
}

ApiResponse ServiceApp::answer(const json& body) {
  return guarded([&]() -> ApiResponse {
    require_object(body);
    const auto user = required_text(body, "user_id");
    const auto query = required_text(body, "query");
    const auto history = pipeline::history_from_json(body.value("history", json::array()));
    auto config = config_.pipeline;
    if (auto it = body.find("config"); it != body.end() && !it->is_null()) config = pipeline::config_from_json(*it, config);

    pipeline::Pipeline p(config, clients_.pipeline_clients(), kb_, config.ltm_enabled ? store_.get() : nullptr,
                         config_.account);
    p.set_clock(clock_);
    p.set_wall_clock(wall_clock_);
    try {
      auto result = p.answer(user, history, query);
      json trace = pipeline::to_json(result.trace);
      const auto id = remember(std::move(result.trace));
      return {200, json{{"response", result.response}, {"trace_id", id}, {"trace", trace}}};
    } catch (const pipeline::StageError& e) {
      auto resp = error_response(e);
      resp.body["trace_id"] = remember(e.partial_trace());
      return resp;
    }
  });
}

ApiResponse ServiceApp::trace(const std::string& id) const {
  std::lock_guard lock(traces_mu_);
  auto it = traces_.find(id);
  if (it == traces_.end()) return error_body(404, "not_found", "", "no trace with id '" + id + "'");
  return {200, pipeline::to_json(it->second)};
}

// ---- HTTP binding --------------------------------------------------------

HttpServer::HttpServer(ServiceApp& app) : app_(app), server_(std::make_unique<httplib::Server>()) {
  const std::size_t threads = app_.config().threads;
  server_->new_task_queue = [threads] { return new httplib::ThreadPool(threads); };

  auto send = [](httplib::Response& res, const ApiResponse& r) {
    res.status = r.status;
    res.set_content(r.body.dump(), "application/json");
  };
  auto guarded = [this, send](auto handler) {
    return [this, send, handler](const httplib::Request& req, httplib::Response& res) {
      if (!app_.authorized(req.get_header_value("Authorization"))) {
        send(res, error_body(401, "unauthorized", "", "missing or wrong bearer token"));
        return;
      }
      try {
        send(res, handler(req));
      } catch (const std::exception& e) {
        send(res, error_response(e));
      }
    };
  };
  auto body = [](const httplib::Request& req) { return json::parse(req.body); };

  server_->Get("/v1/health", [this, send](const httplib::Request&, httplib::Response& res) { send(res, app_.health()); });
  server_->Post("/v1/memory/store", guarded([this, body](const httplib::Request& r) { return app_.memory_store(body(r)); }));
  server_->Post("/v1/memory/recall", guarded([this, body](const httplib::Request& r) { return app_.memory_recall(body(r)); }));
  server_->Post("/v1/rerank", guarded([this, body](const httplib::Request& r) { return app_.rerank(body(r)); }));
  server_->Post("/v1/answer", guarded([this, body](const httplib::Request& r) { return app_.answer(body(r)); }));
  server_->Get(R"(/v1/trace/([^/]+))", guarded([this](const httplib::Request& r) { return app_.trace(r.matches[1]); }));
}

HttpServer::~HttpServer() = default;

int HttpServer::bind(const std::string& host, int port) {
  const int bound = port == 0 ? server_->bind_to_any_port(host) : (server_->bind_to_port(host, port) ? port : -1);
  if (bound < 0) throw StoreUnavailableError("cannot listen on " + host + ":" + std::to_string(port));
  return bound;
}

void HttpServer::run() { server_->listen_after_bind(); }

void HttpServer::stop() { server_->stop(); }

}  // namespace himes::service
