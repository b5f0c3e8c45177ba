#include "himes/service/config.hpp"

#include <cstdlib>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "himes/clients/http.hpp"
#include "himes/clients/stubs.hpp"
#include "himes/core/errors.hpp"

namespace himes::service {

namespace {

using Setter = std::function<void(ServiceConfig&, const std::string&)>;

bool parse_bool(const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ValidationError("expected a boolean, got '" + v + "'");
}

long long parse_int(const std::string& v, long long lo) {
  std::size_t used = 0;
  long long n = 0;
  try {
    n = std::stoll(v, &used);
  } catch (const std::exception&) {
    throw ValidationError("expected an integer, got '" + v + "'");
  }
  if (used != v.size()) throw ValidationError("expected an integer, got '" + v + "'");
  if (n < lo) throw ValidationError("value " + v + " is below the minimum " + std::to_string(lo));
  return n;
}

double parse_double(const std::string& v) {
  std::size_t used = 0;
  double d = 0;
  try {
    d = std::stod(v, &used);
  } catch (const std::exception&) {
    throw ValidationError("expected a number, got '" + v + "'");
  }
  if (used != v.size()) throw ValidationError("expected a number, got '" + v + "'");
  return d;
}

std::size_t parse_size(const std::string& v) { return static_cast<std::size_t>(parse_int(v, 0)); }

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> t;
    t["server.host"] = [](ServiceConfig& c, const std::string& v) { c.host = v; };
    t["server.port"] = [](ServiceConfig& c, const std::string& v) { c.port = static_cast<int>(parse_int(v, 0)); };
    t["server.auth_token"] = [](ServiceConfig& c, const std::string& v) { c.auth_token = v; };
    t["server.trace_capacity"] = [](ServiceConfig& c, const std::string& v) { c.trace_capacity = parse_size(v); };
    t["server.threads"] = [](ServiceConfig& c, const std::string& v) { c.threads = parse_size(v); };
    t["store.path"] = [](ServiceConfig& c, const std::string& v) { c.store_path = v; };
    t["store.dimension"] = [](ServiceConfig& c, const std::string& v) { c.dimension = parse_size(v); };
    t["store.fsync"] = [](ServiceConfig& c, const std::string& v) { c.fsync = parse_bool(v); };
    t["kb.path"] = [](ServiceConfig& c, const std::string& v) { c.kb_path = v; };
    t["kb.cache"] = [](ServiceConfig& c, const std::string& v) { c.kb_cache = v; };
    t["taxonomy.path"] = [](ServiceConfig& c, const std::string& v) { c.taxonomy_path = v; };
    t["clients.mode"] = [](ServiceConfig& c, const std::string& v) {
      if (v == "stub") c.mode = ClientMode::stub;
      else if (v == "http") c.mode = ClientMode::http;
      else throw ValidationError("clients.mode must be stub or http");
    };
    t["clients.seed"] = [](ServiceConfig& c, const std::string& v) {
      c.seed = static_cast<std::uint64_t>(parse_int(v, 0));
    };
    t["clients.embedder_url"] = [](ServiceConfig& c, const std::string& v) { c.embedder_url = v; };
    t["clients.rewriter_url"] = [](ServiceConfig& c, const std::string& v) { c.rewriter_url = v; };
    t["clients.responder_url"] = [](ServiceConfig& c, const std::string& v) { c.responder_url = v; };
    t["clients.classifier_url"] = [](ServiceConfig& c, const std::string& v) { c.classifier_url = v; };
    t["clients.judge_url"] = [](ServiceConfig& c, const std::string& v) { c.judge_url = v; };
    t["clients.embedder_model"] = [](ServiceConfig& c, const std::string& v) { c.embedder_model = v; };
    t["clients.chat_model"] = [](ServiceConfig& c, const std::string& v) { c.chat_model = v; };
    t["clients.token"] = [](ServiceConfig& c, const std::string& v) { c.client_token = v; };
    t["clients.timeout_ms"] = [](ServiceConfig& c, const std::string& v) {
      c.timeout = std::chrono::milliseconds(parse_int(v, 1));
    };
    t["clients.max_attempts"] = [](ServiceConfig& c, const std::string& v) {
      c.max_attempts = static_cast<int>(parse_int(v, 1));
    };
    t["clients.classifier"] = [](ServiceConfig& c, const std::string& v) { c.classifier = v; };
    t["clients.parallelism"] = [](ServiceConfig& c, const std::string& v) { c.parallelism = parse_size(v); };
    t["pipeline.stm_enabled"] = [](ServiceConfig& c, const std::string& v) { c.pipeline.stm_enabled = parse_bool(v); };
    t["pipeline.ltm_enabled"] = [](ServiceConfig& c, const std::string& v) { c.pipeline.ltm_enabled = parse_bool(v); };
    t["pipeline.include_history_in_retrieval"] = [](ServiceConfig& c, const std::string& v) {
      c.pipeline.include_history_in_retrieval = parse_bool(v);
    };
    t["pipeline.history_window"] = [](ServiceConfig& c, const std::string& v) { c.pipeline.history_window = parse_size(v); };
    t["pipeline.top_r"] = [](ServiceConfig& c, const std::string& v) { c.pipeline.top_r = parse_size(v); };
    t["pipeline.top_n"] = [](ServiceConfig& c, const std::string& v) { c.pipeline.top_n = parse_size(v); };
    t["pipeline.top_k"] = [](ServiceConfig& c, const std::string& v) { c.pipeline.top_k = parse_size(v); };
    t["pipeline.max_chunk_chars"] = [](ServiceConfig& c, const std::string& v) {
      c.pipeline.chunk_policy.max_chunk_chars = parse_size(v);
    };
    t["pipeline.overlap_chars"] = [](ServiceConfig& c, const std::string& v) {
      c.pipeline.chunk_policy.overlap_chars = parse_size(v);
    };
    t["pipeline.context_budget_chars"] = [](ServiceConfig& c, const std::string& v) {
      c.pipeline.context_budget_chars = parse_size(v);
    };
    t["pipeline.recall_scope"] = [](ServiceConfig& c, const std::string& v) {
      c.pipeline.recall_scope = pipeline::config_from_json({{"recall_scope", v}}).recall_scope;
    };
    t["pipeline.aggregation"] = [](ServiceConfig& c, const std::string& v) {
      c.pipeline.aggregation = pipeline::config_from_json({{"aggregation", v}}).aggregation;
    };
    t["pipeline.store_current_query"] = [](ServiceConfig& c, const std::string& v) {
      c.pipeline.store_current_query = parse_bool(v);
    };
    t["pipeline.store_rewritten_query"] = [](ServiceConfig& c, const std::string& v) {
      c.pipeline.store_rewritten_query = parse_bool(v);
    };
    t["reward.alpha"] = [](ServiceConfig& c, const std::string& v) { c.pipeline.reward_weights.alpha = parse_double(v); };
    t["reward.beta"] = [](ServiceConfig& c, const std::string& v) { c.pipeline.reward_weights.beta = parse_double(v); };
    t["reward.lambda"] = [](ServiceConfig& c, const std::string& v) { c.pipeline.reward_weights.lambda = parse_double(v); };
    t["account.biz_id"] = [](ServiceConfig& c, const std::string& v) { c.account.biz_id = v; };
    t["account.name"] = [](ServiceConfig& c, const std::string& v) { c.account.name = v; };
    t["account.domain"] = [](ServiceConfig& c, const std::string& v) { c.account.domain = v; };
    t["account.meta_prompt"] = [](ServiceConfig& c, const std::string& v) { c.account.meta_prompt = v; };
    return t;
  }();
  return table;
}

std::string env_name(const std::string& key) {
  std::string out = "HIMES_";
  for (char ch : key) out += ch == '.' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  return out;
}

}  // namespace

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& [name, _] : setters()) k.push_back(name);
    return k;
  }();
  return keys;
}

void ServiceConfig::validate() const {
  std::vector<std::string> issues;
  if (port < 0 || port > 65535) issues.emplace_back("server.port must be in [0, 65535]");
  if (trace_capacity == 0) issues.emplace_back("server.trace_capacity must be positive");
  if (threads == 0) issues.emplace_back("server.threads must be positive");
  if (dimension == 0) issues.emplace_back("store.dimension must be positive");
  if (store_path.empty()) issues.emplace_back("store.path must be set");
  if (parallelism == 0) issues.emplace_back("clients.parallelism must be positive");
  if (classifier != "lexical" && classifier != "chat") issues.emplace_back("clients.classifier must be lexical or chat");
  if (mode == ClientMode::http) {
    if (embedder_url.empty()) issues.emplace_back("clients.embedder_url is required in http mode");
    if (responder_url.empty()) issues.emplace_back("clients.responder_url is required in http mode");
    if (pipeline.stm_enabled && rewriter_url.empty()) issues.emplace_back("clients.rewriter_url is required when stm is on");
  }
  if (classifier == "chat" && mode == ClientMode::http && classifier_url.empty())
    issues.emplace_back("clients.classifier_url is required for the chat classifier");
  if (!kb_path.empty() && !std::filesystem::exists(kb_path)) issues.push_back("kb.path does not exist: " + kb_path.string());
  if (!taxonomy_path.empty() && !std::filesystem::exists(taxonomy_path))
    issues.push_back("taxonomy.path does not exist: " + taxonomy_path.string());
  try {
    pipeline.validate();
  } catch (const ValidationError& e) {
    issues.insert(issues.end(), e.issues().begin(), e.issues().end());
  }
  if (!issues.empty()) throw ValidationError("invalid service config", std::move(issues));
}

std::optional<std::string> process_env(const std::string& name) {
  if (const char* v = std::getenv(name.c_str())) return std::string(v);
  return std::nullopt;
}

ServiceConfig load_service_config(const std::optional<std::filesystem::path>& file,
                                  const std::function<std::optional<std::string>(const std::string&)>& getenv,
                                  const std::map<std::string, std::string>& overrides) {
  std::map<std::string, std::string> values;
  std::vector<std::string> issues;
  if (file) {
    boost::property_tree::ptree tree;
    try {
      boost::property_tree::ini_parser::read_ini(file->string(), tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
      throw ValidationError(std::string("cannot read config file: ") + e.what());
    }
    for (const auto& [section, body] : tree) {
      if (body.empty()) {
        issues.push_back("key '" + section + "' outside a section");
        continue;
      }
      for (const auto& [key, leaf] : body) {
        const std::string name = section + "." + key;
        if (!setters().count(name)) issues.push_back("unknown config key '" + name + "'");
        else values[name] = leaf.get_value<std::string>();
      }
    }
  }
  if (getenv)
    for (const auto& name : config_keys())
      if (auto v = getenv(env_name(name))) values[name] = *v;
  for (const auto& [name, v] : overrides) {
    if (!setters().count(name)) issues.push_back("unknown config key '" + name + "'");
    else values[name] = v;
  }

  ServiceConfig config;
  for (const auto& [name, v] : values) {
    try {
      setters().at(name)(config, v);
    } catch (const ValidationError& e) {
      issues.push_back(name + ": " + e.what());
    }
  }
  if (!issues.empty()) throw ValidationError("invalid service config", std::move(issues));
  config.validate();
  return config;
}

ClientBundle make_clients(const ServiceConfig& config) {
  ClientBundle b;
  if (config.mode == ClientMode::stub) {
    b.embedder = std::make_unique<clients::HashingEmbedder>(config.dimension, config.seed);
    b.rewriter = std::make_unique<clients::HeuristicRewriter>();
    b.responder = std::make_unique<clients::ExtractiveResponder>(config.seed);
    b.judge = std::make_unique<clients::LexicalJudge>();
  } else {
    auto endpoint = [&](const std::string& url) {
      clients::HttpEndpoint e;
      e.url = url;
      e.bearer_token = config.client_token;
      e.timeout = config.timeout;
      e.max_attempts = config.max_attempts;
      return e;
    };
    b.embedder = std::make_unique<clients::HttpEmbedder>(endpoint(config.embedder_url), config.dimension,
                                                         config.embedder_model);
    b.responder = std::make_unique<clients::HttpChatClient>(endpoint(config.responder_url), config.chat_model);
    if (!config.rewriter_url.empty())
      b.rewriter = std::make_unique<clients::HttpChatClient>(endpoint(config.rewriter_url), config.chat_model);
    if (!config.judge_url.empty())
      b.judge = std::make_unique<clients::HttpChatClient>(endpoint(config.judge_url), config.chat_model);
    if (config.classifier == "chat")
      b.classifier_chat = std::make_unique<clients::HttpChatClient>(endpoint(config.classifier_url), config.chat_model);
  }
  if (config.classifier == "chat" && !b.classifier_chat)
    b.classifier_chat = std::make_unique<clients::LookupChatClient>(
        std::vector<std::pair<std::string, std::string>>{}, "{}", "empty-classifier-stub");
  if (config.classifier == "chat") b.classifier = std::make_unique<memory::ChatTopicClassifier>(*b.classifier_chat);
  else b.classifier = std::make_unique<memory::LexicalClassifier>();
  return b;
}

}  // namespace himes::service
