#include "himes/pipeline/pipeline.hpp"

#include <algorithm>

#include "himes/core/json_reply.hpp"
#include "himes/core/text.hpp"
#include "himes/pipeline/prompts.hpp"

namespace himes::pipeline {

using nlohmann::json;

// ---- account -------------------------------------------------------------

json to_json(const AccountProfile& a) {
  return {{"biz_id", a.biz_id}, {"name", a.name}, {"domain", a.domain}, {"meta_prompt", a.meta_prompt},
          {"comments", a.comments}};
}

AccountProfile account_from_json(const json& j) {
  AccountProfile a;
  if (!j.is_object()) throw ValidationError("account profile must be a JSON object");
  try {
    a.biz_id = j.value("biz_id", a.biz_id);
    a.name = j.value("name", a.name);
    a.domain = j.value("domain", a.domain);
    a.meta_prompt = j.value("meta_prompt", a.meta_prompt);
    if (j.contains("comments")) a.comments = j.at("comments").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("invalid account profile: ") + e.what());
  }
  return a;
}

// ---- rewrite -------------------------------------------------------------

std::string render_rewrite_prompt(const DialogueHistory& history, std::string_view query,
                                  const AccountProfile& account) {
  return render_template(templates::kRewriter, {{"query_old", std::string(query)},
                                                {"history", history.render()},
                                                {"biz_id", account.biz_id},
                                                {"agent", account.name + " (" + account.domain + ")"}});
}

RewriteOutcome rewrite_query(const DialogueHistory& history, std::string_view query, clients::ChatClient& rewriter,
                             const AccountProfile& account) {
  RewriteOutcome out{std::string(query), false, std::nullopt};
  if (history.empty()) return out;
  std::string reply;
  out.client_called = true;
  try {
    reply = rewriter.generate(render_rewrite_prompt(history, query, account));
  } catch (const TransportError& e) {
    out.warning = std::string("rewriter unavailable, kept original query: ") + e.what();
    return out;
  }
  const auto obj = core::extract_json_object(reply);
  if (obj) {
    auto it = obj->find("query_rewrited");
    if (it != obj->end() && it->is_string() && !core::normalize_text(it->get<std::string>()).empty()) {
      out.query = it->get<std::string>();
      return out;
    }
  }
  out.warning = "rewriter reply had no usable query_rewrited field, kept original query";
  return out;
}

// ---- response prompt -----------------------------------------------------

std::string assemble_response_prompt(std::string_view meta_prompt, std::span<const rerank::ScoredChunk> golden,
                                     std::span<const std::string> comments, std::string_view query) {
  std::string kb;
  for (const auto& c : golden) {
    if (!kb.empty()) kb += '\n';
    kb += kReferencePrefix;
    kb += c.chunk.title;
    kb += ": ";
    kb += c.chunk.text;
  }
  if (kb.empty()) kb = kEmptyKnowledgeBase;
  std::string comment_lines;
  for (const auto& c : comments) {
    if (!comment_lines.empty()) comment_lines += '\n';
    comment_lines += "- " + c;
  }
  if (comment_lines.empty()) comment_lines = kNoHistory;
  std::string meta(meta_prompt);
  if (!meta.empty() && meta.back() != '\n') meta += '\n';
  return render_template(templates::kResponder,
                         {{"meta_prompt", meta}, {"knowledge_base", kb}, {"comments", comment_lines},
                          {"query", std::string(query)}});
}

// ---- config --------------------------------------------------------------

namespace {

std::string_view scope_name(RecallScopeMode m) {
  switch (m) {
    case RecallScopeMode::partition: return "partition";
    case RecallScopeMode::global: return "global";
    case RecallScopeMode::partition_then_global: return "partition_then_global";
  }
  return "partition";
}

RecallScopeMode scope_from(std::string_view s) {
  if (s == "partition") return RecallScopeMode::partition;
  if (s == "global") return RecallScopeMode::global;
  if (s == "partition_then_global") return RecallScopeMode::partition_then_global;
  throw ValidationError("unknown recall_scope '" + std::string(s) + "'");
}

kernels::Aggregation aggregation_from(std::string_view s) {
  if (s == "mean") return kernels::Aggregation::mean;
  if (s == "max") return kernels::Aggregation::max;
  throw ValidationError("unknown aggregation '" + std::string(s) + "'");
}

}  // namespace

void PipelineConfig::validate() const {
  std::vector<std::string> issues;
  if (top_r == 0) issues.emplace_back("top_r must be at least 1");
  if (top_n == 0) issues.emplace_back("top_n must be at least 1");
  if (top_k == 0) issues.emplace_back("top_k must be at least 1");
  if (context_budget_chars == 0) issues.emplace_back("context_budget_chars must be positive");
  if (include_history_in_retrieval && history_window == 0) issues.emplace_back("history_window must be at least 1");
  try {
    chunk_policy.validate();
  } catch (const ValidationError& e) {
    issues.emplace_back(e.what());
  }
  try {
    reward_weights.validate();
  } catch (const ValidationError& e) {
    issues.insert(issues.end(), e.issues().begin(), e.issues().end());
  }
  if (!issues.empty()) throw ValidationError("invalid pipeline config", std::move(issues));
}

json to_json(const PipelineConfig& c) {
  return {{"stm_enabled", c.stm_enabled},
          {"ltm_enabled", c.ltm_enabled},
          {"include_history_in_retrieval", c.include_history_in_retrieval},
          {"history_window", c.history_window},
          {"top_r", c.top_r},
          {"top_n", c.top_n},
          {"top_k", c.top_k},
          {"chunk_policy", {{"max_chunk_chars", c.chunk_policy.max_chunk_chars},
                            {"overlap_chars", c.chunk_policy.overlap_chars}}},
          {"context_budget_chars", c.context_budget_chars},
          {"recall_scope", scope_name(c.recall_scope)},
          {"aggregation", c.aggregation == kernels::Aggregation::mean ? "mean" : "max"},
          {"store_current_query", c.store_current_query},
          {"store_rewritten_query", c.store_rewritten_query},
          {"reward_weights",
           {{"alpha", c.reward_weights.alpha}, {"beta", c.reward_weights.beta}, {"lambda", c.reward_weights.lambda}}}};
}

PipelineConfig config_from_json(const json& j, PipelineConfig c) {
  if (!j.is_object()) throw ValidationError("pipeline config must be a JSON object");
  try {
    auto get = [&](const char* key, auto& field) {
      if (auto it = j.find(key); it != j.end()) field = it->get<std::decay_t<decltype(field)>>();
    };
    get("stm_enabled", c.stm_enabled);
    get("ltm_enabled", c.ltm_enabled);
    get("include_history_in_retrieval", c.include_history_in_retrieval);
    get("history_window", c.history_window);
    get("top_r", c.top_r);
    get("top_n", c.top_n);
    get("top_k", c.top_k);
    get("context_budget_chars", c.context_budget_chars);
    get("store_current_query", c.store_current_query);
    get("store_rewritten_query", c.store_rewritten_query);
    if (auto it = j.find("chunk_policy"); it != j.end()) {
      c.chunk_policy.max_chunk_chars = it->value("max_chunk_chars", c.chunk_policy.max_chunk_chars);
      c.chunk_policy.overlap_chars = it->value("overlap_chars", c.chunk_policy.overlap_chars);
    }
    if (auto it = j.find("recall_scope"); it != j.end()) c.recall_scope = scope_from(it->get<std::string>());
    if (auto it = j.find("aggregation"); it != j.end()) c.aggregation = aggregation_from(it->get<std::string>());
    if (auto it = j.find("reward_weights"); it != j.end()) {
      c.reward_weights.alpha = it->value("alpha", c.reward_weights.alpha);
      c.reward_weights.beta = it->value("beta", c.reward_weights.beta);
      c.reward_weights.lambda = it->value("lambda", c.reward_weights.lambda);
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("invalid pipeline config: ") + e.what());
  }
  c.validate();
  return c;
}

// ---- trace ---------------------------------------------------------------

bool PipelineTrace::has_stage(std::string_view name) const {
  return std::any_of(stages.begin(), stages.end(), [&](const TraceStage& s) { return s.name == name; });
}

json to_json(const PipelineTrace& t) {
  json j;
  j["user_id"] = t.user_id;
  j["original_query"] = t.original_query;
  j["rewritten_query"] = t.rewritten_query ? json(*t.rewritten_query) : json(nullptr);
  j["retrieval_query"] = t.retrieval_query;
  j["retrieved"] = json::array();
  for (const auto& d : t.retrieved) j["retrieved"].push_back({{"doc_id", d.doc_id}, {"similarity", d.similarity}});
  j["partition"] = t.partition ? json{{"topic", t.partition->topic}, {"subtopic", t.partition->subtopic}} : json(nullptr);
  j["recalled"] = json::array();
  for (const auto& r : t.recalled)
    j["recalled"].push_back({{"record_id", r.record_id}, {"query_text", r.query_text}, {"similarity", r.similarity}});
  j["golden"] = json::array();
  for (const auto& g : t.golden)
    j["golden"].push_back({{"doc_id", g.doc_id}, {"chunk_index", g.chunk_index}, {"score", g.score}, {"text", g.text}});
  j["no_memory_fallback"] = t.no_memory_fallback;
  j["stored_record_id"] = t.stored_record_id ? json(*t.stored_record_id) : json(nullptr);
  j["prompt"] = t.prompt;
  j["response"] = t.response;
  j["stages"] = json::array();
  for (const auto& s : t.stages) j["stages"].push_back({{"name", s.name}, {"duration_ms", s.duration_ms}});
  j["warnings"] = t.warnings;
  return j;
}

PipelineTrace trace_from_json(const json& j) {
  try {
    PipelineTrace t;
    t.user_id = j.at("user_id").get<std::string>();
    t.original_query = j.at("original_query").get<std::string>();
    if (!j.at("rewritten_query").is_null()) t.rewritten_query = j["rewritten_query"].get<std::string>();
    t.retrieval_query = j.at("retrieval_query").get<std::string>();
    for (const auto& d : j.at("retrieved")) t.retrieved.push_back({d.at("doc_id"), d.at("similarity")});
    if (!j.at("partition").is_null())
      t.partition = memory::PartitionKey{j["partition"].at("topic"), j["partition"].at("subtopic")};
    for (const auto& r : j.at("recalled"))
      t.recalled.push_back({r.at("record_id"), r.at("query_text"), r.at("similarity")});
    for (const auto& g : j.at("golden")) t.golden.push_back({g.at("doc_id"), g.at("chunk_index"), g.at("score"), g.at("text")});
    t.no_memory_fallback = j.at("no_memory_fallback");
    if (!j.at("stored_record_id").is_null()) t.stored_record_id = j["stored_record_id"].get<std::uint64_t>();
    t.prompt = j.at("prompt");
    t.response = j.at("response");
    for (const auto& s : j.at("stages")) t.stages.push_back({s.at("name"), s.at("duration_ms")});
    t.warnings = j.at("warnings").get<std::vector<std::string>>();
    return t;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("invalid pipeline trace: ") + e.what());
  }
}

// ---- orchestration -------------------------------------------------------

Pipeline::Pipeline(PipelineConfig config, PipelineClients clients, const KnowledgeBase& kb,
                   memory::MemoryStore* store, AccountProfile account)
    : config_(std::move(config)),
      clients_(clients),
      kb_(kb),
      store_(store),
      account_(std::move(account)),
      clock_([] { return std::chrono::steady_clock::now().time_since_epoch(); }),
      wall_clock_(core::now_utc) {
  config_.validate();
  std::vector<std::string> issues;
  if (!clients_.responder) issues.emplace_back("a responder client is required");
  if (!clients_.embedder) issues.emplace_back("an embedder client is required");
  if (config_.stm_enabled && !clients_.rewriter) issues.emplace_back("stm_enabled needs a rewriter client");
  if (config_.ltm_enabled && !clients_.classifier) issues.emplace_back("ltm_enabled needs a topic classifier");
  if (config_.ltm_enabled && !store_) issues.emplace_back("ltm_enabled needs a memory store");
  if (clients_.embedder && !kb_.empty() && kb_.embeddings().dimension() != clients_.embedder->dimension())
    issues.emplace_back("knowledge base and embedder dimensions differ");
  if (clients_.embedder && store_ && store_->dimension() != clients_.embedder->dimension())
    issues.emplace_back("memory store and embedder dimensions differ");
  if (!issues.empty()) throw ValidationError("invalid pipeline wiring", std::move(issues));
}

Pipeline::Clock Pipeline::frozen_clock() {
  return [] { return std::chrono::nanoseconds{0}; };
}

AnswerResult Pipeline::answer(const std::string& user_id, const DialogueHistory& history,
                              std::string_view query) const {
  if (core::normalize_text(query).empty()) throw ValidationError("query must be non-empty");
  if (config_.ltm_enabled && user_id.empty()) throw ValidationError("user_id must be non-empty");

  PipelineTrace trace;
  trace.user_id = user_id;
  trace.original_query = std::string(query);

  auto stage = [&](const char* name, auto&& body) {
    const auto t0 = clock_();
    try {
      body();
    } catch (const TransportError& e) {
      throw StageError(name, e.what(), trace, StageError::Cause::transport);
    } catch (const StoreUnavailableError& e) {
      throw StageError(name, e.what(), trace, StageError::Cause::store);
    } catch (const DimensionError& e) {
      throw StageError(name, e.what(), trace, StageError::Cause::conflict);
    } catch (const TaxonomyError& e) {
      throw StageError(name, e.what(), trace, StageError::Cause::conflict);
    } catch (const ValidationError& e) {
      throw StageError(name, e.what(), trace, StageError::Cause::validation);
    } catch (const std::exception& e) {
      throw StageError(name, e.what(), trace, StageError::Cause::other);
    }
    const auto elapsed = clock_() - t0;
    trace.stages.push_back({name, std::chrono::duration<double, std::milli>(elapsed).count()});
  };

  if (config_.stm_enabled) {
    stage("rewrite", [&] {
      auto outcome = rewrite_query(history, query, *clients_.rewriter, account_);
      if (outcome.client_called && !outcome.warning) trace.rewritten_query = outcome.query;
      if (outcome.warning) trace.warnings.push_back(*outcome.warning);
      trace.retrieval_query = outcome.query;
    });
  } else if (config_.include_history_in_retrieval && !history.empty()) {
    for (const auto& t : history.last(config_.history_window)) trace.retrieval_query += t.text + "\n";
    trace.retrieval_query += query;
  } else {
    trace.retrieval_query = std::string(query);
  }

  core::EmbeddingVector query_embedding;
  std::vector<rerank::RetrievedDocument> docs;
  stage("retrieve", [&] {
    query_embedding = clients_.embedder->embed(trace.retrieval_query);
    for (const auto& h : kb_.search(query_embedding, config_.top_r)) {
      docs.push_back(kb_.documents()[h.index]);
      trace.retrieved.push_back({docs.back().doc_id, h.similarity});
    }
  });

  const std::string memory_text = config_.store_rewritten_query ? trace.retrieval_query : std::string(query);
  std::vector<rerank::ScoredChunk> golden;

  if (config_.ltm_enabled) {
    memory::PartitionKey key;
    stage("classify", [&] {
      auto c = memory::classify_query(memory_text, store_->taxonomy(), *clients_.classifier);
      key = c.key;
      if (c.warning) trace.warnings.push_back(*c.warning);
      trace.partition = key;
    });

    std::vector<memory::MemoryRecord> recalled;
    stage("recall", [&] {
      const auto scope = config_.recall_scope == RecallScopeMode::global ? memory::RecallScope::global()
                         : config_.recall_scope == RecallScopeMode::partition
                             ? memory::RecallScope::partition(key)
                             : memory::RecallScope::partition_then_global(key);
      for (auto& r : store_->recall_top_n(user_id, query_embedding, config_.top_n, scope)) {
        trace.recalled.push_back({r.record.id.value, r.record.query_text, r.similarity});
        recalled.push_back(std::move(r.record));
      }
    });

    stage("rerank", [&] {
      rerank::RerankOptions options;
      options.aggregation = config_.aggregation;
      auto result = rerank::rerank_top_k(docs, recalled, config_.top_k, config_.chunk_policy, *clients_.embedder,
                                         options);
      trace.no_memory_fallback = result.no_memory_fallback;
      golden = std::move(result.chunks);
    });
  } else {
    for (std::size_t i = 0; i < docs.size(); ++i)
      golden.push_back({rerank::DocumentChunk{docs[i].doc_id, 0, docs[i].title, docs[i].body, {}},
                        trace.retrieved[i].similarity});
  }

  stage("budget", [&] {
    if (!golden.empty()) golden = rerank::context_budget(golden, config_.context_budget_chars);
    for (const auto& g : golden) trace.golden.push_back({g.chunk.doc_id, g.chunk.chunk_index, g.score, g.chunk.text});
  });

  stage("assemble", [&] {
    trace.prompt = assemble_response_prompt(account_.meta_prompt, golden, account_.comments, query);
  });

  stage("respond", [&] { trace.response = clients_.responder->generate(trace.prompt); });

  if (config_.ltm_enabled && config_.store_current_query) {
    stage("store", [&] {
      const auto embedding =
          memory_text == trace.retrieval_query ? query_embedding : clients_.embedder->embed(memory_text);
      trace.stored_record_id =
          store_->store_query(user_id, memory_text, *trace.partition, embedding, wall_clock_()).value;
    });
  }

  return {trace.response, trace};
}

}  // namespace himes::pipeline
