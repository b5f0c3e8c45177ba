#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "himes/clients/stubs.hpp"
#include "himes/memory/classifier.hpp"
#include "himes/pipeline/pipeline.hpp"
#include "himes/pipeline/prompts.hpp"

#include "../support/oracles.hpp"

using namespace himes;
using pipeline::DialogueHistory;
using pipeline::Role;

namespace {

DialogueHistory japan_history() {
  return DialogueHistory({{Role::user, "I am visiting Japan next month.", {}},
                          {Role::assistant, "How can I help with the trip?", {}}});
}

struct Rig {
  clients::HashingEmbedder embedder{256};
  pipeline::KnowledgeBase kb;
  clients::HeuristicRewriter rewriter;
  clients::ExtractiveResponder responder;
  memory::LexicalClassifier classifier;
  memory::MemoryStore store{memory::TopicTaxonomy::shipped_default(), 256};

  Rig() : kb(pipeline::KnowledgeBase::load_jsonl(testkit::fixture("kb.jsonl"), embedder)) {}

  pipeline::Pipeline make(pipeline::PipelineConfig c, clients::ChatClient* resp = nullptr,
                          clients::EmbedderClient* emb = nullptr) {
    pipeline::Pipeline p(c, {&rewriter, resp ? resp : &responder, emb ? emb : &embedder, &classifier}, kb, &store);
    p.set_clock(pipeline::Pipeline::frozen_clock());
    p.set_wall_clock([] { return core::parse_rfc3339("2024-05-01T00:00:00Z"); });
    return p;
  }
};

}  // namespace

TEST(Template, SinglePassSubstitution) {
  EXPECT_EQ(pipeline::render_template("{{a}} and {b} {{a}}", {{"a", "{{b}}"}}), "{{b}} and {b} {{b}}");
  try {
    pipeline::render_template("x {{missing}}", {});
    FAIL();
  } catch (const pipeline::TemplateError& e) {
    EXPECT_EQ(e.slot(), "missing");
  }
}

TEST(Template, ShippedTemplatesRenderCompletely) {
  EXPECT_NO_THROW(pipeline::render_template(pipeline::templates::kRewriter,
                                            {{"query_old", "q"}, {"history", "h"}, {"biz_id", "b"}, {"agent", "a"}}));
  EXPECT_NO_THROW(pipeline::render_template(
      pipeline::templates::kResponder, {{"meta_prompt", "m"}, {"comments", "c"}, {"knowledge_base", "k"}, {"query", "q"}}));
}

TEST(Dialogue, RenderAndValidation) {
  auto h = japan_history();
  EXPECT_EQ(h.render(), "user: I am visiting Japan next month.\nassistant: How can I help with the trip?");
  EXPECT_EQ(h.render(1), "assistant: How can I help with the trip?");
  EXPECT_THROW(DialogueHistory({{Role::user, "  ", {}}}), ValidationError);
  EXPECT_THROW(DialogueHistory({{Role::user, "b", core::parse_rfc3339("2024-01-02T00:00:00Z")},
                                {Role::user, "a", core::parse_rfc3339("2024-01-01T00:00:00Z")}}),
               ValidationError);
  const auto back = pipeline::history_from_json(pipeline::to_json(h));
  EXPECT_EQ(back.turns(), h.turns());
}

TEST(Rewrite, EmptyHistorySkipsClient) {
  clients::ScriptedChatClient c({R"({"query_rewrited": "never"})"});
  const auto r = pipeline::rewrite_query({}, "hello", c, {});
  EXPECT_EQ(r.query, "hello");
  EXPECT_FALSE(r.client_called);
  EXPECT_EQ(c.calls(), 0u);
}

TEST(Rewrite, ParsesReplyAndFallsBack) {
  clients::ScriptedChatClient ok({R"(Here: {"query_rewrited": "Does the Japan rail pass cover bullet trains?"})"});
  const auto r = pipeline::rewrite_query(japan_history(), "Does it cover bullet trains?", ok, {});
  EXPECT_EQ(r.query, "Does the Japan rail pass cover bullet trains?");
  EXPECT_FALSE(r.warning);
  const auto prompt = ok.prompts().at(0);
  EXPECT_NE(prompt.find("User's current query: Does it cover bullet trains?"), std::string::npos);
  EXPECT_NE(prompt.find("user: I am visiting Japan next month."), std::string::npos);

  clients::ScriptedChatClient junk({"no json here"});
  const auto j = pipeline::rewrite_query(japan_history(), "q?", junk, {});
  EXPECT_EQ(j.query, "q?");
  EXPECT_TRUE(j.warning);

  clients::FailingChatClient down;
  const auto d = pipeline::rewrite_query(japan_history(), "q?", down, {});
  EXPECT_EQ(d.query, "q?");
  EXPECT_TRUE(d.warning);
}

TEST(ResponsePrompt, ReferencesInOrderOrEmptyNotice) {
  std::vector<rerank::ScoredChunk> g{{{"a", 0, "Title A", "text a", {}}, 0.9}, {{"b", 0, "Title B", "text b", {}}, 0.5}};
  const auto p = pipeline::assemble_response_prompt("meta", g, {}, "question?");
  const auto a = p.find("\nReference Historical Article Title A: text a");
  const auto b = p.find("\nReference Historical Article Title B: text b");
  ASSERT_NE(a, std::string::npos);
  ASSERT_NE(b, std::string::npos);
  EXPECT_LT(a, b);
  EXPECT_NE(p.find("The user's original question is: question?"), std::string::npos);
  const auto empty = pipeline::assemble_response_prompt("meta", {}, {}, "q");
  EXPECT_NE(empty.find(pipeline::kEmptyKnowledgeBase), std::string::npos);
}

TEST(Config, JsonRoundTripAndPartialOverride) {
  pipeline::PipelineConfig c;
  c.top_k = 7;
  c.recall_scope = pipeline::RecallScopeMode::partition_then_global;
  c.aggregation = kernels::Aggregation::max;
  const auto back = pipeline::config_from_json(pipeline::to_json(c));
  EXPECT_EQ(pipeline::to_json(back), pipeline::to_json(c));
  const auto partial = pipeline::config_from_json({{"stm_enabled", false}}, c);
  EXPECT_FALSE(partial.stm_enabled);
  EXPECT_EQ(partial.top_k, 7u);
  EXPECT_THROW(pipeline::config_from_json({{"top_k", 0}}), ValidationError);
  EXPECT_THROW(pipeline::config_from_json({{"recall_scope", "everywhere"}}), ValidationError);
}

TEST(KnowledgeBase, CacheReusesVectors) {
  const auto cache = std::filesystem::temp_directory_path() / ("himes-kb-cache-" + std::to_string(::getpid()) + ".json");
  std::filesystem::remove(cache);
  clients::HashingEmbedder e(64);
  const auto first = pipeline::KnowledgeBase::load_jsonl(testkit::fixture("kb.jsonl"), e, cache);
  EXPECT_EQ(first.embedded_on_load(), 20u);
  const auto calls = e.calls();
  const auto second = pipeline::KnowledgeBase::load_jsonl(testkit::fixture("kb.jsonl"), e, cache);
  EXPECT_EQ(second.embedded_on_load(), 0u);
  EXPECT_EQ(e.calls(), calls);
  for (std::size_t i = 0; i < first.size(); ++i) EXPECT_EQ(first.embeddings().vector(i), second.embeddings().vector(i));
  // A different embedder identity invalidates the cache.
  clients::HashingEmbedder other(64, 9);
  EXPECT_EQ(pipeline::KnowledgeBase::load_jsonl(testkit::fixture("kb.jsonl"), other, cache).embedded_on_load(), 20u);
  std::filesystem::remove(cache);
}

TEST(KnowledgeBase, RejectsDuplicatesAndSearchesInOrder) {
  clients::HashingEmbedder e(64);
  EXPECT_THROW(pipeline::KnowledgeBase({{"a", "", "x"}, {"a", "", "y"}}, e), ValidationError);
  EXPECT_THROW(pipeline::KnowledgeBase({{"a", "", ""}}, e), ValidationError);
  pipeline::KnowledgeBase kb({{"a", "", "same words"}, {"b", "", "same words"}, {"c", "", "other"}}, e);
  const auto hits = kb.search(e.embed("same words"), 2);
  ASSERT_EQ(hits.size(), 2u);
  EXPECT_EQ(hits[0].index, 0u);
  EXPECT_EQ(hits[1].index, 1u);
  EXPECT_TRUE(pipeline::KnowledgeBase().search(e.embed("x"), 3).empty());
}

TEST(Pipeline, StagePresenceFollowsSwitches) {
  Rig rig;
  pipeline::PipelineConfig full;
  auto t = rig.make(full).answer("u", japan_history(), "Does the rail pass cover bullet trains?").trace;
  for (auto s : {"rewrite", "retrieve", "classify", "recall", "rerank", "budget", "assemble", "respond", "store"})
    EXPECT_TRUE(t.has_stage(s)) << s;
  EXPECT_TRUE(t.rewritten_query);
  EXPECT_TRUE(t.no_memory_fallback);  // nothing stored yet
  EXPECT_TRUE(t.stored_record_id);

  pipeline::PipelineConfig plain;
  plain.stm_enabled = false;
  plain.ltm_enabled = false;
  t = rig.make(plain).answer("u", japan_history(), "Does the rail pass cover bullet trains?").trace;
  EXPECT_FALSE(t.has_stage("rewrite"));
  EXPECT_FALSE(t.has_stage("recall"));
  EXPECT_FALSE(t.has_stage("store"));
  EXPECT_FALSE(t.rewritten_query);
  EXPECT_EQ(t.retrieval_query, "Does the rail pass cover bullet trains?");
  EXPECT_EQ(rig.store.size(), 1u);
}

TEST(Pipeline, HistoryConcatenationWithoutRewriter) {
  Rig rig;
  pipeline::PipelineConfig c;
  c.stm_enabled = false;
  c.ltm_enabled = false;
  c.include_history_in_retrieval = true;
  c.history_window = 1;
  const auto t = rig.make(c).answer("u", japan_history(), "Rail pass?").trace;
  EXPECT_EQ(t.retrieval_query, "How can I help with the trip?\nRail pass?");
}

TEST(Pipeline, MemoryFeedsLaterTurns) {
  Rig rig;
  pipeline::PipelineConfig c;
  c.stm_enabled = false;
  c.recall_scope = pipeline::RecallScopeMode::global;
  auto p = rig.make(c);
  p.answer("u", {}, "Does the rail pass cover bullet trains?");
  const auto t = p.answer("u", {}, "Does the rail pass cover bullet trains?").trace;
  ASSERT_FALSE(t.recalled.empty());
  EXPECT_EQ(t.recalled[0].query_text, "Does the rail pass cover bullet trains?");
  EXPECT_NEAR(t.recalled[0].similarity, 1.0, 1e-12);
  EXPECT_FALSE(t.no_memory_fallback);
  EXPECT_EQ(rig.store.size(), 2u);
  // Recall is per user.
  EXPECT_TRUE(p.answer("someone-else", {}, "Does the rail pass cover bullet trains?").trace.recalled.empty());
}

TEST(Pipeline, FailedAnswerLeavesStoreUnchanged) {
  Rig rig;
  clients::FailingChatClient responder;
  pipeline::PipelineConfig c;
  try {
    rig.make(c, &responder).answer("u", japan_history(), "Rail pass?");
    FAIL();
  } catch (const pipeline::StageError& e) {
    EXPECT_EQ(e.stage(), "respond");
    EXPECT_TRUE(e.transport());
    EXPECT_TRUE(e.partial_trace().has_stage("assemble"));
    EXPECT_FALSE(e.partial_trace().has_stage("respond"));
  }
  EXPECT_EQ(rig.store.size(), 0u);

  clients::FailingEmbedder emb(256);
  try {
    rig.make(c, nullptr, &emb).answer("u", {}, "Rail pass?");
    FAIL();
  } catch (const pipeline::StageError& e) {
    EXPECT_EQ(e.stage(), "retrieve");
  }
  EXPECT_EQ(rig.store.size(), 0u);
}

TEST(Pipeline, RewriterFailureDegradesWithWarning) {
  Rig rig;
  clients::FailingChatClient down;
  pipeline::PipelineConfig c;
  c.ltm_enabled = false;
  pipeline::Pipeline p(c, {&down, &rig.responder, &rig.embedder, &rig.classifier}, rig.kb, nullptr);
  const auto t = p.answer("u", japan_history(), "Rail pass?").trace;
  EXPECT_TRUE(t.has_stage("rewrite"));
  EXPECT_FALSE(t.rewritten_query);
  EXPECT_EQ(t.retrieval_query, "Rail pass?");
  EXPECT_FALSE(t.warnings.empty());
}

TEST(Pipeline, TraceJsonRoundTrip) {
  Rig rig;
  const auto t = rig.make({}).answer("u", japan_history(), "Does the rail pass cover bullet trains?").trace;
  EXPECT_EQ(pipeline::trace_from_json(pipeline::to_json(t)), t);
}

TEST(Pipeline, MissingClientsRejected) {
  Rig rig;
  pipeline::PipelineConfig c;
  EXPECT_THROW(pipeline::Pipeline(c, {nullptr, &rig.responder, &rig.embedder, &rig.classifier}, rig.kb, &rig.store),
               ValidationError);
  EXPECT_THROW(pipeline::Pipeline(c, {&rig.rewriter, &rig.responder, &rig.embedder, &rig.classifier}, rig.kb, nullptr),
               ValidationError);
}
