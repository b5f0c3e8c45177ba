#include <gtest/gtest.h>

#include <random>

#include "himes/clients/stubs.hpp"
#include "himes/core/text.hpp"
#include "himes/rerank/rerank.hpp"

#include "../support/oracles.hpp"

using namespace himes;
using rerank::ChunkPolicy;
using rerank::RetrievedDocument;

namespace {

std::string joined(const std::vector<rerank::DocumentChunk>& chunks) {
  std::string s;
  for (const auto& c : chunks) s += "[" + c.text + "]";
  return s;
}

memory::MemoryRecord record(std::vector<double> v) {
  memory::MemoryRecord r;
  r.query_text = "h";
  r.embedding = core::EmbeddingVector::normalized(std::move(v));
  return r;
}

}  // namespace

TEST(Chunking, ShortBodyIsOneChunk) {
  const auto c = rerank::chunk_document({"d", "T", "Short body."}, {});
  ASSERT_EQ(c.size(), 1u);
  EXPECT_EQ(c[0].text, "Short body.");
  EXPECT_EQ(c[0].title, "T");
  EXPECT_EQ(c[0].chunk_index, 0u);
}

TEST(Chunking, PrefersParagraphBreaks) {
  const auto c = rerank::chunk_document({"d", "", "aaaa\n\nbbbbbb"}, {8, 2});
  EXPECT_EQ(joined(c), "[aaaa\n\n][bbbbbb]");
}

TEST(Chunking, SentenceCutKeepsOverlap) {
  const auto c = rerank::chunk_document({"d", "", "One two. Three four five."}, {12, 3});
  ASSERT_GE(c.size(), 2u);
  EXPECT_EQ(c[0].text, "One two.");
  // Next chunk restarts three code points before the cut.
  EXPECT_EQ(c[1].text.substr(0, 3), "wo.");
}

TEST(Chunking, HardCutOnCodePoints) {
  // Nine two-byte code points, no break opportunities.
  std::string body;
  for (int i = 0; i < 9; ++i) body += "\xC3\xA9";
  const auto c = rerank::chunk_document({"d", "", body}, {4, 1});
  for (const auto& ch : c) {
    EXPECT_LE(core::utf8_length(ch.text), 4u);
    EXPECT_EQ(ch.text.size() % 2, 0u);  // never splits a code point
  }
  EXPECT_EQ(core::utf8_length(c[0].text), 4u);
}

TEST(Chunking, CoversTheWholeBody) {
  std::mt19937_64 rng(3);
  const char parts[] = {'a', 'b', ' ', '.', '\n'};
  for (int t = 0; t < 200; ++t) {
    std::string body(std::uniform_int_distribution<std::size_t>(1, 120)(rng), 'x');
    for (auto& ch : body) ch = parts[std::uniform_int_distribution<int>(0, 4)(rng)];
    const ChunkPolicy p{std::uniform_int_distribution<std::size_t>(5, 30)(rng), 0};
    // Without overlap the chunks concatenate back to the body exactly.
    std::string back;
    for (const auto& c : rerank::chunk_document({"d", "", body}, p)) {
      EXPECT_LE(c.text.size(), p.max_chunk_chars);
      back += c.text;
    }
    EXPECT_EQ(back, body);
  }
}

TEST(Chunking, RejectsBadPolicy) {
  EXPECT_THROW(rerank::chunk_document({"d", "", "x"}, {0, 0}), ValidationError);
  EXPECT_THROW(rerank::chunk_document({"d", "", "x"}, {10, 10}), ValidationError);
}

TEST(Attention, MeanCosineToHistory) {
  const auto c = core::EmbeddingVector::normalized({1, 0});
  const std::vector<core::EmbeddingVector> h{core::EmbeddingVector::normalized({1, 0}),
                                             core::EmbeddingVector::normalized({-1, 0})};
  EXPECT_DOUBLE_EQ(rerank::attention_score(c, h), 0.0);
  EXPECT_THROW(rerank::attention_score(c, {}), ValidationError);
}

TEST(Rerank, TiesBreakByDocThenChunk) {
  std::vector<rerank::DocumentChunk> chunks;
  for (const char* id : {"b", "a", "c"})
    chunks.push_back({id, 0, "", id, core::EmbeddingVector::normalized({1, 0})});
  chunks.push_back({"a", 1, "", "a1", core::EmbeddingVector::normalized({1, 0})});
  const std::vector<core::EmbeddingVector> h{core::EmbeddingVector::normalized({1, 1})};
  const auto r = rerank::rerank_chunks(chunks, h, 3);
  ASSERT_EQ(r.chunks.size(), 3u);
  EXPECT_EQ(r.chunks[0].chunk.doc_id, "a");
  EXPECT_EQ(r.chunks[0].chunk.chunk_index, 0u);
  EXPECT_EQ(r.chunks[1].chunk.doc_id, "a");
  EXPECT_EQ(r.chunks[1].chunk.chunk_index, 1u);
  EXPECT_EQ(r.chunks[2].chunk.doc_id, "b");
  EXPECT_EQ(r.candidate_chunks, 4u);
}

TEST(Rerank, EmptyHistoryFallsBackWithoutEmbedding) {
  clients::HashingEmbedder e(32);
  const std::vector<RetrievedDocument> docs{{"d1", "", "first"}, {"d2", "", "second"}};
  const auto r = rerank::rerank_top_k(docs, {}, 1, {}, e);
  EXPECT_TRUE(r.no_memory_fallback);
  ASSERT_EQ(r.chunks.size(), 1u);
  EXPECT_EQ(r.chunks[0].chunk.doc_id, "d1");
  EXPECT_EQ(e.calls(), 0u);
}

TEST(Rerank, MaxAggregationPicksClosestMemory) {
  std::map<std::string, std::vector<double>> table{{"east", {1, 0}}, {"north", {0, 1}}};
  testkit::TableEmbedder e(2, table);
  const std::vector<RetrievedDocument> docs{{"e", "", "east"}, {"n", "", "north"}};
  const std::vector<memory::MemoryRecord> h{record({1, 0}), record({0.1, 1}), record({0.2, 1})};
  rerank::RerankOptions mean, max;
  max.aggregation = kernels::Aggregation::max;
  EXPECT_EQ(rerank::rerank_top_k(docs, h, 1, {}, e, mean).chunks[0].chunk.doc_id, "n");
  const auto m = rerank::rerank_top_k(docs, h, 1, {}, e, max);
  EXPECT_EQ(m.chunks[0].chunk.doc_id, "e");
  EXPECT_DOUBLE_EQ(m.chunks[0].score, 1.0);
}

TEST(Rerank, MatchesOracleOnMultiChunkDocs) {
  std::mt19937_64 rng(77);
  for (int t = 0; t < 100; ++t) {
    std::map<std::string, std::vector<double>> table;
    std::vector<RetrievedDocument> docs;
    const ChunkPolicy policy{12, 0};
    for (int d = 0; d < 3; ++d) {
      RetrievedDocument doc{"doc" + std::to_string(d), "", ""};
      for (int s = 0; s < 3; ++s) doc.body += "s" + std::to_string(d) + std::to_string(s) + "-x.";
      docs.push_back(doc);
    }
    std::vector<testkit::OracleChunk> keys;
    std::vector<std::vector<double>> vecs;
    for (const auto& doc : docs)
      for (const auto& c : rerank::chunk_document(doc, policy)) {
        auto v = testkit::random_vector(rng, 5);
        table[c.text] = v;
        keys.push_back({c.doc_id, c.chunk_index, 0});
        vecs.push_back(v);
      }
    std::vector<memory::MemoryRecord> h;
    std::vector<std::vector<double>> hv;
    for (int i = 0; i < 3; ++i) {
      hv.push_back(testkit::random_vector(rng, 5));
      h.push_back(record(hv.back()));
      hv.back() = std::vector<double>(h.back().embedding.values().begin(), h.back().embedding.values().end());
    }
    testkit::TableEmbedder e(5, table);
    const auto got = rerank::rerank_top_k(docs, h, 4, policy, e);
    const auto want = testkit::score_and_sort(keys, vecs, hv, 4);
    ASSERT_EQ(got.chunks.size(), want.size());
    for (std::size_t i = 0; i < want.size(); ++i) {
      EXPECT_EQ(got.chunks[i].chunk.doc_id, want[i].doc_id);
      EXPECT_EQ(got.chunks[i].chunk.chunk_index, want[i].chunk_index);
      EXPECT_NEAR(got.chunks[i].score, want[i].score, 1e-12);
    }
  }
}

TEST(Budget, KeepsLongestFittingPrefix) {
  std::vector<rerank::ScoredChunk> g{{{"a", 0, "", "12345", {}}, 0.9}, {{"b", 0, "", "123", {}}, 0.8},
                                     {{"c", 0, "", "1", {}}, 0.7}};
  EXPECT_EQ(rerank::context_budget(g, 8).size(), 2u);
  EXPECT_EQ(rerank::context_budget(g, 9).size(), 3u);
  // Stops at the first chunk that does not fit, even if a later one would.
  EXPECT_EQ(rerank::context_budget(g, 7).size(), 1u);
}

TEST(Budget, TruncatesTopChunkWhenNothingFits) {
  std::vector<rerank::ScoredChunk> g{{{"a", 0, "", "abcdef", {}}, 0.9}};
  const auto out = rerank::context_budget(g, 4);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].chunk.text, std::string("abc") + std::string(rerank::kEllipsis));
  EXPECT_EQ(core::utf8_length(out[0].chunk.text), 4u);
  EXPECT_TRUE(rerank::context_budget({}, 4).empty());
}
