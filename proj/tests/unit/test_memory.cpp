#include <gtest/gtest.h>

#include <fstream>
#include <random>
#include <sstream>

#include "himes/clients/stubs.hpp"
#include "himes/memory/classifier.hpp"
#include "himes/memory/rar.hpp"
#include "himes/memory/store.hpp"

#include "../support/oracles.hpp"

using namespace himes;
using memory::PartitionKey;
using memory::RecallScope;

namespace {

const PartitionKey kTravel{"Travel", "Itinerary planning"};
const PartitionKey kDining{"Dining", "Cuisine types"};

core::EmbeddingVector unit(std::vector<double> v) { return core::EmbeddingVector::normalized(std::move(v)); }

std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("himes-memtest-" + name + "-" + std::to_string(::getpid()));
  std::filesystem::remove_all(p);
  return p;
}

}  // namespace

TEST(Taxonomy, ShippedCounts) {
  const auto t = memory::TopicTaxonomy::shipped_default();
  EXPECT_EQ(t.categories().size(), 16u);
  EXPECT_EQ(t.pair_count(), 64u);
  EXPECT_TRUE(t.contains(kTravel));
  EXPECT_TRUE(t.contains(memory::TopicTaxonomy::fallback()));
  EXPECT_FALSE(t.contains({"Travel", "Cuisine types"}));
}

TEST(Taxonomy, MinimalAndInvalidDocuments) {
  const auto one = memory::TopicTaxonomy::from_json_text(R"({"categories":[{"name":"Travel","subtopics":["Itinerary planning"]}]})");
  EXPECT_EQ(one.pair_count(), 1u);
  EXPECT_THROW(memory::TopicTaxonomy::from_json_text("[]"), ValidationError);
  EXPECT_THROW(memory::TopicTaxonomy::from_json_text(R"({"categories":[{"name":"A","subtopics":[]}]})"), ValidationError);
  EXPECT_THROW(memory::TopicTaxonomy::from_json_text(
                   R"({"categories":[{"name":"A","subtopics":["x"]},{"name":"A","subtopics":["y"]}]})"),
               ValidationError);
  EXPECT_THROW(memory::TopicTaxonomy::from_json_text(R"({"categories":[{"name":"_unclassified","subtopics":["x"]}]})"),
               ValidationError);
}

TEST(Classifier, OutOfTaxonomyLabelFallsBack) {
  const auto t = memory::TopicTaxonomy::shipped_default();
  memory::KeywordClassifier kw({{"train", kTravel}, {"pasta", {"Dining", "Pasta shapes"}}});
  auto ok = memory::classify_query("Which train goes to Kyoto?", t, kw);
  EXPECT_EQ(ok.key, kTravel);
  EXPECT_FALSE(ok.warning);
  auto bad = memory::classify_query("Best pasta in town", t, kw);
  EXPECT_EQ(bad.key, memory::TopicTaxonomy::fallback());
  EXPECT_TRUE(bad.warning);
  auto none = memory::classify_query("hello there", t, kw);
  EXPECT_EQ(none.key, memory::TopicTaxonomy::fallback());
}

TEST(Classifier, ChatLabelParsed) {
  const auto t = memory::TopicTaxonomy::shipped_default();
  clients::ScriptedChatClient chat({R"({"topic": "Dining", "subtopic": "Cuisine types"})"});
  memory::ChatTopicClassifier c(chat);
  EXPECT_EQ(memory::classify_query("Where is good ramen?", t, c).key, kDining);
  EXPECT_NE(memory::ChatTopicClassifier::render_prompt("q", t).find("Itinerary planning"), std::string::npos);
}

TEST(Store, RecallIsPerUserAndRanked) {
  memory::MemoryStore s(memory::TopicTaxonomy::shipped_default(), 2);
  const auto a = s.store_query("u1", "east", kTravel, unit({1, 0}), {});
  s.store_query("u1", "north-east", kTravel, unit({1, 1}), {});
  s.store_query("u2", "east too", kTravel, unit({1, 0}), {});
  const auto r = s.recall_top_n("u1", unit({1, 0}), 5, RecallScope::global());
  ASSERT_EQ(r.size(), 2u);
  EXPECT_EQ(r[0].record.id, a);
  EXPECT_DOUBLE_EQ(r[0].similarity, 1.0);
  EXPECT_GT(r[0].similarity, r[1].similarity);
  EXPECT_TRUE(s.recall_top_n("nobody", unit({1, 0}), 5, RecallScope::global()).empty());
}

TEST(Store, PartitionThenGlobalTopsUp) {
  memory::MemoryStore s(memory::TopicTaxonomy::shipped_default(), 2);
  s.store_query("u", "trip", kTravel, unit({1, 0}), {});
  s.store_query("u", "food", kDining, unit({0, 1}), {});
  EXPECT_EQ(s.recall_top_n("u", unit({1, 0}), 2, RecallScope::partition(kTravel)).size(), 1u);
  EXPECT_EQ(s.recall_top_n("u", unit({1, 0}), 2, RecallScope::partition_then_global(kTravel)).size(), 2u);
  EXPECT_EQ(s.candidate_set_size(RecallScope::partition(kTravel)), 1u);
  EXPECT_EQ(s.candidate_set_size(RecallScope::global()), 2u);
}

TEST(Store, RejectsBadRecords) {
  memory::MemoryStore s(memory::TopicTaxonomy::shipped_default(), 2);
  EXPECT_THROW(s.store_query("u", "q", kTravel, unit({1, 0, 0}), {}), DimensionError);
  EXPECT_THROW(s.store_query("u", "q", {"Travel", "Nope"}, unit({1, 0}), {}), TaxonomyError);
  EXPECT_THROW(s.store_query("u", "", kTravel, unit({1, 0}), {}), ValidationError);
  EXPECT_THROW(s.recall_top_n("u", unit({1, 0}), 0, RecallScope::global()), ValidationError);
  EXPECT_THROW(s.recall_top_n("u", unit({1, 0, 0}), 1, RecallScope::global()), DimensionError);
  EXPECT_EQ(s.size(), 0u);
}

TEST(Store, PartitionRecallIsFilteredGlobal) {
  std::mt19937_64 rng(5);
  const auto t = memory::TopicTaxonomy::shipped_default();
  const auto keys = t.partitions();
  memory::MemoryStore s(t, 4);
  for (int i = 0; i < 120; ++i)
    s.store_query("u", "q" + std::to_string(i), keys[static_cast<std::size_t>(i) % 6],
                  unit(testkit::random_vector(rng, 4)), {});
  const auto q = unit(testkit::random_vector(rng, 4));
  const auto global = s.recall_top_n("u", q, 1000, RecallScope::global());
  for (std::size_t k = 0; k < 6; ++k) {
    std::vector<std::uint64_t> expect, got;
    for (const auto& r : global)
      if (r.record.partition == keys[k]) expect.push_back(r.record.id.value);
    for (const auto& r : s.recall_top_n("u", q, 1000, RecallScope::partition(keys[k]))) got.push_back(r.record.id.value);
    EXPECT_EQ(got, expect);  // same order too
  }
}

TEST(Store, SerialAndParallelRecallAgree) {
  std::mt19937_64 rng(6);
  const auto t = memory::TopicTaxonomy::shipped_default();
  memory::MemoryStore serial(t, 8, {kernels::Execution::serial, false});
  memory::MemoryStore parallel(t, 8, {kernels::Execution::parallel, false});
  for (int i = 0; i < 500; ++i) {
    const auto v = unit(testkit::random_vector(rng, 8));
    serial.store_query("u", "q" + std::to_string(i), kTravel, v, {});
    parallel.store_query("u", "q" + std::to_string(i), kTravel, v, {});
  }
  const auto q = unit(testkit::random_vector(rng, 8));
  const auto a = serial.recall_top_n("u", q, 20, RecallScope::global());
  const auto b = parallel.recall_top_n("u", q, 20, RecallScope::global());
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].record.id, b[i].record.id);
    EXPECT_EQ(a[i].similarity, b[i].similarity);
  }
}

TEST(Store, PersistsAcrossReopenAndLocks) {
  const auto dir = temp_dir("persist");
  const auto t = memory::TopicTaxonomy::shipped_default();
  memory::RecordId id;
  {
    auto s = memory::MemoryStore::open(dir, t, 2);
    id = s->store_query("u", "remember me", kTravel, unit({0.6, 0.8}), core::parse_rfc3339("2024-01-02T03:04:05Z"));
    EXPECT_THROW(memory::MemoryStore::open(dir, t, 2), StoreUnavailableError);
  }
  auto s = memory::MemoryStore::open(dir, t, 2);
  ASSERT_EQ(s->size(), 1u);
  const auto r = s->records_for_user("u");
  ASSERT_EQ(r.size(), 1u);
  EXPECT_EQ(r[0].id, id);
  EXPECT_EQ(r[0].query_text, "remember me");
  EXPECT_EQ(core::format_rfc3339(r[0].timestamp), "2024-01-02T03:04:05Z");
  // Fresh ids continue after the reopened log.
  EXPECT_GT(s->store_query("u", "again", kTravel, unit({1, 0}), {}).value, id.value);
  s.reset();
  std::filesystem::remove_all(dir);
}

TEST(Store, CloneIsIndependent) {
  memory::MemoryStore s(memory::TopicTaxonomy::shipped_default(), 2);
  s.store_query("u", "a", kTravel, unit({1, 0}), {});
  auto c = s.clone_in_memory();
  c->store_query("u", "b", kTravel, unit({0, 1}), {});
  EXPECT_EQ(s.size(), 1u);
  EXPECT_EQ(c->size(), 2u);
}

TEST(Store, RecentForUserNewestFirst) {
  memory::MemoryStore s(memory::TopicTaxonomy::shipped_default(), 2);
  s.store_query("u", "old", kTravel, unit({1, 0}), core::parse_rfc3339("2024-01-01T00:00:00Z"));
  s.store_query("u", "new", kDining, unit({0, 1}), core::parse_rfc3339("2024-02-01T00:00:00Z"));
  const auto r = s.recent_for_user("u", 1);
  ASSERT_EQ(r.size(), 1u);
  EXPECT_EQ(r[0].query_text, "new");
}

TEST(Rar, HandCountedFixtures) {
  clients::HashingEmbedder e(256);
  std::ifstream in(testkit::fixture("rar_sessions.jsonl"));
  const auto sessions = memory::read_sessions(in);
  ASSERT_EQ(sessions.size(), 10u);
  const auto r = memory::repeated_asking_rate(sessions, e);
  EXPECT_EQ(r.repeated, 8u);
  EXPECT_EQ(r.total, 10u);
  EXPECT_EQ(r.rate, 0.8);
}

TEST(Rar, RepeatsWithinOneSessionDoNotCount) {
  clients::HashingEmbedder e(64);
  const std::vector<memory::Session> s{{"u", {"same thing", "same thing"}}, {"v", {"same thing"}}};
  EXPECT_EQ(memory::repeated_asking_rate(s, e).repeated, 0u);
  EXPECT_THROW(memory::repeated_asking_rate(s, e, 0.0), ValidationError);
  EXPECT_EQ(memory::repeated_asking_rate({}, e).rate, 0.0);
}

TEST(Rar, BadSessionLinesAreNamed) {
  std::istringstream in("{\"user_id\":\"u\",\"queries\":[\"a\"]}\nnot json\n");
  try {
    memory::read_sessions(in);
    FAIL() << "expected a validation error";
  } catch (const ValidationError& e) {
    ASSERT_EQ(e.issues().size(), 1u);
    EXPECT_NE(e.issues()[0].find("line 2"), std::string::npos);
  }
}
