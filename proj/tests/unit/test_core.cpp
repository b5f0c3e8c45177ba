#include <gtest/gtest.h>

#include <random>

#include "himes/core/errors.hpp"
#include "himes/core/json_reply.hpp"
#include "himes/core/rouge.hpp"
#include "himes/core/text.hpp"
#include "himes/core/time.hpp"
#include "himes/core/vector.hpp"

#include "../support/oracles.hpp"

using namespace himes;

namespace {

std::vector<std::string> toks(std::string_view s) { return core::tokenize(s).tokens(); }

}  // namespace

TEST(Text, NormalizesCaseAndPunctuation) {
  EXPECT_EQ(core::normalize_text("  Hello,   WORLD!! "), "hello world");
  EXPECT_EQ(toks("Re-check: the A/B test."), (std::vector<std::string>{"re", "check", "the", "a", "b", "test"}));
  EXPECT_TRUE(core::tokenize(" ?! ").empty());
}

TEST(Text, CountsCodePoints) {
  EXPECT_EQ(core::utf8_length("abc"), 3u);
  EXPECT_EQ(core::utf8_length("caf\xC3\xA9"), 4u);
  const auto b = core::utf8_boundaries("a\xC3\xA9z");
  ASSERT_EQ(b.size(), 4u);
  EXPECT_EQ(b.back(), 4u);
}

TEST(Rouge, KnownValues) {
  EXPECT_DOUBLE_EQ(core::rouge_l_f1(core::tokenize("a b c d"), core::tokenize("a b c d")), 1.0);
  EXPECT_DOUBLE_EQ(core::rouge_l_f1(core::tokenize("x y"), core::tokenize("a b")), 0.0);
  EXPECT_DOUBLE_EQ(core::rouge_l_f1(core::tokenize(""), core::tokenize("a b")), 0.0);
  // LCS("a b c", "a c") = 2 → P = 2/3, R = 1.
  EXPECT_NEAR(core::rouge_l_f1(core::tokenize("a b c"), core::tokenize("a c")), 0.8, 1e-15);
}

TEST(Rouge, LcsMatchesBruteForce) {
  std::mt19937_64 rng(9);
  std::uniform_int_distribution<int> len(0, 9), sym(0, 3);
  for (int i = 0; i < 300; ++i) {
    std::vector<std::string> a(len(rng)), b(len(rng));
    for (auto& t : a) t = std::string(1, static_cast<char>('a' + sym(rng)));
    for (auto& t : b) t = std::string(1, static_cast<char>('a' + sym(rng)));
    ASSERT_EQ(core::lcs_length(core::TokenSequence(a), core::TokenSequence(b)), testkit::brute_force_lcs(a, b));
  }
}

TEST(Vector, CosineIsClampedAndScaleFree) {
  const core::EmbeddingVector a({1.0, 2.0, 3.0});
  const core::EmbeddingVector b({2.0, 4.0, 6.0});
  EXPECT_DOUBLE_EQ(core::cosine_similarity(a, b), 1.0);
  EXPECT_NEAR(core::cosine_similarity(a, core::EmbeddingVector({-1.0, -2.0, -3.0})), -1.0, 1e-15);
  EXPECT_TRUE(core::EmbeddingVector::normalized({3.0, 4.0}).is_unit());
}

TEST(Vector, RejectsBadInput) {
  EXPECT_THROW(core::cosine_similarity(core::EmbeddingVector({1.0}), core::EmbeddingVector({1.0, 0.0})),
               DimensionError);
  EXPECT_THROW(core::cosine_similarity(core::EmbeddingVector({0.0, 0.0}), core::EmbeddingVector({1.0, 0.0})),
               ZeroVectorError);
}

TEST(Time, Rfc3339RoundTrip) {
  const auto ts = core::parse_rfc3339("2024-03-01T09:00:00Z");
  EXPECT_EQ(core::format_rfc3339(ts), "2024-03-01T09:00:00Z");
  EXPECT_EQ(core::parse_rfc3339("2024-03-01T10:00:00+01:00"), ts);
  EXPECT_THROW(core::parse_rfc3339("yesterday"), ValidationError);
}

TEST(JsonReply, FindsObjectInChatter) {
  auto j = core::extract_json_object("Sure! {\"query_rewrited\": \"x\"} hope that helps");
  ASSERT_TRUE(j);
  EXPECT_EQ((*j)["query_rewrited"], "x");
  auto py = core::extract_json_object("{\"is_solved\": True, \"user_answer\": \"ok\"}");
  ASSERT_TRUE(py);
  EXPECT_EQ(core::parse_flag((*py)["is_solved"]), true);
  EXPECT_FALSE(core::extract_json_object("no braces"));
}

TEST(JsonReply, ScoreLine) {
  EXPECT_EQ(core::parse_score_reply("Score: 87"), 87);
  EXPECT_EQ(core::parse_score_reply("reasoning...\nscore: 140"), 100);
  EXPECT_FALSE(core::parse_score_reply("I think it's fine"));
}
