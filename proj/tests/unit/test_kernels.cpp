#include <gtest/gtest.h>

#include <random>

#include "himes/kernels/similarity.hpp"

#include "../support/oracles.hpp"

using namespace himes;

namespace {

kernels::EmbeddingMatrix random_matrix(std::mt19937_64& rng, std::size_t rows, std::size_t dim, bool unit) {
  kernels::EmbeddingMatrix m(dim);
  for (std::size_t i = 0; i < rows; ++i) {
    auto v = testkit::random_vector(rng, dim);
    m.push_back(unit ? core::EmbeddingVector::normalized(v) : core::EmbeddingVector(v));
  }
  return m;
}

}  // namespace

// Row counts straddle the threshold where the parallel path takes over.
class KernelRows : public ::testing::TestWithParam<std::size_t> {};

TEST_P(KernelRows, ParallelScanEqualsSerial) {
  std::mt19937_64 rng(GetParam());
  const auto rows = random_matrix(rng, GetParam(), 16, GetParam() % 2 == 0);
  const core::EmbeddingVector q(testkit::random_vector(rng, 16));
  std::vector<double> a(rows.rows()), b(rows.rows());
  kernels::cosine_scan(kernels::Execution::serial, q, rows, a);
  kernels::cosine_scan(kernels::Execution::parallel, q, rows, b);
  EXPECT_EQ(a, b);
  const auto qv = std::vector<double>(q.values().begin(), q.values().end());
  for (std::size_t i = 0; i < rows.rows(); ++i) {
    const auto r = rows.row(i);
    EXPECT_NEAR(a[i], testkit::naive_cosine(qv, {r.begin(), r.end()}), 1e-12);
  }
}

TEST_P(KernelRows, ParallelAffinityEqualsSerial) {
  std::mt19937_64 rng(GetParam() + 100);
  const auto chunks = random_matrix(rng, GetParam(), 12, false);
  const auto history = random_matrix(rng, 5, 12, true);
  for (auto agg : {kernels::Aggregation::mean, kernels::Aggregation::max}) {
    std::vector<double> a(chunks.rows()), b(chunks.rows());
    kernels::history_affinity(kernels::Execution::serial, chunks, history, agg, a);
    kernels::history_affinity(kernels::Execution::parallel, chunks, history, agg, b);
    EXPECT_EQ(a, b);
  }
}

INSTANTIATE_TEST_SUITE_P(Sizes, KernelRows, ::testing::Values(0, 1, 7, 63, 64, 65, 300));

TEST(Kernels, AffinityAggregations) {
  kernels::EmbeddingMatrix chunks(2), history(2);
  chunks.push_back(core::EmbeddingVector::normalized({1.0, 0.0}));
  history.push_back(core::EmbeddingVector::normalized({1.0, 0.0}));
  history.push_back(core::EmbeddingVector::normalized({0.0, 1.0}));
  std::vector<double> out(1);
  kernels::history_affinity(kernels::Execution::serial, chunks, history, kernels::Aggregation::mean, out);
  EXPECT_DOUBLE_EQ(out[0], 0.5);
  kernels::history_affinity(kernels::Execution::serial, chunks, history, kernels::Aggregation::max, out);
  EXPECT_DOUBLE_EQ(out[0], 1.0);
}

TEST(Kernels, MatrixRejectsWrongDimension) {
  kernels::EmbeddingMatrix m(3);
  EXPECT_THROW(m.push_back(core::EmbeddingVector({1.0, 2.0})), DimensionError);
}
