#include "himes/kernels/similarity.hpp"

#include <algorithm>
#include <limits>
#include <string>

#include "himes/core/errors.hpp"

namespace himes::kernels {

namespace {

inline double row_cosine(std::span<const double> q, double qn, bool qu, const EmbeddingMatrix& m, std::size_t i) {
  return core::cosine_from_dot(core::dot(q, m.row(i)), qn, qu, m.norm(i), m.unit(i));
}

inline double affinity_row(const EmbeddingMatrix& chunks, std::size_t i, const EmbeddingMatrix& history,
                           Aggregation agg) {
  const auto c = chunks.row(i);
  const double cn = chunks.norm(i);
  const bool cu = chunks.unit(i);
  if (agg == Aggregation::max) {
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < history.rows(); ++j) best = std::max(best, row_cosine(c, cn, cu, history, j));
    return best;
  }
  double sum = 0.0;
  for (std::size_t j = 0; j < history.rows(); ++j) sum += row_cosine(c, cn, cu, history, j);
  return sum / static_cast<double>(history.rows());
}

void check_scan(const core::EmbeddingVector& query, const EmbeddingMatrix& rows, std::span<double> out) {
  if (out.size() != rows.rows()) throw ValidationError("output span does not match row count");
  if (rows.empty()) return;
  if (query.dimension() != rows.dimension())
    throw DimensionError("query dimension " + std::to_string(query.dimension()) + " vs index dimension " +
                         std::to_string(rows.dimension()));
  if (!(query.norm() > 0.0)) throw ZeroVectorError("zero query embedding");
}

void check_affinity(const EmbeddingMatrix& chunks, const EmbeddingMatrix& history, std::span<double> out) {
  if (out.size() != chunks.rows()) throw ValidationError("output span does not match chunk count");
  if (history.empty()) throw ValidationError("history affinity needs at least one historical embedding");
  if (!chunks.empty() && chunks.dimension() != history.dimension())
    throw DimensionError("chunk dimension " + std::to_string(chunks.dimension()) + " vs history dimension " +
                         std::to_string(history.dimension()));
}

}  // namespace

namespace serial {

void cosine_scan(const core::EmbeddingVector& query, const EmbeddingMatrix& rows, std::span<double> out) {
  const auto q = query.values();
  for (std::size_t i = 0; i < rows.rows(); ++i) out[i] = row_cosine(q, query.norm(), query.is_unit(), rows, i);
}

void history_affinity(const EmbeddingMatrix& chunks, const EmbeddingMatrix& history, Aggregation agg,
                      std::span<double> out) {
  for (std::size_t i = 0; i < chunks.rows(); ++i) out[i] = affinity_row(chunks, i, history, agg);
}

}  // namespace serial

namespace parallel {

void cosine_scan(const core::EmbeddingVector& query, const EmbeddingMatrix& rows, std::span<double> out) {
  const auto q = query.values();
  const double qn = query.norm();
  const bool qu = query.is_unit();
  const auto n = static_cast<std::ptrdiff_t>(rows.rows());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) out[i] = row_cosine(q, qn, qu, rows, static_cast<std::size_t>(i));
}

void history_affinity(const EmbeddingMatrix& chunks, const EmbeddingMatrix& history, Aggregation agg,
                      std::span<double> out) {
  const auto n = static_cast<std::ptrdiff_t>(chunks.rows());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) out[i] = affinity_row(chunks, static_cast<std::size_t>(i), history, agg);
}

}  // namespace parallel

void cosine_scan(Execution exec, const core::EmbeddingVector& query, const EmbeddingMatrix& rows,
                 std::span<double> out) {
  check_scan(query, rows, out);
  if (exec == Execution::parallel && rows.rows() >= kParallelRowThreshold)
    parallel::cosine_scan(query, rows, out);
  else
    serial::cosine_scan(query, rows, out);
}

void history_affinity(Execution exec, const EmbeddingMatrix& chunks, const EmbeddingMatrix& history, Aggregation agg,
                      std::span<double> out) {
  check_affinity(chunks, history, out);
  if (exec == Execution::parallel && chunks.rows() * history.rows() >= kParallelRowThreshold)
    parallel::history_affinity(chunks, history, agg, out);
  else
    serial::history_affinity(chunks, history, agg, out);
}

}  // namespace himes::kernels
