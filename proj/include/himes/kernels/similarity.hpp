#pragma once

#include <span>

#include "himes/core/vector.hpp"
#include "himes/kernels/matrix.hpp"

namespace himes::kernels {

enum class Execution { serial, parallel };

enum class Aggregation { mean, max };

// Every kernel writes one score per row of its first matrix argument into
// `out`, which must already have that many elements. Row results are
// independent, so the serial and parallel variants agree bit for bit.

namespace serial {

/// out[i] = cos(query, rows[i]).
void cosine_scan(const core::EmbeddingVector& query, const EmbeddingMatrix& rows, std::span<double> out);

/// out[i] = aggregate over j of cos(chunks[i], history[j]); history must be non-empty.
void history_affinity(const EmbeddingMatrix& chunks, const EmbeddingMatrix& history, Aggregation agg,
                      std::span<double> out);

}  // namespace serial

namespace parallel {

void cosine_scan(const core::EmbeddingVector& query, const EmbeddingMatrix& rows, std::span<double> out);

void history_affinity(const EmbeddingMatrix& chunks, const EmbeddingMatrix& history, Aggregation agg,
                      std::span<double> out);

}  // namespace parallel

/// Dispatching front ends. They validate shapes and throw DimensionError / ZeroVectorError.
void cosine_scan(Execution exec, const core::EmbeddingVector& query, const EmbeddingMatrix& rows,
                 std::span<double> out);

void history_affinity(Execution exec, const EmbeddingMatrix& chunks, const EmbeddingMatrix& history, Aggregation agg,
                      std::span<double> out);

/// Rows below this count are scanned serially even under Execution::parallel.
inline constexpr std::size_t kParallelRowThreshold = 64;

}  // namespace himes::kernels
