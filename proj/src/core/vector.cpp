#include "himes/core/vector.hpp"

#include <string>

#include "himes/core/errors.hpp"

namespace himes::core {

EmbeddingVector::EmbeddingVector(std::vector<double> values)
    : values_(std::move(values)), norm_(l2_norm(values_)), unit_(std::abs(norm_ - 1.0) <= kUnitNormTolerance) {}

EmbeddingVector EmbeddingVector::normalized(std::vector<double> values) {
  const double n = l2_norm(values);
  if (!(n > 0.0) || !std::isfinite(n)) throw ZeroVectorError("cannot normalize a zero or non-finite embedding");
  for (double& v : values) v /= n;
  return EmbeddingVector(std::move(values));
}

double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.dimension() != b.dimension())
    throw DimensionError("embedding dimension mismatch: " + std::to_string(a.dimension()) + " vs " +
                         std::to_string(b.dimension()));
  if (!(a.norm() > 0.0) || !(b.norm() > 0.0)) throw ZeroVectorError("cosine similarity of a zero vector");
  return cosine_from_dot(dot(a.values(), b.values()), a.norm(), a.is_unit(), b.norm(), b.is_unit());
}

}  // namespace himes::core
