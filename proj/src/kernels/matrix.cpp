#include "himes/kernels/matrix.hpp"

#include <string>

#include "himes/core/errors.hpp"

namespace himes::kernels {

void EmbeddingMatrix::push_back(const core::EmbeddingVector& v) {
  if (v.dimension() != dim_)
    throw DimensionError("matrix expects dimension " + std::to_string(dim_) + ", got " +
                         std::to_string(v.dimension()));
  if (!(v.norm() > 0.0)) throw ZeroVectorError("zero embedding cannot be indexed");
  data_.insert(data_.end(), v.values().begin(), v.values().end());
  norms_.push_back(v.norm());
  unit_.push_back(v.is_unit() ? 1 : 0);
}

void EmbeddingMatrix::reserve(std::size_t rows) {
  data_.reserve(rows * dim_);
  norms_.reserve(rows);
  unit_.reserve(rows);
}

core::EmbeddingVector EmbeddingMatrix::vector(std::size_t i) const {
  const auto r = row(i);
  return core::EmbeddingVector(std::vector<double>(r.begin(), r.end()));
}

}  // namespace himes::kernels
