#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "himes/core/vector.hpp"

namespace himes::kernels {

/// Row-major block of embeddings sharing one dimension, with per-row norms
/// cached so scans never recompute them.
class EmbeddingMatrix {
 public:
  explicit EmbeddingMatrix(std::size_t dimension = 0) : dim_(dimension) {}

  void push_back(const core::EmbeddingVector& v);
  void reserve(std::size_t rows);

  std::size_t dimension() const noexcept { return dim_; }
  std::size_t rows() const noexcept { return norms_.size(); }
  bool empty() const noexcept { return norms_.empty(); }

  std::span<const double> row(std::size_t i) const noexcept { return {data_.data() + i * dim_, dim_}; }
  double norm(std::size_t i) const noexcept { return norms_[i]; }
  bool unit(std::size_t i) const noexcept { return unit_[i] != 0; }

  core::EmbeddingVector vector(std::size_t i) const;

 private:
  std::size_t dim_;
  std::vector<double> data_;
  std::vector<double> norms_;
  std::vector<unsigned char> unit_;
};

}  // namespace himes::kernels
