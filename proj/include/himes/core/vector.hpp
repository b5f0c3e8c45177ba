#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace himes::core {

inline constexpr double kUnitNormTolerance = 1e-6;

/// Dense embedding. The unit flag is set only when ‖v‖₂ is within
/// kUnitNormTolerance of one, and it selects the plain-dot fast path in
/// similarity computations.
class EmbeddingVector {
 public:
  EmbeddingVector() = default;
  explicit EmbeddingVector(std::vector<double> values);

  /// Scales to unit length. Throws ZeroVectorError on a zero or non-finite vector.
  static EmbeddingVector normalized(std::vector<double> values);

  std::span<const double> values() const noexcept { return values_; }
  std::size_t dimension() const noexcept { return values_.size(); }
  double norm() const noexcept { return norm_; }
  bool is_unit() const noexcept { return unit_; }

  friend bool operator==(const EmbeddingVector& a, const EmbeddingVector& b) { return a.values_ == b.values_; }

 private:
  std::vector<double> values_;
  double norm_ = 0.0;
  bool unit_ = false;
};

/// Sequential dot product (no reassociation, so results are reproducible bit for bit).
inline double dot(std::span<const double> a, std::span<const double> b) noexcept {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

inline double l2_norm(std::span<const double> v) noexcept { return std::sqrt(dot(v, v)); }

/// The single place a dot product becomes a cosine; shared by the scalar
/// API and the batch kernels so both agree exactly. Rounding noise past ±1 is clamped.
inline double cosine_from_dot(double d, double norm_a, bool unit_a, double norm_b, bool unit_b) noexcept {
  const double c = (unit_a && unit_b) ? d : d / (norm_a * norm_b);
  return c > 1.0 ? 1.0 : (c < -1.0 ? -1.0 : c);
}

/// Throws DimensionError on mismatched sizes, ZeroVectorError on a zero vector.
double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b);

}  // namespace himes::core
