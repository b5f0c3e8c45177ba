#include "himes/core/rouge.hpp"

#include <algorithm>
#include <vector>

namespace himes::core {

std::size_t lcs_length(const TokenSequence& a, const TokenSequence& b) {
  const TokenSequence& outer = a.size() >= b.size() ? a : b;
  const TokenSequence& inner = a.size() >= b.size() ? b : a;
  if (inner.empty()) return 0;

  std::vector<std::size_t> prev(inner.size() + 1, 0), cur(inner.size() + 1, 0);
  for (std::size_t i = 1; i <= outer.size(); ++i) {
    for (std::size_t j = 1; j <= inner.size(); ++j) {
      cur[j] = outer[i - 1] == inner[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[inner.size()];
}

double rouge_l_f1(const TokenSequence& pred, const TokenSequence& ref) {
  if (pred.empty() || ref.empty()) return 0.0;
  const std::size_t lcs = lcs_length(pred, ref);
  if (lcs == 0) return 0.0;
  const double precision = static_cast<double>(lcs) / static_cast<double>(pred.size());
  const double recall = static_cast<double>(lcs) / static_cast<double>(ref.size());
  return 2.0 * precision * recall / (precision + recall);
}

}  // namespace himes::core
