#pragma once

#include <cstddef>

#include "himes/core/text.hpp"

namespace himes::core {

/// Length of the longest common subsequence. O(|a|·|b|) time, O(min) memory.
std::size_t lcs_length(const TokenSequence& a, const TokenSequence& b);

/// Rouge-L F-measure with β = 1. Zero when either side is empty or nothing matches.
double rouge_l_f1(const TokenSequence& pred, const TokenSequence& ref);

}  // namespace himes::core
