#pragma once

#include <cstdint>

namespace npcc {

/// Flop-count models for attention variants at N points, k neighbors and
/// feature width C.
inline uint64_t npaComplexity(uint64_t n, uint64_t k, uint64_t c) {
  return n * c * c + 2 * n * k * c * c + 8 * n * k * c + n * k;
}

inline uint64_t globalAttentionComplexity(uint64_t n, uint64_t c) {
  return 3 * n * c * c + 2 * n * n * c + n * n;
}

}  // namespace npcc
