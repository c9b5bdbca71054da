#pragma once

// Seeded helpers drawn directly from mt19937_64 output words, bypassing the
// implementation-defined std distributions so that results are reproducible
// across standard libraries.

#include <random>
#include <vector>

namespace mpfc::detail {

inline double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform01(rng);
}

template <typename T>
inline void shuffle_indices(std::vector<T>& idx, std::mt19937_64& rng) {
  for (size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[rng() % i]);
}

}  // namespace mpfc::detail
