#pragma once

#include <stdexcept>
#include <vector>

namespace bandits {

// Fraction of user pairs on which two partitions agree (both together or
// both apart). Labels are categorical; with fewer than two elements there
// are no pairs, which counts as full agreement.
inline double rand_index(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("rand_index: partitions differ in size");
  }
  const std::size_t n = a.size();
  if (n < 2) return 1.0;
  long agree = 0;
  long pairs = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const bool together_a = a[i] == a[j];
      const bool together_b = b[i] == b[j];
      if (together_a == together_b) ++agree;
      ++pairs;
    }
  }
  return static_cast<double>(agree) / static_cast<double>(pairs);
}

}  // namespace bandits
