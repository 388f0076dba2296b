#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace kpcadon {

/// Deterministic random helpers. std::mt19937_64 has a fully specified output
/// sequence, but the standard distributions do not, so the mapping from raw
/// draws to doubles and to shuffles is written out here and never delegated
/// to <random> adapters. Identical seeds therefore produce identical streams
/// on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t raw() { return engine_(); }

  /// Uniform double in [0, 1): top 53 bits of one draw.
  double uniform01() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  /// Uniform double in [lo, hi).
  double uniform(double lo, double hi) {
    return lo + (hi - lo) * uniform01();
  }

  /// Uniform integer in [0, n); n must be positive. Plain modulo reduction,
  /// chosen for reproducibility (the bias is irrelevant at our sizes).
  std::size_t below(std::size_t n) {
    return static_cast<std::size_t>(engine_() % n);
  }

  /// In-place Fisher-Yates shuffle: for i = n-1 .. 1 swap v[i] with
  /// v[raw() % (i + 1)].
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const std::size_t j = below(i);
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace kpcadon
