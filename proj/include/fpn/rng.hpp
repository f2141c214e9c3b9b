#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace fpn {

/// Deterministic random source. All draws are derived from raw 64-bit
/// outputs of a seeded mt19937_64, so identical seeds give identical
/// streams on every platform and standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform01() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  /// Uniform integer in {0, ..., n-1}, n >= 1.
  int uniform_int(int n) {
    int v = static_cast<int>(uniform01() * static_cast<double>(n));
    return v < n ? v : n - 1;
  }

  /// Inverse-CDF draw from a probability vector (sums to ~1).
  int draw(std::span<const double> probs) {
    const double u = uniform01();
    double acc = 0.0;
    int last_positive = 0;
    for (std::size_t k = 0; k < probs.size(); ++k) {
      if (probs[k] > 0.0) last_positive = static_cast<int>(k);
      acc += probs[k];
      if (u < acc) return static_cast<int>(k);
    }
    return last_positive;  // guards against rounding in the CDF
  }

  std::mt19937_64& raw() { return gen_; }

 private:
  std::mt19937_64 gen_;
};

}  // namespace fpn
