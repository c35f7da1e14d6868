#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>

namespace decodet {

/// Seeded generator used everywhere randomness exists. Uniform and normal
/// variates are derived from the raw 64-bit stream by fixed arithmetic, so
/// a seed pins the exact output sequence independent of the standard
/// library's distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1) with 53 random mantissa bits.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via the Marsaglia polar method. The spare variate is
  /// discarded so every call consumes a fixed-form draw sequence.
  double normal() {
    for (;;) {
      double u = 2.0 * uniform() - 1.0;
      double v = 2.0 * uniform() - 1.0;
      double s = u * u + v * v;
      if (s > 0.0 && s < 1.0) {
        return u * std::sqrt(-2.0 * std::log(s) / s);
      }
    }
  }

  double normal(double mean, double stddev) {
    return mean + stddev * normal();
  }

  /// Rejection sampling from a normal restricted to [lo, hi]. Iteration cap
  /// signals a degenerate configuration instead of spinning forever.
  double truncated_normal(double mean, double stddev, double lo, double hi,
                          int max_iterations = 10000) {
    for (int i = 0; i < max_iterations; ++i) {
      double x = normal(mean, stddev);
      if (x >= lo && x <= hi) return x;
    }
    throw std::runtime_error(
        "truncated_normal: rejection sampling exceeded iteration cap; "
        "the [lo, hi] window carries almost no probability mass");
  }

  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    // Modulo bias is < 2^-40 for the ranges used here.
    return engine_() % n;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace decodet
