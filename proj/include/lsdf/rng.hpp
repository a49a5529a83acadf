#pragma once

#include <cstdint>
#include <random>

namespace lsdf {

/// Deterministic random stream. The engine (mt19937_64) and seed_seq are
/// fully specified by the C++ standard, and the conversions below avoid the
/// implementation-defined std:: distributions, so draws are identical on
/// every conforming platform.
class RandomStream {
 public:
  /// Independent stream keyed by (seed, a, b, c).
  RandomStream(std::uint64_t seed, std::uint64_t a = 0, std::uint64_t b = 0, std::uint64_t c = 0) {
    std::seed_seq seq{lo(seed), hi(seed), lo(a), hi(a), lo(b), hi(b), lo(c), hi(c)};
    engine_.seed(seq);
  }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform in [lo, hi]; returns lo when the interval is degenerate.
  double uniform(double low, double high) {
    if (!(high > low)) return low;
    return low + (high - low) * uniform();
  }

  /// Uniform integer in [0, bound) by rejection; bound > 0.
  std::uint64_t below(std::uint64_t bound) {
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % bound);
    std::uint64_t v = 0;
    do {
      v = engine_();
    } while (v >= limit);
    return v % bound;
  }

 private:
  static std::uint32_t lo(std::uint64_t v) { return static_cast<std::uint32_t>(v); }
  static std::uint32_t hi(std::uint64_t v) { return static_cast<std::uint32_t>(v >> 32); }

  std::mt19937_64 engine_;
};

}  // namespace lsdf
