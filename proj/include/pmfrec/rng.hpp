#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "pmfrec/types.hpp"

namespace pmfrec {

/// SplitMix64 finalizer; used to derive independent stream seeds.
inline std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a,
                                 std::uint64_t b = 0) {
  return mix_seed(mix_seed(mix_seed(base) ^ a) ^ (b * 0x632be59bd9b4e019ULL));
}

/// Seeded random source with platform-independent output.
///
/// std::mt19937_64 is fully specified by the standard, but the standard
/// distributions are not, so everything here is derived from raw 64-bit
/// draws.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform on [0, 1) with 53 bits of resolution.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  /// Uniform on (0, 1].
  double uniform_open_low() { return 1.0 - uniform(); }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double r = std::sqrt(-2.0 * std::log(uniform_open_low()));
    const double theta = 2.0 * M_PI * uniform();
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  double exponential() { return -std::log(uniform_open_low()); }

  /// Uniform integer in [0, n).
  Index below(Index n) {
    return static_cast<Index>(uniform() * static_cast<double>(n));
  }

  /// Draw an index from a column of cumulative probabilities (last entry
  /// treated as 1).
  template <typename Derived>
  Index categorical_cdf(const Eigen::MatrixBase<Derived>& cdf) {
    const double u = uniform() * static_cast<double>(cdf(cdf.size() - 1));
    for (Index i = 0; i + 1 < cdf.size(); ++i) {
      if (u < static_cast<double>(cdf(i))) return i;
    }
    return cdf.size() - 1;
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace pmfrec
