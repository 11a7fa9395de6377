#pragma once

#include <cmath>
#include <cstdint>

namespace lossdisc {

/// Seed for every randomized operation in the library.
struct Seed {
  std::uint64_t value = 0;
};

/// Deterministic counter-style generator (SplitMix64). All sampling in the
/// library goes through this class so that results are bit-reproducible
/// across platforms and independent of the standard library's distribution
/// implementations.
///
/// Stream splitting: `fork(k)` derives an independent substream from the
/// construction seed (not the evolving state), so a generator can be split
/// one substream per column / purpose / repetition regardless of how many
/// draws were already taken. Parallel schedules that assign one substream
/// per task therefore produce output independent of execution order.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : base_(seed), state_(seed) {}
  explicit Rng(Seed seed) : Rng(seed.value) {}

  /// Independent substream `k` of this generator's construction seed.
  Rng fork(std::uint64_t k) const {
    return Rng(mix(base_ ^ mix(k + 0x632be59bd9b4e019ULL)));
  }

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    return mix(state_);
  }

  /// Uniform double in [0, 1).
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  /// Uniform double in (0, 1].
  double uniform_open() {
    return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
  }

  /// Standard normal via Box-Muller. Uses two uniforms per draw and keeps no
  /// cached spare, so substreams stay in lockstep with draw counts.
  double normal() {
    const double u1 = uniform_open();
    const double u2 = uniform();
    constexpr double two_pi = 6.283185307179586476925286766559;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
  }

  /// Mean-zero Laplace with scale b (variance 2 b^2), by inverse CDF.
  double laplace(double scale) {
    const double u = uniform_open() - 0.5;
    const double s = u < 0.0 ? -1.0 : 1.0;
    return -scale * s * std::log1p(-2.0 * std::abs(u));
  }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xbf58476d1ce4e5b9ULL;
    z ^= z >> 27;
    z *= 0x94d049bb133111ebULL;
    z ^= z >> 31;
    return z;
  }

  std::uint64_t base_;
  std::uint64_t state_;
};

/// Name of the generator, recorded in output metadata.
inline constexpr const char* kRngName = "splitmix64";

}  // namespace lossdisc
