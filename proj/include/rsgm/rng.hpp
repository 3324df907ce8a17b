#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <limits>

namespace rsgm {

/// SplitMix64 finalizer: a bijective 64-bit mixing function.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t splitmix64_next(std::uint64_t& state) {
  state += 0x9E3779B97F4A7C15ULL;
  return mix64(state);
}

/// Folds a path of counters (experiment index, h index, trajectory id, ...)
/// into one stream id. Distinct paths give distinct ids with overwhelming
/// probability; the result does not depend on any execution order.
constexpr std::uint64_t derive_stream(std::initializer_list<std::uint64_t> path) {
  std::uint64_t acc = 0x6A09E667F3BCC909ULL;
  for (std::uint64_t p : path) acc = mix64(acc ^ mix64(p + 0x9E3779B97F4A7C15ULL));
  return acc;
}

/**
 * xoshiro256** generator with counter-based stream splitting.
 *
 * Stream `s` of master seed `m` is seeded by running SplitMix64 from the
 * initial value `m ^ mix64(s + golden)` and taking four outputs as the
 * xoshiro state. Every trajectory of an experiment owns its stream, indexed
 * by its position, so results never depend on how work is scheduled.
 *
 * Satisfies UniformRandomBitGenerator, but the sampler only uses uniform()
 * and normal(), which are implemented here so output is identical across
 * standard libraries.
 */
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0) {
    std::uint64_t sm = seed ^ mix64(stream + 0x9E3779B97F4A7C15ULL);
    for (auto& word : s_) word = splitmix64_next(sm);
  }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  /// Standard normal via the Marsaglia polar method.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    has_spare_ = true;
    return u * f;
  }

 private:
  static constexpr std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  std::uint64_t s_[4]{};
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace rsgm
