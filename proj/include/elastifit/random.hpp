#pragma once

// Reproducible random streams.
//
// Every stream is a std::mt19937_64 engine (its output sequence is fixed by
// the C++ standard) seeded from splitmix64(master seed, stream tag). All
// variates are produced by the transforms below rather than the
// implementation-defined <random> distributions, so a given seed yields the
// same numbers with any standard library. Changing the number of draws on
// one stream never perturbs another.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string_view>

namespace elastifit {

/// Bumped whenever a transform below changes its output for a fixed seed.
inline constexpr int kRandomStreamVersion = 1;

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// FNV-1a, used to turn stream names into tags.
inline constexpr std::uint64_t stream_tag(std::string_view name) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : name) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : engine_(splitmix64(seed)) {}

  RandomStream(std::uint64_t seed, std::string_view purpose, std::uint64_t index = 0)
      : engine_(splitmix64(splitmix64(seed ^ stream_tag(purpose)) + index)) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform on (0, 1], safe as a log argument.
  double uniform_open0() { return (static_cast<double>(engine_() >> 11) + 1.0) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Marsaglia's polar method; the spare variate is kept.
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
    const double m = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * m;
    has_spare_ = true;
    return u * m;
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// How the second parameter of N(0, x) is read.
enum class GaussianScale { Variance, StdDev };

inline double gaussian_stddev(double parameter, GaussianScale scale) {
  return scale == GaussianScale::Variance ? std::sqrt(parameter) : parameter;
}

}  // namespace elastifit
