#pragma once

#include <cmath>
#include <cstdint>
#include <string>

#include "elastifit/error.hpp"
#include "elastifit/random.hpp"

namespace elastifit {

// Sampler regimes: Knuth's product-of-uniforms method up to kKnuthMaxRate,
// sequential chop-down inversion from k = 0 up to kChopDownMaxRate, and above
// that a sum of independent chop-down draws whose rates add up to the target
// (Poisson variables are closed under addition). Every regime is exact.
inline constexpr double kKnuthMaxRate = 30.0;
inline constexpr double kChopDownMaxRate = 600.0;

namespace detail {

inline std::uint64_t poisson_knuth(double rate, RandomStream& rng) {
  const double limit = std::exp(-rate);
  std::uint64_t k = 0;
  double prod = rng.uniform_open0();
  while (prod > limit) {
    ++k;
    prod *= rng.uniform_open0();
  }
  return k;
}

inline std::uint64_t poisson_chop_down(double rate, RandomStream& rng) {
  double u = rng.uniform();
  double p = std::exp(-rate);
  std::uint64_t k = 0;
  while (u > p) {
    u -= p;
    ++k;
    p *= rate / static_cast<double>(k);
    // Leftover mass below rounding level once far in the tail.
    if (p == 0.0) break;
  }
  return k;
}

}  // namespace detail

/// Draws k with probability rate^k exp(-rate) / k!.
inline std::uint64_t poisson_sample(double rate, RandomStream& rng) {
  if (!(rate > 0.0) || !std::isfinite(rate)) {
    throw DomainError("Poisson rate must be positive and finite, got " + std::to_string(rate));
  }
  if (rate <= kKnuthMaxRate) return detail::poisson_knuth(rate, rng);
  if (rate <= kChopDownMaxRate) return detail::poisson_chop_down(rate, rng);
  const auto pieces = static_cast<std::uint64_t>(std::ceil(rate / kChopDownMaxRate));
  const double piece_rate = rate / static_cast<double>(pieces);
  std::uint64_t total = 0;
  for (std::uint64_t i = 0; i < pieces; ++i) total += detail::poisson_chop_down(piece_rate, rng);
  return total;
}

}  // namespace elastifit
