#pragma once

#include <random>

#include "elastifit/core.hpp"

namespace testutil {

using elastifit::Dataset;
using elastifit::Index;
using elastifit::Matrix;
using elastifit::Vector;

// Small random dataset: log price changes uniform in [-spread, spread] and
// Poisson demands with rates exp(-pi_i) * base.
inline Dataset random_dataset(Index n, Index N, std::mt19937_64& rng, double spread = 0.3,
                              double base = 2.0) {
  std::uniform_real_distribution<double> u(-spread, spread);
  Matrix X(n + 1, N);
  Matrix D(n, N);
  for (Index j = 0; j < N; ++j) {
    for (Index i = 0; i < n; ++i) X(i, j) = u(rng);
    X(n, j) = 1.0;
    for (Index i = 0; i < n; ++i) {
      std::poisson_distribution<int> pois(base * std::exp(-2.0 * X(i, j)));
      D(i, j) = pois(rng);
    }
  }
  return Dataset(D, X);
}

inline Matrix random_matrix(Index rows, Index cols, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  Matrix M(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) M(i, j) = g(rng);
  return M;
}

inline elastifit::ElasticityModel random_model(Index n, int r, std::mt19937_64& rng,
                                               double scale = 0.3) {
  return {random_matrix(n, r, rng, scale), random_matrix(n, r, rng, scale),
          Vector(random_matrix(n, 1, rng, 0.5)), Vector(random_matrix(n, 1, rng, 0.5))};
}

inline double rel_err(double a, double b, double floor = 0.0) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

}  // namespace testutil
