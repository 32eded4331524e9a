#pragma once

// Synthetic demand instances: prices uniform on [1, 2], nominal prices at the
// geometric mean, E = B C^T + diag(s) with Gaussian factors and s uniform on
// [-5, -1], unit nominal demand, Poisson demands and costs uniform on [0.8, 1.2].

#include <cstdint>

#include "elastifit/core.hpp"
#include "elastifit/poisson.hpp"
#include "elastifit/random.hpp"

namespace elastifit {

struct SyntheticOptions {
  double factor_scale = 0.1;  // second parameter of N(0, .) for B and C entries
  GaussianScale scale = GaussianScale::Variance;
  double price_lo = 1.0, price_hi = 2.0;
  double s_lo = -5.0, s_hi = -1.0;
  double cost_lo = 0.8, cost_hi = 1.2;
};

struct SyntheticInstance {
  Dataset dataset;
  Matrix prices;
  Vector p_nom;
  Vector cost;
  Matrix B_syn;
  Matrix C_syn;
  Vector s_syn;
  Matrix E_syn;
  Vector d_nom_syn;
  std::uint64_t seed = 0;

  /// Generating parameters as a model (log nominal demand 0).
  ElasticityModel truth() const {
    return ElasticityModel{B_syn, C_syn, s_syn, d_nom_syn.array().log().matrix()};
  }
};

inline SyntheticInstance generate_synthetic(int n, int N, int r_syn, std::uint64_t seed,
                                            const SyntheticOptions& opt = {}) {
  if (n < 1 || N < 1 || r_syn < 1) {
    throw ConfigError("synthetic dimensions n, N, r_syn must all be at least 1");
  }
  RandomStream price_rng(seed, "prices");
  RandomStream factor_rng(seed, "factors");
  RandomStream diag_rng(seed, "diagonal");
  RandomStream demand_rng(seed, "demand");
  RandomStream cost_rng(seed, "costs");

  Matrix prices(n, N);
  for (Index j = 0; j < N; ++j)
    for (Index i = 0; i < n; ++i) prices(i, j) = price_rng.uniform(opt.price_lo, opt.price_hi);
  Vector p_nom = geometric_mean_prices(prices);
  Matrix design = assemble_design(prices, p_nom);

  const double sd = gaussian_stddev(opt.factor_scale, opt.scale);
  Matrix B(n, r_syn), C(n, r_syn);
  for (Index k = 0; k < r_syn; ++k)
    for (Index i = 0; i < n; ++i) B(i, k) = factor_rng.normal(0.0, sd);
  for (Index k = 0; k < r_syn; ++k)
    for (Index i = 0; i < n; ++i) C(i, k) = factor_rng.normal(0.0, sd);
  Vector s(n);
  for (Index i = 0; i < n; ++i) s(i) = diag_rng.uniform(opt.s_lo, opt.s_hi);

  Matrix E = B * C.transpose();
  E.diagonal() += s;
  Vector d_nom = Vector::Ones(n);

  Matrix rates = (E * design.topRows(n)).array().exp().matrix();
  rates.array().colwise() *= d_nom.array();
  Matrix demands(n, N);
  for (Index j = 0; j < N; ++j)
    for (Index i = 0; i < n; ++i)
      demands(i, j) = static_cast<double>(poisson_sample(rates(i, j), demand_rng));

  Vector cost(n);
  for (Index i = 0; i < n; ++i) cost(i) = cost_rng.uniform(opt.cost_lo, opt.cost_hi);

  return SyntheticInstance{Dataset(std::move(demands), std::move(design)),
                           std::move(prices),
                           std::move(p_nom),
                           std::move(cost),
                           std::move(B),
                           std::move(C),
                           std::move(s),
                           std::move(E),
                           std::move(d_nom),
                           seed};
}

}  // namespace elastifit
