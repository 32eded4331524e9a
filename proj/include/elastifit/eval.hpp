#pragma once

// Evaluation of fitted models: K-fold cross-validated log-likelihood and
// cross-validated pricing performance against a known synthetic truth.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "elastifit/ascent.hpp"
#include "elastifit/core.hpp"
#include "elastifit/fit.hpp"
#include "elastifit/parallel.hpp"
#include "elastifit/random.hpp"

namespace elastifit {

struct FoldPlan {
  int K = 0;
  std::vector<int> assignment;  // fold index of each column

  std::vector<Index> held_out(int k) const {
    std::vector<Index> cols;
    for (std::size_t j = 0; j < assignment.size(); ++j)
      if (assignment[j] == k) cols.push_back(static_cast<Index>(j));
    return cols;
  }

  std::vector<Index> training(int k) const {
    std::vector<Index> cols;
    for (std::size_t j = 0; j < assignment.size(); ++j)
      if (assignment[j] != k) cols.push_back(static_cast<Index>(j));
    return cols;
  }

  std::vector<Index> sizes() const {
    std::vector<Index> out(static_cast<std::size_t>(K), 0);
    for (int a : assignment) ++out[static_cast<std::size_t>(a)];
    return out;
  }
};

/// Contiguous column slices; the first N mod K folds get one extra column.
/// With `shuffle`, slices are taken from a seeded permutation of the columns.
inline FoldPlan kfold_split(Index N, int K, bool shuffle = false, std::uint64_t seed = 0) {
  if (K < 2 || K > N) {
    throw ConfigError("fold count K = " + std::to_string(K) + " must lie in [2, " +
                      std::to_string(N) + "]");
  }
  std::vector<Index> order(static_cast<std::size_t>(N));
  std::iota(order.begin(), order.end(), Index{0});
  if (shuffle) {
    RandomStream rng(seed, "folds");
    for (std::size_t i = order.size() - 1; i > 0; --i) {
      const std::size_t j = static_cast<std::size_t>(rng.next_u64() % (i + 1));
      std::swap(order[i], order[j]);
    }
  }
  FoldPlan plan{K, std::vector<int>(static_cast<std::size_t>(N), 0)};
  const Index base = N / K;
  const Index extra = N % K;
  Index pos = 0;
  for (int k = 0; k < K; ++k) {
    const Index size = base + (k < extra ? 1 : 0);
    for (Index c = 0; c < size; ++c) plan.assignment[static_cast<std::size_t>(order[pos++])] = k;
  }
  return plan;
}

inline FoldPlan kfold_split(const Dataset& ds, int K, bool shuffle = false,
                            std::uint64_t seed = 0) {
  return kfold_split(ds.observations(), K, shuffle, seed);
}

struct PricingSpec {
  Vector p_nom;
  Vector cost;
  Vector pi_min;
  Vector pi_max;

  Index products() const { return p_nom.size(); }

  void validate() const {
    const Index n = p_nom.size();
    if (cost.size() != n || pi_min.size() != n || pi_max.size() != n) {
      throw DimensionError("pricing spec vectors differ in length");
    }
    for (Index i = 0; i < n; ++i) {
      if (!(p_nom(i) > 0.0)) throw DomainError("nominal price must be positive");
      if (!std::isfinite(pi_min(i)) || !std::isfinite(pi_max(i)) || pi_min(i) > pi_max(i)) {
        throw DomainError("price-change bounds must be finite with pi_min <= pi_max");
      }
    }
  }

  static PricingSpec with_uniform_bounds(Vector p_nom, Vector cost, double lo, double hi) {
    const Index n = p_nom.size();
    return PricingSpec{std::move(p_nom), std::move(cost), Vector::Constant(n, lo),
                       Vector::Constant(n, hi)};
  }

  Vector clamp(const Vector& pi) const { return pi.cwiseMax(pi_min).cwiseMin(pi_max); }

  bool contains(const Vector& pi) const {
    return (pi.array() >= pi_min.array()).all() && (pi.array() <= pi_max.array()).all();
  }
};

/// Profit sum_i d_i (p_i exp(delta_i + pi_i) - c_i exp(delta_i)) with delta = E pi.
inline double pricing_profit(const Matrix& E, const Vector& d_nom, const PricingSpec& spec,
                             const Vector& pi) {
  const Vector delta = E * pi;
  double total = 0.0;
  for (Index i = 0; i < pi.size(); ++i) {
    const double demand = d_nom(i) * std::exp(delta(i));
    total += demand * (spec.p_nom(i) * std::exp(pi(i)) - spec.cost(i));
  }
  return total;
}

/// Profit realized under the true demand model for price changes `pi`.
inline double simulated_profit(const Vector& pi, const Matrix& E_syn, const Vector& d_nom_syn,
                               const PricingSpec& spec) {
  const Index n = pi.size();
  if (E_syn.rows() != n || E_syn.cols() != n || d_nom_syn.size() != n || spec.products() != n) {
    throw DimensionError("simulated profit inputs do not conform");
  }
  return pricing_profit(E_syn, d_nom_syn, spec, pi);
}

struct PricingOptions {
  int starts = 8;
  std::uint64_t seed = 0;
  double eps_rel = 1e-7;
  double eps_abs = 1e-7;
  long max_iters = 100000;
  double alpha0 = 1.0;
  double gamma = 1.2;
  double eta = 1.5;
};

struct PricingResult {
  Vector pi;
  double profit = 0.0;
  // Accepted objective values of each start; the first start is the anchor.
  std::vector<std::vector<double>> traces;
};

namespace detail {

struct PricingCache {
  Vector revenue;  // d_i p_i exp(delta_i + pi_i)
  Vector expense;  // d_i c_i exp(delta_i)
};

class PricingProblem {
 public:
  using Point = Vector;
  using Cache = PricingCache;

  PricingProblem(const Matrix& E, const Vector& d_nom, const PricingSpec& spec, double eps_rel,
                 double eps_abs)
      : E_(E), d_nom_(d_nom), spec_(spec), eps_rel_(eps_rel), eps_abs_(eps_abs) {}

  double evaluate(const Point& pi, Cache& cache) const {
    const Vector delta = E_ * pi;
    const Index n = pi.size();
    cache.revenue.resize(n);
    cache.expense.resize(n);
    for (Index i = 0; i < n; ++i) {
      const double demand = d_nom_(i) * std::exp(delta(i));
      cache.revenue(i) = demand * spec_.p_nom(i) * std::exp(pi(i));
      cache.expense(i) = demand * spec_.cost(i);
    }
    return finite_or_minus_inf(cache.revenue.sum() - cache.expense.sum());
  }

  Point gradient(const Point&, const Cache& cache) const {
    return cache.revenue + E_.transpose() * (cache.revenue - cache.expense);
  }

  Point step(const Point& pi, double alpha, const Point& g) const {
    return spec_.clamp(pi + alpha * g);
  }

  // Projected-gradient residual.
  bool converged(const Point& pi, const Point& g) const {
    const Vector moved = spec_.clamp(pi + g) - pi;
    return gradient_small(pi, moved, eps_rel_, eps_abs_);
  }

 private:
  const Matrix& E_;
  const Vector& d_nom_;
  const PricingSpec& spec_;
  double eps_rel_, eps_abs_;
};

}  // namespace detail

/// Maximizes model-predicted profit over the box by projected gradient ascent
/// from the anchor clamp(0) and `starts` uniform random points.
inline PricingResult solve_pricing(const Matrix& E, const Vector& d_nom, const PricingSpec& spec,
                                   const PricingOptions& opt = {}) {
  spec.validate();
  const Index n = spec.products();
  if (E.rows() != n || E.cols() != n || d_nom.size() != n) {
    throw DimensionError("pricing model does not conform to the pricing spec");
  }
  if (opt.starts < 0) throw ConfigError("pricing starts must be nonnegative");

  RandomStream rng(opt.seed, "pricing");
  std::vector<Vector> starts;
  starts.push_back(spec.clamp(Vector::Zero(n)));
  for (int s = 0; s < opt.starts; ++s) {
    Vector p(n);
    for (Index i = 0; i < n; ++i) p(i) = rng.uniform(spec.pi_min(i), spec.pi_max(i));
    starts.push_back(std::move(p));
  }

  StepSchedule sched;
  sched.alpha0 = opt.alpha0;
  sched.grow = opt.gamma;
  sched.shrink = opt.eta;
  sched.max_iters = opt.max_iters;

  detail::PricingProblem problem(E, d_nom, spec, opt.eps_rel, opt.eps_abs);
  PricingResult best;
  best.profit = -std::numeric_limits<double>::infinity();
  for (auto& x0 : starts) {
    auto res = ascend(problem, std::move(x0), sched);
    if (best.traces.empty() || res.value > best.profit) {
      best.pi = res.x;
      best.profit = res.value;
    }
    best.traces.push_back(std::move(res.values));
  }
  return best;
}

/// Synthetic ground truth used to score pricing decisions.
struct PricingTruth {
  Matrix E_syn;
  Vector d_nom_syn;
};

struct CvOptions {
  int K = 5;
  bool shuffle = false;
  unsigned threads = 1;
  PricingOptions pricing;
};

struct CvResult {
  std::vector<double> fold_log_likelihood;
  std::vector<double> fold_profit;  // empty without a pricing truth
  double log_likelihood = 0.0;
  std::optional<double> profit;
};

namespace detail {

inline double mean(const std::vector<double>& v) {
  double acc = 0.0;
  for (double x : v) acc += x;
  return acc / static_cast<double>(v.size());
}

}  // namespace detail

/// Fits one model per held-out fold (gradient ascent, identical init seed in
/// every fold) and scores it on the held-out columns. With a pricing spec and
/// truth, also solves the pricing problem per fold (pricing seed derived from
/// the fit seed and fold index) and scores the prices under the truth.
inline CvResult cross_validate(const Dataset& ds, const Hyperparams& hyper,
                               const FitConfig& config, const CvOptions& opt,
                               const PricingSpec* spec = nullptr,
                               const PricingTruth* truth = nullptr) {
  const FoldPlan plan = kfold_split(ds, opt.K, opt.shuffle, config.seed);
  const bool price = spec != nullptr && truth != nullptr;
  CvResult out;
  out.fold_log_likelihood.assign(static_cast<std::size_t>(opt.K), 0.0);
  if (price) out.fold_profit.assign(static_cast<std::size_t>(opt.K), 0.0);

  parallel_for(static_cast<std::size_t>(opt.K), opt.threads, [&](std::size_t fold) {
    const int k = static_cast<int>(fold);
    try {
      const auto train_cols = plan.training(k);
      const auto test_cols = plan.held_out(k);
      const Dataset train = ds.columns(train_cols);
      const Dataset test = ds.columns(test_cols);
      const FitReport rep = fit_gradient_ascent(train, hyper, config);
      out.fold_log_likelihood[fold] = average_log_likelihood(effective_elasticity(rep.model), test);
      if (price) {
        PricingOptions popt = opt.pricing;
        popt.seed = splitmix64(config.seed ^ splitmix64(fold + 1));
        const auto sol = solve_pricing(rep.model.elasticity(), rep.model.nominal_demand(), *spec, popt);
        out.fold_profit[fold] = simulated_profit(sol.pi, truth->E_syn, truth->d_nom_syn, *spec);
      }
    } catch (...) {
      rethrow_with_context("fold " + std::to_string(k) + ": ");
    }
  });

  out.log_likelihood = detail::mean(out.fold_log_likelihood);
  if (price) out.profit = detail::mean(out.fold_profit);
  return out;
}

/// Mean held-out average log-likelihood over K folds.
inline double cv_log_likelihood(const Dataset& ds, const Hyperparams& hyper, int K,
                                const FitConfig& config, unsigned threads = 1) {
  CvOptions opt;
  opt.K = K;
  opt.threads = threads;
  return cross_validate(ds, hyper, config, opt).log_likelihood;
}

/// Mean simulated profit of prices chosen with each fold's estimate.
inline double cv_pricing_performance(const Dataset& ds, const Hyperparams& hyper, int K,
                                     const PricingSpec& spec, const PricingTruth& truth,
                                     const FitConfig& config, PricingOptions pricing = {},
                                     unsigned threads = 1) {
  CvOptions opt;
  opt.K = K;
  opt.threads = threads;
  opt.pricing = pricing;
  return *cross_validate(ds, hyper, config, opt, &spec, &truth).profit;
}

}  // namespace elastifit
