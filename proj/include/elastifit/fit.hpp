#pragma once

// Fitting procedures for the regularized low-rank plus diagonal model:
// gradient ascent on all parameters, alternating maximization over one factor
// at a time, and the unstructured full-rank MLE.

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "elastifit/ascent.hpp"
#include "elastifit/core.hpp"
#include "elastifit/random.hpp"

namespace elastifit {

struct FitConfig {
  double alpha0 = 1.0;
  double gamma = 1.2;  // step growth after an accepted step
  double eta = 1.5;    // step shrink after a rejected step
  double eps_rel = 1e-3;
  double eps_abs = 1e-3;
  long max_iters = 100000;
  std::uint64_t seed = 0;
  GaussianScale init_scale = GaussianScale::Variance;
  // Tolerance of each alternating-maximization subproblem.
  double inner_tol = 1e-6;
  double min_step = 1e-300;

  void validate() const {
    if (!(alpha0 > 0.0)) throw ConfigError("alpha0 must be positive");
    if (!(gamma > 1.0)) throw ConfigError("gamma must exceed 1");
    if (!(eta > 1.0)) throw ConfigError("eta must exceed 1");
    if (!(eps_rel > 0.0) || !(eps_abs > 0.0)) throw ConfigError("tolerances must be positive");
    if (!(inner_tol > 0.0)) throw ConfigError("inner tolerance must be positive");
    if (max_iters < 0) throw ConfigError("max_iters must be nonnegative");
  }

  StepSchedule schedule() const {
    StepSchedule s;
    s.alpha0 = alpha0;
    s.grow = gamma;
    s.shrink = eta;
    s.max_iters = max_iters;
    s.min_step = min_step;
    return s;
  }
};

struct FitReport {
  ElasticityModel model;
  // Starting objective followed by every accepted objective value.
  std::vector<double> objective_trace;
  // Step size of each accepted step.
  std::vector<double> step_trace;
  long iterations = 0;
  Termination termination = Termination::StalledLineSearch;
  double objective = 0.0;
  double gradient_norm = 0.0;
  // Alternating maximization only: objective after each half-step, starting
  // with the initial objective.
  std::vector<double> half_step_objectives;
  int outer_iterations = 0;
};

/// B, C ~ N(0, 1/(n sqrt(r))) entrywise, s = -1, log_d_nom = 0.
inline ElasticityModel init_model(Index n, const Hyperparams& hyper, std::uint64_t seed,
                                  GaussianScale scale = GaussianScale::Variance) {
  if (n < 1) throw ConfigError("model needs at least one product");
  hyper.validate();
  const Index r = hyper.r;
  const double sd =
      gaussian_stddev(1.0 / (static_cast<double>(n) * std::sqrt(static_cast<double>(r))), scale);
  RandomStream rng(seed, "init");
  ElasticityModel m{Matrix(n, r), Matrix(n, r), Vector::Constant(n, -1.0), Vector::Zero(n)};
  for (Index k = 0; k < r; ++k)
    for (Index i = 0; i < n; ++i) m.B(i, k) = rng.normal(0.0, sd);
  for (Index k = 0; k < r; ++k)
    for (Index i = 0; i < n; ++i) m.C(i, k) = rng.normal(0.0, sd);
  return m;
}

namespace detail {

struct RatesCache {
  Matrix rates;
};

// Ascent over the whole parameter block X = [B C s log_d_nom].
class LowRankProblem {
 public:
  using Point = Matrix;
  using Cache = RatesCache;

  LowRankProblem(const Dataset& ds, double lambda, int r, double eps_rel, double eps_abs)
      : ds_(ds), lambda_(lambda), r_(r), eps_rel_(eps_rel), eps_abs_(eps_abs) {}

  double evaluate(const Point& X, Cache& cache) const {
    const Index n = X.rows();
    Matrix Et(n, n + 1);
    Et.leftCols(n).noalias() = X.leftCols(r_) * X.middleCols(r_, r_).transpose();
    Et.leftCols(n).diagonal() += X.col(2 * r_);
    Et.col(n) = X.col(2 * r_ + 1);
    const double fit = data_fit(Et, ds_, cache.rates);
    const double penalty =
        0.5 * lambda_ * (X.leftCols(r_).squaredNorm() + X.middleCols(r_, r_).squaredNorm());
    return finite_or_minus_inf(fit - penalty);
  }

  Point gradient(const Point& X, const Cache& cache) const {
    const Matrix delta = elasticity_gradient_from_rates(cache.rates, ds_);
    const Index n = X.rows();
    Point G(n, 2 * r_ + 2);
    const auto de = delta.leftCols(n);
    const auto B = X.leftCols(r_);
    const auto C = X.middleCols(r_, r_);
    G.leftCols(r_).noalias() = de * C;
    G.leftCols(r_) -= lambda_ * B;
    G.middleCols(r_, r_).noalias() = de.transpose() * B;
    G.middleCols(r_, r_) -= lambda_ * C;
    G.col(2 * r_) = de.diagonal();
    G.col(2 * r_ + 1) = delta.col(n);
    return G;
  }

  Point step(const Point& X, double alpha, const Point& G) const { return X + alpha * G; }

  bool converged(const Point& X, const Point& G) const {
    return gradient_small(X, G, eps_rel_, eps_abs_);
  }

 private:
  const Dataset& ds_;
  double lambda_;
  int r_;
  double eps_rel_, eps_abs_;
};

}  // namespace detail

/// Gradient ascent on the regularized objective from a given starting model.
inline FitReport fit_gradient_ascent(const Dataset& ds, const Hyperparams& hyper,
                                     const FitConfig& config, const ElasticityModel& start) {
  hyper.validate();
  config.validate();
  start.validate();
  if (start.rank() != hyper.r) throw ConfigError("starting model rank does not match r");
  if (start.products() != ds.products()) throw DimensionError("starting model size mismatch");
  if (ds.observations() < 1) throw DimensionError("dataset has no observations");

  detail::LowRankProblem problem(ds, hyper.lambda, hyper.r, config.eps_rel, config.eps_abs);
  auto res = ascend(problem, to_param_block(start), config.schedule());

  FitReport rep;
  rep.model = from_param_block(res.x);
  rep.objective_trace = std::move(res.values);
  rep.step_trace = std::move(res.steps);
  rep.iterations = res.iterations;
  rep.termination = res.termination;
  rep.objective = res.value;
  rep.gradient_norm = res.grad.size() ? res.grad.norm() : 0.0;
  return rep;
}

inline FitReport fit_gradient_ascent(const Dataset& ds, const Hyperparams& hyper,
                                     const FitConfig& config) {
  return fit_gradient_ascent(ds, hyper, config,
                             init_model(ds.products(), hyper, config.seed, config.init_scale));
}

enum class FixedFactor { B, C };

/// Free variables of an alternating-maximization subproblem.
struct PartialModel {
  Matrix factor;  // the free factor (B when C is fixed, C when B is fixed)
  Vector s;
  Vector log_d_nom;
};

struct InnerSolveResult {
  PartialModel solution;
  std::vector<double> objective_trace;
  std::vector<double> step_trace;
  long iterations = 0;
  Termination termination = Termination::StalledLineSearch;
  double gradient_norm = 0.0;
};

namespace detail {

// Ascent over [F s log_d_nom] with the other factor held fixed. The objective
// is the full regularized objective, fixed-factor penalty included.
class FactorProblem {
 public:
  using Point = Matrix;
  using Cache = RatesCache;

  FactorProblem(const Dataset& ds, const Matrix& fixed, FixedFactor which, double lambda,
                double tol)
      : ds_(ds), fixed_(fixed), which_(which), lambda_(lambda), tol_(tol),
        fixed_penalty_(fixed.squaredNorm()) {}

  double evaluate(const Point& Z, Cache& cache) const {
    const Index n = Z.rows();
    const Index r = fixed_.cols();
    Matrix Et(n, n + 1);
    if (which_ == FixedFactor::C)
      Et.leftCols(n).noalias() = Z.leftCols(r) * fixed_.transpose();
    else
      Et.leftCols(n).noalias() = fixed_ * Z.leftCols(r).transpose();
    Et.leftCols(n).diagonal() += Z.col(r);
    Et.col(n) = Z.col(r + 1);
    const double fit = data_fit(Et, ds_, cache.rates);
    const double free_penalty = Z.leftCols(r).squaredNorm();
    const double penalty = which_ == FixedFactor::C ? free_penalty + fixed_penalty_
                                                    : fixed_penalty_ + free_penalty;
    return finite_or_minus_inf(fit - 0.5 * lambda_ * penalty);
  }

  Point gradient(const Point& Z, const Cache& cache) const {
    const Matrix delta = elasticity_gradient_from_rates(cache.rates, ds_);
    const Index n = Z.rows();
    const Index r = fixed_.cols();
    Point G(n, r + 2);
    const auto de = delta.leftCols(n);
    if (which_ == FixedFactor::C)
      G.leftCols(r).noalias() = de * fixed_;
    else
      G.leftCols(r).noalias() = de.transpose() * fixed_;
    G.leftCols(r) -= lambda_ * Z.leftCols(r);
    G.col(r) = de.diagonal();
    G.col(r + 1) = delta.col(n);
    return G;
  }

  Point step(const Point& Z, double alpha, const Point& G) const { return Z + alpha * G; }

  bool converged(const Point& Z, const Point& G) const { return gradient_small(Z, G, tol_, tol_); }

 private:
  const Dataset& ds_;
  const Matrix& fixed_;
  FixedFactor which_;
  double lambda_;
  double tol_;
  double fixed_penalty_;
};

}  // namespace detail

/// Maximizes the regularized objective over (free factor, s, log_d_nom) with
/// the other factor fixed, to |grad| <= tol |free block| + tol.
inline InnerSolveResult inner_concave_solve(const Dataset& ds, const Matrix& fixed_factor,
                                            FixedFactor which, const PartialModel& warm_start,
                                            double lambda, double tol,
                                            const FitConfig& config = {}) {
  const Index n = ds.products();
  const Index r = fixed_factor.cols();
  if (fixed_factor.rows() != n || warm_start.factor.rows() != n || warm_start.factor.cols() != r ||
      warm_start.s.size() != n || warm_start.log_d_nom.size() != n) {
    throw DimensionError("subproblem warm start does not conform to the data");
  }
  if (!fixed_factor.allFinite()) throw DomainError("fixed factor has non-finite entries");
  if (!(tol > 0.0)) throw ConfigError("subproblem tolerance must be positive");

  Matrix Z(n, r + 2);
  Z.leftCols(r) = warm_start.factor;
  Z.col(r) = warm_start.s;
  Z.col(r + 1) = warm_start.log_d_nom;

  detail::FactorProblem problem(ds, fixed_factor, which, lambda, tol);
  auto res = ascend(problem, std::move(Z), config.schedule());
  if (res.values.size() == 1 && !std::isfinite(res.values.front())) {
    throw DomainError("objective is not finite at the subproblem warm start");
  }

  InnerSolveResult out;
  out.solution = PartialModel{res.x.leftCols(r), res.x.col(r), res.x.col(r + 1)};
  out.objective_trace = std::move(res.values);
  out.step_trace = std::move(res.steps);
  out.iterations = res.iterations;
  out.termination = res.termination;
  out.gradient_norm = res.grad.size() ? res.grad.norm() : 0.0;
  return out;
}

/// Alternating maximization: C starts random, then B-then-C subproblems are
/// solved in turn until the full gradient meets the tolerance, the objective
/// change over an outer iteration falls below eps_rel |obj| + eps_abs, or
/// outer_iters is reached.
inline FitReport fit_alternating(const Dataset& ds, const Hyperparams& hyper,
                                 const FitConfig& config, int outer_iters) {
  hyper.validate();
  config.validate();
  if (outer_iters < 1) throw ConfigError("outer_iters must be at least 1");
  if (ds.observations() < 1) throw DimensionError("dataset has no observations");
  const Index n = ds.products();

  ElasticityModel model = init_model(n, hyper, config.seed, config.init_scale);
  {
    // Columns of C must start away from zero.
    RandomStream redraw(config.seed, "am-redraw");
    const double sd = gaussian_stddev(
        1.0 / (static_cast<double>(n) * std::sqrt(static_cast<double>(hyper.r))),
        config.init_scale);
    for (Index k = 0; k < model.C.cols(); ++k) {
      while (model.C.col(k).norm() < 1e-8) {
        for (Index i = 0; i < n; ++i) model.C(i, k) = redraw.normal(0.0, sd);
      }
    }
  }

  FitReport rep;
  double current = objective(model, ds, hyper);
  rep.objective_trace.push_back(current);
  rep.half_step_objectives.push_back(current);
  rep.termination = Termination::MaxIters;

  auto absorb = [&](InnerSolveResult& inner) {
    for (std::size_t k = 1; k < inner.objective_trace.size(); ++k)
      rep.objective_trace.push_back(inner.objective_trace[k]);
    rep.step_trace.insert(rep.step_trace.end(), inner.step_trace.begin(), inner.step_trace.end());
    rep.iterations += inner.iterations;
  };
  auto inner_failed = [](const InnerSolveResult& inner) {
    return inner.termination == Termination::StalledLineSearch ||
           inner.termination == Termination::MaxIters;
  };

  for (int outer = 0; outer < outer_iters; ++outer) {
    const double before = current;

    auto over_b = inner_concave_solve(ds, model.C, FixedFactor::C,
                                      PartialModel{model.B, model.s, model.log_d_nom},
                                      hyper.lambda, config.inner_tol, config);
    absorb(over_b);
    model.B = over_b.solution.factor;
    model.s = over_b.solution.s;
    model.log_d_nom = over_b.solution.log_d_nom;
    current = objective(model, ds, hyper);
    rep.half_step_objectives.push_back(current);
    if (inner_failed(over_b)) {
      rep.termination = Termination::StalledLineSearch;
      rep.outer_iterations = outer + 1;
      break;
    }

    auto over_c = inner_concave_solve(ds, model.B, FixedFactor::B,
                                      PartialModel{model.C, model.s, model.log_d_nom},
                                      hyper.lambda, config.inner_tol, config);
    absorb(over_c);
    model.C = over_c.solution.factor;
    model.s = over_c.solution.s;
    model.log_d_nom = over_c.solution.log_d_nom;
    current = objective(model, ds, hyper);
    rep.half_step_objectives.push_back(current);
    rep.outer_iterations = outer + 1;
    if (inner_failed(over_c)) {
      rep.termination = Termination::StalledLineSearch;
      break;
    }

    const ParamBlock g = gradient(model, ds, hyper);
    if (gradient_small(to_param_block(model), g, config.eps_rel, config.eps_abs)) {
      rep.termination = Termination::GradientTolerance;
      break;
    }
    if (std::abs(current - before) <= config.eps_rel * std::abs(current) + config.eps_abs) {
      rep.termination = Termination::ObjectiveConverged;
      break;
    }
  }

  rep.objective = current;
  rep.gradient_norm = gradient(model, ds, hyper).norm();
  rep.model = std::move(model);
  return rep;
}

struct FullRankReport {
  Matrix E_tilde;
  std::vector<double> objective_trace;
  std::vector<double> step_trace;
  long iterations = 0;
  Termination termination = Termination::StalledLineSearch;
  double objective = 0.0;
};

namespace detail {

class FullRankProblem {
 public:
  using Point = Matrix;
  using Cache = RatesCache;

  FullRankProblem(const Dataset& ds, double eps_rel, double eps_abs)
      : ds_(ds), eps_rel_(eps_rel), eps_abs_(eps_abs) {}

  double evaluate(const Point& Et, Cache& cache) const { return data_fit(Et, ds_, cache.rates); }
  Point gradient(const Point&, const Cache& cache) const {
    return elasticity_gradient_from_rates(cache.rates, ds_);
  }
  Point step(const Point& Et, double alpha, const Point& G) const { return Et + alpha * G; }
  bool converged(const Point& Et, const Point& G) const {
    return gradient_small(Et, G, eps_rel_, eps_abs_);
  }

 private:
  const Dataset& ds_;
  double eps_rel_, eps_abs_;
};

}  // namespace detail

inline constexpr double kUnboundedObjective = 1e15;

/// Unstructured MLE over E~ (n x (n+1)), started from zero. Throws
/// UnboundedError if the objective passes kUnboundedObjective.
inline FullRankReport fit_full_rank_report(const Dataset& ds, const FitConfig& config) {
  config.validate();
  if (ds.observations() < 1) throw DimensionError("dataset has no observations");
  const Index n = ds.products();
  detail::FullRankProblem problem(ds, config.eps_rel, config.eps_abs);
  StepSchedule sched = config.schedule();
  sched.unbounded_above = kUnboundedObjective;
  auto res = ascend(problem, Matrix::Zero(n, n + 1).eval(), sched);
  return FullRankReport{std::move(res.x), std::move(res.values), std::move(res.steps),
                        res.iterations, res.termination, res.value};
}

inline Matrix fit_full_rank(const Dataset& ds, const FitConfig& config) {
  return fit_full_rank_report(ds, config).E_tilde;
}

}  // namespace elastifit
