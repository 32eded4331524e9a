#pragma once

// Gradient ascent with a multiplicative step-size schedule.
//
// From the current point x with gradient g, the tentative point is
// step(x, alpha, g). If it strictly improves the objective it is accepted and
// alpha grows by `grow`; otherwise alpha shrinks by `shrink` and the same
// point is retried. The loop ends when the problem reports convergence, after
// `max_iters` accepted steps, or when alpha drops below `min_step`.
//
// A Problem supplies
//   Point                                   (an Eigen dense type)
//   Cache                                   per-point data reused by gradient()
//   double evaluate(const Point&, Cache&)   objective; -inf when not finite
//   Point  gradient(const Point&, const Cache&)
//   Point  step(const Point&, double alpha, const Point& g)
//   bool   converged(const Point&, const Point& g)

#include <cmath>
#include <limits>
#include <utility>
#include <vector>

#include "elastifit/error.hpp"

namespace elastifit {

enum class Termination { GradientTolerance, ObjectiveConverged, MaxIters, StalledLineSearch };

inline const char* to_string(Termination t) {
  switch (t) {
    case Termination::GradientTolerance: return "gradient_tolerance";
    case Termination::ObjectiveConverged: return "objective_converged";
    case Termination::MaxIters: return "max_iters";
    case Termination::StalledLineSearch: return "stalled_line_search";
  }
  return "unknown";
}

struct StepSchedule {
  double alpha0 = 1.0;
  double grow = 1.2;
  double shrink = 1.5;
  long max_iters = 100000;
  double min_step = 1e-300;
  // Objective values above this abort with UnboundedError.
  double unbounded_above = std::numeric_limits<double>::infinity();
};

template <typename Point>
struct AscentResult {
  Point x;
  Point grad;
  double value = -std::numeric_limits<double>::infinity();
  // values[0] is the starting objective; values[k] follows the k-th accepted
  // step, whose step size is steps[k - 1].
  std::vector<double> values;
  std::vector<double> steps;
  long iterations = 0;
  Termination termination = Termination::StalledLineSearch;
};

template <typename Problem>
AscentResult<typename Problem::Point> ascend(Problem& problem, typename Problem::Point x0,
                                             const StepSchedule& schedule) {
  using Point = typename Problem::Point;
  using Cache = typename Problem::Cache;

  AscentResult<Point> out;
  Cache cache{};
  out.x = std::move(x0);
  out.value = problem.evaluate(out.x, cache);
  out.values.push_back(out.value);
  if (!std::isfinite(out.value)) {
    out.termination = Termination::StalledLineSearch;
    return out;
  }
  out.grad = problem.gradient(out.x, cache);

  double alpha = schedule.alpha0;
  Cache trial_cache{};
  for (;;) {
    if (!out.grad.allFinite()) {
      out.termination = Termination::StalledLineSearch;
      return out;
    }
    if (problem.converged(out.x, out.grad)) {
      out.termination = Termination::GradientTolerance;
      return out;
    }
    if (out.iterations >= schedule.max_iters) {
      out.termination = Termination::MaxIters;
      return out;
    }
    for (;;) {
      Point trial = problem.step(out.x, alpha, out.grad);
      const double v = problem.evaluate(trial, trial_cache);
      if (v > out.value) {
        if (v > schedule.unbounded_above) {
          throw UnboundedError("objective exceeded " + std::to_string(schedule.unbounded_above) +
                               "; the data do not bound the likelihood");
        }
        out.x = std::move(trial);
        out.value = v;
        std::swap(cache, trial_cache);
        out.grad = problem.gradient(out.x, cache);
        out.values.push_back(v);
        out.steps.push_back(alpha);
        alpha *= schedule.grow;
        break;
      }
      alpha /= schedule.shrink;
      if (alpha < schedule.min_step) {
        out.termination = Termination::StalledLineSearch;
        return out;
      }
    }
    ++out.iterations;
  }
}

/// |g|_F <= eps_rel |x|_F + eps_abs.
template <typename A, typename B>
bool gradient_small(const A& x, const B& g, double eps_rel, double eps_abs) {
  return g.norm() <= eps_rel * x.norm() + eps_abs;
}

}  // namespace elastifit
