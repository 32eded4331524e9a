#pragma once

// Poisson demand model with a low-rank plus diagonal elasticity matrix.
//
// Observations are columns. For n products and N periods the demand counts
// D are n x N, and the design is the (n+1) x N matrix whose first n rows are
// log price changes log(p / p_nom) and whose last row is all ones. The
// augmented elasticity E~ = [E  log d_nom] is n x (n+1), so the log Poisson
// rates of all observations are E~ * design.

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "elastifit/error.hpp"

namespace elastifit {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

namespace detail {

inline std::string entry_name(Index row, Index col) {
  std::ostringstream os;
  os << "(" << row << ", " << col << ")";
  return os.str();
}

}  // namespace detail

/// Builds the augmented design from raw prices (n x N) and nominal prices (n).
inline Matrix assemble_design(const Matrix& prices, const Vector& nominal_prices) {
  const Index n = prices.rows();
  const Index N = prices.cols();
  if (nominal_prices.size() != n) {
    throw DimensionError("nominal prices have length " + std::to_string(nominal_prices.size()) +
                         ", expected " + std::to_string(n));
  }
  for (Index i = 0; i < n; ++i) {
    if (!(nominal_prices(i) > 0.0) || !std::isfinite(nominal_prices(i))) {
      throw DomainError("nominal price " + std::to_string(i) + " is not a positive finite number");
    }
  }
  Matrix design(n + 1, N);
  for (Index j = 0; j < N; ++j) {
    for (Index i = 0; i < n; ++i) {
      const double p = prices(i, j);
      if (!(p > 0.0) || !std::isfinite(p)) {
        throw DomainError("price at " + detail::entry_name(i, j) +
                          " is not a positive finite number");
      }
      design(i, j) = std::log(p / nominal_prices(i));
    }
    design(n, j) = 1.0;
  }
  return design;
}

/// Nominal prices as exp of the per-product mean log price.
inline Vector geometric_mean_prices(const Matrix& prices) {
  Vector out(prices.rows());
  for (Index i = 0; i < prices.rows(); ++i) {
    double acc = 0.0;
    for (Index j = 0; j < prices.cols(); ++j) {
      if (!(prices(i, j) > 0.0)) {
        throw DomainError("price at " + detail::entry_name(i, j) + " is not positive");
      }
      acc += std::log(prices(i, j));
    }
    out(i) = std::exp(acc / static_cast<double>(prices.cols()));
  }
  return out;
}

/// Demand counts with their augmented design. Immutable once built; the
/// products D * design^T and mean log(D!) are computed at construction.
class Dataset {
 public:
  Dataset(Matrix demands, Matrix design) : demands_(std::move(demands)), design_(std::move(design)) {
    if (design_.rows() != demands_.rows() + 1) {
      throw DimensionError("design has " + std::to_string(design_.rows()) + " rows, expected " +
                           std::to_string(demands_.rows() + 1));
    }
    if (design_.cols() != demands_.cols()) {
      throw DimensionError("demands have " + std::to_string(demands_.cols()) +
                           " columns but design has " + std::to_string(design_.cols()));
    }
    if (demands_.rows() < 1) throw DimensionError("dataset has no products");
    const Index n = demands_.rows();
    double log_fact = 0.0;
    for (Index j = 0; j < demands_.cols(); ++j) {
      for (Index i = 0; i < n; ++i) {
        const double d = demands_(i, j);
        if (!std::isfinite(d) || d < 0.0 || d != std::floor(d)) {
          throw DomainError("demand at " + detail::entry_name(i, j) +
                            " is not a nonnegative integer");
        }
        log_fact += std::lgamma(d + 1.0);
        if (!std::isfinite(design_(i, j))) {
          throw DomainError("design entry at " + detail::entry_name(i, j) + " is not finite");
        }
      }
      if (design_(n, j) != 1.0) {
        throw DomainError("last design row must be 1, column " + std::to_string(j));
      }
    }
    const double count = static_cast<double>(std::max<Index>(demands_.cols(), 1));
    mean_log_factorial_ = log_fact / count;
    demand_design_ = demands_ * design_.transpose();
  }

  Index products() const { return demands_.rows(); }
  Index observations() const { return demands_.cols(); }

  const Matrix& demands() const { return demands_; }
  const Matrix& design() const { return design_; }

  /// D * design^T, n x (n+1).
  const Matrix& demand_design() const { return demand_design_; }

  /// (1/N) * sum of log(D_ij!) over all entries.
  double mean_log_factorial() const { return mean_log_factorial_; }

  Dataset columns(std::span<const Index> cols) const {
    Matrix d(products(), static_cast<Index>(cols.size()));
    Matrix x(products() + 1, static_cast<Index>(cols.size()));
    for (Index k = 0; k < static_cast<Index>(cols.size()); ++k) {
      const Index c = cols[static_cast<std::size_t>(k)];
      if (c < 0 || c >= observations()) throw DimensionError("column index out of range");
      d.col(k) = demands_.col(c);
      x.col(k) = design_.col(c);
    }
    return Dataset(std::move(d), std::move(x));
  }

 private:
  Matrix demands_;
  Matrix design_;
  Matrix demand_design_;
  double mean_log_factorial_ = 0.0;
};

struct Hyperparams {
  int r = 1;
  double lambda = 0.1;

  void validate() const {
    if (r < 1) throw ConfigError("rank bound r must be at least 1");
    if (!(lambda > 0.0) || !std::isfinite(lambda)) {
      throw ConfigError("regularization lambda must be positive");
    }
  }
};

/// E = B C^T + diag(s), plus the log nominal demand.
struct ElasticityModel {
  Matrix B;
  Matrix C;
  Vector s;
  Vector log_d_nom;

  Index products() const { return B.rows(); }
  int rank() const { return static_cast<int>(B.cols()); }

  void validate() const {
    if (B.rows() != C.rows() || B.cols() != C.cols()) {
      throw DimensionError("factors B and C differ in shape");
    }
    if (B.cols() < 1) throw DimensionError("factor rank must be at least 1");
    if (s.size() != B.rows() || log_d_nom.size() != B.rows()) {
      throw DimensionError("s and log_d_nom must have one entry per product");
    }
    if (!B.allFinite() || !C.allFinite() || !s.allFinite() || !log_d_nom.allFinite()) {
      throw DomainError("model has non-finite entries");
    }
  }

  /// Elasticity matrix B C^T + diag(s).
  Matrix elasticity() const {
    Matrix E = B * C.transpose();
    E.diagonal() += s;
    return E;
  }

  Vector nominal_demand() const { return log_d_nom.array().exp().matrix(); }
};

/// X = [B C s log_d_nom], n x (2r + 2).
using ParamBlock = Matrix;

inline ParamBlock to_param_block(const ElasticityModel& m) {
  const Index n = m.products();
  const Index r = m.rank();
  ParamBlock X(n, 2 * r + 2);
  X.leftCols(r) = m.B;
  X.middleCols(r, r) = m.C;
  X.col(2 * r) = m.s;
  X.col(2 * r + 1) = m.log_d_nom;
  return X;
}

inline ElasticityModel from_param_block(const ParamBlock& X) {
  if (X.cols() < 4 || X.cols() % 2 != 0) {
    throw DimensionError("parameter block must have 2r + 2 columns");
  }
  const Index r = (X.cols() - 2) / 2;
  return ElasticityModel{X.leftCols(r), X.middleCols(r, r), X.col(2 * r), X.col(2 * r + 1)};
}

/// E~ = [B C^T + diag(s)  log_d_nom].
inline Matrix effective_elasticity(const ElasticityModel& model) {
  const Index n = model.products();
  Matrix Et(n, n + 1);
  Et.leftCols(n).noalias() = model.B * model.C.transpose();
  Et.leftCols(n).diagonal() += model.s;
  Et.col(n) = model.log_d_nom;
  return Et;
}

namespace detail {

inline void check_shapes(const Matrix& Et, const Dataset& ds) {
  if (Et.rows() != ds.products() || Et.cols() != ds.products() + 1) {
    throw DimensionError("augmented elasticity is " + std::to_string(Et.rows()) + "x" +
                         std::to_string(Et.cols()) + ", expected " +
                         std::to_string(ds.products()) + "x" +
                         std::to_string(ds.products() + 1));
  }
}

inline double finite_or_minus_inf(double v) {
  return std::isfinite(v) ? v : -std::numeric_limits<double>::infinity();
}

}  // namespace detail

/// Data-fit term (1/N) sum(D o Y - exp(Y)) with Y = E~ * design. Also stores
/// exp(Y) in `rates` so a gradient can follow without recomputing it.
/// Returns -inf when any term overflows.
inline double data_fit(const Matrix& Et, const Dataset& ds, Matrix& rates) {
  detail::check_shapes(Et, ds);
  Matrix Y = Et * ds.design();
  rates = Y.array().exp().matrix();
  // Extended-precision accumulation keeps rounding noise well below the
  // objective gains the line search has to resolve near an optimum.
  const Matrix& D = ds.demands();
  long double total = 0.0L;
  for (Index k = 0; k < Y.size(); ++k) total += D(k) * Y(k) - rates(k);
  const double v = static_cast<double>(total / static_cast<long double>(ds.observations()));
  return detail::finite_or_minus_inf(v);
}

inline double data_fit(const Matrix& Et, const Dataset& ds) {
  Matrix rates;
  return data_fit(Et, ds, rates);
}

/// Regularized low-rank objective: data fit minus (lambda/2)(|B|^2 + |C|^2).
inline double objective(const ElasticityModel& model, const Dataset& ds, const Hyperparams& hyper) {
  if (model.rank() != hyper.r) {
    throw ConfigError("model rank " + std::to_string(model.rank()) +
                      " does not match hyperparameter r = " + std::to_string(hyper.r));
  }
  const double penalty = 0.5 * hyper.lambda * (model.B.squaredNorm() + model.C.squaredNorm());
  return detail::finite_or_minus_inf(data_fit(effective_elasticity(model), ds) - penalty);
}

/// Gradient of the data fit with respect to E~ given exp(E~ * design):
/// (D * design^T - rates * design^T) / N.
inline Matrix elasticity_gradient_from_rates(const Matrix& rates, const Dataset& ds) {
  Matrix delta = ds.demand_design();
  delta.noalias() -= rates * ds.design().transpose();
  delta /= static_cast<double>(ds.observations());
  return delta;
}

/// Same gradient formed as (D - rates) * design^T / N, without the cached product.
inline Matrix elasticity_gradient_direct(const Matrix& rates, const Dataset& ds) {
  Matrix resid = ds.demands() - rates;
  Matrix delta = resid * ds.design().transpose();
  delta /= static_cast<double>(ds.observations());
  return delta;
}

inline Matrix elasticity_gradient(const Matrix& Et, const Dataset& ds) {
  Matrix rates;
  data_fit(Et, ds, rates);
  return elasticity_gradient_from_rates(rates, ds);
}

/// Chain rule from the E~ gradient to [dB dC ds dlog_d_nom].
inline ParamBlock low_rank_gradient(const ElasticityModel& model, const Matrix& delta,
                                    double lambda) {
  const Index n = model.products();
  const Index r = model.rank();
  ParamBlock G(n, 2 * r + 2);
  const auto delta_e = delta.leftCols(n);
  G.leftCols(r).noalias() = delta_e * model.C;
  G.leftCols(r) -= lambda * model.B;
  G.middleCols(r, r).noalias() = delta_e.transpose() * model.B;
  G.middleCols(r, r) -= lambda * model.C;
  G.col(2 * r) = delta_e.diagonal();
  G.col(2 * r + 1) = delta.col(n);
  return G;
}

enum class GradientPath { CachedProduct, Direct };

/// Gradient of the regularized objective with respect to the parameter block.
/// May contain non-finite entries when the rates overflow; callers check.
inline ParamBlock gradient(const ElasticityModel& model, const Dataset& ds, const Hyperparams& hyper,
                           GradientPath path = GradientPath::CachedProduct) {
  if (model.rank() != hyper.r) {
    throw ConfigError("model rank does not match hyperparameter r");
  }
  const Matrix Et = effective_elasticity(model);
  detail::check_shapes(Et, ds);
  const Matrix rates = (Et * ds.design()).array().exp().matrix();
  const Matrix delta = path == GradientPath::CachedProduct
                           ? elasticity_gradient_from_rates(rates, ds)
                           : elasticity_gradient_direct(rates, ds);
  return low_rank_gradient(model, delta, hyper.lambda);
}

/// Average Poisson log-likelihood per observation, including the log(D!) term.
inline double average_log_likelihood(const Matrix& Et, const Dataset& ds) {
  return data_fit(Et, ds) - ds.mean_log_factorial();
}

}  // namespace elastifit
