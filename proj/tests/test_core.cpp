#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "elastifit/core.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace elastifit;
using testutil::rel_err;

TEST(AssembleDesign, NominalPricesGiveZeroChanges) {
  Matrix prices(2, 3);
  prices << 1.5, 1.5, 1.5, 2.0, 2.0, 2.0;
  Vector nom(2);
  nom << 1.5, 2.0;
  const Matrix X = assemble_design(prices, nom);
  EXPECT_TRUE(X.topRows(2).isZero(0.0));
  EXPECT_TRUE((X.row(2).array() == 1.0).all());
}

TEST(AssembleDesign, LogOfE) {
  Matrix prices(1, 2);
  prices << std::exp(1.0), std::exp(-1.0);
  const Matrix X = assemble_design(prices, Vector::Ones(1));
  EXPECT_NEAR(X(0, 0), 1.0, 1e-15);
  EXPECT_NEAR(X(0, 1), -1.0, 1e-15);
  EXPECT_EQ(X(1, 0), 1.0);
  EXPECT_EQ(X(1, 1), 1.0);
}

TEST(AssembleDesign, MatchesScalarLoop) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.5, 3.0);
  Matrix prices(2, 3);
  Vector nom(2);
  for (Index i = 0; i < 2; ++i) {
    nom(i) = u(rng);
    for (Index j = 0; j < 3; ++j) prices(i, j) = u(rng);
  }
  const Matrix X = assemble_design(prices, nom);
  const Matrix ref = oracle::design(prices, nom);
  EXPECT_EQ((X - ref).cwiseAbs().maxCoeff(), 0.0);
}

TEST(AssembleDesign, RejectsNonpositivePriceNamingEntry) {
  Matrix prices(2, 2);
  prices << 1.0, 1.0, 1.0, -2.0;
  try {
    assemble_design(prices, Vector::Ones(2));
    FAIL() << "expected DomainError";
  } catch (const DomainError& e) {
    EXPECT_NE(std::string(e.what()).find("(1, 1)"), std::string::npos) << e.what();
  }
  EXPECT_THROW(assemble_design(Matrix::Ones(2, 2), Vector::Zero(2)), DomainError);
  EXPECT_THROW(assemble_design(Matrix::Ones(2, 2), Vector::Ones(3)), DimensionError);
}

TEST(DatasetInvariants, Validation) {
  Matrix X = Matrix::Zero(3, 4);
  X.row(2).setOnes();
  EXPECT_NO_THROW(Dataset(Matrix::Ones(2, 4), X));
  Matrix neg = Matrix::Ones(2, 4);
  neg(1, 2) = -1.0;
  EXPECT_THROW(Dataset(neg, X), DomainError);
  Matrix frac = Matrix::Ones(2, 4);
  frac(0, 0) = 1.5;
  EXPECT_THROW(Dataset(frac, X), DomainError);
  Matrix bad_row = X;
  bad_row(2, 3) = 0.999;
  EXPECT_THROW(Dataset(Matrix::Ones(2, 4), bad_row), DomainError);
  EXPECT_THROW(Dataset(Matrix::Ones(2, 3), X), DimensionError);
  EXPECT_THROW(Dataset(Matrix::Ones(3, 4), X), DimensionError);
}

TEST(DatasetInvariants, ColumnSubsetKeepsCachedProducts) {
  std::mt19937_64 rng(3);
  const Dataset ds = testutil::random_dataset(3, 8, rng);
  const std::vector<Index> cols{1, 4, 6};
  const Dataset sub = ds.columns(cols);
  EXPECT_EQ(sub.observations(), 3);
  const Matrix expected = sub.demands() * sub.design().transpose();
  EXPECT_LE((sub.demand_design() - expected).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(EffectiveElasticity, ZeroFactors) {
  Vector s(2);
  s << -1, -2;
  const ElasticityModel m{Matrix::Zero(2, 1), Matrix::Zero(2, 1), s, Vector::Zero(2)};
  Matrix expected(2, 3);
  expected << -1, 0, 0, 0, -2, 0;
  EXPECT_EQ(effective_elasticity(m), expected);
}

TEST(EffectiveElasticity, RankOneProduct) {
  Matrix B(2, 1), C(2, 1);
  B << 1, 2;
  C << 3, 4;
  Vector ld(2);
  ld << 5, 6;
  const ElasticityModel m{B, C, Vector::Zero(2), ld};
  Matrix expected(2, 3);
  expected << 3, 4, 5, 6, 8, 6;
  EXPECT_EQ(effective_elasticity(m), expected);
}

TEST(EffectiveElasticity, MatchesEntrywiseSum) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    const auto m = testutil::random_model(5, 2, rng, 1.0);
    const Matrix got = effective_elasticity(m);
    const Matrix ref = oracle::effective_elasticity(m.B, m.C, m.s, m.log_d_nom);
    EXPECT_LE((got - ref).cwiseAbs().maxCoeff(), 1e-13 * std::max(1.0, ref.cwiseAbs().maxCoeff()));
  }
}

TEST(ParamBlock, RoundTripIsLossless) {
  std::mt19937_64 rng(8);
  for (int r = 1; r <= 4; ++r) {
    const auto m = testutil::random_model(6, r, rng);
    const ParamBlock X = to_param_block(m);
    EXPECT_EQ(X.cols(), 2 * r + 2);
    const auto back = from_param_block(X);
    EXPECT_EQ(back.B, m.B);
    EXPECT_EQ(back.C, m.C);
    EXPECT_EQ(back.s, m.s);
    EXPECT_EQ(back.log_d_nom, m.log_d_nom);
  }
}

TEST(DataFit, ZeroMatrixGivesMinusN) {
  std::mt19937_64 rng(1);
  const Dataset ds = testutil::random_dataset(4, 7, rng);
  EXPECT_DOUBLE_EQ(data_fit(Matrix::Zero(4, 5), ds), -4.0);
}

TEST(DataFit, ScalarPoissonStationaryPoint) {
  Matrix D(1, 1);
  D << 2;
  Matrix X(2, 1);
  X << 0, 1;
  const Dataset ds(D, X);
  Matrix Et(1, 2);
  Et << 0, std::log(2.0);
  EXPECT_NEAR(data_fit(Et, ds), 2.0 * std::log(2.0) - 2.0, 1e-15);
  EXPECT_NEAR(data_fit(Et, ds), -0.6137, 1e-4);
}

TEST(DataFit, MatchesDoubleLoop) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const Dataset ds = testutil::random_dataset(3, 4, rng);
    const Matrix Et = testutil::random_matrix(3, 4, rng, 0.7);
    const double ref = static_cast<double>(oracle::data_fit(Et, ds.demands(), ds.design()));
    EXPECT_LE(rel_err(data_fit(Et, ds), ref), 1e-12);
  }
}

TEST(DataFit, OverflowReturnsMinusInfinity) {
  std::mt19937_64 rng(4);
  const Dataset ds = testutil::random_dataset(2, 3, rng);
  Matrix Et = Matrix::Zero(2, 3);
  Et(0, 2) = 1000.0;
  const double v = data_fit(Et, ds);
  EXPECT_TRUE(std::isinf(v) && v < 0);
}

TEST(DataFit, ShapeMismatch) {
  std::mt19937_64 rng(4);
  const Dataset ds = testutil::random_dataset(2, 3, rng);
  EXPECT_THROW(data_fit(Matrix::Zero(2, 2), ds), DimensionError);
  EXPECT_THROW(data_fit(Matrix::Zero(3, 3), ds), DimensionError);
}

TEST(Objective, ZeroFactorsLeaveDataFit) {
  std::mt19937_64 rng(6);
  const Dataset ds = testutil::random_dataset(4, 6, rng);
  auto m = testutil::random_model(4, 2, rng);
  m.B.setZero();
  m.C.setZero();
  EXPECT_EQ(objective(m, ds, {2, 0.7}), data_fit(effective_elasticity(m), ds));
}

TEST(Objective, AllZeroModel) {
  std::mt19937_64 rng(6);
  const Dataset ds = testutil::random_dataset(4, 6, rng);
  const ElasticityModel m{Matrix::Zero(4, 3), Matrix::Zero(4, 3), Vector::Zero(4), Vector::Zero(4)};
  for (double lambda : {1e-3, 0.1, 10.0}) EXPECT_DOUBLE_EQ(objective(m, ds, {3, lambda}), -4.0);
}

TEST(Objective, MatchesScalarOracle) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 10; ++trial) {
    const Dataset ds = testutil::random_dataset(5, 8, rng);
    const auto m = testutil::random_model(5, 2, rng);
    const double ref = static_cast<double>(
        oracle::objective(to_param_block(m), 2, 0.3, ds.demands(), ds.design()));
    EXPECT_LE(rel_err(objective(m, ds, {2, 0.3}), ref), 1e-12);
  }
}

TEST(Objective, RankMismatch) {
  std::mt19937_64 rng(7);
  const Dataset ds = testutil::random_dataset(3, 4, rng);
  const auto m = testutil::random_model(3, 2, rng);
  EXPECT_THROW(objective(m, ds, {3, 0.1}), ConfigError);
  EXPECT_THROW(gradient(m, ds, {1, 0.1}), ConfigError);
}

TEST(Gradient, StationaryAtUnitDemands) {
  std::mt19937_64 rng(9);
  Matrix X = testutil::random_matrix(4, 5, rng);
  X.row(3).setOnes();
  const Dataset ds(Matrix::Ones(3, 5), X);
  const ElasticityModel m{Matrix::Zero(3, 2), Matrix::Zero(3, 2), Vector::Zero(3), Vector::Zero(3)};
  EXPECT_TRUE(elasticity_gradient(effective_elasticity(m), ds).isZero(0.0));
  EXPECT_TRUE(gradient(m, ds, {2, 0.5}).isZero(0.0));
}

TEST(Gradient, ZeroFactorBlocksVanish) {
  std::mt19937_64 rng(10);
  const Dataset ds = testutil::random_dataset(4, 6, rng);
  auto m = testutil::random_model(4, 2, rng);
  m.B.setZero();
  m.C.setZero();
  const ParamBlock G = gradient(m, ds, {2, 0.4});
  EXPECT_TRUE(G.leftCols(4).isZero(0.0));
}

TEST(Gradient, MatchesCentralDifferences) {
  std::mt19937_64 rng(12);
  const Dataset ds = testutil::random_dataset(6, 9, rng);
  const auto m = testutil::random_model(6, 2, rng);
  const double lambda = 0.2;
  const ParamBlock G = gradient(m, ds, {2, lambda});
  const Matrix fd = oracle::central_differences(
      [&](const Matrix& P) { return oracle::objective(P, 2, lambda, ds.demands(), ds.design()); },
      to_param_block(m), 1e-6);
  for (Index i = 0; i < G.rows(); ++i)
    for (Index k = 0; k < G.cols(); ++k) EXPECT_LE(rel_err(G(i, k), fd(i, k), 1e-4), 1e-6);
}

TEST(Gradient, CachedProductMatchesDirectPath) {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 10; ++trial) {
    const Dataset ds = testutil::random_dataset(7, 20, rng);
    const auto m = testutil::random_model(7, 3, rng);
    const ParamBlock a = gradient(m, ds, {3, 0.1}, GradientPath::CachedProduct);
    const ParamBlock b = gradient(m, ds, {3, 0.1}, GradientPath::Direct);
    EXPECT_LE((a - b).norm(), 1e-13 * std::max(1.0, b.norm()));
  }
}

TEST(Gradient, OverflowIsSignalledNotThrown) {
  std::mt19937_64 rng(14);
  const Dataset ds = testutil::random_dataset(3, 4, rng);
  auto m = testutil::random_model(3, 1, rng);
  m.log_d_nom(0) = 800.0;
  ParamBlock G;
  EXPECT_NO_THROW(G = gradient(m, ds, {1, 0.1}));
  EXPECT_FALSE(G.allFinite());
}

TEST(AverageLogLikelihood, FactorialEdgeCases) {
  Matrix X = Matrix::Zero(3, 4);
  X.row(2).setOnes();
  EXPECT_DOUBLE_EQ(average_log_likelihood(Matrix::Zero(2, 3), Dataset(Matrix::Ones(2, 4), X)), -2.0);
  EXPECT_DOUBLE_EQ(average_log_likelihood(Matrix::Zero(2, 3), Dataset(Matrix::Zero(2, 4), X)), -2.0);
}

TEST(AverageLogLikelihood, IdentityWithDataFit) {
  std::mt19937_64 rng(15);
  for (int trial = 0; trial < 20; ++trial) {
    const Dataset ds = testutil::random_dataset(4, 10, rng, 0.3, 6.0);
    const Matrix Et = testutil::random_matrix(4, 5, rng, 0.5);
    const double ref = static_cast<double>(oracle::data_fit(Et, ds.demands(), ds.design()) -
                                           oracle::mean_log_factorial(ds.demands()));
    EXPECT_LE(rel_err(average_log_likelihood(Et, ds), ref), 1e-12);
    EXPECT_LE(rel_err(average_log_likelihood(Et, ds), data_fit(Et, ds) - ds.mean_log_factorial()),
              1e-12);
  }
}

TEST(Properties, DataFitIsConcave) {
  std::mt19937_64 rng(16);
  for (int trial = 0; trial < 10; ++trial) {
    const Dataset ds = testutil::random_dataset(4, 9, rng);
    const Matrix E1 = testutil::random_matrix(4, 5, rng, 0.8);
    const Matrix E2 = testutil::random_matrix(4, 5, rng, 0.8);
    const double f1 = data_fit(E1, ds), f2 = data_fit(E2, ds);
    for (int k = 0; k < 20; ++k) {
      const double t = k / 19.0;
      const Matrix Et = t * E1 + (1 - t) * E2;
      EXPECT_GE(data_fit(Et, ds), t * f1 + (1 - t) * f2 - 1e-10);
    }
  }
}

TEST(Properties, GradientMatchesFiniteDifferencesOnRandomInstances) {
  std::mt19937_64 rng(17);
  std::uniform_int_distribution<int> nd(1, 8), Nd(1, 12), rd(1, 3);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const int n = nd(rng), N = Nd(rng), r = rd(rng);
    const Dataset ds = testutil::random_dataset(n, N, rng);
    const auto m = testutil::random_model(n, r, rng);
    const double lambda = std::uniform_real_distribution<double>(0.01, 1.0)(rng);
    const ParamBlock G = gradient(m, ds, {r, lambda});
    const Matrix fd = oracle::central_differences(
        [&](const Matrix& P) { return oracle::objective(P, r, lambda, ds.demands(), ds.design()); },
        to_param_block(m), 1e-6);
    for (Index i = 0; i < G.rows(); ++i)
      for (Index k = 0; k < G.cols(); ++k) worst = std::max(worst, rel_err(G(i, k), fd(i, k), 1e-4));
  }
  EXPECT_LE(worst, 1e-6);
}
