#include <gtest/gtest.h>

#include <cmath>

#include "chisq.hpp"
#include "elastifit/poisson.hpp"
#include "elastifit/synth.hpp"

using namespace elastifit;

TEST(PoissonSample, VanishingRate) {
  RandomStream rng(1, "tiny");
  long zeros = 0;
  const long draws = 1000000;
  for (long i = 0; i < draws; ++i) zeros += poisson_sample(1e-9, rng) == 0;
  EXPECT_GE(static_cast<double>(zeros) / draws, 1.0 - 1e-8);
}

TEST(PoissonSample, MomentsAtRateFour) {
  RandomStream rng(2, "moments");
  const long draws = 1000000;
  double sum = 0, sumsq = 0;
  for (long i = 0; i < draws; ++i) {
    const double k = static_cast<double>(poisson_sample(4.0, rng));
    sum += k;
    sumsq += k * k;
  }
  const double mean = sum / draws;
  const double var = sumsq / draws - mean * mean;
  EXPECT_NEAR(mean, 4.0, 0.04);
  EXPECT_NEAR(var, 4.0, 0.04);
}

TEST(PoissonSample, ChiSquareAtRateFour) {
  const auto r = testutil::poisson_chi_square(4.0, 1000000, 3, 16);
  EXPECT_EQ(r.dof, 16);
  EXPECT_GT(r.p_value, 1e-3) << "chi2 = " << r.statistic;
}

TEST(PoissonSample, LargeRateRegimes) {
  for (double rate : {45.0, 250.0, 1500.0}) {
    RandomStream rng(4, "large", static_cast<std::uint64_t>(rate));
    const long draws = 200000;
    double sum = 0, sumsq = 0;
    for (long i = 0; i < draws; ++i) {
      const double k = static_cast<double>(poisson_sample(rate, rng));
      sum += k;
      sumsq += k * k;
    }
    const double mean = sum / draws;
    const double var = sumsq / draws - mean * mean;
    EXPECT_NEAR(mean, rate, 0.01 * rate) << rate;
    EXPECT_NEAR(var, rate, 0.03 * rate) << rate;
  }
  EXPECT_GT(testutil::poisson_chi_square(45.0, 400000, 5).p_value, 1e-3);
}

TEST(PoissonSample, RejectsBadRates) {
  RandomStream rng(0);
  EXPECT_THROW(poisson_sample(0.0, rng), DomainError);
  EXPECT_THROW(poisson_sample(-1.0, rng), DomainError);
  EXPECT_THROW(poisson_sample(std::nan(""), rng), DomainError);
  EXPECT_THROW(poisson_sample(INFINITY, rng), DomainError);
}

TEST(Synthetic, HundredByTwoHundredShapes) {
  const auto inst = generate_synthetic(100, 200, 10, 7);
  EXPECT_EQ(inst.dataset.demands().rows(), 100);
  EXPECT_EQ(inst.dataset.demands().cols(), 200);
  EXPECT_EQ(inst.dataset.design().rows(), 101);
  EXPECT_EQ(inst.dataset.design().cols(), 200);
  EXPECT_EQ(inst.E_syn.rows(), 100);
  EXPECT_EQ(inst.E_syn.cols(), 100);
  EXPECT_TRUE((inst.d_nom_syn.array() == 1.0).all());
}

TEST(Synthetic, CenteredDesignAndBounds) {
  for (std::uint64_t seed : {1, 2, 3}) {
    const auto inst = generate_synthetic(15, 50, 3, seed);
    const Matrix& X = inst.dataset.design();
    for (Index i = 0; i < 15; ++i) EXPECT_NEAR(X.row(i).mean(), 0.0, 1e-12);
    EXPECT_GE(inst.prices.minCoeff(), 1.0);
    EXPECT_LE(inst.prices.maxCoeff(), 2.0);
    EXPECT_GE(inst.s_syn.minCoeff(), -5.0);
    EXPECT_LE(inst.s_syn.maxCoeff(), -1.0);
    EXPECT_GE(inst.cost.minCoeff(), 0.8);
    EXPECT_LE(inst.cost.maxCoeff(), 1.2);
    for (Index i = 0; i < 15; ++i)
      EXPECT_NEAR(std::log(inst.p_nom(i)), inst.prices.row(i).array().log().mean(), 1e-12);
    Matrix E = inst.B_syn * inst.C_syn.transpose();
    E.diagonal() += inst.s_syn;
    EXPECT_EQ(E, inst.E_syn);
  }
}

TEST(Synthetic, Deterministic) {
  const auto a = generate_synthetic(20, 30, 2, 99);
  const auto b = generate_synthetic(20, 30, 2, 99);
  EXPECT_EQ(a.dataset.demands(), b.dataset.demands());
  EXPECT_EQ(a.prices, b.prices);
  EXPECT_EQ(a.E_syn, b.E_syn);
  EXPECT_EQ(a.cost, b.cost);
  const auto c = generate_synthetic(20, 30, 2, 100);
  EXPECT_NE(a.prices, c.prices);
}

TEST(Synthetic, FactorVarianceConvention) {
  const auto var = generate_synthetic(200, 2, 10, 5);
  EXPECT_NEAR(var.B_syn.array().square().mean(), 0.1, 0.01);
  SyntheticOptions o;
  o.scale = GaussianScale::StdDev;
  const auto sd = generate_synthetic(200, 2, 10, 5, o);
  EXPECT_NEAR(sd.B_syn.array().square().mean(), 0.01, 0.001);
}

TEST(Synthetic, DemandMeanAtNominalPrices) {
  // Rates at pi = 0 equal d_nom = 1.
  const long N = 100000;
  for (std::uint64_t product = 0; product < 5; ++product) {
    RandomStream rng(11, "demand", product);
    double sum = 0.0;
    for (long j = 0; j < N; ++j) sum += static_cast<double>(poisson_sample(1.0, rng));
    EXPECT_NEAR(sum / N, 1.0, 0.01);
  }
}

TEST(Synthetic, DemandsFollowModelRates) {
  // Column-averaged demand against the generating rates.
  const auto inst = generate_synthetic(5, 20000, 1, 13);
  const Matrix rates = (inst.E_syn * inst.dataset.design().topRows(5)).array().exp().matrix();
  for (Index i = 0; i < 5; ++i) {
    const double expected = rates.row(i).mean();
    EXPECT_NEAR(inst.dataset.demands().row(i).mean(), expected, 0.03 * expected);
  }
}

TEST(RandomStreams, PurposeStreamsAreIndependent) {
  RandomStream a(5, "prices"), b(5, "factors"), c(5, "prices");
  const auto x = a.next_u64();
  EXPECT_NE(x, b.next_u64());
  EXPECT_EQ(x, c.next_u64());
}
