#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "bivwind/bivariate_normal.hpp"
#include "oracles.hpp"

using namespace bivwind;

TEST(Links, InverseAtZeroAndKnownValues) {
  const auto p = inverse_links({0, 0, 0, 0, 0});
  EXPECT_EQ(p.mu1, 0.0);
  EXPECT_EQ(p.mu2, 0.0);
  EXPECT_EQ(p.sigma1, 1.0);
  EXPECT_EQ(p.sigma2, 1.0);
  EXPECT_EQ(p.rho, 0.0);
  EXPECT_NEAR(inverse_links({0, 0, 0, 0, 1.0}).rho, 1.0 / std::sqrt(2.0), 1e-6);
  EXPECT_NEAR(inverse_links({0, 0, std::log(2.0), 0, 0}).sigma1, 2.0, 1e-15);
  EXPECT_THROW(inverse_links({0, std::nan(""), 0, 0, 0}), InputError);
  EXPECT_THROW(inverse_links({0, 0, 0, INFINITY, 0}), InputError);
}

TEST(Links, ForwardInverseRoundTripAndClamp) {
  for (double rho : {-0.95, -0.3, 0.0, 0.42, 0.999}) {
    const BivariateNormalParams p{1.5, -2.0, 0.7, 3.1, rho};
    const auto q = inverse_links(forward_links(p));
    EXPECT_NEAR(q.rho, rho, 1e-12);
    EXPECT_NEAR(q.sigma2, 3.1, 1e-12);
  }
  EXPECT_LT(inverse_rhogit(1e30), 1.0);
  EXPECT_GT(inverse_rhogit(-1e30), -1.0);
}

TEST(LogLikelihood, ClosedFormsAtTheMode) {
  EXPECT_NEAR(log_likelihood({0, 0, 1, 1, 0}, {0, 0}), -std::log(2 * std::numbers::pi), 1e-12);
  EXPECT_NEAR(log_likelihood({0, 0, 1, 1, 0}, {0, 0}), -1.8378771, 1e-7);
  EXPECT_NEAR(log_likelihood({0, 0, 1, 1, 0.5}, {0, 0}), -std::log(2 * std::numbers::pi) - 0.5 * std::log(0.75), 1e-12);
  EXPECT_NEAR(log_likelihood({0, 0, 1, 1, 0.5}, {0, 0}), -1.6940366, 1e-6);  // printed value is rounded loosely
}

TEST(LogLikelihood, AgreesWithTextbookDensity) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(-3, 3), s(0.2, 4), r(-0.95, 0.95);
  for (int i = 0; i < 100; ++i) {
    const BivariateNormalParams p{u(rng), u(rng), s(rng), s(rng), r(rng)};
    const Observation y{u(rng), u(rng)};
    EXPECT_NEAR(log_likelihood(p, y), std::log(oracle::density(p.mu1, p.mu2, p.sigma1, p.sigma2, p.rho, y.y1, y.y2)),
                1e-10);
  }
}

TEST(LogLikelihood, RejectsInvalidParameters) {
  EXPECT_THROW(log_likelihood({0, 0, 1, 1, 1.0}, {0, 0}), DomainError);
  EXPECT_THROW(log_likelihood({0, 0, 0.0, 1, 0}, {0, 0}), DomainError);
  EXPECT_THROW(log_likelihood({0, 0, 1, -2, 0}, {0, 0}), DomainError);
}

TEST(LogLikelihood, DensityIntegratesToOne) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-5, 5), s(0.3, 5), r(-0.9, 0.9);
  for (int i = 0; i < 20; ++i) {
    const BivariateNormalParams p{u(rng), u(rng), s(rng), s(rng), r(rng)};
    // integrate exp(log_likelihood) on the same grid the oracle uses
    const int n = 601;
    const double h1 = 20 * p.sigma1 / (n - 1), h2 = 20 * p.sigma2 / (n - 1);
    double total = 0.0;
    for (int a = 0; a < n; ++a) {
      for (int b = 0; b < n; ++b) {
        const double w = ((a == 0 || a == n - 1) ? 0.5 : 1.0) * ((b == 0 || b == n - 1) ? 0.5 : 1.0);
        total += w * std::exp(log_likelihood(p, {p.mu1 - 10 * p.sigma1 + a * h1, p.mu2 - 10 * p.sigma2 + b * h2}));
      }
    }
    EXPECT_NEAR(total * h1 * h2, 1.0, 1e-4);
  }
}

TEST(Gradient, StandardCase) {
  const auto g = loglik_grad_eta({0, 0, 0, 0, 0}, {0, 0});
  EXPECT_EQ(g[0], 0.0);
  EXPECT_EQ(g[1], 0.0);
  EXPECT_EQ(g[2], -1.0);
  EXPECT_EQ(g[3], -1.0);
  const auto g2 = loglik_grad_eta({0, 0, 0, 0, 0}, {2.0, -1.0});
  EXPECT_NEAR(g2[2], -1 + 4.0, 1e-14);
  EXPECT_NEAR(g2[3], -1 + 1.0, 1e-14);
}

TEST(Gradient, MatchesCentralDifferences) {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(-3, 3), ls(-1, 1), t(-2, 2);
  const double h = 1e-6;
  double worst = 0.0;
  for (int i = 0; i < 500; ++i) {
    const LinearPredictors eta{u(rng), u(rng), ls(rng), ls(rng), t(rng)};
    const Observation y{u(rng), u(rng)};
    const auto g = loglik_grad_eta(eta, y);
    for (int k = 0; k < 5; ++k) {
      auto plus = eta.as_array(), minus = eta.as_array();
      plus[k] += h;
      minus[k] -= h;
      const double fd = (log_likelihood(inverse_links(LinearPredictors::from_array(plus)), y) -
                         log_likelihood(inverse_links(LinearPredictors::from_array(minus)), y)) /
                        (2 * h);
      worst = std::max(worst, std::abs(g[k] - fd) / std::max(1.0, std::abs(fd)));
    }
  }
  EXPECT_LT(worst, 1e-5);
}

TEST(Gradient, HessianMatchesDifferencedGradient) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-2, 2), ls(-0.5, 0.5), t(-1.5, 1.5);
  const double h = 1e-6;
  for (int i = 0; i < 50; ++i) {
    const LinearPredictors eta{u(rng), u(rng), ls(rng), ls(rng), t(rng)};
    const Observation y{u(rng), u(rng)};
    const auto d = predictor_derivatives(eta, y);
    for (int k = 0; k < 5; ++k) {
      auto plus = eta.as_array(), minus = eta.as_array();
      plus[k] += h;
      minus[k] -= h;
      const auto gp = loglik_grad_eta(LinearPredictors::from_array(plus), y);
      const auto gm = loglik_grad_eta(LinearPredictors::from_array(minus), y);
      for (int j = 0; j < 5; ++j) {
        EXPECT_NEAR(d.hessian(j, k), (gp[j] - gm[j]) / (2 * h), 1e-5 * std::max(1.0, std::abs(d.hessian(j, k))));
      }
    }
  }
}

TEST(Gradient, FisherIsExpectedNegativeHessian) {
  const LinearPredictors eta{0.5, -1.0, 0.3, -0.2, 0.8};
  const auto p = inverse_links(eta);
  std::mt19937_64 rng(8);
  const SampleMatrix s = sample(p, 400000, rng);
  Eigen::Matrix<double, 5, 5> mean = Eigen::Matrix<double, 5, 5>::Zero();
  for (Eigen::Index i = 0; i < s.rows(); ++i) mean -= predictor_derivatives(eta, {s(i, 0), s(i, 1)}).hessian;
  mean /= static_cast<double>(s.rows());
  const auto f = predictor_derivatives(eta, {0, 0}).fisher;
  EXPECT_LT((mean - f).cwiseAbs().maxCoeff(), 0.02);
}

TEST(Sampling, LawOfLargeNumbers) {
  std::mt19937_64 rng(17);
  const SampleMatrix s = sample({1, 2, 1, 2, 0.5}, 100000, rng);
  const Eigen::RowVector2d mean = s.colwise().mean();
  EXPECT_NEAR(mean(0), 1.0, 0.02);
  EXPECT_NEAR(mean(1), 2.0, 0.02);
  const Eigen::MatrixXd c = s.rowwise() - mean;
  const double cov = c.col(0).dot(c.col(1)) / (s.rows() - 1.0);
  const double corr = cov / std::sqrt(c.col(0).squaredNorm() / (s.rows() - 1.0) * c.col(1).squaredNorm() / (s.rows() - 1.0));
  EXPECT_NEAR(corr, 0.5, 0.02);
}

TEST(Sampling, DeterministicAndNearDegenerate) {
  std::mt19937_64 a(3), b(3);
  EXPECT_EQ(sample({0, 0, 1, 1, 0.2}, 50, a), sample({0, 0, 1, 1, 0.2}, 50, b));
  std::mt19937_64 rng(4);
  const SampleMatrix s = sample({1, -1, 2, 3, 0.999999}, 1000, rng);
  for (Eigen::Index i = 0; i < s.rows(); ++i) EXPECT_NEAR(s(i, 1) - (-1), 1.5 * (s(i, 0) - 1), 0.05);
  EXPECT_THROW(sample({0, 0, 1, 1, 0}, 0, rng), InputError);
}

TEST(Rectangle, IndependentCaseIsProductOfIntervals) {
  const double expected = std::pow(2 * oracle::phi(0.1) - 1, 2);
  EXPECT_NEAR(rectangle_probability({0, 0, 1, 1, 0}, {-0.1, -0.1}, {0.1, 0.1}), expected, 1e-12);
  EXPECT_NEAR(expected, 0.0063450, 1e-7);
}

TEST(Rectangle, QuadratureBranchAgreesAtTinyCorrelation) {
  const double exact = (oracle::phi(1.2) - oracle::phi(-0.4)) * (oracle::phi(0.9) - oracle::phi(-2.0));
  EXPECT_NEAR(rectangle_probability({0, 0, 1, 1, 1e-12}, {-0.4, -2.0}, {1.2, 0.9}), exact, 1e-10);
}

TEST(Rectangle, WholePlaneAndInvertedBounds) {
  for (double rho : {0.0, 0.3, -0.8, 0.99}) {
    const BivariateNormalParams p{2, -1, 1.5, 0.5, rho};
    EXPECT_NEAR(rectangle_probability(p, {2 - 12, -1 - 4}, {2 + 12, -1 + 4}), 1.0, 1e-9);
  }
  EXPECT_THROW(rectangle_probability({0, 0, 1, 1, 0}, {1, 0}, {0, 1}), InputError);
  EXPECT_THROW(rectangle_probability({0, 0, 1, 1, 0}, {0, 0}, {1, 0}), InputError);
}

TEST(Rectangle, CorrelatedCaseMatchesMonteCarlo) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(-1.5, 1.0), w(0.3, 1.5);
  for (int i = 0; i < 3; ++i) {
    const double l1 = u(rng), l2 = u(rng), u1 = l1 + w(rng), u2 = l2 + w(rng);
    const double p = rectangle_probability({0.2, -0.1, 1.0, 1.3, 0.7}, {l1, l2}, {u1, u2});
    const auto mc = oracle::box_monte_carlo(0.2, -0.1, 1.0, 1.3, 0.7, l1, l2, u1, u2, 2'000'000, 100 + i);
    EXPECT_LT(std::abs(p - mc.estimate), 3 * mc.standard_error) << "box " << i;
  }
}

TEST(Rectangle, FarTailStaysNonNegative) {
  const double p = rectangle_probability({0, 0, 1, 1, 0.9}, {30, 30}, {30.2, 30.2});
  EXPECT_GE(p, 0.0);
  EXPECT_LT(p, 1e-100);
}
