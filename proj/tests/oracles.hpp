#pragma once

// Reference computations that share no code with the library: closed-form
// densities, Monte Carlo box probabilities, a separate univariate Newton fitter.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

inline double phi(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

/// Bivariate normal density written out from the textbook formula.
inline double density(double mu1, double mu2, double s1, double s2, double rho, double y1, double y2) {
  const double z1 = (y1 - mu1) / s1, z2 = (y2 - mu2) / s2;
  const double q = 1.0 - rho * rho;
  return std::exp(-(z1 * z1 - 2 * rho * z1 * z2 + z2 * z2) / (2 * q)) / (2 * std::numbers::pi * s1 * s2 * std::sqrt(q));
}

/// Trapezoid integral of the density over mu +/- 10 sigma on an n x n grid.
inline double integrate_density(double mu1, double mu2, double s1, double s2, double rho, int n = 1201) {
  const double h1 = 20 * s1 / (n - 1), h2 = 20 * s2 / (n - 1);
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    const double w1 = (i == 0 || i == n - 1) ? 0.5 : 1.0;
    const double y1 = mu1 - 10 * s1 + i * h1;
    for (int j = 0; j < n; ++j) {
      const double w2 = (j == 0 || j == n - 1) ? 0.5 : 1.0;
      total += w1 * w2 * density(mu1, mu2, s1, s2, rho, y1, mu2 - 10 * s2 + j * h2);
    }
  }
  return total * h1 * h2;
}

struct MonteCarlo {
  double estimate;
  double standard_error;
};

/// Fraction of `draws` bivariate normal samples falling in the box.
inline MonteCarlo box_monte_carlo(double mu1, double mu2, double s1, double s2, double rho, double l1, double l2,
                                  double u1, double u2, long draws, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n;
  long hits = 0;
  const double c = std::sqrt(1 - rho * rho);
  for (long i = 0; i < draws; ++i) {
    const double a = n(rng), b = n(rng);
    const double y1 = mu1 + s1 * a;
    const double y2 = mu2 + s2 * (rho * a + c * b);
    if (y1 >= l1 && y1 <= u1 && y2 >= l2 && y2 <= u2) ++hits;
  }
  const double p = static_cast<double>(hits) / static_cast<double>(draws);
  return {p, std::sqrt(p * (1 - p) / static_cast<double>(draws))};
}

/// Pearson chi-square statistic against a uniform distribution over bins.
inline double chi_square_uniform(const std::vector<long>& counts) {
  double total = 0.0;
  for (long c : counts) total += static_cast<double>(c);
  const double expected = total / static_cast<double>(counts.size());
  double x2 = 0.0;
  for (long c : counts) x2 += (c - expected) * (c - expected) / expected;
  return x2;
}

/// Upper 0.001 critical value of chi-square with k degrees of freedom
/// (Wilson-Hilferty approximation, accurate to well under 1 % for k >= 10).
inline double chi_square_critical_0001(int k) {
  const double z = 3.090232306167813;
  const double a = 2.0 / (9.0 * k);
  return k * std::pow(1 - a + z * std::sqrt(a), 3);
}

/// Univariate heteroscedastic Gaussian regression y ~ N(X b, exp(Z g)^2) with
/// optional quadratic penalties, maximized by full Newton on (b, g).
struct UnivariateFit {
  Eigen::VectorXd beta;
  Eigen::VectorXd gamma;
};

inline UnivariateFit fit_univariate(const Eigen::MatrixXd& x, const Eigen::MatrixXd& z, const Eigen::VectorXd& y,
                                    const Eigen::MatrixXd& px, const Eigen::MatrixXd& pz) {
  const Eigen::Index p = x.cols(), q = z.cols(), n = y.size();
  Eigen::VectorXd beta = (x.transpose() * x + px).ldlt().solve(x.transpose() * y);
  Eigen::VectorXd gamma = Eigen::VectorXd::Zero(q);
  {
    const Eigen::VectorXd r = y - x * beta;
    gamma(0) = std::log(std::sqrt(r.squaredNorm() / n));  // first column of z is the intercept
  }
  auto objective = [&](const Eigen::VectorXd& b, const Eigen::VectorXd& g) {
    const Eigen::VectorXd eta = z * g;
    const Eigen::VectorXd r = y - x * b;
    double ll = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) ll += -eta(i) - 0.5 * r(i) * r(i) * std::exp(-2 * eta(i));
    return ll - 0.5 * b.dot(px * b) - 0.5 * g.dot(pz * g);
  };
  for (int it = 0; it < 500; ++it) {
    const Eigen::VectorXd eta = z * gamma;
    const Eigen::VectorXd r = y - x * beta;
    Eigen::VectorXd w(n), e(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      w(i) = std::exp(-2 * eta(i));
      e(i) = r(i) * r(i) * w(i);
    }
    Eigen::VectorXd grad(p + q);
    grad.head(p) = x.transpose() * (w.asDiagonal() * r) - px * beta;
    grad.tail(q) = z.transpose() * (e.array() - 1.0).matrix() - pz * gamma;
    if (grad.lpNorm<Eigen::Infinity>() < 1e-11) break;
    Eigen::MatrixXd h(p + q, p + q);
    h.topLeftCorner(p, p) = -x.transpose() * w.asDiagonal() * x - px;
    h.topRightCorner(p, q) = -2.0 * x.transpose() * (w.array() * r.array()).matrix().asDiagonal() * z;
    h.bottomLeftCorner(q, p) = h.topRightCorner(p, q).transpose();
    h.bottomRightCorner(q, q) = -2.0 * z.transpose() * e.asDiagonal() * z - pz;
    Eigen::VectorXd step = (-h).ldlt().solve(grad);
    if (!(grad.dot(step) > 0.0)) {  // not an ascent direction: expected information instead
      Eigen::MatrixXd f = Eigen::MatrixXd::Zero(p + q, p + q);
      f.topLeftCorner(p, p) = x.transpose() * w.asDiagonal() * x + px;
      f.bottomRightCorner(q, q) = 2.0 * z.transpose() * z + pz;
      step = f.ldlt().solve(grad);
    }
    const double f0 = objective(beta, gamma);
    double t = 1.0;
    for (int k = 0; k < 50; ++k, t *= 0.5) {
      if (objective(beta + t * step.head(p), gamma + t * step.tail(q)) >= f0) break;
    }
    beta += t * step.head(p);
    gamma += t * step.tail(q);
  }
  return {beta, gamma};
}

}  // namespace oracle
