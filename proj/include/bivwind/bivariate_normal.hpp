#pragma once

// Bivariate Gaussian response with identity / log / rhogit links.

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>
#include <utility>

#include <Eigen/Dense>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "bivwind/errors.hpp"

namespace bivwind {

inline constexpr double kRhoClamp = 1.0 - 1e-8;

struct BivariateNormalParams {
  double mu1 = 0.0;
  double mu2 = 0.0;
  double sigma1 = 1.0;
  double sigma2 = 1.0;
  double rho = 0.0;

  bool valid() const noexcept {
    return std::isfinite(mu1) && std::isfinite(mu2) && sigma1 > 0.0 && sigma2 > 0.0 &&
           std::isfinite(sigma1) && std::isfinite(sigma2) && std::abs(rho) < 1.0;
  }

  void validate() const {
    if (!(sigma1 > 0.0) || !(sigma2 > 0.0) || !std::isfinite(sigma1) || !std::isfinite(sigma2)) {
      throw DomainError("bivariate normal scale parameters must be positive and finite");
    }
    if (!(std::abs(rho) < 1.0)) throw DomainError("bivariate normal correlation must satisfy |rho| < 1");
    if (!std::isfinite(mu1) || !std::isfinite(mu2)) throw DomainError("non-finite location parameter");
  }

  Eigen::Matrix2d covariance() const {
    Eigen::Matrix2d s;
    s << sigma1 * sigma1, rho * sigma1 * sigma2, rho * sigma1 * sigma2, sigma2 * sigma2;
    return s;
  }
};

/// The five additive predictors, one per distribution parameter.
struct LinearPredictors {
  double eta_mu1 = 0.0;
  double eta_mu2 = 0.0;
  double eta_logsigma1 = 0.0;
  double eta_logsigma2 = 0.0;
  double eta_rhogit = 0.0;

  std::array<double, 5> as_array() const {
    return {eta_mu1, eta_mu2, eta_logsigma1, eta_logsigma2, eta_rhogit};
  }
  static LinearPredictors from_array(const std::array<double, 5>& a) {
    return {a[0], a[1], a[2], a[3], a[4]};
  }
  bool finite() const noexcept {
    return std::isfinite(eta_mu1) && std::isfinite(eta_mu2) && std::isfinite(eta_logsigma1) &&
           std::isfinite(eta_logsigma2) && std::isfinite(eta_rhogit);
  }
};

/// Zonal (y1) and meridional (y2) observed wind components.
struct Observation {
  double y1 = 0.0;
  double y2 = 0.0;
};

inline double rhogit(double rho) { return rho / std::sqrt((1.0 - rho) * (1.0 + rho)); }

/// Largest |eta_rhogit| whose inverse stays inside the clamp.
inline double rhogit_limit() {
  static const double limit = rhogit(kRhoClamp);
  return limit;
}

inline double inverse_rhogit(double eta) {
  const double rho = eta / std::sqrt(1.0 + eta * eta);
  return std::clamp(rho, -kRhoClamp, kRhoClamp);
}

inline BivariateNormalParams inverse_links(const LinearPredictors& eta) {
  if (!eta.finite()) throw InputError("non-finite linear predictor");
  return {eta.eta_mu1, eta.eta_mu2, std::exp(eta.eta_logsigma1), std::exp(eta.eta_logsigma2),
          inverse_rhogit(eta.eta_rhogit)};
}

inline LinearPredictors forward_links(const BivariateNormalParams& p) {
  p.validate();
  return {p.mu1, p.mu2, std::log(p.sigma1), std::log(p.sigma2), rhogit(p.rho)};
}

inline double log_likelihood(const BivariateNormalParams& p, const Observation& y) {
  p.validate();
  const double z1 = (y.y1 - p.mu1) / p.sigma1;
  const double z2 = (y.y2 - p.mu2) / p.sigma2;
  const double log_q = std::log1p(-p.rho * p.rho);
  const double q = (1.0 - p.rho) * (1.0 + p.rho);
  const double quad = (z1 * z1 - 2.0 * p.rho * z1 * z2 + z2 * z2) / q;
  return -std::log(2.0 * std::numbers::pi) - std::log(p.sigma1) - std::log(p.sigma2) - 0.5 * log_q -
         0.5 * quad;
}

/// Log-likelihood, gradient and Hessian with respect to the five predictors.
///
/// Index order: mu1, mu2, logsigma1, logsigma2, rhogit.  `fisher` holds the
/// expected negative Hessian.  With the rhogit predictor t,
/// 1 / (1 - rho^2) = 1 + t^2 and rho / (1 - rho^2) = t sqrt(1 + t^2), which keeps
/// every term free of cancellation.
struct PredictorDerivatives {
  double loglik = 0.0;
  Eigen::Matrix<double, 5, 1> gradient = Eigen::Matrix<double, 5, 1>::Zero();
  Eigen::Matrix<double, 5, 5> hessian = Eigen::Matrix<double, 5, 5>::Zero();
  Eigen::Matrix<double, 5, 5> fisher = Eigen::Matrix<double, 5, 5>::Zero();
};

inline PredictorDerivatives predictor_derivatives(const LinearPredictors& eta, const Observation& y) {
  if (!eta.finite()) throw InputError("non-finite linear predictor");
  const double lim = rhogit_limit();
  const bool clamped = std::abs(eta.eta_rhogit) > lim;
  const double t = std::clamp(eta.eta_rhogit, -lim, lim);
  const double s1 = eta.eta_logsigma1;
  const double s2 = eta.eta_logsigma2;
  const double sig1 = std::exp(s1);
  const double sig2 = std::exp(s2);
  const double z1 = (y.y1 - eta.eta_mu1) / sig1;
  const double z2 = (y.y2 - eta.eta_mu2) / sig2;
  const double a = 1.0 + t * t;
  const double b = std::sqrt(a);
  const double tb = t * b;
  const double dtb = (1.0 + 2.0 * t * t) / b;
  const double zz = z1 * z1 + z2 * z2;
  const double z12 = z1 * z2;

  PredictorDerivatives d;
  d.loglik = -std::log(2.0 * std::numbers::pi) - s1 - s2 + 0.5 * std::log(a) - 0.5 * a * zz + tb * z12;

  auto& g = d.gradient;
  g(0) = (a * z1 - tb * z2) / sig1;
  g(1) = (a * z2 - tb * z1) / sig2;
  g(2) = -1.0 + a * z1 * z1 - tb * z12;
  g(3) = -1.0 + a * z2 * z2 - tb * z12;
  g(4) = clamped ? 0.0 : t / a - t * zz + dtb * z12;

  auto& h = d.hessian;
  h(0, 0) = -a / (sig1 * sig1);
  h(0, 1) = tb / (sig1 * sig2);
  h(1, 1) = -a / (sig2 * sig2);
  h(0, 2) = (-2.0 * a * z1 + tb * z2) / sig1;
  h(0, 3) = tb * z2 / sig1;
  h(1, 2) = tb * z1 / sig2;
  h(1, 3) = (-2.0 * a * z2 + tb * z1) / sig2;
  h(2, 2) = -2.0 * a * z1 * z1 + tb * z12;
  h(2, 3) = tb * z12;
  h(3, 3) = -2.0 * a * z2 * z2 + tb * z12;
  if (!clamped) {
    h(0, 4) = (2.0 * t * z1 - dtb * z2) / sig1;
    h(1, 4) = (2.0 * t * z2 - dtb * z1) / sig2;
    h(2, 4) = 2.0 * t * z1 * z1 - dtb * z12;
    h(3, 4) = 2.0 * t * z2 * z2 - dtb * z12;
    h(4, 4) = (1.0 - t * t) / (a * a) - zz + t * (3.0 + 2.0 * t * t) / (a * b) * z12;
  }
  h.triangularView<Eigen::StrictlyLower>() = h.transpose();

  const double rho = t / b;
  auto& f = d.fisher;
  f(0, 0) = a / (sig1 * sig1);
  f(0, 1) = f(1, 0) = -tb / (sig1 * sig2);
  f(1, 1) = a / (sig2 * sig2);
  f(2, 2) = f(3, 3) = (2.0 - rho * rho) * a;
  f(2, 3) = f(3, 2) = -rho * rho * a;
  if (!clamped) {
    f(2, 4) = f(4, 2) = -t / a;
    f(3, 4) = f(4, 3) = -t / a;
    f(4, 4) = (1.0 + 2.0 * t * t) / (a * a);
  }
  return d;
}

inline std::array<double, 5> loglik_grad_eta(const LinearPredictors& eta, const Observation& y) {
  const auto d = predictor_derivatives(eta, y);
  return {d.gradient(0), d.gradient(1), d.gradient(2), d.gradient(3), d.gradient(4)};
}

/// m x 2 sample matrix; column 0 zonal, column 1 meridional.
using SampleMatrix = Eigen::Matrix<double, Eigen::Dynamic, 2>;

template <class Rng>
SampleMatrix sample(const BivariateNormalParams& p, Eigen::Index n, Rng& rng) {
  p.validate();
  if (n < 1) throw InputError("sample count must be at least 1");
  std::normal_distribution<double> normal(0.0, 1.0);
  const double c = std::sqrt((1.0 - p.rho) * (1.0 + p.rho));
  SampleMatrix out(n, 2);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double e1 = normal(rng);
    const double e2 = normal(rng);
    out(i, 0) = p.mu1 + p.sigma1 * e1;
    out(i, 1) = p.mu2 + p.sigma2 * (p.rho * e1 + c * e2);
  }
  return out;
}

namespace detail {

inline double normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }

/// Phi(b) - Phi(a) evaluated in whichever tail avoids cancellation.
inline double normal_interval(double a, double b) {
  constexpr double r2 = std::numbers::sqrt2;
  if (b <= a) return 0.0;
  if (a >= 0.0) return 0.5 * (std::erfc(a / r2) - std::erfc(b / r2));
  if (b <= 0.0) return 0.5 * (std::erfc(-b / r2) - std::erfc(-a / r2));
  return 1.0 - 0.5 * std::erfc(b / r2) - 0.5 * std::erfc(-a / r2);
}

}  // namespace detail

/// P(lower <= Y <= upper) componentwise, by conditioning on the first component.
inline double rectangle_probability(const BivariateNormalParams& p, std::array<double, 2> lower,
                                    std::array<double, 2> upper) {
  p.validate();
  if (!(lower[0] < upper[0]) || !(lower[1] < upper[1])) {
    throw InputError("rectangle bounds must satisfy lower < upper componentwise");
  }
  const double a1 = (lower[0] - p.mu1) / p.sigma1;
  const double b1 = (upper[0] - p.mu1) / p.sigma1;
  const double a2 = (lower[1] - p.mu2) / p.sigma2;
  const double b2 = (upper[1] - p.mu2) / p.sigma2;
  if (p.rho == 0.0) return detail::normal_interval(a1, b1) * detail::normal_interval(a2, b2);

  // The standard normal density is below 1e-300 beyond |x| = 37.
  constexpr double kTail = 38.0;
  const double r = p.rho;
  const double s = std::sqrt((1.0 - r) * (1.0 + r));
  // Restrict to the x-range where the conditional interval is non-negligible.
  double lo = std::max(a1, -kTail);
  double hi = std::min(b1, kTail);
  {
    const double e1 = (a2 - kTail * s) / r;
    const double e2 = (b2 + kTail * s) / r;
    lo = std::max(lo, std::min(e1, e2));
    hi = std::min(hi, std::max(e1, e2));
  }
  if (!(lo < hi)) return 0.0;
  auto integrand = [&](double x) {
    return detail::normal_pdf(x) * detail::normal_interval((a2 - r * x) / s, (b2 - r * x) / s);
  };
  using boost::math::quadrature::gauss_kronrod;
  const double value = gauss_kronrod<double, 31>::integrate(integrand, lo, hi, 25, 1e-13);
  return std::clamp(value, 0.0, 1.0);
}

}  // namespace bivwind
