#pragma once

// Cyclic cubic regression splines parameterized by their values at the knots.
//
// On the interval [x_j, x_{j+1}) of width h_j the spline is
//
//   f(x) = a b_j + c b_{j+1} + (a^3 - a) h_j^2 / 6 d_j + (c^3 - c) h_j^2 / 6 d_{j+1}
//
// with a = (x_{j+1} - x) / h_j, c = 1 - a, knot values b and knot second
// derivatives d.  Continuity of the first derivative around the cycle gives the
// cyclic tridiagonal system B d = D b, so d = F b with F = B^{-1} D and the
// integrated squared second derivative equals b' D' B^{-1} D b.

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "bivwind/errors.hpp"

namespace bivwind {

inline constexpr double kDayOfYearPeriod = 365.25;
inline constexpr double kDirectionPeriod = 360.0;
inline constexpr int kDefaultKnots = 8;

class CyclicSplineSpec {
 public:
  CyclicSplineSpec(double period, std::vector<double> knots)
      : period_(period), knots_(std::move(knots)) {
    validate();
  }

  /// Knots evenly spaced over [0, period).
  static CyclicSplineSpec uniform(double period, int num_knots) {
    if (num_knots < 4) {
      throw ConfigError("cyclic spline needs at least 4 knots, got " + std::to_string(num_knots));
    }
    std::vector<double> knots(static_cast<std::size_t>(num_knots));
    for (int j = 0; j < num_knots; ++j) {
      knots[static_cast<std::size_t>(j)] = period * j / num_knots;
    }
    return CyclicSplineSpec(period, std::move(knots));
  }

  double period() const noexcept { return period_; }
  int num_knots() const noexcept { return static_cast<int>(knots_.size()); }
  std::span<const double> knots() const noexcept { return knots_; }

  /// Reduces x into [0, period).
  double reduce(double x) const {
    double r = std::fmod(x, period_);
    if (r < 0.0) r += period_;
    if (r >= period_) r = 0.0;
    return r;
  }

  friend bool operator==(const CyclicSplineSpec&, const CyclicSplineSpec&) = default;

 private:
  void validate() const {
    if (!(period_ > 0.0) || !std::isfinite(period_)) {
      throw ConfigError("cyclic spline period must be positive and finite");
    }
    if (knots_.size() < 4) {
      throw ConfigError("cyclic spline needs at least 4 knots, got " + std::to_string(knots_.size()));
    }
    for (std::size_t j = 0; j < knots_.size(); ++j) {
      const double k = knots_[j];
      if (!std::isfinite(k) || k < 0.0 || k >= period_) {
        throw ConfigError("knot " + std::to_string(j) + " outside [0, period)");
      }
      if (j > 0 && !(k > knots_[j - 1])) {
        throw ConfigError("knots must be strictly increasing (knot " + std::to_string(j) + ")");
      }
    }
  }

  double period_;
  std::vector<double> knots_;
};

/// Symmetric positive semi-definite penalty over a basis.
struct PenaltyMatrix {
  Eigen::MatrixXd entries;

  Eigen::Index dim() const noexcept { return entries.rows(); }
  double quadratic_form(const Eigen::VectorXd& v) const { return v.dot(entries * v); }
};

/// Evaluator for one cyclic cubic basis; immutable after construction.
class CyclicCubicBasis {
 public:
  explicit CyclicCubicBasis(CyclicSplineSpec spec) : spec_(std::move(spec)) {
    const int k = spec_.num_knots();
    const auto knots = spec_.knots();
    widths_.resize(static_cast<std::size_t>(k));
    for (int j = 0; j < k; ++j) {
      const double next = (j + 1 < k) ? knots[static_cast<std::size_t>(j + 1)] : knots[0] + spec_.period();
      widths_[static_cast<std::size_t>(j)] = next - knots[static_cast<std::size_t>(j)];
    }

    Eigen::MatrixXd b = Eigen::MatrixXd::Zero(k, k);
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(k, k);
    for (int j = 0; j < k; ++j) {
      const int prev = (j + k - 1) % k;
      const int next = (j + 1) % k;
      const double hp = widths_[static_cast<std::size_t>(prev)];
      const double hj = widths_[static_cast<std::size_t>(j)];
      b(j, prev) += hp / 6.0;
      b(j, j) += (hp + hj) / 3.0;
      b(j, next) += hj / 6.0;
      d(j, prev) += 1.0 / hp;
      d(j, j) -= 1.0 / hp + 1.0 / hj;
      d(j, next) += 1.0 / hj;
    }
    const Eigen::PartialPivLU<Eigen::MatrixXd> lu(b);
    second_derivs_ = lu.solve(d);
    Eigen::MatrixXd s = d.transpose() * second_derivs_;
    penalty_.entries = 0.5 * (s + s.transpose());
  }

  const CyclicSplineSpec& spec() const noexcept { return spec_; }
  int dim() const noexcept { return spec_.num_knots(); }

  /// Basis row at x; the periodic reduction happens here.
  Eigen::VectorXd eval(double x) const {
    Eigen::VectorXd row(dim());
    eval_into(x, row);
    return row;
  }

  void eval_into(double x, Eigen::Ref<Eigen::VectorXd> row) const {
    if (!std::isfinite(x)) throw InputError("non-finite spline covariate");
    const int k = dim();
    const auto knots = spec_.knots();
    double xr = spec_.reduce(x);
    int j;
    if (xr < knots[0]) {
      j = k - 1;
      xr += spec_.period();
    } else {
      const auto it = std::upper_bound(knots.begin(), knots.end(), xr);
      j = static_cast<int>(it - knots.begin()) - 1;
    }
    const int jn = (j + 1) % k;
    const double h = widths_[static_cast<std::size_t>(j)];
    const double c = (xr - knots[static_cast<std::size_t>(j)]) / h;
    const double a = 1.0 - c;
    const double wa = (a * a * a - a) * h * h / 6.0;
    const double wc = (c * c * c - c) * h * h / 6.0;
    row = wa * second_derivs_.row(j).transpose() + wc * second_derivs_.row(jn).transpose();
    row(j) += a;
    row(jn) += c;
  }

  /// Integrated squared second derivative over one period.
  const PenaltyMatrix& penalty() const noexcept { return penalty_; }

 private:
  CyclicSplineSpec spec_;
  std::vector<double> widths_;
  Eigen::MatrixXd second_derivs_;
  PenaltyMatrix penalty_;
};

inline Eigen::VectorXd eval_cyclic_basis(double x, const CyclicSplineSpec& spec) {
  return CyclicCubicBasis(spec).eval(x);
}

inline PenaltyMatrix penalty(const CyclicSplineSpec& spec) {
  return CyclicCubicBasis(spec).penalty();
}

/// Row-major flattened outer product: index i * dim2 + j holds b1[i] * b2[j].
inline Eigen::VectorXd tensor_row(const Eigen::VectorXd& b1, const Eigen::VectorXd& b2) {
  Eigen::VectorXd out(b1.size() * b2.size());
  for (Eigen::Index i = 0; i < b1.size(); ++i) {
    out.segment(i * b2.size(), b2.size()) = b1(i) * b2;
  }
  return out;
}

/// Penalty of a tensor-product surface in the row-major layout of tensor_row.
inline PenaltyMatrix tensor_penalty(const PenaltyMatrix& s1, const PenaltyMatrix& s2) {
  const Eigen::Index d1 = s1.dim();
  const Eigen::Index d2 = s2.dim();
  PenaltyMatrix out{Eigen::MatrixXd::Zero(d1 * d2, d1 * d2)};
  for (Eigen::Index i = 0; i < d1; ++i) {
    for (Eigen::Index k = 0; k < d1; ++k) {
      out.entries.block(i * d2, k * d2, d2, d2).diagonal().array() += s1.entries(i, k);
    }
    out.entries.block(i * d2, i * d2, d2, d2) += s2.entries;
  }
  return out;
}

/// Sum-to-zero reparameterization absorbed by a Householder reflection.
///
/// `constraint` holds the column sums of the block it was built from; the
/// columns of `basis` span its orthogonal complement.  A zero constraint means
/// the block already satisfied it and `basis` is the identity.
class CenteringTransform {
 public:
  CenteringTransform() = default;

  static CenteringTransform from_constraint(Eigen::VectorXd constraint) {
    CenteringTransform t;
    const Eigen::Index k = constraint.size();
    const double norm = constraint.norm();
    const double scale = constraint.cwiseAbs().maxCoeff();
    t.constraint_ = std::move(constraint);
    if (k == 0) throw ConfigError("cannot center a block with zero columns");
    if (norm == 0.0 || norm <= 1e-13 * std::max(1.0, scale) * static_cast<double>(k)) {
      t.basis_ = Eigen::MatrixXd::Identity(k, k);
      return t;
    }
    Eigen::VectorXd v = t.constraint_ / norm;
    v(0) += (v(0) >= 0.0) ? 1.0 : -1.0;
    const Eigen::MatrixXd h =
        Eigen::MatrixXd::Identity(k, k) - (2.0 / v.squaredNorm()) * (v * v.transpose());
    t.basis_ = h.rightCols(k - 1);
    return t;
  }

  const Eigen::VectorXd& constraint() const noexcept { return constraint_; }
  const Eigen::MatrixXd& basis() const noexcept { return basis_; }
  Eigen::Index input_dim() const noexcept { return basis_.rows(); }
  Eigen::Index output_dim() const noexcept { return basis_.cols(); }

  Eigen::MatrixXd apply(const Eigen::MatrixXd& block) const { return block * basis_; }
  Eigen::VectorXd apply_row(const Eigen::VectorXd& row) const { return basis_.transpose() * row; }
  Eigen::MatrixXd project_penalty(const Eigen::MatrixXd& s) const {
    return basis_.transpose() * s * basis_;
  }

 private:
  Eigen::VectorXd constraint_;
  Eigen::MatrixXd basis_;
};

/// Centers one smooth-term block so its column space excludes the constants.
inline std::pair<Eigen::MatrixXd, CenteringTransform> apply_centering(const Eigen::MatrixXd& block) {
  if (block.cols() == 0) throw ConfigError("cannot center a block with zero columns");
  if (block.rows() == 0) throw ConfigError("cannot center a block with zero rows");
  const double scale = block.cwiseAbs().maxCoeff();
  if (scale == 0.0) throw ConfigError("degenerate smooth block: all entries zero");
  CenteringTransform t = CenteringTransform::from_constraint(block.colwise().sum().transpose());
  Eigen::MatrixXd out = t.apply(block);
  if (out.cols() == 0 || out.cwiseAbs().maxCoeff() <= 1e-12 * scale) {
    throw ConfigError("degenerate smooth block: columns are constant over the rows");
  }
  return {std::move(out), std::move(t)};
}

}  // namespace bivwind
