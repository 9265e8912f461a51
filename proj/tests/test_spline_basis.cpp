#include <gtest/gtest.h>

#include <random>

#include <Eigen/Dense>

#include "bivwind/spline_basis.hpp"

using namespace bivwind;

namespace {

// Independent oracle: periodic cubic spline through (knots[j], values[j]) built
// from the piecewise-polynomial form a + b t + c t^2 + d t^3 on each interval,
// with value, slope and curvature continuity imposed as a dense linear system.
struct PiecewiseCubic {
  std::vector<double> knots;
  double period;
  Eigen::VectorXd coef;  // 4 per interval

  double operator()(double x) const {
    const int k = static_cast<int>(knots.size());
    x = std::fmod(x, period);
    if (x < 0) x += period;
    int j = k - 1;
    for (int i = 0; i + 1 < k; ++i) {
      if (x >= knots[i] && x < knots[i + 1]) j = i;
    }
    double t = x - knots[j];
    if (t < 0) t += period;
    return coef(4 * j) + t * (coef(4 * j + 1) + t * (coef(4 * j + 2) + t * coef(4 * j + 3)));
  }
};

PiecewiseCubic interpolate_periodic(const std::vector<double>& knots, double period, const Eigen::VectorXd& y) {
  const int k = static_cast<int>(knots.size());
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(4 * k, 4 * k);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(4 * k);
  int row = 0;
  for (int j = 0; j < k; ++j) {
    const int n = (j + 1) % k;
    const double h = (j + 1 < k ? knots[j + 1] : knots[0] + period) - knots[j];
    a(row, 4 * j) = 1.0;  // value at left end
    rhs(row++) = y(j);
    a(row, 4 * j) = 1.0;  // value at right end equals next knot value
    a(row, 4 * j + 1) = h;
    a(row, 4 * j + 2) = h * h;
    a(row, 4 * j + 3) = h * h * h;
    rhs(row++) = y(n);
    a(row, 4 * j + 1) = 1.0;  // slope continuity
    a(row, 4 * j + 2) = 2 * h;
    a(row, 4 * j + 3) = 3 * h * h;
    a(row++, 4 * n + 1) = -1.0;
    a(row, 4 * j + 2) = 2.0;  // curvature continuity
    a(row, 4 * j + 3) = 6 * h;
    a(row++, 4 * n + 2) = -2.0;
  }
  return {knots, period, a.fullPivLu().solve(rhs)};
}

std::vector<double> knot_vector(const CyclicSplineSpec& s) { return {s.knots().begin(), s.knots().end()}; }

}  // namespace

TEST(CyclicSplineSpec, RejectsInvalidKnots) {
  EXPECT_THROW(CyclicSplineSpec::uniform(360.0, 3), ConfigError);
  EXPECT_THROW(CyclicSplineSpec(360.0, {0.0, 10.0, 10.0, 50.0}), ConfigError);
  EXPECT_THROW(CyclicSplineSpec(360.0, {0.0, 90.0, 180.0, 360.0}), ConfigError);
  EXPECT_THROW(CyclicSplineSpec(-1.0, {0.0, 0.1, 0.2, 0.3}), ConfigError);
  EXPECT_NO_THROW(CyclicSplineSpec(360.0, {5.0, 90.0, 181.0, 300.0}));
}

TEST(CyclicSplineBasis, CardinalAtKnots) {
  const CyclicSplineSpec spec(365.25, {3.0, 40.0, 100.0, 170.0, 222.0, 300.0, 350.0});
  const auto knots = spec.knots();
  for (std::size_t j = 0; j < knots.size(); ++j) {
    const Eigen::VectorXd b = eval_cyclic_basis(knots[j], spec);
    for (Eigen::Index i = 0; i < b.size(); ++i) EXPECT_NEAR(b(i), i == static_cast<Eigen::Index>(j) ? 1.0 : 0.0, 1e-12);
  }
}

TEST(CyclicSplineBasis, PeriodicReduction) {
  const auto spec = CyclicSplineSpec::uniform(360.0, 8);
  const CyclicCubicBasis basis(spec);
  EXPECT_EQ(basis.eval(0.0), basis.eval(360.0));
  EXPECT_EQ(basis.eval(17.5), basis.eval(17.5 + 720.0));
  EXPECT_LT((basis.eval(-10.0) - basis.eval(350.0)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(CyclicSplineBasis, ReproducesConstantsAndMatchesInterpolationOracle) {
  const CyclicSplineSpec spec(365.25, {0.0, 30.0, 75.0, 120.0, 200.0, 260.0, 300.0, 340.0});
  const CyclicCubicBasis basis(spec);
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> ux(0.0, 365.25), uc(-2.0, 2.0);
  Eigen::VectorXd c(8);
  for (auto& v : c) v = uc(rng);
  const PiecewiseCubic oracle = interpolate_periodic(knot_vector(spec), 365.25, c);
  for (int i = 0; i < 200; ++i) {
    const double x = ux(rng);
    const Eigen::VectorXd b = basis.eval(x);
    EXPECT_NEAR(b.sum(), 1.0, 1e-10);
    EXPECT_NEAR(b.dot(c), oracle(x), 1e-10) << "x = " << x;
  }
}

TEST(CyclicSplineBasis, SmoothThroughKnotsAndSeam) {
  const auto spec = CyclicSplineSpec::uniform(360.0, 6);
  const CyclicCubicBasis basis(spec);
  Eigen::VectorXd c(6);
  c << 0.3, -1.2, 2.0, 0.7, -0.4, 1.1;
  auto f = [&](double x) { return basis.eval(x).dot(c); };
  const double h = 1e-3;
  // one-sided derivative estimates from the left and right of each knot
  auto d1 = [&](double x, double s) { return s * (-3 * f(x) + 4 * f(x + s * h) - f(x + 2 * s * h)) / (2 * h); };
  auto d2 = [&](double x, double s) { return (2 * f(x) - 5 * f(x + s * h) + 4 * f(x + 2 * s * h) - f(x + 3 * s * h)) / (h * h); };
  for (double knot : spec.knots()) {
    EXPECT_NEAR(f(knot - 1e-9), f(knot + 1e-9), 1e-6);
    EXPECT_NEAR(d1(knot, -1.0), d1(knot, 1.0), 1e-6);
    EXPECT_NEAR(d2(knot, -1.0), d2(knot, 1.0), 1e-6);
  }
  EXPECT_NEAR(f(360.0 - 1e-9), f(1e-9), 1e-6);
}

TEST(CyclicSplinePenalty, MatchesSimpsonQuadratureOfFiniteDifferences) {
  const auto spec = CyclicSplineSpec::uniform(360.0, 6);
  const CyclicCubicBasis basis(spec);
  const PenaltyMatrix s = penalty(spec);
  const int k = 6;
  const double h = 1e-2;
  auto second = [&](double x) {
    return Eigen::VectorXd((basis.eval(x + h) - 2.0 * basis.eval(x) + basis.eval(x - h)) / (h * h));
  };
  // composite Simpson over one period, 3600 panels
  const int panels = 3600;
  const double dx = 360.0 / panels;
  Eigen::MatrixXd quad = Eigen::MatrixXd::Zero(k, k);
  for (int i = 0; i <= panels; ++i) {
    const double w = (i == 0 || i == panels) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
    const Eigen::VectorXd d = second(i * dx);
    quad += w * d * d.transpose();
  }
  quad *= dx / 3.0;
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < k; ++j) {
      EXPECT_NEAR(s.entries(i, j), quad(i, j), 1e-6);
      EXPECT_NEAR(s.entries(i, j), quad(i, j), 1e-5 * s.entries.cwiseAbs().maxCoeff());
    }
  }
}

TEST(CyclicSplinePenalty, NullSpaceIsTheConstants) {
  const CyclicSplineSpec spec(365.25, {0.0, 30.0, 75.0, 120.0, 200.0, 260.0, 300.0, 340.0});
  const PenaltyMatrix s = penalty(spec);
  EXPECT_LT((s.entries - s.entries.transpose()).cwiseAbs().maxCoeff(), 1e-15);
  const double scale = s.entries.cwiseAbs().maxCoeff();
  EXPECT_LT(s.entries.rowwise().sum().cwiseAbs().maxCoeff(), 1e-10 * std::max(1.0, scale));
  EXPECT_NEAR(s.quadratic_form(Eigen::VectorXd::Constant(8, 3.5)), 0.0, 1e-12);
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(s.entries);
  EXPECT_LT(std::abs(eig.eigenvalues()(0)), 1e-10 * scale);
  EXPECT_GT(eig.eigenvalues()(1), 1e-6 * scale);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n;
  for (int r = 0; r < 50; ++r) {
    Eigen::VectorXd v(8);
    for (auto& x : v) x = n(rng);
    EXPECT_GE(s.quadratic_form(v), -1e-12 * scale);
  }
}

TEST(TensorRow, UnitVectorsAndBilinearOracle) {
  Eigen::VectorXd e(4), f(5);
  e.setZero();
  f.setZero();
  e(2) = 1.0;
  f(3) = 1.0;
  const Eigen::VectorXd t = tensor_row(e, f);
  for (Eigen::Index i = 0; i < t.size(); ++i) EXPECT_EQ(t(i), i == 2 * 5 + 3 ? 1.0 : 0.0);
  EXPECT_EQ(tensor_row(e, Eigen::VectorXd::Zero(5)).cwiseAbs().maxCoeff(), 0.0);

  std::mt19937_64 rng(11);
  std::normal_distribution<double> n;
  Eigen::VectorXd b1(4), b2(5);
  Eigen::MatrixXd c(4, 5);
  for (auto& x : b1) x = n(rng);
  for (auto& x : b2) x = n(rng);
  for (Eigen::Index i = 0; i < 4; ++i)
    for (Eigen::Index j = 0; j < 5; ++j) c(i, j) = n(rng);
  Eigen::VectorXd vec(20);
  double loop = 0.0;
  for (Eigen::Index i = 0; i < 4; ++i) {
    for (Eigen::Index j = 0; j < 5; ++j) {
      vec(i * 5 + j) = c(i, j);
      loop += b1(i) * c(i, j) * b2(j);
    }
  }
  EXPECT_NEAR(tensor_row(b1, b2).dot(vec), loop, 1e-12);
}

TEST(TensorRow, RankOneSurfaceIsSeparable) {
  const auto s1 = CyclicSplineSpec::uniform(365.25, 8);
  const auto s2 = CyclicSplineSpec::uniform(360.0, 6);
  Eigen::VectorXd a(8), b(6);
  a << 1, 2, -1, 0.5, 0, 3, -2, 1;
  b << 0.2, -0.3, 1, 0.4, -1, 0.6;
  Eigen::VectorXd vec(48);
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 6; ++j) vec(i * 6 + j) = a(i) * b(j);
  for (double x : {0.0, 91.3, 200.0, 364.9}) {
    for (double y : {5.0, 123.0, 359.0}) {
      const Eigen::VectorXd b1 = eval_cyclic_basis(x, s1);
      const Eigen::VectorXd b2 = eval_cyclic_basis(y, s2);
      EXPECT_NEAR(tensor_row(b1, b2).dot(vec), b1.dot(a) * b2.dot(b), 1e-12);
    }
  }
}

TEST(TensorPenalty, KroneckerSumLayout) {
  const PenaltyMatrix s1 = penalty(CyclicSplineSpec::uniform(365.25, 4));
  const PenaltyMatrix s2 = penalty(CyclicSplineSpec::uniform(360.0, 5));
  const PenaltyMatrix t = tensor_penalty(s1, s2);
  const Eigen::MatrixXd i4 = Eigen::MatrixXd::Identity(4, 4), i5 = Eigen::MatrixXd::Identity(5, 5);
  Eigen::MatrixXd expected = Eigen::MatrixXd::Zero(20, 20);
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 5; ++b)
      for (int c = 0; c < 4; ++c)
        for (int d = 0; d < 5; ++d)
          expected(a * 5 + b, c * 5 + d) = s1.entries(a, c) * i5(b, d) + i4(a, c) * s2.entries(b, d);
  EXPECT_LT((t.entries - expected).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_NEAR(t.quadratic_form(Eigen::VectorXd::Ones(20)), 0.0, 1e-12);
}

TEST(Centering, RandomBlockColumnSumsVanish) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::MatrixXd block(50, 6);
  for (Eigen::Index i = 0; i < block.size(); ++i) block.data()[i] = u(rng);
  const auto [out, t] = apply_centering(block);
  EXPECT_EQ(out.cols(), 5);
  EXPECT_LT(out.colwise().sum().cwiseAbs().maxCoeff(), 1e-10);
  // the transform reproduces the same map on new rows
  EXPECT_LT((t.apply(block) - out).cwiseAbs().maxCoeff(), 1e-15);
  // Z has orthonormal columns orthogonal to the constraint
  EXPECT_LT((t.basis().transpose() * t.basis() - Eigen::MatrixXd::Identity(5, 5)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Centering, AlreadyCenteredBlockKeepsItsSpan) {
  Eigen::MatrixXd block(4, 2);
  block << 1, 0, -1, 2, 0.5, -1, -0.5, -1;  // columns sum to zero
  const auto [out, t] = apply_centering(block);
  EXPECT_EQ(out.cols(), 2);
  // same column space: projecting block onto span(out) is lossless
  const Eigen::MatrixXd proj = out * out.completeOrthogonalDecomposition().solve(block);
  EXPECT_LT((proj - block).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Centering, RejectsDegenerateBlocks) {
  EXPECT_THROW(apply_centering(Eigen::MatrixXd(5, 0)), ConfigError);
  EXPECT_THROW(apply_centering(Eigen::MatrixXd::Constant(5, 1, 2.0)), ConfigError);
  EXPECT_THROW(apply_centering(Eigen::MatrixXd::Constant(5, 3, 1.0)), ConfigError);
  EXPECT_THROW(apply_centering(Eigen::MatrixXd::Zero(5, 3)), ConfigError);
}

TEST(Centering, SplineBlockCentered) {
  const CyclicCubicBasis basis(CyclicSplineSpec::uniform(365.25, 8));
  Eigen::MatrixXd block(100, 8);
  for (int i = 0; i < 100; ++i) block.row(i) = basis.eval(3.65 * i).transpose();
  const auto [out, t] = apply_centering(block);
  EXPECT_EQ(out.cols(), 7);
  EXPECT_LT(out.colwise().sum().cwiseAbs().maxCoeff(), 1e-10);
}
