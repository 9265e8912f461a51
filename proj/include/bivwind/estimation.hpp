#pragma once

// Penalized maximum-likelihood estimation of the bivariate Gaussian
// distributional regression models.
//
// The objective is  sum_i loglik_i - 1/2 sum_k beta_k' P_k beta_k  where P_k is
// the lambda-weighted smoothing penalty of predictor k.  It is maximized by
// block coordinate ascent over the location block (mu1, mu2), the scale block
// (log sigma1, log sigma2) and the correlation block, each step a damped
// Newton step with the exact block Hessian (Fisher information when the exact
// one is not negative definite).

#include <algorithm>
#include <array>
#include <cmath>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "bivwind/bivariate_normal.hpp"
#include "bivwind/case_record.hpp"
#include "bivwind/covariates.hpp"
#include "bivwind/design.hpp"
#include "bivwind/errors.hpp"
#include "bivwind/scoring.hpp"

namespace bivwind {

inline constexpr double kDefaultSigmaFloor = 1e-3;

struct FitConfig {
  int max_iter = 200;
  double gradient_tol = 1e-6;
  double relative_tol = 1e-9;
  double sigma_floor = kDefaultSigmaFloor;
  int min_cases = 50;
};

struct FitDiagnostics {
  int iterations = 0;
  double gradient_norm = 0.0;
  double objective = 0.0;  // penalized
  double loglik = 0.0;     // unpenalized, in-sample
  bool converged = false;
};

class FittedModel {
 public:
  FittedModel(ModelSpec spec, Centering centering, std::array<Eigen::VectorXd, kNumPredictors> coefficients,
              double sigma_floor = kDefaultSigmaFloor)
      : design_(std::make_shared<const DesignBuilder>(std::move(spec), std::move(centering))),
        coefficients_(std::move(coefficients)), sigma_floor_(sigma_floor) {
    if (!(sigma_floor_ > 0.0)) throw ConfigError("sigma floor must be positive");
    for (int k = 0; k < kNumPredictors; ++k) {
      const auto& c = coefficients_[static_cast<std::size_t>(k)];
      if (c.size() != design_->width(k)) {
        throw ConfigError("predictor " + std::string(kPredictorNames[static_cast<std::size_t>(k)]) + " expects " +
                          std::to_string(design_->width(k)) + " coefficients, got " + std::to_string(c.size()));
      }
      if (!c.allFinite()) throw ConfigError("non-finite coefficient");
    }
  }

  /// All-zero coefficients for the given structure.
  static FittedModel zeros(ModelSpec spec, Centering centering, double sigma_floor = kDefaultSigmaFloor) {
    const DesignBuilder probe(spec, centering);
    std::array<Eigen::VectorXd, kNumPredictors> c;
    for (int k = 0; k < kNumPredictors; ++k) c[static_cast<std::size_t>(k)] = Eigen::VectorXd::Zero(probe.width(k));
    return FittedModel(std::move(spec), std::move(centering), std::move(c), sigma_floor);
  }

  const ModelSpec& spec() const noexcept { return design_->spec(); }
  ModelKind kind() const noexcept { return design_->spec().kind; }
  const DesignBuilder& design() const noexcept { return *design_; }
  const Centering& centering() const noexcept { return design_->centering(); }
  double sigma_floor() const noexcept { return sigma_floor_; }
  const std::array<Eigen::VectorXd, kNumPredictors>& coefficients() const noexcept { return coefficients_; }
  const Eigen::VectorXd& coefficients(Predictor p) const { return coefficients_.at(static_cast<std::size_t>(p)); }

  int step_h() const noexcept { return step_h_; }
  void set_step_h(int step) noexcept { step_h_ = step; }

  const FitDiagnostics& diagnostics() const noexcept { return diagnostics_; }
  /// Negative Hessian of the penalized objective at the optimum over the
  /// estimated coefficients (predictor order); empty for loaded models.
  const Eigen::MatrixXd& observed_information() const noexcept { return information_; }
  const Eigen::VectorXd& standard_errors() const noexcept { return standard_errors_; }
  /// In-sample predictive parameters of the training rows.
  const std::vector<BivariateNormalParams>& fitted() const noexcept { return fitted_; }

  LinearPredictors predictors(const CovariateRow& row) const {
    const DesignBuilder& d = *design_;
    const BasisRow b = d.basis_row(row);
    std::array<double, kNumPredictors> eta{};
    for (int k = 0; k < kNumPredictors; ++k) {
      if (d.width(k) == 0) continue;
      Eigen::RowVectorXd x(d.width(k));
      d.fill_row(k, row, b, x);
      eta[static_cast<std::size_t>(k)] = x.dot(coefficients_[static_cast<std::size_t>(k)]);
    }
    if (correlation_mode(kind()) == CorrelationMode::Empirical) eta[4] = empirical_rhogit(row.corr);
    return LinearPredictors::from_array(eta);
  }

  BivariateNormalParams predict(const CovariateRow& row) const {
    if (const std::string field = first_invalid_field(row); !field.empty()) {
      throw InputError("covariate '" + field + "' out of range");
    }
    return params_from_predictors(predictors(row), sigma_floor_);
  }

  static double empirical_rhogit(double corr) { return rhogit(std::clamp(corr, -kRhoClamp, kRhoClamp)); }

  static BivariateNormalParams params_from_predictors(const LinearPredictors& eta, double sigma_floor) {
    BivariateNormalParams p = inverse_links(eta);
    p.sigma1 = std::max(p.sigma1, sigma_floor);
    p.sigma2 = std::max(p.sigma2, sigma_floor);
    return p;
  }

  // Populated by fit() and the model reader.
  void set_diagnostics(FitDiagnostics d) { diagnostics_ = d; }
  void set_information(Eigen::MatrixXd info, Eigen::VectorXd se) {
    information_ = std::move(info);
    standard_errors_ = std::move(se);
  }
  void set_standard_errors(Eigen::VectorXd se) { standard_errors_ = std::move(se); }
  void set_fitted(std::vector<BivariateNormalParams> fitted) { fitted_ = std::move(fitted); }

 private:
  std::shared_ptr<const DesignBuilder> design_;
  std::array<Eigen::VectorXd, kNumPredictors> coefficients_;
  double sigma_floor_;
  int step_h_ = 0;
  FitDiagnostics diagnostics_;
  Eigen::MatrixXd information_;
  Eigen::VectorXd standard_errors_;
  std::vector<BivariateNormalParams> fitted_;
};

inline BivariateNormalParams predict(const FittedModel& model, const CovariateRow& row) { return model.predict(row); }

/// Raised when the iteration limit is hit; carries the best state reached.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, FittedModel best)
      : Error(what), best_(std::make_shared<const FittedModel>(std::move(best))) {}
  const FittedModel& best() const noexcept { return *best_; }

 private:
  std::shared_ptr<const FittedModel> best_;
};

namespace detail {

class PenalizedFitter {
 public:
  PenalizedFitter(const DesignBuilder& builder, std::span<const CovariateRow> rows,
                  std::span<const Observation> obs, const FitConfig& config)
      : builder_(builder), config_(config), mode_(correlation_mode(builder.spec().kind)),
        n_(static_cast<Eigen::Index>(rows.size())), log_floor_(std::log(config.sigma_floor)) {
    x_ = builder_.designs(rows);
    y1_.resize(n_);
    y2_.resize(n_);
    fixed_t_ = Eigen::VectorXd::Zero(n_);
    for (Eigen::Index i = 0; i < n_; ++i) {
      const Observation& o = obs[static_cast<std::size_t>(i)];
      if (!std::isfinite(o.y1) || !std::isfinite(o.y2)) {
        throw InputError("row " + std::to_string(i) + ": non-finite observation");
      }
      y1_(i) = o.y1;
      y2_(i) = o.y2;
      if (mode_ == CorrelationMode::Empirical) {
        fixed_t_(i) = FittedModel::empirical_rhogit(rows[static_cast<std::size_t>(i)].corr);
      }
    }
    for (int k = 0; k < kNumPredictors; ++k) {
      const auto ks = static_cast<std::size_t>(k);
      penalty_[ks] = scaled_penalty(k);
      beta_[ks] = Eigen::VectorXd::Zero(builder_.width(k));
      eta_[ks] = Eigen::VectorXd::Zero(n_);
    }
    eta_[4] = fixed_t_;
  }

  void check_rank() const {
    for (int k = 0; k < kNumPredictors; ++k) {
      const auto ks = static_cast<std::size_t>(k);
      if (builder_.width(k) == 0) continue;
      const std::string block(kPredictorNames[ks]);
      Eigen::MatrixXd m = x_[ks].transpose() * x_[ks] + penalty_[ks];
      const Eigen::VectorXd diag = m.diagonal();
      for (Eigen::Index j = 0; j < diag.size(); ++j) {
        if (!(diag(j) > 0.0)) throw RankDeficiencyError(block, "column of term '" + term_at(k, j) + "' is zero");
      }
      const Eigen::VectorXd inv = diag.cwiseSqrt().cwiseInverse();
      m = inv.asDiagonal() * m * inv.asDiagonal();
      const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m);
      if (eig.eigenvalues()(0) < 1e-11 * eig.eigenvalues().maxCoeff()) {
        const Eigen::VectorXd v = eig.eigenvectors().col(0);
        std::vector<std::string> involved;
        for (Eigen::Index j = 0; j < v.size(); ++j) {
          if (std::abs(v(j)) > 0.1) {
            const std::string t = term_at(k, j);
            if (std::find(involved.begin(), involved.end(), t) == involved.end()) involved.push_back(t);
          }
        }
        std::string list;
        for (const auto& t : involved) list += (list.empty() ? "" : ", ") + t;
        throw RankDeficiencyError(block, "collinear columns among terms {" + list + "}");
      }
    }
  }

  void initialize() {
    for (int k = 0; k < 2; ++k) {
      const auto ks = static_cast<std::size_t>(k);
      const Eigen::VectorXd& y = k == 0 ? y1_ : y2_;
      const Eigen::MatrixXd m = x_[ks].transpose() * x_[ks] + penalty_[ks];
      const Eigen::VectorXd b = m.ldlt().solve(x_[ks].transpose() * y);
      const double sd = std::sqrt((y - x_[ks] * b).squaredNorm() / static_cast<double>(n_));
      beta_[ks + 2](0) = std::log(std::max(sd, config_.sigma_floor));
      eta_[ks + 2] = x_[ks + 2] * beta_[ks + 2];
    }
  }

  FitDiagnostics run() {
    FitDiagnostics diag;
    double obj = objective();
    // Block cycles converge linearly; once they slow down, each cycle is
    // followed by a joint Newton step over all coefficients.
    bool polish = false;
    for (int iter = 1; iter <= config_.max_iter; ++iter) {
      block_step({0, 1});
      block_step({2, 3});
      if (mode_ == CorrelationMode::Estimated) block_step({4});
      if (polish) block_step(estimated());
      const double next = objective();
      diag.iterations = iter;
      diag.objective = next;
      diag.gradient_norm = gradient_norm();
      const double change = std::abs(next - obj) / std::max(1.0, std::abs(next));
      const bool small_gradient = diag.gradient_norm < config_.gradient_tol;
      const bool stalled = polish && change <= config_.relative_tol;
      obj = next;
      if (change <= kPolishThreshold) polish = true;
      if (small_gradient || stalled) {
        diag.converged = true;
        break;
      }
    }
    diag.loglik = loglik();
    return diag;
  }

  std::vector<int> estimated() const {
    std::vector<int> ks;
    for (int k = 0; k < kNumPredictors; ++k) {
      if (builder_.width(k) > 0) ks.push_back(k);
    }
    return ks;
  }

  /// Negative Hessian of the penalized objective over all estimated coefficients.
  Eigen::MatrixXd information() const {
    const std::vector<int> ks = estimated();
    return negative_hessian(ks, derivatives(), /*fisher=*/false);
  }

  const std::array<Eigen::VectorXd, kNumPredictors>& beta() const noexcept { return beta_; }

  std::vector<BivariateNormalParams> fitted_params() const {
    std::vector<BivariateNormalParams> out(static_cast<std::size_t>(n_));
    for (Eigen::Index i = 0; i < n_; ++i) {
      out[static_cast<std::size_t>(i)] = FittedModel::params_from_predictors(
          LinearPredictors{eta_[0](i), eta_[1](i), eta_[2](i), eta_[3](i), eta_[4](i)}, config_.sigma_floor);
    }
    return out;
  }

 private:
  static constexpr double kPolishThreshold = 1e-6;

  // Each term penalty is rescaled to the magnitude of the term's block of
  // X'X, so one lambda means comparable smoothing for every term and for any
  // training-set size.
  Eigen::MatrixXd scaled_penalty(int k) const {
    const auto ks = static_cast<std::size_t>(k);
    Eigen::MatrixXd p = builder_.penalty(k);
    for (const Term& t : builder_.layout(k).terms) {
      if (!t.penalized()) continue;
      const auto xt = x_[ks].middleCols(t.offset, t.width);
      const double info = (xt.transpose() * xt).norm();
      auto block = p.block(t.offset, t.offset, t.width, t.width);
      const double pen = block.norm();
      if (info > 0.0 && pen > 0.0) block *= info / pen * builder_.spec().smoothing.for_term(
                                                          DesignBuilder::qualified_name(k, t));
    }
    return p;
  }

  std::string term_at(int k, Eigen::Index col) const {
    for (const Term& t : builder_.layout(k).terms) {
      if (col >= t.offset && col < t.offset + t.width) return t.name();
    }
    return "?";
  }

  LinearPredictors eta_row(Eigen::Index i) const {
    return {eta_[0](i), eta_[1](i), std::max(eta_[2](i), log_floor_), std::max(eta_[3](i), log_floor_), eta_[4](i)};
  }

  double loglik() const {
    double total = 0.0;
    for (Eigen::Index i = 0; i < n_; ++i) {
      const LinearPredictors e = eta_row(i);
      const double t = std::clamp(e.eta_rhogit, -rhogit_limit(), rhogit_limit());
      const double a = 1.0 + t * t;
      const double z1 = (y1_(i) - e.eta_mu1) * std::exp(-e.eta_logsigma1);
      const double z2 = (y2_(i) - e.eta_mu2) * std::exp(-e.eta_logsigma2);
      total += -e.eta_logsigma1 - e.eta_logsigma2 + 0.5 * std::log(a) - 0.5 * a * (z1 * z1 + z2 * z2) +
               t * std::sqrt(a) * z1 * z2;
    }
    return total - static_cast<double>(n_) * std::log(2.0 * std::numbers::pi);
  }

  double penalty_value() const {
    double p = 0.0;
    for (int k = 0; k < kNumPredictors; ++k) {
      const auto ks = static_cast<std::size_t>(k);
      if (beta_[ks].size() > 0) p += beta_[ks].dot(penalty_[ks] * beta_[ks]);
    }
    return 0.5 * p;
  }

  double objective() const { return loglik() - penalty_value(); }

  std::vector<PredictorDerivatives> derivatives() const {
    std::vector<PredictorDerivatives> d(static_cast<std::size_t>(n_));
    for (Eigen::Index i = 0; i < n_; ++i) {
      const LinearPredictors e = eta_row(i);
      PredictorDerivatives& di = d[static_cast<std::size_t>(i)];
      di = predictor_derivatives(e, Observation{y1_(i), y2_(i)});
      for (int s = 2; s < 4; ++s) {
        if (eta_[static_cast<std::size_t>(s)](i) < log_floor_) {
          di.gradient(s) = 0.0;
          di.hessian.row(s).setZero();
          di.hessian.col(s).setZero();
          di.fisher.row(s).setZero();
          di.fisher.col(s).setZero();
        }
      }
    }
    return d;
  }

  Eigen::VectorXd predictor_gradient(int k, const std::vector<PredictorDerivatives>& d) const {
    const auto ks = static_cast<std::size_t>(k);
    Eigen::VectorXd u(n_);
    for (Eigen::Index i = 0; i < n_; ++i) u(i) = d[static_cast<std::size_t>(i)].gradient(k);
    return x_[ks].transpose() * u - penalty_[ks] * beta_[ks];
  }

  double gradient_norm() const {
    const auto d = derivatives();
    double norm = 0.0;
    for (int k : estimated()) norm = std::max(norm, predictor_gradient(k, d).cwiseAbs().maxCoeff());
    return norm;
  }

  Eigen::MatrixXd negative_hessian(const std::vector<int>& ks, const std::vector<PredictorDerivatives>& d,
                                   bool fisher) const {
    std::vector<Eigen::Index> offsets;
    Eigen::Index total = 0;
    for (int k : ks) {
      offsets.push_back(total);
      total += builder_.width(k);
    }
    Eigen::MatrixXd m(total, total);
    Eigen::VectorXd w(n_);
    for (std::size_t a = 0; a < ks.size(); ++a) {
      for (std::size_t b = a; b < ks.size(); ++b) {
        const int ka = ks[a];
        const int kb = ks[b];
        for (Eigen::Index i = 0; i < n_; ++i) {
          const auto& di = d[static_cast<std::size_t>(i)];
          w(i) = fisher ? di.fisher(ka, kb) : -di.hessian(ka, kb);
        }
        const auto& xa = x_[static_cast<std::size_t>(ka)];
        const auto& xb = x_[static_cast<std::size_t>(kb)];
        Eigen::MatrixXd blk = xa.transpose() * (w.asDiagonal() * xb);
        if (a == b) blk += penalty_[static_cast<std::size_t>(ka)];
        m.block(offsets[a], offsets[b], blk.rows(), blk.cols()) = blk;
        if (a != b) m.block(offsets[b], offsets[a], blk.cols(), blk.rows()) = blk.transpose();
      }
    }
    return m;
  }

  void set_block(const std::vector<int>& ks, const std::vector<Eigen::VectorXd>& values) {
    for (std::size_t a = 0; a < ks.size(); ++a) {
      const auto ks_a = static_cast<std::size_t>(ks[a]);
      beta_[ks_a] = values[a];
      eta_[ks_a] = x_[ks_a] * beta_[ks_a];
    }
  }

  void block_step(std::vector<int> ks) {
    std::erase_if(ks, [&](int k) { return builder_.width(k) == 0; });
    if (ks.empty()) return;
    const auto d = derivatives();
    Eigen::VectorXd g;
    {
      std::vector<Eigen::VectorXd> parts;
      Eigen::Index total = 0;
      for (int k : ks) {
        parts.push_back(predictor_gradient(k, d));
        total += parts.back().size();
      }
      g.resize(total);
      Eigen::Index off = 0;
      for (const auto& p : parts) {
        g.segment(off, p.size()) = p;
        off += p.size();
      }
    }
    Eigen::VectorXd step;
    for (bool fisher : {false, true}) {
      Eigen::MatrixXd m = negative_hessian(ks, d, fisher);
      Eigen::LLT<Eigen::MatrixXd> llt(m);
      if (llt.info() == Eigen::Success) {
        step = llt.solve(g);
        break;
      }
      if (fisher) {
        const double scale = std::max(m.diagonal().cwiseAbs().maxCoeff(), 1e-300);
        for (double ridge = 1e-10; ridge < 1e10; ridge *= 10.0) {
          Eigen::MatrixXd r = m;
          r.diagonal().array() += ridge * scale;
          llt.compute(r);
          if (llt.info() == Eigen::Success) {
            step = llt.solve(g);
            break;
          }
        }
      }
    }
    if (step.size() == 0 || !step.allFinite()) return;

    std::vector<Eigen::VectorXd> start;
    for (int k : ks) start.push_back(beta_[static_cast<std::size_t>(k)]);
    const double obj0 = objective();
    double scale = 1.0;
    for (int attempt = 0; attempt < 40; ++attempt, scale *= 0.5) {
      std::vector<Eigen::VectorXd> trial;
      Eigen::Index off = 0;
      for (std::size_t a = 0; a < ks.size(); ++a) {
        trial.push_back(start[a] + scale * step.segment(off, start[a].size()));
        off += start[a].size();
      }
      set_block(ks, trial);
      const double obj = objective();
      if (std::isfinite(obj) && obj >= obj0) return;
    }
    set_block(ks, start);
  }

  const DesignBuilder& builder_;
  FitConfig config_;
  CorrelationMode mode_;
  Eigen::Index n_;
  double log_floor_;
  std::array<Eigen::MatrixXd, kNumPredictors> x_;
  std::array<Eigen::MatrixXd, kNumPredictors> penalty_;
  std::array<Eigen::VectorXd, kNumPredictors> beta_;
  std::array<Eigen::VectorXd, kNumPredictors> eta_;
  Eigen::VectorXd y1_, y2_, fixed_t_;
};

}  // namespace detail

inline FittedModel fit(const ModelSpec& spec, std::span<const CovariateRow> rows, std::span<const Observation> obs,
                       const FitConfig& config = {}) {
  spec.validate();
  if (spec.smoothing.automatic) {
    throw ConfigError("automatic smoothing must be resolved with select_smoothing before fitting");
  }
  if (rows.size() != obs.size()) throw InputError("covariate and observation counts differ");
  if (rows.size() < static_cast<std::size_t>(config.min_cases)) {
    throw InputError("fit needs at least " + std::to_string(config.min_cases) + " cases, got " +
                     std::to_string(rows.size()));
  }
  if (!(config.sigma_floor > 0.0) || config.max_iter < 1) throw ConfigError("invalid optimizer settings");

  const DesignBuilder builder(spec, rows);
  detail::PenalizedFitter fitter(builder, rows, obs, config);
  fitter.check_rank();
  fitter.initialize();
  const FitDiagnostics diag = fitter.run();

  FittedModel model(spec, builder.centering(), fitter.beta(), config.sigma_floor);
  model.set_diagnostics(diag);
  model.set_fitted(fitter.fitted_params());
  Eigen::MatrixXd info = fitter.information();
  Eigen::VectorXd se = Eigen::VectorXd::Constant(info.rows(), std::numeric_limits<double>::quiet_NaN());
  const Eigen::LLT<Eigen::MatrixXd> llt(info);
  if (llt.info() == Eigen::Success) {
    se = llt.solve(Eigen::MatrixXd::Identity(info.rows(), info.cols())).diagonal().cwiseSqrt();
  }
  model.set_information(std::move(info), std::move(se));
  if (!diag.converged) {
    throw ConvergenceError("fit did not converge within " + std::to_string(config.max_iter) +
                               " iterations (gradient norm " + std::to_string(diag.gradient_norm) + ")",
                           std::move(model));
  }
  return model;
}

inline FittedModel fit(const ModelSpec& spec, std::span<const CaseRecord> cases, const FitConfig& config = {}) {
  std::vector<CovariateRow> rows;
  std::vector<Observation> obs;
  rows.reserve(cases.size());
  obs.reserve(cases.size());
  int step = cases.empty() ? 0 : cases.front().step_h;
  for (const CaseRecord& c : cases) {
    rows.push_back(c.covariates);
    obs.push_back(c.observation);
    if (c.step_h != step) step = 0;
  }
  FittedModel model = fit(spec, rows, obs, config);
  model.set_step_h(step);
  return model;
}

/// Inner fit failure during smoothing selection, tagged with its lambda.
class SmoothingSelectionError : public Error {
 public:
  SmoothingSelectionError(double lambda, const std::string& what)
      : Error("smoothing selection failed for lambda = " + std::to_string(lambda) + ": " + what), lambda_(lambda) {}
  double lambda() const noexcept { return lambda_; }

 private:
  double lambda_;
};

struct SmoothingCandidate {
  double lambda = 0.0;
  double mean_log_score = 0.0;
};

struct SmoothingSelection {
  ModelSpec spec;
  std::vector<SmoothingCandidate> candidates;
};

/// Chooses the shared lambda by held-out box log score: fits on cases before
/// `split`, scores the cases at or after it.  Ties go to the larger lambda.
inline SmoothingSelection select_smoothing_detailed(const ModelSpec& spec, std::span<const CaseRecord> data,
                                                    std::span<const double> grid, TimePoint split,
                                                    const FitConfig& config = {}, double epsilon = 0.1) {
  if (grid.empty()) throw ConfigError("smoothing grid must not be empty");
  for (double l : grid) {
    if (!(l > 0.0) || !std::isfinite(l)) throw ConfigError("smoothing grid values must be positive");
  }
  std::vector<CaseRecord> train, test;
  for (const CaseRecord& c : data) (c.valid_time < split ? train : test).push_back(c);
  const auto min_cases = static_cast<std::size_t>(config.min_cases);
  if (train.size() < min_cases || test.size() < min_cases) {
    throw InputError("smoothing selection needs at least " + std::to_string(min_cases) +
                     " cases on each side of the split (got " + std::to_string(train.size()) + " / " +
                     std::to_string(test.size()) + ")");
  }
  std::vector<double> sorted(grid.begin(), grid.end());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());

  SmoothingSelection out{spec, {}};
  out.spec.smoothing.automatic = false;
  double best_score = -std::numeric_limits<double>::infinity();
  double best_lambda = sorted.front();
  for (double lambda : sorted) {
    ModelSpec candidate = spec;
    candidate.smoothing.automatic = false;
    candidate.smoothing.lambda = lambda;
    double mean = 0.0;
    try {
      const FittedModel m = fit(candidate, train, config);
      for (const CaseRecord& c : test) mean += log_score_box(m.predict(c.covariates), c.observation, epsilon);
      mean /= static_cast<double>(test.size());
    } catch (const Error& e) {
      throw SmoothingSelectionError(lambda, e.what());
    }
    out.candidates.push_back({lambda, mean});
    if (out.candidates.size() == 1 || mean > best_score + 1e-12 * std::abs(best_score)) {
      best_score = mean;
      best_lambda = lambda;
    }
  }
  out.spec.smoothing.lambda = best_lambda;
  return out;
}

inline ModelSpec select_smoothing(const ModelSpec& spec, std::span<const CaseRecord> data,
                                  std::span<const double> grid, TimePoint split, const FitConfig& config = {},
                                  double epsilon = 0.1) {
  return select_smoothing_detailed(spec, data, grid, split, config, epsilon).spec;
}

}  // namespace bivwind
