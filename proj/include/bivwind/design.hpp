#pragma once

// Model structures and their design matrices.
//
// Every model has five additive predictors (mu1, mu2, log sigma1, log sigma2,
// rhogit).  Each predictor is a list of terms; smooth terms are centered over
// the training rows so they cannot absorb the global intercept (or, for
// varying-coefficient terms, the global slope).

#include <array>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "bivwind/covariates.hpp"
#include "bivwind/errors.hpp"
#include "bivwind/spline_basis.hpp"

namespace bivwind {

enum class ModelKind { BLM0, RAM0, RAM_EMP, RAM_IC, RAM_DIR, RAM_ADV };

inline constexpr std::array<ModelKind, 6> kAllModelKinds = {
    ModelKind::BLM0, ModelKind::RAM0, ModelKind::RAM_EMP, ModelKind::RAM_IC, ModelKind::RAM_DIR, ModelKind::RAM_ADV};

/// Canonical identifier, e.g. "RAM_ADV".
inline std::string_view kind_id(ModelKind k) {
  switch (k) {
    case ModelKind::BLM0: return "BLM0";
    case ModelKind::RAM0: return "RAM0";
    case ModelKind::RAM_EMP: return "RAM_EMP";
    case ModelKind::RAM_IC: return "RAM_IC";
    case ModelKind::RAM_DIR: return "RAM_DIR";
    case ModelKind::RAM_ADV: return "RAM_ADV";
  }
  return "?";
}

/// Command-line name, e.g. "ram-adv".
inline std::string_view kind_cli_name(ModelKind k) {
  switch (k) {
    case ModelKind::BLM0: return "blm0";
    case ModelKind::RAM0: return "ram0";
    case ModelKind::RAM_EMP: return "ram-emp";
    case ModelKind::RAM_IC: return "ram-ic";
    case ModelKind::RAM_DIR: return "ram-dir";
    case ModelKind::RAM_ADV: return "ram-adv";
  }
  return "?";
}

/// Accepts either spelling.
inline ModelKind parse_kind(std::string_view name) {
  for (ModelKind k : kAllModelKinds) {
    if (name == kind_id(k) || name == kind_cli_name(k)) return k;
  }
  throw ConfigError("unknown model specification '" + std::string(name) +
                    "' (expected blm0, ram0, ram-emp, ram-ic, ram-dir or ram-adv)");
}

enum class CorrelationMode { FixedZero, Empirical, Estimated };

inline CorrelationMode correlation_mode(ModelKind k) {
  switch (k) {
    case ModelKind::BLM0:
    case ModelKind::RAM0: return CorrelationMode::FixedZero;
    case ModelKind::RAM_EMP: return CorrelationMode::Empirical;
    default: return CorrelationMode::Estimated;
  }
}

inline bool rotation_allowing(ModelKind k) { return k != ModelKind::BLM0; }

/// Smoothing parameters: one shared value, optionally overridden per term
/// (keys are qualified term names such as "mu1.s(doy):vec1_mean").
struct Smoothing {
  double lambda = 1.0;
  std::map<std::string, double> per_term;
  bool automatic = false;

  double for_term(const std::string& qualified_name) const {
    const auto it = per_term.find(qualified_name);
    return it == per_term.end() ? lambda : it->second;
  }

  void validate() const {
    if (!(lambda > 0.0) || !std::isfinite(lambda)) throw ConfigError("smoothing parameter must be positive");
    for (const auto& [name, value] : per_term) {
      if (!(value > 0.0) || !std::isfinite(value)) {
        throw ConfigError("smoothing parameter for '" + name + "' must be positive");
      }
    }
  }
};

struct ModelSpec {
  ModelKind kind = ModelKind::BLM0;
  CyclicSplineSpec doy_spline = CyclicSplineSpec::uniform(kDayOfYearPeriod, kDefaultKnots);
  CyclicSplineSpec dir_spline = CyclicSplineSpec::uniform(kDirectionPeriod, kDefaultKnots);
  Smoothing smoothing;

  void validate() const {
    smoothing.validate();
    if (doy_spline.period() != kDayOfYearPeriod) throw ConfigError("day-of-year spline period must be 365.25");
    if (dir_spline.period() != kDirectionPeriod) throw ConfigError("direction spline period must be 360");
  }
};

enum class Predictor : int { Mu1 = 0, Mu2 = 1, LogSigma1 = 2, LogSigma2 = 3, Rhogit = 4 };
inline constexpr int kNumPredictors = 5;
inline constexpr std::array<std::string_view, kNumPredictors> kPredictorNames = {"mu1", "mu2", "logsigma1",
                                                                                 "logsigma2", "rhogit"};

enum class Covariate { None, Vec1Mean, Vec2Mean, Vec1LogSd, Vec2LogSd, SpdMean };

inline std::string_view covariate_name(Covariate c) {
  switch (c) {
    case Covariate::None: return "";
    case Covariate::Vec1Mean: return "vec1_mean";
    case Covariate::Vec2Mean: return "vec2_mean";
    case Covariate::Vec1LogSd: return "vec1_logsd";
    case Covariate::Vec2LogSd: return "vec2_logsd";
    case Covariate::SpdMean: return "spd_mean";
  }
  return "";
}

inline double covariate_value(const CovariateRow& r, Covariate c) {
  switch (c) {
    case Covariate::None: return 1.0;
    case Covariate::Vec1Mean: return r.vec1_mean;
    case Covariate::Vec2Mean: return r.vec2_mean;
    case Covariate::Vec1LogSd: return r.vec1_logsd;
    case Covariate::Vec2LogSd: return r.vec2_logsd;
    case Covariate::SpdMean: return r.spd_mean;
  }
  return 0.0;
}

enum class TermType { Intercept, Linear, SmoothDoy, SmoothDir, TensorDoyDir };

struct Term {
  TermType type = TermType::Intercept;
  Covariate by = Covariate::None;  // linear covariate, or multiplier of a smooth
  Eigen::Index offset = 0;
  Eigen::Index width = 0;

  bool penalized() const noexcept { return type != TermType::Intercept && type != TermType::Linear; }

  std::string name() const {
    std::string base;
    switch (type) {
      case TermType::Intercept: return "intercept";
      case TermType::Linear: return std::string(covariate_name(by));
      case TermType::SmoothDoy: base = "s(doy)"; break;
      case TermType::SmoothDir: base = "s(dir)"; break;
      case TermType::TensorDoyDir: base = "te(doy,dir)"; break;
    }
    if (by != Covariate::None) base += ":" + std::string(covariate_name(by));
    return base;
  }
};

struct PredictorLayout {
  std::vector<Term> terms;
  Eigen::Index width = 0;
};

/// Centering transforms fitted on the training rows; unused bases stay empty.
struct Centering {
  std::optional<CenteringTransform> doy;
  std::optional<CenteringTransform> dir;
  std::optional<CenteringTransform> tensor;
};

namespace detail {

inline bool uses_dir_smooth(ModelKind k) { return k == ModelKind::RAM_DIR || k == ModelKind::RAM_ADV; }

inline std::array<PredictorLayout, kNumPredictors> make_layouts(ModelKind kind, Eigen::Index doy_dim,
                                                                  Eigen::Index dir_dim, Eigen::Index tensor_dim) {
  std::array<PredictorLayout, kNumPredictors> layouts;
  auto add = [](PredictorLayout& l, TermType type, Covariate by, Eigen::Index width) {
    l.terms.push_back(Term{type, by, l.width, width});
    l.width += width;
  };
  const std::array<Covariate, 4> own = {Covariate::Vec1Mean, Covariate::Vec2Mean, Covariate::Vec1LogSd,
                                        Covariate::Vec2LogSd};
  for (int k = 0; k < 4; ++k) {
    PredictorLayout& l = layouts[static_cast<std::size_t>(k)];
    add(l, TermType::Intercept, Covariate::None, 1);
    add(l, TermType::SmoothDoy, Covariate::None, doy_dim);
    if (!rotation_allowing(kind)) {
      const Covariate c = own[static_cast<std::size_t>(k)];
      add(l, TermType::Linear, c, 1);
      add(l, TermType::SmoothDoy, c, doy_dim);
    } else {
      const bool location = k < 2;
      for (const Covariate c : {location ? Covariate::Vec1Mean : Covariate::Vec1LogSd,
                                location ? Covariate::Vec2Mean : Covariate::Vec2LogSd}) {
        add(l, TermType::Linear, c, 1);
        add(l, TermType::TensorDoyDir, c, tensor_dim);
      }
    }
  }
  PredictorLayout& rho = layouts[4];
  if (correlation_mode(kind) == CorrelationMode::Estimated) {
    add(rho, TermType::Intercept, Covariate::None, 1);
    add(rho, TermType::SmoothDoy, Covariate::None, doy_dim);
    if (uses_dir_smooth(kind)) add(rho, TermType::SmoothDir, Covariate::None, dir_dim);
    if (kind == ModelKind::RAM_ADV) {
      add(rho, TermType::Linear, Covariate::SpdMean, 1);
      add(rho, TermType::SmoothDir, Covariate::SpdMean, dir_dim);
    }
  }
  return layouts;
}

/// Raw penalty rescaled so that its smallest positive eigenvalue is one.
inline Eigen::MatrixXd normalized_penalty(const PenaltyMatrix& s) {
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(s.entries, Eigen::EigenvaluesOnly);
  const auto& ev = eig.eigenvalues();
  const double top = ev.maxCoeff();
  double smallest = top;
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (ev(i) > 1e-9 * top) smallest = std::min(smallest, ev(i));
  }
  return s.entries / smallest;
}

}  // namespace detail

/// Per-row basis evaluations shared by all predictors.
struct BasisRow {
  Eigen::VectorXd doy;
  Eigen::VectorXd dir;
  Eigen::VectorXd tensor;
};

/// Builds design rows and penalties for one model specification.
class DesignBuilder {
 public:
  /// Fits the centering transforms on `training_rows`.
  DesignBuilder(ModelSpec spec, std::span<const CovariateRow> training_rows)
      : spec_(std::move(spec)), doy_basis_(spec_.doy_spline), dir_basis_(spec_.dir_spline) {
    spec_.validate();
    if (training_rows.empty()) throw InputError("design needs at least one row");
    for (std::size_t i = 0; i < training_rows.size(); ++i) validate_row(training_rows[i], i);

    const Eigen::Index kd = doy_basis_.dim();
    const Eigen::Index kr = dir_basis_.dim();
    Eigen::VectorXd doy_sum = Eigen::VectorXd::Zero(kd);
    Eigen::VectorXd dir_sum = Eigen::VectorXd::Zero(kr);
    Eigen::VectorXd tensor_sum = Eigen::VectorXd::Zero(kd * kr);
    const bool need_dir = detail::uses_dir_smooth(spec_.kind);
    const bool need_tensor = rotation_allowing(spec_.kind);
    for (const CovariateRow& r : training_rows) {
      const Eigen::VectorXd bd = doy_basis_.eval(r.doy);
      doy_sum += bd;
      if (need_dir || need_tensor) {
        const Eigen::VectorXd br = dir_basis_.eval(r.dir_mean);
        if (need_dir) dir_sum += br;
        if (need_tensor) tensor_sum += tensor_row(bd, br);
      }
    }
    centering_.doy = CenteringTransform::from_constraint(doy_sum);
    if (need_dir) centering_.dir = CenteringTransform::from_constraint(dir_sum);
    if (need_tensor) centering_.tensor = CenteringTransform::from_constraint(tensor_sum);
    finish();
  }

  /// Reuses stored centering transforms (prediction from a loaded model).
  DesignBuilder(ModelSpec spec, Centering centering)
      : spec_(std::move(spec)), doy_basis_(spec_.doy_spline), dir_basis_(spec_.dir_spline),
        centering_(std::move(centering)) {
    spec_.validate();
    auto check = [](const std::optional<CenteringTransform>& t, Eigen::Index dim, bool needed, const char* what) {
      if (needed && (!t || t->input_dim() != dim)) {
        throw ConfigError(std::string("missing or mismatched centering transform for ") + what);
      }
    };
    check(centering_.doy, doy_basis_.dim(), true, "s(doy)");
    check(centering_.dir, dir_basis_.dim(), detail::uses_dir_smooth(spec_.kind), "s(dir)");
    check(centering_.tensor, doy_basis_.dim() * dir_basis_.dim(), rotation_allowing(spec_.kind), "te(doy,dir)");
    finish();
  }

  const ModelSpec& spec() const noexcept { return spec_; }
  const Centering& centering() const noexcept { return centering_; }
  const CyclicCubicBasis& doy_basis() const noexcept { return doy_basis_; }
  const CyclicCubicBasis& dir_basis() const noexcept { return dir_basis_; }
  const PredictorLayout& layout(int k) const { return layouts_.at(static_cast<std::size_t>(k)); }
  Eigen::Index width(int k) const { return layout(k).width; }

  /// Centered basis evaluations for one row.
  BasisRow basis_row(const CovariateRow& r) const {
    BasisRow b;
    const Eigen::VectorXd bd = doy_basis_.eval(r.doy);
    b.doy = centering_.doy->apply_row(bd);
    if (centering_.dir || centering_.tensor) {
      const Eigen::VectorXd br = dir_basis_.eval(r.dir_mean);
      if (centering_.dir) b.dir = centering_.dir->apply_row(br);
      if (centering_.tensor) b.tensor = centering_.tensor->apply_row(tensor_row(bd, br));
    }
    return b;
  }

  void fill_row(int k, const CovariateRow& r, const BasisRow& b, Eigen::Ref<Eigen::RowVectorXd, 0, Eigen::InnerStride<>> out) const {
    for (const Term& t : layout(k).terms) {
      const double by = covariate_value(r, t.by);
      switch (t.type) {
        case TermType::Intercept: out(t.offset) = 1.0; break;
        case TermType::Linear: out(t.offset) = by; break;
        case TermType::SmoothDoy: out.segment(t.offset, t.width) = by * b.doy.transpose(); break;
        case TermType::SmoothDir: out.segment(t.offset, t.width) = by * b.dir.transpose(); break;
        case TermType::TensorDoyDir: out.segment(t.offset, t.width) = by * b.tensor.transpose(); break;
      }
    }
  }

  Eigen::RowVectorXd row(int k, const CovariateRow& r) const {
    Eigen::RowVectorXd out(width(k));
    fill_row(k, r, basis_row(r), out);
    return out;
  }

  std::array<Eigen::MatrixXd, kNumPredictors> designs(std::span<const CovariateRow> rows) const {
    std::array<Eigen::MatrixXd, kNumPredictors> x;
    const auto n = static_cast<Eigen::Index>(rows.size());
    for (int k = 0; k < kNumPredictors; ++k) x[static_cast<std::size_t>(k)] = Eigen::MatrixXd::Zero(n, width(k));
    for (Eigen::Index i = 0; i < n; ++i) {
      const CovariateRow& r = rows[static_cast<std::size_t>(i)];
      validate_row(r, static_cast<std::size_t>(i));
      const BasisRow b = basis_row(r);
      for (int k = 0; k < kNumPredictors; ++k) {
        if (width(k) > 0) fill_row(k, r, b, x[static_cast<std::size_t>(k)].row(i));
      }
    }
    return x;
  }

  /// Block-diagonal smoothing penalty of predictor k, weighted by the lambdas.
  Eigen::MatrixXd penalty(int k) const {
    const PredictorLayout& l = layout(k);
    Eigen::MatrixXd p = Eigen::MatrixXd::Zero(l.width, l.width);
    for (const Term& t : l.terms) {
      if (!t.penalized()) continue;
      const double lambda = spec_.smoothing.for_term(qualified_name(k, t));
      p.block(t.offset, t.offset, t.width, t.width) = lambda * term_penalty(t.type);
    }
    return p;
  }

  static std::string qualified_name(int k, const Term& t) {
    return std::string(kPredictorNames[static_cast<std::size_t>(k)]) + "." + t.name();
  }

 private:
  void finish() {
    const Eigen::Index kd = doy_basis_.dim();
    const Eigen::Index kr = dir_basis_.dim();
    const Eigen::MatrixXd s_doy = detail::normalized_penalty(doy_basis_.penalty());
    const Eigen::MatrixXd s_dir = detail::normalized_penalty(dir_basis_.penalty());
    doy_penalty_ = centering_.doy->project_penalty(s_doy);
    if (centering_.dir) dir_penalty_ = centering_.dir->project_penalty(s_dir);
    if (centering_.tensor) {
      const PenaltyMatrix te = tensor_penalty(PenaltyMatrix{s_doy}, PenaltyMatrix{s_dir});
      tensor_penalty_ = centering_.tensor->project_penalty(te.entries);
    }
    layouts_ = detail::make_layouts(spec_.kind, centering_.doy->output_dim(),
                                    centering_.dir ? centering_.dir->output_dim() : kr - 1,
                                    centering_.tensor ? centering_.tensor->output_dim() : kd * kr - 1);
  }

  const Eigen::MatrixXd& term_penalty(TermType type) const {
    switch (type) {
      case TermType::SmoothDoy: return doy_penalty_;
      case TermType::SmoothDir: return dir_penalty_;
      case TermType::TensorDoyDir: return tensor_penalty_;
      default: break;
    }
    throw ConfigError("term has no penalty");
  }

  ModelSpec spec_;
  CyclicCubicBasis doy_basis_;
  CyclicCubicBasis dir_basis_;
  Centering centering_;
  Eigen::MatrixXd doy_penalty_;
  Eigen::MatrixXd dir_penalty_;
  Eigen::MatrixXd tensor_penalty_;
  std::array<PredictorLayout, kNumPredictors> layouts_;
};

/// Design matrices for `rows`, with centering fitted on the same rows.
struct DesignMatrices {
  DesignBuilder builder;
  std::array<Eigen::MatrixXd, kNumPredictors> x;
};

inline DesignMatrices build_design(const ModelSpec& spec, std::span<const CovariateRow> rows) {
  DesignBuilder builder(spec, rows);
  auto x = builder.designs(rows);
  return {std::move(builder), std::move(x)};
}

}  // namespace bivwind
