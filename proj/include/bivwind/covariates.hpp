#pragma once

#include <cmath>
#include <string>

#include "bivwind/errors.hpp"
#include "bivwind/spline_basis.hpp"

namespace bivwind {

/// Ensemble statistics and calendar covariates of one forecast case.
struct CovariateRow {
  double doy = 0.0;         // [0, 365.25)
  double vec1_mean = 0.0;   // m/s
  double vec2_mean = 0.0;   // m/s
  double vec1_logsd = 0.0;  // log m/s
  double vec2_logsd = 0.0;  // log m/s
  double corr = 0.0;        // [-1, 1]
  double spd_mean = 0.0;    // m/s, >= 0
  double dir_mean = 0.0;    // degrees in [0, 360)

  friend bool operator==(const CovariateRow&, const CovariateRow&) = default;
};

/// Returns the name of the first offending field, or an empty string.
inline std::string first_invalid_field(const CovariateRow& r) {
  auto finite = [](double v) { return std::isfinite(v); };
  if (!finite(r.doy) || r.doy < 0.0 || r.doy >= kDayOfYearPeriod) return "doy";
  if (!finite(r.vec1_mean)) return "vec1_mean";
  if (!finite(r.vec2_mean)) return "vec2_mean";
  if (!finite(r.vec1_logsd)) return "vec1_logsd";
  if (!finite(r.vec2_logsd)) return "vec2_logsd";
  if (!finite(r.corr) || r.corr < -1.0 || r.corr > 1.0) return "corr";
  if (!finite(r.spd_mean) || r.spd_mean < 0.0) return "spd_mean";
  if (!finite(r.dir_mean) || r.dir_mean < 0.0 || r.dir_mean >= kDirectionPeriod) return "dir_mean";
  return {};
}

inline void validate_row(const CovariateRow& r, std::size_t index) {
  const std::string field = first_invalid_field(r);
  if (!field.empty()) {
    throw InputError("row " + std::to_string(index) + ": covariate '" + field + "' out of range");
  }
}

}  // namespace bivwind
