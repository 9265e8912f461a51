#pragma once

// Wind-vector conventions and ensemble statistics.
//
// Directions are meteorological: the direction the wind blows FROM, in
// degrees clockwise from north.  A northerly wind has v < 0.

#include <cmath>
#include <numbers>
#include <span>
#include <vector>

#include "bivwind/covariates.hpp"
#include "bivwind/errors.hpp"

namespace bivwind {

struct WindVector {
  double u = 0.0;  // zonal, positive towards east
  double v = 0.0;  // meridional, positive towards north
};

struct DirectionSpeed {
  double dir = 0.0;  // degrees in [0, 360)
  double spd = 0.0;
};

inline constexpr double kDegToRad = std::numbers::pi / 180.0;

/// Wraps an angle into [0, 360).
inline double wrap_degrees(double deg) {
  double d = std::fmod(deg, 360.0);
  if (d < 0.0) d += 360.0;
  if (d >= 360.0) d = 0.0;  // fmod of tiny negatives can round up
  return d;
}

/// Wraps an angle difference into [-180, 180).
inline double wrap_angle_difference(double deg) { return wrap_degrees(deg + 180.0) - 180.0; }

inline DirectionSpeed uv_to_dir_spd(double u, double v) {
  const double spd = std::hypot(u, v);
  if (spd == 0.0) return {0.0, 0.0};
  return {wrap_degrees(std::atan2(-u, -v) / kDegToRad), spd};
}

inline WindVector dir_spd_to_uv(double dir, double spd) {
  const double r = dir * kDegToRad;
  return {-spd * std::sin(r), -spd * std::cos(r)};
}

/// Turns a vector clockwise (as seen on a compass) by `theta` degrees, so its
/// meteorological direction increases by `theta`.
inline WindVector rotate_clockwise(const WindVector& w, double theta) {
  const double c = std::cos(theta * kDegToRad);
  const double s = std::sin(theta * kDegToRad);
  return {w.u * c + w.v * s, -w.u * s + w.v * c};
}

/// A set of ensemble members, m >= 2.
class EnsembleMemberSet {
 public:
  explicit EnsembleMemberSet(std::vector<WindVector> members) : members_(std::move(members)) {
    if (members_.size() < 2) throw InputError("ensemble needs at least two members");
    for (const WindVector& w : members_) {
      if (!std::isfinite(w.u) || !std::isfinite(w.v)) throw InputError("non-finite ensemble member");
    }
  }

  std::span<const WindVector> members() const noexcept { return members_; }
  std::size_t size() const noexcept { return members_.size(); }

 private:
  std::vector<WindVector> members_;
};

inline constexpr double kSdFloor = 1e-6;

struct EnsembleStats {
  double vec1_mean = 0.0;
  double vec2_mean = 0.0;
  double vec1_logsd = 0.0;
  double vec2_logsd = 0.0;
  double corr = 0.0;
  double spd_mean = 0.0;
  double dir_mean = 0.0;
};

inline EnsembleStats derive_stats(const EnsembleMemberSet& set) {
  const auto m = set.members();
  const double n = static_cast<double>(m.size());
  EnsembleStats s;
  for (const WindVector& w : m) {
    s.vec1_mean += w.u;
    s.vec2_mean += w.v;
  }
  s.vec1_mean /= n;
  s.vec2_mean /= n;

  double suu = 0.0, svv = 0.0, suv = 0.0;
  double cx = 0.0, cy = 0.0, spd = 0.0;
  for (const WindVector& w : m) {
    const double du = w.u - s.vec1_mean;
    const double dv = w.v - s.vec2_mean;
    suu += du * du;
    svv += dv * dv;
    suv += du * dv;
    const DirectionSpeed ds = uv_to_dir_spd(w.u, w.v);
    spd += ds.spd;
    if (ds.spd > 0.0) {
      cx += std::sin(ds.dir * kDegToRad);
      cy += std::cos(ds.dir * kDegToRad);
    }
  }
  const double sd1 = std::sqrt(suu / (n - 1.0));
  const double sd2 = std::sqrt(svv / (n - 1.0));
  s.vec1_logsd = std::log(std::max(sd1, kSdFloor));
  s.vec2_logsd = std::log(std::max(sd2, kSdFloor));
  s.corr = (sd1 < kSdFloor || sd2 < kSdFloor) ? 0.0 : std::clamp(suv / std::sqrt(suu * svv), -1.0, 1.0);
  s.spd_mean = spd / n;
  cx /= n;
  cy /= n;
  if (std::hypot(cx, cy) >= 1e-8) {
    s.dir_mean = wrap_degrees(std::atan2(cx, cy) / kDegToRad);
  } else {
    s.dir_mean = uv_to_dir_spd(s.vec1_mean, s.vec2_mean).dir;
  }
  return s;
}

/// Covariate row for a case with the given ensemble and day of year.
inline CovariateRow covariates_from(const EnsembleStats& s, double doy) {
  return {doy, s.vec1_mean, s.vec2_mean, s.vec1_logsd, s.vec2_logsd, s.corr, s.spd_mean, s.dir_mean};
}

}  // namespace bivwind
