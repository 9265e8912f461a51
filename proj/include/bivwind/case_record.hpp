#pragma once

#include <string>
#include <tuple>

#include "bivwind/bivariate_normal.hpp"
#include "bivwind/covariates.hpp"
#include "bivwind/time.hpp"

namespace bivwind {

/// One forecast case at one station and forecast step.
struct CaseRecord {
  std::string station;
  TimePoint valid_time{};
  int step_h = 12;
  CovariateRow covariates;
  Observation observation;
};

struct CaseKey {
  std::string station;
  int step_h = 0;
  TimePoint valid_time{};

  friend auto operator<=>(const CaseKey&, const CaseKey&) = default;
};

inline CaseKey key_of(const CaseRecord& r) { return {r.station, r.step_h, r.valid_time}; }

inline std::string describe(const CaseKey& k) {
  return k.station + " " + format_iso8601(k.valid_time) + " +" + std::to_string(k.step_h) + "h";
}

}  // namespace bivwind
