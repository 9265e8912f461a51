#pragma once

// Per-case predictive distributions as CSV.

#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bivwind/bivariate_normal.hpp"
#include "bivwind/case_record.hpp"
#include "bivwind/csv.hpp"

namespace bivwind {

inline constexpr std::string_view kPredictionHeader = "station,valid_time,step_h,mu1,mu2,sigma1,sigma2,rho";

struct PredictionRecord {
  CaseKey key;
  BivariateNormalParams params;
};

inline void write_predictions(std::ostream& out, std::span<const PredictionRecord> rows) {
  out << kPredictionHeader << '\n';
  for (const PredictionRecord& r : rows) {
    const BivariateNormalParams& p = r.params;
    out << r.key.station << ',' << format_iso8601(r.key.valid_time) << ',' << r.key.step_h;
    for (double v : {p.mu1, p.mu2, p.sigma1, p.sigma2, p.rho}) out << ',' << csv::format(v);
    out << '\n';
  }
}

inline std::vector<PredictionRecord> read_predictions(std::istream& in, const std::string& source = "<predictions>") {
  csv::Reader reader(in, source, kPredictionHeader);
  std::vector<PredictionRecord> out;
  std::vector<std::string_view> f;
  while (reader.next(f)) {
    PredictionRecord r;
    r.key.station = std::string(f[0]);
    try {
      r.key.valid_time = parse_iso8601(f[1]);
    } catch (const InputError& e) {
      reader.fail(e.what());
    }
    r.key.step_h = static_cast<int>(reader.integer(f[2], "step_h"));
    r.params = {reader.number(f[3], "mu1"), reader.number(f[4], "mu2"), reader.number(f[5], "sigma1"),
                reader.number(f[6], "sigma2"), reader.number(f[7], "rho")};
    if (!r.params.valid()) reader.fail("invalid distribution parameters");
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace bivwind
