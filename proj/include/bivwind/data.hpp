#pragma once

// Case tables, ensemble member tables, and the synthetic scenario generator.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <array>
#include <map>
#include <numeric>
#include <ostream>
#include <random>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "bivwind/case_record.hpp"
#include "bivwind/csv.hpp"
#include "bivwind/errors.hpp"
#include "bivwind/time.hpp"
#include "bivwind/wind.hpp"

namespace bivwind {

inline constexpr std::string_view kCaseHeader =
    "station,valid_time_iso8601,step_h,doy,vec1_mean,vec2_mean,vec1_logsd,vec2_logsd,corr,spd_mean,dir_mean,"
    "obs_u,obs_v";
inline constexpr std::string_view kMemberHeader = "station,valid_time_iso8601,step_h,member,u,v";
inline constexpr std::string_view kTruthHeader = "valid_time_iso8601,step_h,theta_deg,rho_true";

inline void validate_step(long long step, const csv::Reader& r) {
  if (step <= 0 || step % 12 != 0) r.fail("step_h must be a positive multiple of 12, got " + std::to_string(step));
}

inline void sort_cases(std::vector<CaseRecord>& cases) {
  std::stable_sort(cases.begin(), cases.end(),
                   [](const CaseRecord& a, const CaseRecord& b) { return key_of(a) < key_of(b); });
}

/// Throws on the first repeated (station, step, time) key; expects sorted input.
inline void reject_duplicates(const std::vector<CaseRecord>& cases) {
  for (std::size_t i = 1; i < cases.size(); ++i) {
    if (key_of(cases[i]) == key_of(cases[i - 1])) {
      throw InputError("duplicate case " + describe(key_of(cases[i])));
    }
  }
}

inline std::vector<CaseRecord> read_cases(std::istream& in, const std::string& source = "<cases>") {
  csv::Reader reader(in, source, kCaseHeader);
  std::vector<CaseRecord> out;
  std::vector<std::string_view> f;
  static constexpr std::array<std::string_view, 13> names = {
      "station", "valid_time_iso8601", "step_h", "doy", "vec1_mean", "vec2_mean", "vec1_logsd",
      "vec2_logsd", "corr", "spd_mean", "dir_mean", "obs_u", "obs_v"};
  while (reader.next(f)) {
    CaseRecord c;
    if (f[0].empty()) reader.fail("empty station id");
    c.station = std::string(f[0]);
    try {
      c.valid_time = parse_iso8601(f[1]);
    } catch (const InputError& e) {
      reader.fail(e.what());
    }
    const long long step = reader.integer(f[2], names[2]);
    validate_step(step, reader);
    c.step_h = static_cast<int>(step);
    double v[10];
    for (std::size_t k = 0; k < 10; ++k) v[k] = reader.number(f[k + 3], names[k + 3]);
    c.covariates = {v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7]};
    if (c.covariates.dir_mean == kDirectionPeriod) c.covariates.dir_mean = 0.0;
    c.observation = {v[8], v[9]};
    if (const std::string bad = first_invalid_field(c.covariates); !bad.empty()) {
      reader.fail("covariate '" + bad + "' out of range");
    }
    if (!std::isfinite(c.observation.y1)) reader.fail("field 'obs_u' is not finite");
    if (!std::isfinite(c.observation.y2)) reader.fail("field 'obs_v' is not finite");
    out.push_back(std::move(c));
  }
  sort_cases(out);
  reject_duplicates(out);
  return out;
}

inline std::vector<CaseRecord> load_cases(const std::string& path) {
  auto in = csv::open_input(path);
  return read_cases(in, path);
}

inline void write_cases(std::ostream& out, std::span<const CaseRecord> cases) {
  out << kCaseHeader << '\n';
  for (const CaseRecord& c : cases) {
    if (c.station.find_first_of(",\n\r") != std::string::npos || c.station.empty()) {
      throw InputError("station id '" + c.station + "' cannot be written to CSV");
    }
    const CovariateRow& r = c.covariates;
    out << c.station << ',' << format_iso8601(c.valid_time) << ',' << c.step_h;
    for (double v : {r.doy, r.vec1_mean, r.vec2_mean, r.vec1_logsd, r.vec2_logsd, r.corr, r.spd_mean, r.dir_mean,
                     c.observation.y1, c.observation.y2}) {
      out << ',' << csv::format(v);
    }
    out << '\n';
  }
}

inline void save_cases(const std::string& path, std::span<const CaseRecord> cases) {
  auto out = csv::open_output(path);
  write_cases(out, cases);
  if (!out) throw InputError("failed writing '" + path + "'");
}

/// Raw ensemble members keyed by case.
using MemberTable = std::map<CaseKey, std::vector<WindVector>>;

inline MemberTable read_members(std::istream& in, const std::string& source = "<members>") {
  csv::Reader reader(in, source, kMemberHeader);
  std::map<CaseKey, std::map<long long, WindVector>> staged;
  std::vector<std::string_view> f;
  while (reader.next(f)) {
    CaseKey key;
    key.station = std::string(f[0]);
    try {
      key.valid_time = parse_iso8601(f[1]);
    } catch (const InputError& e) {
      reader.fail(e.what());
    }
    const long long step = reader.integer(f[2], "step_h");
    validate_step(step, reader);
    key.step_h = static_cast<int>(step);
    const long long member = reader.integer(f[3], "member");
    const WindVector w{reader.number(f[4], "u"), reader.number(f[5], "v")};
    if (!std::isfinite(w.u) || !std::isfinite(w.v)) reader.fail("non-finite member value");
    if (!staged[key].emplace(member, w).second) {
      reader.fail("duplicate member " + std::to_string(member) + " for " + describe(key));
    }
  }
  MemberTable out;
  for (auto& [key, members] : staged) {
    std::vector<WindVector> v;
    v.reserve(members.size());
    for (const auto& [idx, w] : members) v.push_back(w);
    out.emplace(key, std::move(v));
  }
  return out;
}

inline MemberTable load_members(const std::string& path) {
  auto in = csv::open_input(path);
  return read_members(in, path);
}

inline void write_members(std::ostream& out, const MemberTable& table) {
  out << kMemberHeader << '\n';
  for (const auto& [key, members] : table) {
    for (std::size_t j = 0; j < members.size(); ++j) {
      out << key.station << ',' << format_iso8601(key.valid_time) << ',' << key.step_h << ',' << j << ','
          << csv::format(members[j].u) << ',' << csv::format(members[j].v) << '\n';
    }
  }
}

inline void save_members(const std::string& path, const MemberTable& table) {
  auto out = csv::open_output(path);
  write_members(out, table);
  if (!out) throw InputError("failed writing '" + path + "'");
}

/// Hidden truth of one simulated case.
struct TruthRecord {
  TimePoint valid_time{};
  int step_h = 12;
  double theta_deg = 0.0;
  double rho_true = 0.0;
};

inline void write_truth(std::ostream& out, std::span<const TruthRecord> truth) {
  out << kTruthHeader << '\n';
  for (const TruthRecord& t : truth) {
    out << format_iso8601(t.valid_time) << ',' << t.step_h << ',' << csv::format(t.theta_deg) << ','
        << csv::format(t.rho_true) << '\n';
  }
}

inline std::vector<TruthRecord> read_truth(std::istream& in, const std::string& source = "<truth>") {
  csv::Reader reader(in, source, kTruthHeader);
  std::vector<TruthRecord> out;
  std::vector<std::string_view> f;
  while (reader.next(f)) {
    TruthRecord t;
    try {
      t.valid_time = parse_iso8601(f[0]);
    } catch (const InputError& e) {
      reader.fail(e.what());
    }
    t.step_h = static_cast<int>(reader.integer(f[1], "step_h"));
    t.theta_deg = reader.number(f[2], "theta_deg");
    t.rho_true = reader.number(f[3], "rho_true");
    out.push_back(t);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic scenarios

enum class CorrelationShape { Zero, Constant, Sine };

/// Observation-error correlation as a function of the ensemble-mean direction.
struct CorrelationFunction {
  CorrelationShape shape = CorrelationShape::Zero;
  double value = 0.0;  // c for Constant, amplitude a for Sine

  double operator()(double dir_deg) const {
    switch (shape) {
      case CorrelationShape::Zero: return 0.0;
      case CorrelationShape::Constant: return value;
      case CorrelationShape::Sine: return value * std::sin(dir_deg * kDegToRad);
    }
    return 0.0;
  }
};

/// Parses "zero", "const:<c>" or "sin:<a>".
inline CorrelationFunction parse_correlation_function(std::string_view text) {
  auto number = [&](std::string_view s) {
    return csv::parse_double(s, "correlation", "correlation function", 0);
  };
  try {
    if (text == "zero") return {};
    if (text.starts_with("const:")) return {CorrelationShape::Constant, number(text.substr(6))};
    if (text.starts_with("sin:")) return {CorrelationShape::Sine, number(text.substr(4))};
  } catch (const InputError&) {
  }
  throw ConfigError("correlation function must be 'zero', 'const:<c>' or 'sin:<a>', got '" + std::string(text) +
                    "'");
}

inline std::string format_correlation_function(const CorrelationFunction& f) {
  switch (f.shape) {
    case CorrelationShape::Zero: return "zero";
    case CorrelationShape::Constant: return "const:" + csv::format(f.value);
    case CorrelationShape::Sine: return "sin:" + csv::format(f.value);
  }
  return "zero";
}

struct ScenarioConfig {
  std::string station = "SIM";
  int n_days = 365;
  std::string start_date = "2010-01-26";
  std::vector<int> steps = {12, 24, 36, 48, 60, 72};

  // Seasonal clockwise rotation of the EPS mean: theta(doy) sweeps [0, amplitude]
  // and peaks at doy = rotation_phase.
  double rotation_amplitude = 0.0;  // degrees
  double rotation_phase = 0.0;      // day of year

  CorrelationFunction correlation;
  double underdispersion = 1.0;  // member scatter relative to the observation noise, (0, 1]
  double skill = 1.0;            // weight of the true anomaly in the EPS mean, [0, 1]
  double noise_scale = 1.0;      // observation noise sd at +12 h, m/s
  double noise_growth = 0.1;     // relative noise increase per 12 h of lead time
  double spread_variability = 0.3;  // sd of the log case-to-case noise factor
  double anomaly_sd = 3.0;       // sd of the true wind anomaly, m/s
  double climate_u = 0.0;        // annual-mean wind, m/s
  double climate_v = 0.0;
  double climate_amplitude = 1.0;  // seasonal cycle of the climatological wind, m/s
  int n_members = 50;
  std::uint64_t seed = 1;

  void validate() const {
    if (n_days < 1) throw ConfigError("scenario needs at least one day");
    if (steps.empty()) throw ConfigError("scenario needs at least one forecast step");
    for (int s : steps) {
      if (s <= 0 || s % 12 != 0) throw ConfigError("forecast steps must be positive multiples of 12");
    }
    if (std::set<int>(steps.begin(), steps.end()).size() != steps.size()) {
      throw ConfigError("forecast steps must be distinct");
    }
    if (!(underdispersion > 0.0 && underdispersion <= 1.0)) throw ConfigError("under-dispersion must be in (0, 1]");
    if (!(skill >= 0.0 && skill <= 1.0)) throw ConfigError("skill must be in [0, 1]");
    if (!(noise_scale > 0.0) || !(anomaly_sd >= 0.0) || !(noise_growth >= 0.0) || !(spread_variability >= 0.0) ||
        !std::isfinite(climate_amplitude) || !std::isfinite(climate_u) || !std::isfinite(climate_v)) {
      throw ConfigError("invalid noise or climatology scale");
    }
    if (!std::isfinite(rotation_amplitude) || !std::isfinite(rotation_phase)) {
      throw ConfigError("invalid rotation settings");
    }
    if (correlation.shape != CorrelationShape::Zero && !(std::abs(correlation.value) < 1.0)) {
      throw ConfigError("correlation magnitude must be below 1");
    }
    if (n_members < 2) throw ConfigError("scenario needs at least two members");
    if (station.empty() || station.find_first_of(",\n\r") != std::string::npos) {
      throw ConfigError("invalid station id");
    }
    try {
      (void)parse_iso8601(start_date);
    } catch (const InputError& e) {
      throw ConfigError(std::string("start date: ") + e.what());
    }
  }

  double theta(double doy) const {
    return rotation_amplitude * 0.5 *
           (1.0 + std::cos(2.0 * std::numbers::pi * (doy - rotation_phase) / kDayOfYearPeriod));
  }
};

/// Low-skill EPS whose mean direction is rotated seasonally (alpine valley).
inline ScenarioConfig valley_preset() {
  ScenarioConfig c;
  c.station = "VALLEY";
  c.rotation_amplitude = 30.0;
  c.rotation_phase = 15.0;
  c.correlation = {CorrelationShape::Sine, 0.5};
  c.underdispersion = 0.4;
  c.skill = 0.8;
  c.noise_scale = 2.0;
  c.anomaly_sd = 3.5;
  c.climate_u = 0.5;
  c.climate_v = 0.3;
  c.climate_amplitude = 0.8;
  return c;
}

/// High-skill EPS without rotation or residual correlation (flat terrain).
inline ScenarioConfig plain_preset() {
  ScenarioConfig c;
  c.station = "PLAIN";
  c.underdispersion = 0.7;
  c.skill = 0.9;
  c.noise_scale = 1.0;
  c.anomaly_sd = 3.5;
  c.climate_u = 1.5;
  c.climate_v = 0.5;
  c.climate_amplitude = 1.0;
  return c;
}

inline ScenarioConfig scenario_preset(std::string_view name) {
  if (name == "valley") return valley_preset();
  if (name == "plain") return plain_preset();
  throw ConfigError("unknown preset '" + std::string(name) + "' (expected valley or plain)");
}

struct SimulatedData {
  std::vector<CaseRecord> cases;
  std::vector<TruthRecord> truth;  // aligned with cases
  MemberTable members;
};

/// Draws the scenario; every (day, step) uses its own generator stream so the
/// output does not depend on the order of the loops.
inline SimulatedData simulate(const ScenarioConfig& config) {
  config.validate();
  const TimePoint start = parse_iso8601(config.start_date);
  SimulatedData out;
  std::normal_distribution<double> normal;
  for (int step : config.steps) {
    for (int day = 0; day < config.n_days; ++day) {
      std::seed_seq seq{static_cast<std::uint32_t>(config.seed), static_cast<std::uint32_t>(config.seed >> 32),
                        static_cast<std::uint32_t>(day), static_cast<std::uint32_t>(step)};
      std::mt19937_64 rng(seq);
      const TimePoint valid = start + std::chrono::days{day} + std::chrono::hours{step};
      const double doy = day_of_year(valid);
      const double phase = 2.0 * std::numbers::pi * doy / kDayOfYearPeriod;
      const WindVector clim{config.climate_u + config.climate_amplitude * std::cos(phase),
                            config.climate_v + config.climate_amplitude * std::sin(phase)};

      const WindVector anomaly{config.anomaly_sd * normal(rng), config.anomaly_sd * normal(rng)};
      const WindVector other{config.anomaly_sd * normal(rng), config.anomaly_sd * normal(rng)};
      const WindVector truth{clim.u + anomaly.u, clim.v + anomaly.v};
      const double k = config.skill;
      const WindVector pre{clim.u + k * anomaly.u + (1.0 - k) * other.u,
                           clim.v + k * anomaly.v + (1.0 - k) * other.v};
      const double theta = config.theta(doy);
      const WindVector mean = rotate_clockwise(pre, theta);

      const double lead = 1.0 + config.noise_growth * (static_cast<double>(step) / 12.0 - 1.0);
      const double s_case = config.noise_scale * lead * std::exp(config.spread_variability * normal(rng));
      std::vector<WindVector> members(static_cast<std::size_t>(config.n_members));
      const double scatter = config.underdispersion * s_case;
      for (WindVector& w : members) {
        w.u = mean.u + scatter * normal(rng);
        w.v = mean.v + scatter * normal(rng);
      }
      const EnsembleStats stats = derive_stats(EnsembleMemberSet(members));
      const double rho = config.correlation(stats.dir_mean);
      const double z1 = normal(rng);
      const double z2 = rho * z1 + std::sqrt(1.0 - rho * rho) * normal(rng);

      CaseRecord c;
      c.station = config.station;
      c.valid_time = valid;
      c.step_h = step;
      c.covariates = covariates_from(stats, doy);
      c.observation = {truth.u + s_case * z1, truth.v + s_case * z2};
      out.members.emplace(key_of(c), std::move(members));
      out.cases.push_back(std::move(c));
      out.truth.push_back({valid, step, theta, rho});
    }
  }
  // Keep truth aligned with the sorted cases.
  std::vector<std::size_t> order(out.cases.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return key_of(out.cases[a]) < key_of(out.cases[b]); });
  std::vector<CaseRecord> cases;
  std::vector<TruthRecord> truth;
  for (std::size_t i : order) {
    cases.push_back(std::move(out.cases[i]));
    truth.push_back(out.truth[i]);
  }
  out.cases = std::move(cases);
  out.truth = std::move(truth);
  return out;
}

/// Cases of one forecast step, in time order.
inline std::vector<CaseRecord> cases_for_step(std::span<const CaseRecord> cases, int step) {
  std::vector<CaseRecord> out;
  for (const CaseRecord& c : cases) {
    if (c.step_h == step) out.push_back(c);
  }
  return out;
}

inline std::vector<int> steps_of(std::span<const CaseRecord> cases) {
  std::set<int> s;
  for (const CaseRecord& c : cases) s.insert(c.step_h);
  return {s.begin(), s.end()};
}

}  // namespace bivwind
