#pragma once

// Verification of a forecast table against observations, optionally against a
// reference forecast table with paired skill intervals.

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bivwind/case_record.hpp"
#include "bivwind/data.hpp"
#include "bivwind/predictions.hpp"
#include "bivwind/scoring.hpp"
#include "bivwind/wind.hpp"

namespace bivwind {

using ForecastTable = std::map<CaseKey, Forecast>;
using ObservationTable = std::map<CaseKey, Observation>;

inline ForecastTable forecasts_from_predictions(std::span<const PredictionRecord> rows) {
  ForecastTable out;
  for (const PredictionRecord& r : rows) {
    if (!out.emplace(r.key, r.params).second) throw InputError("duplicate prediction for " + describe(r.key));
  }
  return out;
}

inline ForecastTable forecasts_from_members(const MemberTable& members) {
  ForecastTable out;
  for (const auto& [key, m] : members) {
    if (m.size() < 2) throw InputError("raw ensemble for " + describe(key) + " has fewer than two members");
    SampleMatrix s(static_cast<Eigen::Index>(m.size()), 2);
    for (std::size_t j = 0; j < m.size(); ++j) {
      s(static_cast<Eigen::Index>(j), 0) = m[j].u;
      s(static_cast<Eigen::Index>(j), 1) = m[j].v;
    }
    out.emplace(key, std::move(s));
  }
  return out;
}

inline ObservationTable observations_of(std::span<const CaseRecord> cases) {
  ObservationTable out;
  for (const CaseRecord& c : cases) out.emplace(key_of(c), c.observation);
  return out;
}

/// Gaussian summary of a sample set (used for the box-LS of raw ensembles).
inline BivariateNormalParams gaussian_from_samples(const SampleMatrix& s, double sigma_floor = 1e-3) {
  std::vector<WindVector> members(static_cast<std::size_t>(s.rows()));
  for (Eigen::Index i = 0; i < s.rows(); ++i) members[static_cast<std::size_t>(i)] = {s(i, 0), s(i, 1)};
  const EnsembleStats st = derive_stats(EnsembleMemberSet(std::move(members)));
  return {st.vec1_mean, st.vec2_mean, std::max(std::exp(st.vec1_logsd), sigma_floor),
          std::max(std::exp(st.vec2_logsd), sigma_floor), std::clamp(st.corr, -kRhoClamp, kRhoClamp)};
}

struct CaseScore {
  CaseKey key;
  double es = 0.0;
  double ls = 0.0;
};

/// Scores every forecast in `table`; each must have an observation.
inline std::vector<CaseScore> score_cases(const ForecastTable& table, const ObservationTable& obs,
                                          const ScoringConfig& config) {
  config.validate();
  std::vector<CaseScore> out;
  out.reserve(table.size());
  std::uint64_t index = 0;
  for (const auto& [key, forecast] : table) {
    const auto it = obs.find(key);
    if (it == obs.end()) throw InputError("no observation for " + describe(key));
    const Observation& y = it->second;
    CaseScore s{key, 0.0, 0.0};
    if (const auto* p = std::get_if<BivariateNormalParams>(&forecast)) {
      s.es = energy_score(*p, y, config.es_samples, config.seed, index);
      s.ls = log_score_box(*p, y, config.epsilon);
    } else {
      const auto& samples = std::get<SampleMatrix>(forecast);
      s.es = energy_score(samples, y);
      s.ls = log_score_box(gaussian_from_samples(samples), y, config.epsilon);
    }
    out.push_back(s);
    ++index;
  }
  return out;
}

/// Fails with the first key present in one table but not the other.
inline void check_aligned(const ForecastTable& a, const ForecastTable& b) {
  auto ia = a.begin();
  auto ib = b.begin();
  while (ia != a.end() || ib != b.end()) {
    if (ib == b.end() || (ia != a.end() && ia->first < ib->first)) {
      throw InputError("forecast and reference are misaligned: " + describe(ia->first) + " missing from reference");
    }
    if (ia == a.end() || ib->first < ia->first) {
      throw InputError("forecast and reference are misaligned: " + describe(ib->first) + " missing from forecast");
    }
    ++ia;
    ++ib;
  }
}

struct StepSummary {
  int step_h = 0;  // 0 for the pooled summary
  std::size_t n = 0;
  MeanInterval es;
  MeanInterval ls;
  std::optional<MeanInterval> es_skill;
  std::optional<MeanInterval> ls_skill;
  std::vector<long> rank_counts;
};

struct ScoreReport {
  std::string forecast_name;
  std::string reference_name;
  ScoringConfig config;
  std::vector<CaseScore> cases;
  std::vector<CaseScore> reference_cases;
  std::vector<StepSummary> steps;
  StepSummary overall;
};

namespace detail {

inline StepSummary summarize(int step, const std::vector<std::size_t>& idx, const ScoreReport& r,
                             const ForecastTable& table, const ObservationTable& obs, std::uint64_t seed) {
  StepSummary s;
  s.step_h = step;
  s.n = idx.size();
  std::vector<double> es, ls, res, rls;
  std::vector<RankCase> ranks;
  for (std::size_t i : idx) {
    es.push_back(r.cases[i].es);
    ls.push_back(r.cases[i].ls);
    if (!r.reference_cases.empty()) {
      res.push_back(r.reference_cases[i].es);
      rls.push_back(r.reference_cases[i].ls);
    }
    const CaseKey& key = r.cases[i].key;
    ranks.push_back({table.at(key), obs.at(key)});
  }
  const int reps = r.config.bootstrap_reps;
  s.es = bootstrap_mean_ci(es, reps, seed);
  s.ls = bootstrap_mean_ci(ls, reps, seed);
  if (!res.empty()) {
    s.es_skill = bootstrap_skill_ci(es, res, reps, seed);
    s.ls_skill = bootstrap_skill_ci(ls, rls, reps, seed);
  }
  ScoringConfig rc = r.config;
  rc.seed = seed;
  s.rank_counts = rank_histogram(ranks, rc);
  return s;
}

}  // namespace detail

/// Full verification; `reference` may be null.
inline ScoreReport verify(const ForecastTable& forecast, const ObservationTable& obs, const ScoringConfig& config,
                          const ForecastTable* reference = nullptr, std::string forecast_name = "forecast",
                          std::string reference_name = "") {
  if (forecast.size() < 2) throw InputError("verification needs at least two cases");
  if (reference) check_aligned(forecast, *reference);
  ScoreReport r;
  r.forecast_name = std::move(forecast_name);
  r.reference_name = std::move(reference_name);
  r.config = config;
  r.cases = score_cases(forecast, obs, config);
  if (reference) r.reference_cases = score_cases(*reference, obs, config);

  std::map<int, std::vector<std::size_t>> by_step;
  std::vector<std::size_t> all;
  for (std::size_t i = 0; i < r.cases.size(); ++i) {
    by_step[r.cases[i].key.step_h].push_back(i);
    all.push_back(i);
  }
  for (const auto& [step, idx] : by_step) {
    if (idx.size() < 2) throw InputError("step +" + std::to_string(step) + "h has fewer than two cases");
    r.steps.push_back(detail::summarize(step, idx, r, forecast, obs, config.seed + static_cast<std::uint64_t>(step)));
  }
  r.overall = detail::summarize(0, all, r, forecast, obs, config.seed);
  return r;
}

}  // namespace bivwind
