#pragma once

// Multivariate verification: energy score, box logarithmic score, skill
// scores, multivariate rank histograms and bootstrap aggregation.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <variant>
#include <vector>

#include "bivwind/bivariate_normal.hpp"
#include "bivwind/errors.hpp"

namespace bivwind {

struct ScoringConfig {
  double epsilon = 0.1;       // half-width of the LS box, m/s
  int es_samples = 500;       // draws per parametric forecast for the ES
  int rank_samples = 50;      // draws per parametric forecast for rank histograms
  int rank_repeats = 20;      // tie-randomization repetitions
  int bootstrap_reps = 1000;
  std::uint64_t seed = 1;

  void validate() const {
    if (!(epsilon > 0.0)) throw ConfigError("epsilon must be positive");
    if (es_samples < 1 || rank_samples < 1 || rank_repeats < 1 || bootstrap_reps < 1) {
      throw ConfigError("scoring sample counts must be positive");
    }
  }
};

/// Generator for one (purpose, index) stream derived from a master seed.
inline std::mt19937_64 stream_rng(std::uint64_t seed, std::uint64_t purpose, std::uint64_t index,
                                  std::uint64_t sub = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(purpose), static_cast<std::uint32_t>(index),
                    static_cast<std::uint32_t>(index >> 32), static_cast<std::uint32_t>(sub)};
  return std::mt19937_64(seq);
}

inline double energy_score(const SampleMatrix& samples, const Observation& y) {
  const Eigen::Index m = samples.rows();
  if (m < 1) throw InputError("energy score needs at least one sample");
  double to_obs = 0.0;
  for (Eigen::Index i = 0; i < m; ++i) to_obs += std::hypot(samples(i, 0) - y.y1, samples(i, 1) - y.y2);
  double pairs = 0.0;
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = i + 1; j < m; ++j) {
      pairs += std::hypot(samples(i, 0) - samples(j, 0), samples(i, 1) - samples(j, 1));
    }
  }
  const double md = static_cast<double>(m);
  return to_obs / md - pairs / (md * md);
}

/// Smallest box probability reported; keeps the score finite far in the tails.
inline constexpr double kMinBoxProbability = 1e-300;

/// Log probability of the box y +/- epsilon; non-positive, zero for a perfect forecast.
inline double log_score_box(const BivariateNormalParams& p, const Observation& y, double epsilon) {
  if (!(epsilon > 0.0)) throw InputError("epsilon must be positive");
  const double prob = rectangle_probability(p, {y.y1 - epsilon, y.y2 - epsilon}, {y.y1 + epsilon, y.y2 + epsilon});
  return std::min(0.0, std::log(std::max(prob, kMinBoxProbability)));
}

inline double skill_score(double score_forecast, double score_reference) {
  if (score_reference == 0.0) throw UndefinedSkillError("skill score undefined for a zero reference score");
  return 1.0 - score_forecast / score_reference;
}

/// Multivariate rank of y among the samples, in [1, m + 1].
template <class Rng>
int multivariate_rank(const Observation& y, const SampleMatrix& samples, Rng& rng) {
  const Eigen::Index m = samples.rows();
  if (m < 1) throw InputError("rank needs at least one sample");
  auto point = [&](Eigen::Index i) -> std::array<double, 2> {
    if (i == m) return {y.y1, y.y2};
    return {samples(i, 0), samples(i, 1)};
  };
  std::vector<int> pre(static_cast<std::size_t>(m + 1), 0);
  for (Eigen::Index j = 0; j <= m; ++j) {
    const auto pj = point(j);
    int count = 0;
    for (Eigen::Index k = 0; k <= m; ++k) {
      const auto pk = point(k);
      if (pk[0] <= pj[0] && pk[1] <= pj[1]) ++count;
    }
    pre[static_cast<std::size_t>(j)] = count;
  }
  const int own = pre.back();
  int below = 0;
  int ties = 0;
  for (Eigen::Index j = 0; j < m; ++j) {
    if (pre[static_cast<std::size_t>(j)] < own) ++below;
    if (pre[static_cast<std::size_t>(j)] == own) ++ties;
  }
  std::uniform_int_distribution<int> tie(0, ties);
  return 1 + below + tie(rng);
}

/// A forecast given either by distribution parameters or by a sample set.
using Forecast = std::variant<BivariateNormalParams, SampleMatrix>;

struct RankCase {
  Forecast forecast;
  Observation observation;
};

namespace detail {

/// Scales nonnegative weights to integers summing exactly to `total`.
inline std::vector<long> largest_remainder(const std::vector<double>& weights, long total) {
  const double sum = std::accumulate(weights.begin(), weights.end(), 0.0);
  std::vector<long> out(weights.size(), 0);
  if (sum <= 0.0) return out;
  std::vector<std::pair<double, std::size_t>> rem;
  long assigned = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const double q = weights[i] * static_cast<double>(total) / sum;
    out[i] = static_cast<long>(std::floor(q));
    assigned += out[i];
    rem.emplace_back(q - std::floor(q), i);
  }
  std::stable_sort(rem.begin(), rem.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t i = 0; assigned < total && i < rem.size(); ++i, ++assigned) ++out[rem[i].second];
  return out;
}

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace detail

/// Per-bin median counts over the tie-randomization repeats (m + 1 bins).
///
/// Parametric forecasts are sampled with `config.rank_samples` draws; every case
/// must end up with the same sample count.
inline std::vector<long> rank_histogram(std::span<const RankCase> cases, const ScoringConfig& config) {
  config.validate();
  if (cases.empty()) throw InputError("rank histogram needs at least one case");
  std::vector<SampleMatrix> samples;
  samples.reserve(cases.size());
  for (std::size_t i = 0; i < cases.size(); ++i) {
    if (const auto* p = std::get_if<BivariateNormalParams>(&cases[i].forecast)) {
      auto rng = stream_rng(config.seed, 2, i);
      samples.push_back(sample(*p, config.rank_samples, rng));
    } else {
      samples.push_back(std::get<SampleMatrix>(cases[i].forecast));
    }
  }
  const Eigen::Index m = samples.front().rows();
  for (const auto& s : samples) {
    if (s.rows() != m) throw InputError("rank histogram cases must share one sample count");
  }
  const auto bins = static_cast<std::size_t>(m + 1);
  std::vector<std::vector<double>> per_bin(bins, std::vector<double>(static_cast<std::size_t>(config.rank_repeats)));
  for (int rep = 0; rep < config.rank_repeats; ++rep) {
    std::vector<long> counts(bins, 0);
    for (std::size_t i = 0; i < cases.size(); ++i) {
      auto rng = stream_rng(config.seed, 3, i, static_cast<std::uint64_t>(rep));
      ++counts[static_cast<std::size_t>(multivariate_rank(cases[i].observation, samples[i], rng) - 1)];
    }
    for (std::size_t b = 0; b < bins; ++b) per_bin[b][static_cast<std::size_t>(rep)] = static_cast<double>(counts[b]);
  }
  std::vector<double> medians(bins);
  for (std::size_t b = 0; b < bins; ++b) medians[b] = detail::median(per_bin[b]);
  return detail::largest_remainder(medians, static_cast<long>(cases.size()));
}

/// Merges consecutive bins `factor` at a time (the last group may be short).
inline std::vector<long> combine_bins(const std::vector<long>& counts, std::size_t factor) {
  if (factor == 0) throw InputError("bin combination factor must be positive");
  std::vector<long> out((counts.size() + factor - 1) / factor, 0);
  for (std::size_t i = 0; i < counts.size(); ++i) out[i / factor] += counts[i];
  return out;
}

struct MeanInterval {
  double mean = 0.0;
  double lo95 = 0.0;
  double hi95 = 0.0;
};

namespace detail {

/// Linear-interpolation quantile of sorted data.
inline double quantile_sorted(const std::vector<double>& v, double q) {
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

}  // namespace detail

inline MeanInterval bootstrap_mean_ci(std::span<const double> values, int reps, std::uint64_t seed) {
  if (values.size() < 2) throw InputError("bootstrap needs at least two values");
  if (reps < 1) throw InputError("bootstrap needs at least one replicate");
  const std::size_t n = values.size();
  MeanInterval out;
  out.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(n);
  auto rng = stream_rng(seed, 4, 0);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::vector<double> means(static_cast<std::size_t>(reps));
  for (auto& m : means) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += values[pick(rng)];
    m = s / static_cast<double>(n);
  }
  std::sort(means.begin(), means.end());
  out.lo95 = detail::quantile_sorted(means, 0.025);
  out.hi95 = detail::quantile_sorted(means, 0.975);
  return out;
}

/// Skill of mean forecast score against mean reference score, with a paired
/// case bootstrap for the interval.
inline MeanInterval bootstrap_skill_ci(std::span<const double> forecast, std::span<const double> reference,
                                       int reps, std::uint64_t seed) {
  if (forecast.size() != reference.size()) throw InputError("skill bootstrap needs paired scores");
  if (forecast.size() < 2) throw InputError("bootstrap needs at least two values");
  const std::size_t n = forecast.size();
  const double mf = std::accumulate(forecast.begin(), forecast.end(), 0.0) / static_cast<double>(n);
  const double mr = std::accumulate(reference.begin(), reference.end(), 0.0) / static_cast<double>(n);
  MeanInterval out;
  out.mean = skill_score(mf, mr);
  auto rng = stream_rng(seed, 5, 0);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::vector<double> skills;
  skills.reserve(static_cast<std::size_t>(reps));
  for (int r = 0; r < reps; ++r) {
    double sf = 0.0, sr = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t j = pick(rng);
      sf += forecast[j];
      sr += reference[j];
    }
    if (sr != 0.0) skills.push_back(1.0 - sf / sr);
  }
  if (skills.empty()) throw UndefinedSkillError("skill bootstrap: every resampled reference score is zero");
  std::sort(skills.begin(), skills.end());
  out.lo95 = detail::quantile_sorted(skills, 0.025);
  out.hi95 = detail::quantile_sorted(skills, 0.975);
  return out;
}

/// Energy score of a parametric forecast from `n` seeded draws.
inline double energy_score(const BivariateNormalParams& p, const Observation& y, int n, std::uint64_t seed,
                           std::uint64_t case_index) {
  auto rng = stream_rng(seed, 1, case_index);
  return energy_score(sample(p, n, rng), y);
}

}  // namespace bivwind
