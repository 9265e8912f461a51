#pragma once

// Command implementations behind the bivwind executable.  Each command takes
// a plain options struct so it can be driven from tests as well as from the
// argument parser; failures are thrown and mapped to exit codes by run().

#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "bivwind/data.hpp"
#include "bivwind/estimation.hpp"
#include "bivwind/model_io.hpp"
#include "bivwind/predictions.hpp"
#include "bivwind/report.hpp"

namespace bivwind::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

struct SimulateOptions {
  std::string preset = "plain";
  int days = 365;
  std::uint64_t seed = 1;
  std::string out_dir = ".";
  std::vector<int> steps;   // empty: preset default
  std::string correlation;  // empty: preset default
};

struct TrainOptions {
  std::string data;
  std::string spec;
  std::string out_dir = ".";
  std::string lambda = "1";
  std::vector<double> grid{0.1, 1.0, 10.0, 100.0, 1000.0};
  std::string split_date;  // train on cases strictly before this time
  int doy_knots = kDefaultKnots;
  int dir_knots = kDefaultKnots;
  int max_iter = 200;
  double epsilon = 0.1;
};

struct PredictOptions {
  std::vector<std::string> models;  // files or directories
  std::string data;
  std::string out_dir = ".";
  std::string output;      // default: <out_dir>/predictions_<kind>.csv
  std::string split_date;  // predict cases at or after this time
};

struct VerifyOptions {
  std::string predictions;  // predictions CSV or raw members CSV
  std::string data;
  std::string reference;    // optional, same two formats
  std::string out_dir = ".";
  std::string split_date;   // verify cases at or after this time
  ScoringConfig scoring;
};

namespace detail {

inline std::filesystem::path ensure_dir(const std::string& dir) {
  std::filesystem::path p(dir.empty() ? "." : dir);
  std::error_code ec;
  std::filesystem::create_directories(p, ec);
  if (ec || !std::filesystem::is_directory(p)) throw ConfigError("cannot create output directory '" + dir + "'");
  return p;
}

inline std::optional<TimePoint> parse_split(const std::string& text) {
  if (text.empty()) return std::nullopt;
  try {
    return parse_iso8601(text);
  } catch (const InputError& e) {
    throw ConfigError(std::string("--split-date: ") + e.what());
  }
}

inline std::string model_file_name(ModelKind kind, int step) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%03d", step);
  return std::string(kind_cli_name(kind)) + "_step" + buf + ".model";
}

inline std::string first_line(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  std::string line;
  std::getline(in, line);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

/// Loads a predictions or raw-members file, keeping cases at or after `from`.
inline ForecastTable load_forecasts(const std::string& path, std::optional<TimePoint> from) {
  const std::string header = first_line(path);
  ForecastTable table;
  if (header == kPredictionHeader) {
    std::ifstream in(path);
    table = forecasts_from_predictions(read_predictions(in, path));
  } else if (header == kMemberHeader) {
    table = forecasts_from_members(load_members(path));
  } else {
    throw ConfigError("'" + path + "' is neither a predictions nor a members file");
  }
  if (from) std::erase_if(table, [&](const auto& kv) { return kv.first.valid_time < *from; });
  return table;
}

inline std::string display_name(const std::string& path) { return std::filesystem::path(path).stem().string(); }

inline nlohmann::json interval_json(const MeanInterval& m) {
  return {{"mean", m.mean}, {"lo95", m.lo95}, {"hi95", m.hi95}};
}

inline nlohmann::json summary_json(const StepSummary& s) {
  nlohmann::json j;
  j["step_h"] = s.step_h;
  j["n"] = s.n;
  j["es"] = interval_json(s.es);
  j["ls"] = interval_json(s.ls);
  if (s.es_skill) j["es_skill"] = interval_json(*s.es_skill);
  if (s.ls_skill) j["ls_skill"] = interval_json(*s.ls_skill);
  j["rank_histogram"] = s.rank_counts;
  return j;
}

}  // namespace detail

inline void cmd_simulate(const SimulateOptions& o, std::ostream& log) {
  ScenarioConfig config = scenario_preset(o.preset);
  config.n_days = o.days;
  config.seed = o.seed;
  if (!o.steps.empty()) config.steps = o.steps;
  if (!o.correlation.empty()) config.correlation = parse_correlation_function(o.correlation);
  const SimulatedData sim = simulate(config);
  const auto dir = detail::ensure_dir(o.out_dir);
  save_cases((dir / "cases.csv").string(), sim.cases);
  save_members((dir / "members.csv").string(), sim.members);
  auto truth = csv::open_output((dir / "truth.csv").string());
  write_truth(truth, sim.truth);
  log << "simulated " << sim.cases.size() << " cases (" << config.n_days << " days x " << config.steps.size()
      << " steps) into " << dir.string() << '\n';
}

inline void cmd_train(const TrainOptions& o, std::ostream& log) {
  if (o.data.empty()) throw ConfigError("train: --data is required");
  if (o.spec.empty()) throw ConfigError("train: --spec is required");
  ModelSpec spec;
  spec.kind = parse_kind(o.spec);
  spec.doy_spline = CyclicSplineSpec::uniform(kDayOfYearPeriod, o.doy_knots);
  spec.dir_spline = CyclicSplineSpec::uniform(kDirectionPeriod, o.dir_knots);
  if (o.lambda == "auto") {
    spec.smoothing.automatic = true;
  } else {
    spec.smoothing.lambda = csv::parse_double(o.lambda, "lambda", "--lambda", 0);
  }
  spec.validate();
  FitConfig fit_config;
  fit_config.max_iter = o.max_iter;
  const auto split = detail::parse_split(o.split_date);

  std::vector<CaseRecord> cases = load_cases(o.data);
  if (split) std::erase_if(cases, [&](const CaseRecord& c) { return c.valid_time >= *split; });
  if (cases.empty()) throw InputError("train: no cases to train on");
  const auto dir = detail::ensure_dir(o.out_dir);

  int failures = 0;
  for (int step : steps_of(cases)) {
    const std::vector<CaseRecord> step_cases = cases_for_step(cases, step);
    try {
      ModelSpec resolved = spec;
      if (spec.smoothing.automatic) {
        // Tune on the training period itself: the last quarter is held out.
        std::vector<TimePoint> times;
        for (const CaseRecord& c : step_cases) times.push_back(c.valid_time);
        std::sort(times.begin(), times.end());
        const TimePoint tune_split = times[times.size() * 3 / 4];
        const SmoothingSelection sel =
            select_smoothing_detailed(spec, step_cases, o.grid, tune_split, fit_config, o.epsilon);
        resolved = sel.spec;
        log << "step +" << step << "h: lambda selection";
        for (const auto& c : sel.candidates) log << ' ' << c.lambda << ':' << c.mean_log_score;
        log << " -> " << resolved.smoothing.lambda << '\n';
      }
      const FittedModel model = fit(resolved, step_cases, fit_config);
      const auto path = dir / detail::model_file_name(spec.kind, step);
      save_model(path.string(), model);
      const FitDiagnostics& d = model.diagnostics();
      log << "step +" << step << "h: " << kind_id(spec.kind) << " n=" << step_cases.size()
          << " iterations=" << d.iterations << " gradient_norm=" << d.gradient_norm << " loglik=" << d.loglik
          << " -> " << path.string() << '\n';
    } catch (const Error& e) {
      ++failures;
      log << "step +" << step << "h: FAILED: " << e.what() << '\n';
    }
  }
  if (failures > 0) throw Error("train: " + std::to_string(failures) + " step(s) failed");
}

inline void cmd_predict(const PredictOptions& o, std::ostream& log) {
  if (o.models.empty()) throw ConfigError("predict: --model is required");
  if (o.data.empty()) throw ConfigError("predict: --data is required");
  std::vector<std::string> files;
  for (const std::string& m : o.models) {
    if (std::filesystem::is_directory(m)) {
      std::vector<std::string> found;
      for (const auto& e : std::filesystem::directory_iterator(m)) {
        if (e.path().extension() == ".model") found.push_back(e.path().string());
      }
      std::sort(found.begin(), found.end());
      if (found.empty()) throw ConfigError("no .model files in '" + m + "'");
      files.insert(files.end(), found.begin(), found.end());
    } else {
      if (!std::filesystem::exists(m)) throw ConfigError("model file '" + m + "' does not exist");
      files.push_back(m);
    }
  }
  std::map<int, FittedModel> by_step;
  std::optional<ModelKind> kind;
  for (const std::string& f : files) {
    FittedModel m = load_model(f);
    if (kind && *kind != m.kind()) throw ConfigError("predict: models of different kinds given");
    kind = m.kind();
    const int step = m.step_h();
    if (!by_step.emplace(step, std::move(m)).second) {
      throw ConfigError("predict: several models for step +" + std::to_string(step) + "h");
    }
  }
  std::vector<CaseRecord> cases = load_cases(o.data);
  if (const auto split = detail::parse_split(o.split_date)) {
    std::erase_if(cases, [&](const CaseRecord& c) { return c.valid_time < *split; });
  }
  std::vector<int> missing;
  for (int step : steps_of(cases)) {
    if (!by_step.count(step)) missing.push_back(step);
  }
  if (!missing.empty()) {
    std::string data_steps, model_steps;
    for (int s : missing) data_steps += " +" + std::to_string(s) + "h";
    for (const auto& [s, m] : by_step) model_steps += " +" + std::to_string(s) + "h";
    throw InputError("predict: no model for data step(s)" + data_steps + "; models cover" + model_steps);
  }
  std::vector<PredictionRecord> rows;
  rows.reserve(cases.size());
  for (const CaseRecord& c : cases) rows.push_back({key_of(c), by_step.at(c.step_h).predict(c.covariates)});
  std::string out_path = o.output;
  if (out_path.empty()) {
    out_path = (detail::ensure_dir(o.out_dir) / ("predictions_" + std::string(kind_cli_name(*kind)) + ".csv")).string();
  }
  auto out = csv::open_output(out_path);
  write_predictions(out, rows);
  log << "predicted " << rows.size() << " cases with " << kind_id(*kind) << " -> " << out_path << '\n';
}

inline void cmd_verify(const VerifyOptions& o, std::ostream& log) {
  if (o.predictions.empty()) throw ConfigError("verify: --predictions (or --members) is required");
  if (o.data.empty()) throw ConfigError("verify: --data is required");
  o.scoring.validate();
  const auto split = detail::parse_split(o.split_date);
  const ForecastTable forecast = detail::load_forecasts(o.predictions, split);
  std::optional<ForecastTable> reference;
  if (!o.reference.empty()) reference = detail::load_forecasts(o.reference, split);
  const ObservationTable obs = observations_of(load_cases(o.data));
  const ScoreReport report = verify(forecast, obs, o.scoring, reference ? &*reference : nullptr,
                                    detail::display_name(o.predictions),
                                    reference ? detail::display_name(o.reference) : "");

  const auto dir = detail::ensure_dir(o.out_dir);
  {
    auto out = csv::open_output((dir / "scores.csv").string());
    out << "station,valid_time,step_h,es,ls";
    if (reference) out << ",reference_es,reference_ls";
    out << '\n';
    for (std::size_t i = 0; i < report.cases.size(); ++i) {
      const CaseScore& c = report.cases[i];
      out << c.key.station << ',' << format_iso8601(c.key.valid_time) << ',' << c.key.step_h << ','
          << csv::format(c.es) << ',' << csv::format(c.ls);
      if (reference) out << ',' << csv::format(report.reference_cases[i].es) << ',' << csv::format(report.reference_cases[i].ls);
      out << '\n';
    }
  }
  {
    auto out = csv::open_output((dir / "rank_histogram.csv").string());
    out << "step_h,bin,count\n";
    for (const StepSummary& s : report.steps) {
      for (std::size_t b = 0; b < s.rank_counts.size(); ++b) out << s.step_h << ',' << b + 1 << ',' << s.rank_counts[b] << '\n';
    }
  }
  nlohmann::json j;
  j["forecast"] = report.forecast_name;
  if (reference) j["reference"] = report.reference_name;
  j["epsilon"] = o.scoring.epsilon;
  j["es_samples"] = o.scoring.es_samples;
  j["rank_samples"] = o.scoring.rank_samples;
  j["rank_repeats"] = o.scoring.rank_repeats;
  j["bootstrap_reps"] = o.scoring.bootstrap_reps;
  j["seed"] = o.scoring.seed;
  j["steps"] = nlohmann::json::array();
  for (const StepSummary& s : report.steps) j["steps"].push_back(detail::summary_json(s));
  j["overall"] = detail::summary_json(report.overall);
  auto out = csv::open_output((dir / "summary.json").string());
  out << j.dump(2) << '\n';

  const StepSummary& all = report.overall;
  log << "verified " << all.n << " cases of " << report.forecast_name << ": ES " << all.es.mean << " ["
      << all.es.lo95 << ", " << all.es.hi95 << "], box-LS " << all.ls.mean << " [" << all.ls.lo95 << ", "
      << all.ls.hi95 << "]\n";
  if (all.es_skill) {
    log << "skill vs " << report.reference_name << ": ES " << all.es_skill->mean << " [" << all.es_skill->lo95
        << ", " << all.es_skill->hi95 << "], box-LS " << all.ls_skill->mean << " [" << all.ls_skill->lo95 << ", "
        << all.ls_skill->hi95 << "]\n";
  }
}

/// Runs a command and maps failures to exit codes.
inline int run(const std::function<void()>& command, std::ostream& err = std::cerr) {
  try {
    command();
    return kExitOk;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

}  // namespace bivwind::cli
