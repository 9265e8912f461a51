#pragma once

// Versioned flat text format for fitted models:
//
//   bivwind-model 1
//   [model]
//   kind = RAM_ADV
//   ...
//   [mu1]
//   terms = intercept s(doy) vec1_mean ...
//   coefficients = 0.25 -1.5e-3 ...
//
// Numbers are written in shortest round-trip form, so a reloaded model
// predicts bit-identically.

#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "bivwind/csv.hpp"
#include "bivwind/estimation.hpp"

namespace bivwind {

inline constexpr std::string_view kModelMagic = "bivwind-model 1";

namespace detail {

inline std::string join_numbers(const Eigen::VectorXd& v) {
  std::string out;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i) out += ' ';
    out += csv::format(v(i));
  }
  return out;
}

inline std::string join_numbers(std::span<const double> v) {
  return join_numbers(Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()))));
}

inline Eigen::VectorXd parse_numbers(const std::string& text, const std::string& what) {
  std::vector<double> values;
  std::size_t pos = 0;
  while (pos < text.size()) {
    while (pos < text.size() && text[pos] == ' ') ++pos;
    if (pos >= text.size()) break;
    std::size_t end = text.find(' ', pos);
    if (end == std::string::npos) end = text.size();
    values.push_back(csv::parse_double(std::string_view(text).substr(pos, end - pos), what, "model", 0));
    pos = end;
  }
  return Eigen::Map<Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

using Sections = std::map<std::string, std::map<std::string, std::string>>;

inline Sections parse_sections(std::istream& in, const std::string& source) {
  std::string line;
  if (!std::getline(in, line) || (line != kModelMagic && line != std::string(kModelMagic) + "\r")) {
    throw ConfigError(source + ": not a model file (expected '" + std::string(kModelMagic) + "' header)");
  }
  Sections sections;
  std::string current;
  std::size_t number = 1;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(csv::where(source, number) + "malformed section header");
      current = line.substr(1, line.size() - 2);
      if (!sections.emplace(current, std::map<std::string, std::string>{}).second) {
        throw ConfigError(csv::where(source, number) + "duplicate section [" + current + "]");
      }
      continue;
    }
    const std::size_t eq = line.find(" = ");
    if (eq == std::string::npos || current.empty()) {
      throw ConfigError(csv::where(source, number) + "expected 'key = value' inside a section");
    }
    sections[current][line.substr(0, eq)] = line.substr(eq + 3);
  }
  return sections;
}

inline const std::string& require(const Sections& s, const std::string& section, const std::string& key) {
  const auto sec = s.find(section);
  if (sec == s.end()) throw ConfigError("model file lacks section [" + section + "]");
  const auto it = sec->second.find(key);
  if (it == sec->second.end()) throw ConfigError("model file lacks '" + key + "' in [" + section + "]");
  return it->second;
}

inline double require_number(const Sections& s, const std::string& section, const std::string& key) {
  const Eigen::VectorXd v = parse_numbers(require(s, section, key), key);
  if (v.size() != 1) throw ConfigError("model key '" + key + "' must hold one number");
  return v(0);
}

inline std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace detail

inline void write_model(std::ostream& out, const FittedModel& model) {
  const ModelSpec& spec = model.spec();
  out << kModelMagic << '\n';
  out << "[model]\n";
  out << "kind = " << kind_id(spec.kind) << '\n';
  out << "step_h = " << model.step_h() << '\n';
  out << "sigma_floor = " << csv::format(model.sigma_floor()) << '\n';
  out << "lambda = " << csv::format(spec.smoothing.lambda) << '\n';
  for (const auto& [name, value] : spec.smoothing.per_term) out << "lambda." << name << " = " << csv::format(value) << '\n';
  out << "doy_period = " << csv::format(spec.doy_spline.period()) << '\n';
  out << "doy_knots = " << detail::join_numbers(spec.doy_spline.knots()) << '\n';
  out << "dir_period = " << csv::format(spec.dir_spline.period()) << '\n';
  out << "dir_knots = " << detail::join_numbers(spec.dir_spline.knots()) << '\n';

  out << "[centering]\n";
  const Centering& c = model.centering();
  if (c.doy) out << "doy = " << detail::join_numbers(c.doy->constraint()) << '\n';
  if (c.dir) out << "dir = " << detail::join_numbers(c.dir->constraint()) << '\n';
  if (c.tensor) out << "tensor = " << detail::join_numbers(c.tensor->constraint()) << '\n';

  const FitDiagnostics& d = model.diagnostics();
  out << "[diagnostics]\n";
  out << "iterations = " << d.iterations << '\n';
  out << "gradient_norm = " << csv::format(d.gradient_norm) << '\n';
  out << "objective = " << csv::format(d.objective) << '\n';
  out << "loglik = " << csv::format(d.loglik) << '\n';
  out << "converged = " << (d.converged ? 1 : 0) << '\n';

  const Eigen::VectorXd& se = model.standard_errors();
  Eigen::Index offset = 0;
  for (int k = 0; k < kNumPredictors; ++k) {
    const Eigen::Index w = model.design().width(k);
    if (w == 0) continue;
    out << '[' << kPredictorNames[static_cast<std::size_t>(k)] << "]\n";
    std::string terms;
    for (const Term& t : model.design().layout(k).terms) terms += (terms.empty() ? "" : " ") + t.name();
    out << "terms = " << terms << '\n';
    out << "coefficients = " << detail::join_numbers(model.coefficients()[static_cast<std::size_t>(k)]) << '\n';
    if (se.size() >= offset + w) out << "std_errors = " << detail::join_numbers(Eigen::VectorXd(se.segment(offset, w))) << '\n';
    offset += w;
  }
}

inline void save_model(const std::string& path, const FittedModel& model) {
  auto out = csv::open_output(path);
  write_model(out, model);
  if (!out) throw InputError("failed writing '" + path + "'");
}

inline FittedModel read_model(std::istream& in, const std::string& source = "<model>") {
  using namespace detail;
  const Sections s = parse_sections(in, source);
  try {
    ModelSpec spec;
    spec.kind = parse_kind(require(s, "model", "kind"));
    spec.smoothing.lambda = require_number(s, "model", "lambda");
    for (const auto& [key, value] : s.at("model")) {
      if (key.starts_with("lambda.")) {
        spec.smoothing.per_term[key.substr(7)] = parse_numbers(value, key)(0);
      }
    }
    spec.doy_spline = CyclicSplineSpec(require_number(s, "model", "doy_period"),
                                       to_std(parse_numbers(require(s, "model", "doy_knots"), "doy_knots")));
    spec.dir_spline = CyclicSplineSpec(require_number(s, "model", "dir_period"),
                                       to_std(parse_numbers(require(s, "model", "dir_knots"), "dir_knots")));
    const double floor = require_number(s, "model", "sigma_floor");
    const auto step = static_cast<int>(require_number(s, "model", "step_h"));

    Centering centering;
    if (s.count("centering")) {
      const auto& sec = s.at("centering");
      if (sec.count("doy")) centering.doy = CenteringTransform::from_constraint(parse_numbers(sec.at("doy"), "doy"));
      if (sec.count("dir")) centering.dir = CenteringTransform::from_constraint(parse_numbers(sec.at("dir"), "dir"));
      if (sec.count("tensor")) {
        centering.tensor = CenteringTransform::from_constraint(parse_numbers(sec.at("tensor"), "tensor"));
      }
    }

    const DesignBuilder probe(spec, centering);
    std::array<Eigen::VectorXd, kNumPredictors> coefficients;
    std::vector<double> se;
    bool have_se = true;
    for (int k = 0; k < kNumPredictors; ++k) {
      const std::string name(kPredictorNames[static_cast<std::size_t>(k)]);
      if (probe.width(k) == 0) {
        if (s.count(name)) throw ConfigError("model of kind " + std::string(kind_id(spec.kind)) +
                                             " must not have a [" + name + "] section");
        coefficients[static_cast<std::size_t>(k)] = Eigen::VectorXd();
        continue;
      }
      std::string terms;
      for (const Term& t : probe.layout(k).terms) terms += (terms.empty() ? "" : " ") + t.name();
      if (const std::string& stored = require(s, name, "terms"); stored != terms) {
        throw ConfigError("[" + name + "] terms '" + stored + "' do not match kind " +
                          std::string(kind_id(spec.kind)) + " ('" + terms + "')");
      }
      coefficients[static_cast<std::size_t>(k)] = parse_numbers(require(s, name, "coefficients"), "coefficients");
      const auto& sec = s.at(name);
      if (const auto it = sec.find("std_errors"); it != sec.end() && have_se) {
        const auto v = to_std(parse_numbers(it->second, "std_errors"));
        se.insert(se.end(), v.begin(), v.end());
      } else {
        have_se = false;
      }
    }
    FittedModel model(spec, centering, std::move(coefficients), floor);
    model.set_step_h(step);
    if (s.count("diagnostics")) {
      FitDiagnostics d;
      d.iterations = static_cast<int>(require_number(s, "diagnostics", "iterations"));
      d.gradient_norm = require_number(s, "diagnostics", "gradient_norm");
      d.objective = require_number(s, "diagnostics", "objective");
      d.loglik = require_number(s, "diagnostics", "loglik");
      d.converged = require_number(s, "diagnostics", "converged") != 0.0;
      model.set_diagnostics(d);
    }
    if (have_se) model.set_standard_errors(Eigen::Map<Eigen::VectorXd>(se.data(), static_cast<Eigen::Index>(se.size())));
    return model;
  } catch (const ConfigError& e) {
    throw ConfigError(source + ": " + e.what());
  } catch (const InputError& e) {
    throw ConfigError(source + ": " + e.what());
  }
}

inline FittedModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open model file '" + path + "'");
  return read_model(in, path);
}

}  // namespace bivwind
