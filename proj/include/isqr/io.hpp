#pragma once

#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "isqr/data_model.hpp"
#include "isqr/fit.hpp"
#include "isqr/sim_harness.hpp"

#include <json.hpp>

namespace isqr::io {

/// Shortest decimal text that round-trips to the same double.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "NA";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = line.find(sep, start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

[[noreturn]] inline void parse_fail(std::size_t line, const std::string& what) {
  fail(ErrorKind::ParseError, "line " + std::to_string(line) + ": " + what);
}

inline double parse_real(std::string_view field, std::size_t line, std::string_view column) {
  if (field.empty() || field == "NA" || field == "NaN" || field == "nan")
    parse_fail(line, "missing value in column '" + std::string(column) + "'");
  double v = 0.0;
  const auto res = std::from_chars(field.data(), field.data() + field.size(), v);
  if (res.ec != std::errc() || res.ptr != field.data() + field.size())
    parse_fail(line, "cannot parse '" + std::string(field) + "' in column '" +
                         std::string(column) + "' as a number");
  return v;
}

}  // namespace detail

/// CSV with header `time,status,<covariates...>`. Errors carry line numbers.
inline SurvivalSample read_csv(std::istream& in, bool intercept = true) {
  SurvivalSample sample;
  sample.intercept = intercept;
  std::string line;
  std::size_t lineno = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    if (lineno == 1 && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
    const auto fields = detail::split(line, ',');
    if (header.empty()) {
      for (auto f : fields) header.emplace_back(f);
      if (header.size() < 2 || header[0] != "time" || header[1] != "status")
        detail::parse_fail(lineno, "header must start with 'time,status'");
      sample.covariate_names.assign(header.begin() + 2, header.end());
      continue;
    }
    if (fields.size() != header.size())
      fail(ErrorKind::DimensionMismatch, "line " + std::to_string(lineno) + ": expected " +
                                             std::to_string(header.size()) + " fields, found " +
                                             std::to_string(fields.size()));
    Subject s;
    s.time = detail::parse_real(fields[0], lineno, "time");
    const double status = detail::parse_real(fields[1], lineno, "status");
    if (status != 0.0 && status != 1.0) detail::parse_fail(lineno, "status must be 0 or 1");
    s.status = static_cast<int>(status);
    for (std::size_t j = 2; j < fields.size(); ++j)
      s.covariates.push_back(detail::parse_real(fields[j], lineno, header[j]));
    if (!std::isfinite(s.time)) detail::parse_fail(lineno, "time is not finite");
    if (s.time <= 0.0) detail::parse_fail(lineno, "time must be positive");
    sample.subjects.push_back(std::move(s));
  }
  if (header.empty()) detail::parse_fail(lineno, "empty input");
  if (sample.subjects.empty()) detail::parse_fail(lineno, "no data rows");
  validate_sample(sample);
  return sample;
}

inline void write_csv(std::ostream& out, const SurvivalSample& sample) {
  out << "time,status";
  for (std::size_t j = 0; j < sample.covariate_dim(); ++j)
    out << ',' << (j < sample.covariate_names.size() ? sample.covariate_names[j]
                                                     : "x" + std::to_string(j + 1));
  out << '\n';
  for (const auto& s : sample.subjects) {
    out << format_double(s.time) << ',' << s.status;
    for (double v : s.covariates) out << ',' << format_double(v);
    out << '\n';
  }
}

/// Flat `key = value` scenario file; keys are the SimScenario field names.
/// Blank lines and `#` comments are ignored; t0_list is comma separated.
inline SimScenario parse_scenario_config(std::istream& in, SimScenario sc = {}) {
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::size_t hash = line.find('#');
    const std::string_view body = detail::trim(std::string_view(line).substr(0, hash));
    if (body.empty()) continue;
    const std::size_t eq = body.find('=');
    if (eq == std::string_view::npos) detail::parse_fail(lineno, "expected key = value");
    const std::string key(detail::trim(body.substr(0, eq)));
    const std::string_view val = detail::trim(body.substr(eq + 1));
    auto real = [&] { return detail::parse_real(val, lineno, key); };
    auto integer = [&] {
      const double v = real();
      if (v != std::floor(v)) detail::parse_fail(lineno, key + " must be an integer");
      return v;
    };
    if (key == "n") sc.n = static_cast<int>(integer());
    else if (key == "tau") sc.tau = real();
    else if (key == "t0_list") {
      sc.t0_list.clear();
      for (auto f : detail::split(val, ',')) sc.t0_list.push_back(detail::parse_real(f, lineno, key));
    } else if (key == "kappa") sc.kappa = real();
    else if (key == "beta0_base") sc.beta0_base = real();
    else if (key == "beta1_base") sc.beta1_base = real();
    else if (key == "censor_target") sc.censor_target = real();
    else if (key == "covariate_law") {
      if (val == "bernoulli") sc.covariate_law = CovariateLaw::Bernoulli;
      else if (val == "uniform") sc.covariate_law = CovariateLaw::Uniform;
      else detail::parse_fail(lineno, "covariate_law must be 'bernoulli' or 'uniform'");
    } else if (key == "reps") sc.reps = static_cast<int>(integer());
    else if (key == "seed") sc.seed = static_cast<std::uint64_t>(integer());
    else detail::parse_fail(lineno, "unknown key '" + key + "'");
  }
  return sc;
}

inline std::string cell_value(const SimCell& c, double v) {
  return c.unidentifiable ? "-" : format_double(v);
}

/// Summary grid: t0, cens, coef, PE, ESE, SD, CP, n_failed. Unidentifiable
/// cells print '-', an undefined SD prints NA.
inline void write_summary_tsv(std::ostream& out, const SimSummary& s) {
  out << "t0\tcens\tcoef\tPE\tESE\tSD\tCP\tn_failed\n";
  for (const auto& c : s.cells) {
    out << format_double(c.t0) << '\t' << format_double(s.scenario.censor_target) << '\t'
        << c.name << '\t' << cell_value(c, c.pe) << '\t' << cell_value(c, c.ese) << '\t'
        << (c.unidentifiable ? "-" : c.sd ? format_double(*c.sd) : "NA") << '\t'
        << cell_value(c, c.cp) << '\t' << c.n_failed << '\n';
  }
}

using Settings = std::vector<std::pair<std::string, std::string>>;

inline void write_settings(std::ostream& out, std::string_view command, const Settings& settings) {
  out << "# isqr " << command << '\n';
  for (const auto& [k, v] : settings) out << "# " << k << '=' << v << '\n';
}

inline nlohmann::ordered_json settings_json(const Settings& settings) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& [k, v] : settings) j[k] = v;
  return j;
}

inline const char* method_name(SolveMethod m) {
  switch (m) {
    case SolveMethod::NonSmoothLP: return "nonsmooth";
    case SolveMethod::SmoothedFixedH: return "smoothed-fixed";
    case SolveMethod::SmoothedIterative: return "smoothed-iterative";
  }
  return "?";
}

inline Settings fit_diagnostics(const FitResult& r) {
  const auto& d = r.diagnostics;
  return {{"n", std::to_string(d.n)},
          {"n_effective", std::to_string(d.n_effective)},
          {"events_beyond_t0", std::to_string(d.events_beyond_t0)},
          {"floored_weights", std::to_string(d.floored_weights)},
          {"iterations", std::to_string(d.iterations)},
          {"converged", d.converged ? "true" : "false"},
          {"fell_back", d.fell_back ? "true" : "false"},
          {"method", method_name(d.method)}};
}

/// Coefficient table: coef, PE, SE, lower, upper.
inline void write_fit_tsv(std::ostream& out, const Settings& settings, const FitResult& r) {
  write_settings(out, "fit", settings);
  for (const auto& [k, v] : fit_diagnostics(r)) out << "# " << k << '=' << v << '\n';
  out << "coef\tPE\tSE\tlower\tupper\n";
  for (std::size_t j = 0; j < r.names.size(); ++j) {
    const auto k = static_cast<Eigen::Index>(j);
    out << r.names[j] << '\t' << format_double(r.beta(k)) << '\t'
        << format_double(r.covariance.se(k)) << '\t' << format_double(r.ci[j].first) << '\t'
        << format_double(r.ci[j].second) << '\n';
  }
}

inline void write_fit_json(std::ostream& out, const Settings& settings, const FitResult& r) {
  nlohmann::ordered_json j;
  j["command"] = "fit";
  j["settings"] = settings_json(settings);
  const auto& d = r.diagnostics;
  j["diagnostics"] = {{"n", d.n},
                      {"n_effective", d.n_effective},
                      {"events_beyond_t0", d.events_beyond_t0},
                      {"floored_weights", d.floored_weights},
                      {"iterations", d.iterations},
                      {"converged", d.converged},
                      {"fell_back", d.fell_back},
                      {"method", method_name(d.method)}};
  nlohmann::ordered_json coefs = nlohmann::ordered_json::array();
  for (std::size_t c = 0; c < r.names.size(); ++c) {
    const auto k = static_cast<Eigen::Index>(c);
    coefs.push_back({{"coef", r.names[c]},
                     {"PE", r.beta(k)},
                     {"SE", r.covariance.se(k)},
                     {"lower", r.ci[c].first},
                     {"upper", r.ci[c].second}});
  }
  j["coefficients"] = std::move(coefs);
  out << j.dump(2) << '\n';
}

inline void write_simulate_tsv(std::ostream& out, const Settings& settings, const SimSummary& s) {
  write_settings(out, "simulate", settings);
  out << "# censor_c=" << format_double(s.censor_c) << '\n';
  out << "# achieved_censoring=" << format_double(s.achieved_censoring) << '\n';
  write_summary_tsv(out, s);
}

inline void write_simulate_json(std::ostream& out, const Settings& settings, const SimSummary& s) {
  nlohmann::ordered_json j;
  j["command"] = "simulate";
  j["settings"] = settings_json(settings);
  j["censor_c"] = std::isfinite(s.censor_c) ? nlohmann::ordered_json(s.censor_c) : nullptr;
  j["achieved_censoring"] = s.achieved_censoring;
  nlohmann::ordered_json cells = nlohmann::ordered_json::array();
  for (const auto& c : s.cells) {
    nlohmann::ordered_json e{{"t0", c.t0}, {"cens", s.scenario.censor_target}, {"coef", c.name},
                             {"truth", c.truth}};
    if (c.unidentifiable) {
      e["PE"] = e["ESE"] = e["SD"] = e["CP"] = nullptr;
    } else {
      e["PE"] = c.pe;
      e["ESE"] = c.ese;
      e["SD"] = c.sd ? nlohmann::ordered_json(*c.sd) : nullptr;
      e["CP"] = c.cp;
    }
    e["n_used"] = c.n_used;
    e["n_failed"] = c.n_failed;
    e["unidentifiable"] = c.unidentifiable;
    cells.push_back(std::move(e));
  }
  j["cells"] = std::move(cells);
  out << j.dump(2) << '\n';
}

/// Per-replicate pairs (successful fits only) with the per-cell summary as
/// comment lines.
inline void write_compare_tsv(std::ostream& out, const Settings& settings,
                              const CompareSummary& s) {
  write_settings(out, "compare", settings);
  out << "# censor_c=" << format_double(s.censor_c) << '\n';
  for (const auto& c : s.cells) {
    out << "# summary t0=" << format_double(c.t0) << " coef=" << c.name
        << " sd_ns=" << format_double(c.sd_ns) << " sd_is=" << format_double(c.sd_is)
        << " sd_ratio=" << format_double(c.sd_is / c.sd_ns)
        << " correlation=" << format_double(c.correlation) << " slope=" << format_double(c.slope)
        << " n_used=" << c.n_used << " n_failed=" << c.n_failed << '\n';
  }
  out << "replicate\tt0\tb0_ns\tb0_is\tb1_ns\tb1_is\n";
  for (const auto& r : s.records) {
    if (!r.ok) continue;
    out << r.replicate << '\t' << format_double(s.scenario.t0_list[r.t0_index]) << '\t'
        << format_double(r.beta_ns(0)) << '\t' << format_double(r.beta(0)) << '\t'
        << format_double(r.beta_ns(1)) << '\t' << format_double(r.beta(1)) << '\n';
  }
}

inline void write_compare_json(std::ostream& out, const Settings& settings,
                               const CompareSummary& s) {
  nlohmann::ordered_json j;
  j["command"] = "compare";
  j["settings"] = settings_json(settings);
  j["censor_c"] = std::isfinite(s.censor_c) ? nlohmann::ordered_json(s.censor_c) : nullptr;
  nlohmann::ordered_json cells = nlohmann::ordered_json::array();
  for (const auto& c : s.cells)
    cells.push_back({{"t0", c.t0}, {"coef", c.name}, {"truth", c.truth}, {"mean_ns", c.mean_ns},
                     {"mean_is", c.mean_is}, {"sd_ns", c.sd_ns}, {"sd_is", c.sd_is},
                     {"correlation", c.correlation}, {"slope", c.slope}, {"n_used", c.n_used},
                     {"n_failed", c.n_failed}});
  j["summary"] = std::move(cells);
  nlohmann::ordered_json pairs = nlohmann::ordered_json::array();
  for (const auto& r : s.records) {
    if (!r.ok) continue;
    pairs.push_back({{"replicate", r.replicate}, {"t0", s.scenario.t0_list[r.t0_index]},
                     {"b0_ns", r.beta_ns(0)}, {"b0_is", r.beta(0)}, {"b1_ns", r.beta_ns(1)},
                     {"b1_is", r.beta(1)}});
  }
  j["pairs"] = std::move(pairs);
  out << j.dump(2) << '\n';
}

}  // namespace isqr::io
