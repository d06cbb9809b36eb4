#pragma once

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "isqr/fit.hpp"
#include "isqr/io.hpp"
#include "isqr/sim_harness.hpp"

namespace isqr::cli {

enum ExitCode : int { kOk = 0, kUsage = 2, kUnidentifiable = 3, kNumerical = 4 };

inline int exit_code(ErrorKind k) {
  switch (k) {
    case ErrorKind::Unidentifiable:
    case ErrorKind::EmptyRiskSet:
      return kUnidentifiable;
    case ErrorKind::MaxIterExceeded:
    case ErrorKind::SingularSlope:
    case ErrorKind::NonPositiveDefiniteSigma:
    case ErrorKind::DegenerateResamples:
      return kNumerical;
    default:
      return kUsage;
  }
}

struct CliConfig {
  std::string subcommand;
  std::string input;
  std::string output;  // empty: stdout
  std::string format = "tsv";
  std::string config;
  std::string emit_data;
  unsigned threads = 0;
  double level = 0.95;
  bool no_intercept = false;
  FitSpec spec;
  SimScenario scenario;
};

namespace detail {

inline const char* config_help() {
  return "Scenario file keys (key = value, '#' comments):\n"
         "  n              sample size\n"
         "  tau            quantile level\n"
         "  t0_list        comma-separated follow-up times\n"
         "  kappa          Weibull shape\n"
         "  beta0_base     log tau-quantile at t0 = 0 for x = 0\n"
         "  beta1_base     covariate effect at t0 = 0\n"
         "  censor_target  censoring proportion in [0, 0.95]\n"
         "  covariate_law  bernoulli | uniform\n"
         "  reps           Monte Carlo replicates\n"
         "  seed           data-generation seed\n"
         "Flags given on the command line override the file.\n"
         "Environment: ISQR_THREADS sets the default worker count.\n";
}

inline std::string join(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + io::format_double(v[i]);
  return s;
}

inline io::Settings fit_settings(const CliConfig& c) {
  const FitSpec& f = c.spec;
  return {{"input", c.input},
          {"tau", io::format_double(f.tau)},
          {"t0", io::format_double(f.t0)},
          {"weighting", f.weighting == Weighting::Li ? "li" : "kim"},
          {"h_policy", f.h_policy == HPolicy::FixedIdentity ? "fixed" : "iterative"},
          {"resamples", std::to_string(f.resample_m)},
          {"seed", std::to_string(f.seed)},
          {"level", io::format_double(c.level)},
          {"max_iter", std::to_string(f.max_iter)},
          {"tol", io::format_double(f.tol)},
          {"big_m", io::format_double(f.big_m)},
          {"g_floor", io::format_double(f.g_floor)},
          {"intercept", c.no_intercept ? "false" : "true"}};
}

inline io::Settings sim_settings(const CliConfig& c) {
  const SimScenario& s = c.scenario;
  const FitSpec& f = c.spec;
  return {{"n", std::to_string(s.n)},
          {"tau", io::format_double(s.tau)},
          {"t0_list", join(s.t0_list)},
          {"kappa", io::format_double(s.kappa)},
          {"beta0_base", io::format_double(s.beta0_base)},
          {"beta1_base", io::format_double(s.beta1_base)},
          {"censor_target", io::format_double(s.censor_target)},
          {"covariate_law", s.covariate_law == CovariateLaw::Bernoulli ? "bernoulli" : "uniform"},
          {"reps", std::to_string(s.reps)},
          {"seed", std::to_string(s.seed)},
          {"weighting", f.weighting == Weighting::Li ? "li" : "kim"},
          {"h_policy", f.h_policy == HPolicy::FixedIdentity ? "fixed" : "iterative"},
          {"resamples", std::to_string(f.resample_m)},
          {"level", io::format_double(c.level)},
          {"max_iter", std::to_string(f.max_iter)},
          {"tol", io::format_double(f.tol)},
          {"big_m", io::format_double(f.big_m)},
          {"g_floor", io::format_double(f.g_floor)}};
}

template <class Writer>
void emit(const CliConfig& c, std::ostream& out, Writer&& write) {
  if (c.output.empty()) {
    write(out);
    return;
  }
  // Render fully before touching the file so a failure leaves nothing behind.
  std::ostringstream buf;
  write(buf);
  std::ofstream f(c.output, std::ios::binary);
  if (!f) fail(ErrorKind::InvalidArgument, "cannot open output file '" + c.output + "'");
  f << buf.str();
  if (!f) fail(ErrorKind::InvalidArgument, "write to '" + c.output + "' failed");
}

}  // namespace detail

inline int cmd_fit(const CliConfig& c, std::ostream& out) {
  SurvivalSample sample;
  if (c.input.empty() || c.input == "-") {
    sample = io::read_csv(std::cin, !c.no_intercept);
  } else {
    std::ifstream in(c.input, std::ios::binary);
    if (!in) fail(ErrorKind::InvalidArgument, "cannot open input file '" + c.input + "'");
    sample = io::read_csv(in, !c.no_intercept);
  }
  const FitResult r = fit_model(c.spec, sample, c.level);
  const io::Settings settings = detail::fit_settings(c);
  detail::emit(c, out, [&](std::ostream& o) {
    if (c.format == "json") io::write_fit_json(o, settings, r);
    else io::write_fit_tsv(o, settings, r);
  });
  return kOk;
}

inline void emit_datasets(const CliConfig& c) {
  if (c.emit_data.empty()) return;
  const double censor_c = calibrate_censoring(c.scenario);
  std::filesystem::create_directories(c.emit_data);
  const int width = std::max<int>(4, static_cast<int>(std::to_string(c.scenario.reps).size()));
  for (int r = 0; r < c.scenario.reps; ++r) {
    std::ostringstream name;
    name << "rep_" << std::setw(width) << std::setfill('0') << r << ".csv";
    std::ofstream f(std::filesystem::path(c.emit_data) / name.str(), std::ios::binary);
    if (!f) fail(ErrorKind::InvalidArgument, "cannot write into '" + c.emit_data + "'");
    io::write_csv(f, generate_dataset(c.scenario, static_cast<std::uint64_t>(r), censor_c));
  }
}

inline int cmd_simulate(const CliConfig& c, std::ostream& out) {
  const SimSummary s = run_monte_carlo(c.scenario, c.spec, c.threads, c.level);
  const io::Settings settings = detail::sim_settings(c);
  detail::emit(c, out, [&](std::ostream& o) {
    if (c.format == "json") io::write_simulate_json(o, settings, s);
    else io::write_simulate_tsv(o, settings, s);
  });
  emit_datasets(c);
  return kOk;
}

inline int cmd_compare(const CliConfig& c, std::ostream& out) {
  const CompareSummary s = compare_estimators(c.scenario, c.spec, c.threads);
  const io::Settings settings = detail::sim_settings(c);
  detail::emit(c, out, [&](std::ostream& o) {
    if (c.format == "json") io::write_compare_json(o, settings, s);
    else io::write_compare_tsv(o, settings, s);
  });
  emit_datasets(c);
  return kOk;
}

/// Entry point shared by the executable and the tests.
inline int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CliConfig c;
  CLI::App app{"Smoothed quantile regression for censored residual lifetimes", "isqr"};
  app.require_subcommand(1, 1);
  app.footer(detail::config_help());

  const std::map<std::string, Weighting> weightings{{"li", Weighting::Li}, {"kim", Weighting::Kim}};
  const std::map<std::string, HPolicy> policies{{"fixed", HPolicy::FixedIdentity},
                                                {"iterative", HPolicy::Iterative}};
  const std::map<std::string, CovariateLaw> laws{{"bernoulli", CovariateLaw::Bernoulli},
                                                 {"uniform", CovariateLaw::Uniform}};

  // Shared fit options; simulation commands take the scenario's tau and seed instead.
  auto add_fit_flags = [&](CLI::App* sub) {
    sub->add_option("--weighting", c.spec.weighting, "IPCW scheme: li | kim")
        ->transform(CLI::CheckedTransformer(weightings, CLI::ignore_case))
        ->capture_default_str();
    sub->add_option("--h-policy", c.spec.h_policy, "smoothing matrix: fixed | iterative")
        ->transform(CLI::CheckedTransformer(policies, CLI::ignore_case));
    sub->add_option("--resamples", c.spec.resample_m, "multiplier resamples")->capture_default_str();
    sub->add_option("--level", c.level, "confidence level")->capture_default_str();
    sub->add_option("--max-iter", c.spec.max_iter, "Newton iteration cap")->capture_default_str();
    sub->add_option("--tol", c.spec.tol, "convergence tolerance")->capture_default_str();
    sub->add_option("--big-m", c.spec.big_m, "pseudo-observation response")->capture_default_str();
    sub->add_option("--g-floor", c.spec.g_floor, "floor on the censoring survival")
        ->capture_default_str();
    sub->add_option("--format", c.format, "tsv | json")
        ->check(CLI::IsMember({"tsv", "json"}))
        ->capture_default_str();
    sub->add_option("-o,--output", c.output, "output file (default stdout)");
  };

  CLI::App* fit = app.add_subcommand("fit", "fit a model to a CSV file (time,status,covariates)");
  fit->add_option("input", c.input, "CSV path, '-' for stdin")->required();
  fit->add_option("--tau", c.spec.tau, "quantile level")->capture_default_str();
  fit->add_option("--t0", c.spec.t0, "follow-up time")->capture_default_str();
  fit->add_option("--seed", c.spec.seed, "resampling seed")->capture_default_str();
  fit->add_flag("--no-intercept", c.no_intercept, "omit the intercept column");
  add_fit_flags(fit);

  // Scenario flags are applied on top of an optional --config file.
  struct ScenarioFlags {
    int n = 0, reps = 0;
    double tau = 0, kappa = 0, beta0 = 0, beta1 = 0, censor = 0;
    std::vector<double> t0;
    CovariateLaw law = CovariateLaw::Bernoulli;
    std::uint64_t seed = 0;
  } sf;
  std::vector<std::pair<CLI::Option*, std::function<void()>>> overrides;
  auto add_sim_flags = [&](CLI::App* sub) {
    const SimScenario d;
    auto track = [&](CLI::Option* o, std::function<void()> apply) {
      overrides.emplace_back(o, std::move(apply));
    };
    track(sub->add_option("--n", sf.n, "sample size")->default_val(d.n),
          [&] { c.scenario.n = sf.n; });
    track(sub->add_option("--tau", sf.tau, "quantile level")->default_val(d.tau),
          [&] { c.scenario.tau = sf.tau; });
    track(sub->add_option("--t0", sf.t0, "follow-up times (repeat or comma-separate)")
              ->delimiter(',')
              ->default_str("0"),
          [&] { c.scenario.t0_list = sf.t0; });
    track(sub->add_option("--kappa", sf.kappa, "Weibull shape")->default_val(d.kappa),
          [&] { c.scenario.kappa = sf.kappa; });
    track(sub->add_option("--beta0", sf.beta0, "log quantile at t0 = 0, x = 0")
              ->default_val(d.beta0_base),
          [&] { c.scenario.beta0_base = sf.beta0; });
    track(sub->add_option("--beta1", sf.beta1, "covariate effect at t0 = 0")
              ->default_val(d.beta1_base),
          [&] { c.scenario.beta1_base = sf.beta1; });
    track(sub->add_option("--censor", sf.censor, "censoring proportion")
              ->default_val(d.censor_target),
          [&] { c.scenario.censor_target = sf.censor; });
    track(sub->add_option("--covariate", sf.law, "covariate law: bernoulli | uniform")
              ->transform(CLI::CheckedTransformer(laws, CLI::ignore_case))
              ->default_str("bernoulli"),
          [&] { c.scenario.covariate_law = sf.law; });
    track(sub->add_option("--reps", sf.reps, "replicates")->default_val(d.reps),
          [&] { c.scenario.reps = sf.reps; });
    track(sub->add_option("--seed", sf.seed, "data-generation seed")->default_val(d.seed),
          [&] { c.scenario.seed = sf.seed; });
    sub->add_option("--config", c.config, "scenario file")->check(CLI::ExistingFile);
    sub->add_option("--emit-data", c.emit_data, "write each replicate's data as CSV into DIR");
    sub->add_option("--threads", c.threads, "worker threads (default ISQR_THREADS or all cores)");
    add_fit_flags(sub);
  };
  CLI::App* sim = app.add_subcommand("simulate", "Monte Carlo study of the smoothed estimator");
  add_sim_flags(sim);
  CLI::App* cmp = app.add_subcommand("compare", "paired non-smooth and smoothed estimates");
  add_sim_flags(cmp);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (fit->parsed()) return cmd_fit(c, out);
    if (!c.config.empty()) {
      std::ifstream in(c.config);
      c.scenario = io::parse_scenario_config(in, c.scenario);
    }
    for (auto& [opt, apply] : overrides)
      if (opt->count() > 0) apply();
    c.scenario.validate();
    if (sim->parsed()) return cmd_simulate(c, out);
    return cmd_compare(c, out);
  } catch (const Error& e) {
    err << "isqr: " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    err << "isqr: " << e.what() << '\n';
    return kUsage;
  }
}

}  // namespace isqr::cli
