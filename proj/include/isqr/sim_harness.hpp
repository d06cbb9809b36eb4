#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <thread>
#include <tuple>
#include <utility>
#include <vector>

#include "isqr/fit.hpp"
#include "isqr/rng.hpp"

namespace isqr {

enum class CovariateLaw { Bernoulli, Uniform };

/// Weibull design: S(t | x) = exp{-(rho(x) t)^kappa}, with rho(x) chosen so
/// that the tau-th quantile of T at t0 = 0 is exp(beta0_base + beta1_base x).
/// Censoring C ~ Uniform(0, c) with c calibrated to censor_target.
struct SimScenario {
  int n = 200;
  double tau = 0.5;
  std::vector<double> t0_list{0.0};
  double kappa = 2.0;
  double beta0_base = std::log(5.0);
  double beta1_base = 0.0;
  double censor_target = 0.0;
  CovariateLaw covariate_law = CovariateLaw::Bernoulli;
  int reps = 500;
  std::uint64_t seed = 1;

  void validate() const {
    if (n < 2) fail(ErrorKind::InvalidArgument, "n must be at least 2");
    if (!(tau > 0.0 && tau < 1.0)) fail(ErrorKind::InvalidArgument, "tau must lie in (0, 1)");
    if (t0_list.empty()) fail(ErrorKind::InvalidArgument, "t0_list is empty");
    for (double t : t0_list)
      if (!(t >= 0.0)) fail(ErrorKind::InvalidArgument, "t0 values must be >= 0");
    if (!(kappa > 0.0)) fail(ErrorKind::InvalidArgument, "kappa must be positive");
    if (!(censor_target >= 0.0 && censor_target <= 0.95))
      fail(ErrorKind::InvalidArgument, "censor_target must lie in [0, 0.95]");
    if (reps < 1) fail(ErrorKind::InvalidArgument, "reps must be >= 1");
  }
};

/// Weibull rate whose tau-quantile equals exp(target_quantile_log).
inline double solve_weibull_rate(double tau, double kappa, double target_quantile_log) {
  return std::pow(-std::log1p(-tau), 1.0 / kappa) / std::exp(target_quantile_log);
}

namespace detail {

// log of the tau-th quantile of residual life T - t0 given T > t0.
inline double log_residual_quantile(double tau, double kappa, double rho, double t0) {
  const double q = std::pow(std::pow(rho * t0, kappa) - std::log1p(-tau), 1.0 / kappa) / rho - t0;
  if (!(q > 0.0))
    fail(ErrorKind::NonPositiveResidualQuantile, "residual quantile is not positive");
  return std::log(q);
}

}  // namespace detail

/// True (intercept, slope) at follow-up t0 for the two-group design.
inline std::pair<double, double> true_coefficients(double tau, double kappa, double rho0,
                                                   double rho1, double t0) {
  const double b0 = detail::log_residual_quantile(tau, kappa, rho0, t0);
  const double b1 = detail::log_residual_quantile(tau, kappa, rho1, t0) - b0;
  return {b0, b1};
}

inline std::pair<double, double> true_coefficients(const SimScenario& sc, double t0) {
  return true_coefficients(sc.tau, sc.kappa, solve_weibull_rate(sc.tau, sc.kappa, sc.beta0_base),
                           solve_weibull_rate(sc.tau, sc.kappa, sc.beta0_base + sc.beta1_base),
                           t0);
}

inline double scenario_rate(const SimScenario& sc, double x) {
  return solve_weibull_rate(sc.tau, sc.kappa, sc.beta0_base + sc.beta1_base * x);
}

/// Adaptive Simpson quadrature.
template <class F>
double adaptive_simpson(F&& f, double a, double b, double abs_tol, int max_depth = 40) {
  struct Rec {
    static double run(F& f, double a, double b, double fa, double fm, double fb, double whole,
                      double tol, int depth) {
      const double m = 0.5 * (a + b);
      const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
      const double flm = f(lm), frm = f(rm);
      const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
      const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
      const double diff = left + right - whole;
      if (depth <= 0 || std::abs(diff) <= 15.0 * tol) return left + right + diff / 15.0;
      return run(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
             run(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
    }
  };
  const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return Rec::run(f, a, b, fa, fm, fb, whole, abs_tol, max_depth);
}

/// Marginal survival of T, mixing over the covariate law.
inline double mixture_survival(const SimScenario& sc, double u) {
  auto s = [&](double x) { return std::exp(-std::pow(scenario_rate(sc, x) * u, sc.kappa)); };
  if (sc.covariate_law == CovariateLaw::Bernoulli) return 0.5 * (s(0.0) + s(1.0));
  return adaptive_simpson(s, 0.0, 1.0, 1e-11);
}

/// P(C < T) for C ~ Uniform(0, c).
inline double censoring_probability(const SimScenario& sc, double c) {
  auto f = [&](double u) { return mixture_survival(sc, u); };
  return adaptive_simpson(f, 0.0, c, 1e-8 * std::max(1.0, c)) / c;
}

/// Upper limit c of the uniform censoring law that yields censor_target.
/// Returns +infinity (no censoring) for a zero target.
inline double calibrate_censoring(const SimScenario& sc) {
  if (sc.censor_target == 0.0) return std::numeric_limits<double>::infinity();
  if (!(sc.censor_target > 0.0 && sc.censor_target < 1.0))
    fail(ErrorKind::TargetUnreachable, "censoring target must lie in (0, 1)");
  // P(C < T) falls from 1 (c -> 0) to 0 (c -> infinity).
  double lo = 1e-6, hi = 1.0;
  while (censoring_probability(sc, hi) > sc.censor_target) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e12) fail(ErrorKind::TargetUnreachable, "no c reaches the censoring target");
  }
  while (hi - lo > 1e-6 * hi) {
    const double mid = 0.5 * (lo + hi);
    (censoring_probability(sc, mid) > sc.censor_target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

/// One simulated dataset; every draw is keyed by (seed, replicate, subject, purpose).
inline SurvivalSample generate_dataset(const SimScenario& sc, std::uint64_t replicate,
                                       double censor_c) {
  SurvivalSample out;
  out.intercept = true;
  out.covariate_names = {"x"};
  out.subjects.reserve(static_cast<std::size_t>(sc.n));
  for (int i = 0; i < sc.n; ++i) {
    const auto id = static_cast<std::uint64_t>(i);
    const double ux = rng::uniform(rng::hash(sc.seed, {rng::kCovariate, replicate, id}));
    const double x = sc.covariate_law == CovariateLaw::Bernoulli ? (ux < 0.5 ? 1.0 : 0.0) : ux;
    const double e = rng::exponential(rng::hash(sc.seed, {rng::kEventTime, replicate, id}));
    const double t = std::pow(e, 1.0 / sc.kappa) / scenario_rate(sc, x);
    double c = std::numeric_limits<double>::infinity();
    if (std::isfinite(censor_c))
      c = censor_c * rng::uniform(rng::hash(sc.seed, {rng::kCensorTime, replicate, id}));
    Subject s;
    s.time = std::min(t, c);
    s.status = t <= c ? 1 : 0;
    s.covariates = {x};
    out.subjects.push_back(std::move(s));
  }
  return out;
}

inline SurvivalSample generate_dataset(const SimScenario& sc, std::uint64_t replicate) {
  return generate_dataset(sc, replicate, calibrate_censoring(sc));
}

/// Worker count: explicit request, else ISQR_THREADS, else hardware concurrency.
inline unsigned resolve_threads(unsigned requested = 0) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("ISQR_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0) return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

inline void parallel_for(std::size_t count, unsigned threads,
                         const std::function<void(std::size_t)>& body) {
  threads = std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(count, 1)));
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < threads; ++t)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) body(i);
    });
  for (auto& th : pool) th.join();
}

struct ReplicateRecord {
  std::uint64_t replicate = 0;
  std::size_t t0_index = 0;
  bool ok = false;
  std::string failure;  // error kind when !ok
  Vector beta;
  Vector se;
  std::vector<bool> covered;
  Vector beta_ns;       // filled by compare_estimators
  double censored_fraction = 0.0;
};

struct SimCell {
  double t0 = 0.0;
  std::size_t coef = 0;
  std::string name;
  double truth = 0.0;
  double pe = 0.0;
  double ese = 0.0;
  std::optional<double> sd;  // undefined with fewer than two usable replicates
  double cp = 0.0;
  int n_used = 0;
  int n_failed = 0;
  bool unidentifiable = false;
};

struct SimSummary {
  SimScenario scenario;
  double censor_c = 0.0;
  double achieved_censoring = 0.0;
  std::vector<SimCell> cells;
  std::vector<ReplicateRecord> records;  // sorted by (replicate, t0_index)
};

namespace detail {

inline const std::vector<std::string>& sim_coef_names() {
  static const std::vector<std::string> names{"(Intercept)", "x"};
  return names;
}

inline std::uint64_t replicate_fit_seed(const FitSpec& spec, const SimScenario& sc,
                                        std::uint64_t rep, std::size_t t0_index) {
  return rng::hash(spec.seed, {rng::kReplicateSeed, sc.seed, rep, t0_index});
}

inline double sample_sd(const std::vector<double>& v) {
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

// Runs `per_rep` for every replicate and gathers the records in a fixed order.
template <class PerRep>
std::vector<ReplicateRecord> collect(const SimScenario& sc, unsigned threads, PerRep&& per_rep) {
  std::vector<std::vector<ReplicateRecord>> slots(static_cast<std::size_t>(sc.reps));
  parallel_for(slots.size(), resolve_threads(threads),
               [&](std::size_t r) { slots[r] = per_rep(static_cast<std::uint64_t>(r)); });
  std::vector<ReplicateRecord> out;
  for (auto& s : slots)
    for (auto& rec : s) out.push_back(std::move(rec));
  std::sort(out.begin(), out.end(), [](const ReplicateRecord& a, const ReplicateRecord& b) {
    return std::tie(a.replicate, a.t0_index) < std::tie(b.replicate, b.t0_index);
  });
  return out;
}

inline double censored_fraction(const SurvivalSample& s) {
  double c = 0.0;
  for (const auto& sub : s.subjects) c += sub.status == 0 ? 1.0 : 0.0;
  return c / static_cast<double>(s.size());
}

}  // namespace detail

/// Monte Carlo study of the smoothed estimator over every t0 in the scenario.
/// Failed replicates (unidentifiable, non-convergent, ...) are counted, never fatal.
inline SimSummary run_monte_carlo(const SimScenario& sc, const FitSpec& spec,
                                  unsigned threads = 0, double level = 0.95) {
  sc.validate();
  FitSpec base = spec;
  base.tau = sc.tau;
  base.validate();

  SimSummary out;
  out.scenario = sc;
  out.censor_c = calibrate_censoring(sc);

  out.records = detail::collect(sc, threads, [&](std::uint64_t rep) {
    const SurvivalSample data = generate_dataset(sc, rep, out.censor_c);
    std::vector<ReplicateRecord> recs;
    for (std::size_t j = 0; j < sc.t0_list.size(); ++j) {
      ReplicateRecord rec;
      rec.replicate = rep;
      rec.t0_index = j;
      rec.censored_fraction = detail::censored_fraction(data);
      FitSpec fs = base;
      fs.t0 = sc.t0_list[j];
      fs.seed = detail::replicate_fit_seed(spec, sc, rep, j);
      try {
        const FitResult fit = fit_model(fs, data, level);
        const auto truth = true_coefficients(sc, fs.t0);
        const double tv[2] = {truth.first, truth.second};
        rec.beta = fit.beta;
        rec.se = fit.covariance.se;
        for (Eigen::Index k = 0; k < fit.beta.size(); ++k) {
          const auto& ci = fit.ci[static_cast<std::size_t>(k)];
          rec.covered.push_back(ci.first <= tv[k] && tv[k] <= ci.second);
        }
        rec.ok = rec.beta.allFinite() && rec.se.allFinite();
        if (!rec.ok) rec.failure = "NonFiniteValue";
      } catch (const Error& e) {
        rec.failure = std::string(to_string(e.kind()));
      }
      recs.push_back(std::move(rec));
    }
    return recs;
  });

  double cens = 0.0;
  for (const auto& r : out.records)
    if (r.t0_index == 0) cens += r.censored_fraction;
  out.achieved_censoring = cens / static_cast<double>(sc.reps);

  for (std::size_t j = 0; j < sc.t0_list.size(); ++j) {
    const auto truth = true_coefficients(sc, sc.t0_list[j]);
    const double tv[2] = {truth.first, truth.second};
    for (std::size_t k = 0; k < 2; ++k) {
      SimCell cell;
      cell.t0 = sc.t0_list[j];
      cell.coef = k;
      cell.name = detail::sim_coef_names()[k];
      cell.truth = tv[k];
      std::vector<double> est;
      double se_sum = 0.0, cover = 0.0;
      for (const auto& r : out.records) {
        if (r.t0_index != j) continue;
        if (!r.ok) { ++cell.n_failed; continue; }
        est.push_back(r.beta(static_cast<Eigen::Index>(k)));
        se_sum += r.se(static_cast<Eigen::Index>(k));
        cover += r.covered[k] ? 1.0 : 0.0;
      }
      cell.n_used = static_cast<int>(est.size());
      if (!est.empty()) {
        double s = 0.0;
        for (double e : est) s += e;
        cell.pe = s / static_cast<double>(est.size());
        cell.ese = se_sum / static_cast<double>(est.size());
        cell.cp = cover / static_cast<double>(est.size());
      }
      if (est.size() >= 2) cell.sd = detail::sample_sd(est);
      cell.unidentifiable = cell.n_failed > 0.2 * sc.reps || est.empty();
      out.cells.push_back(std::move(cell));
    }
  }
  return out;
}

struct CompareCell {
  double t0 = 0.0;
  std::size_t coef = 0;
  std::string name;
  double truth = 0.0;
  double mean_ns = 0.0, mean_is = 0.0;
  double sd_ns = 0.0, sd_is = 0.0;
  double correlation = 0.0;
  double slope = 0.0;  // least-squares slope of IS on NS
  int n_used = 0;
  int n_failed = 0;
};

struct CompareSummary {
  SimScenario scenario;
  double censor_c = 0.0;
  std::vector<CompareCell> cells;
  std::vector<ReplicateRecord> records;  // ok records carry beta_ns and beta (smoothed)
};

/// Paired non-smooth and smoothed (H = I/n) estimates per replicate and t0.
inline CompareSummary compare_estimators(const SimScenario& sc, const FitSpec& spec,
                                         unsigned threads = 0) {
  sc.validate();
  FitSpec base = spec;
  base.tau = sc.tau;
  base.validate();

  CompareSummary out;
  out.scenario = sc;
  out.censor_c = calibrate_censoring(sc);
  out.records = detail::collect(sc, threads, [&](std::uint64_t rep) {
    const SurvivalSample data = generate_dataset(sc, rep, out.censor_c);
    const StepSurvival g = fit_censoring_km(data);
    std::vector<ReplicateRecord> recs;
    for (std::size_t j = 0; j < sc.t0_list.size(); ++j) {
      ReplicateRecord rec;
      rec.replicate = rep;
      rec.t0_index = j;
      rec.censored_fraction = detail::censored_fraction(data);
      FitSpec fs = base;
      fs.t0 = sc.t0_list[j];
      try {
        const ScoreContext ctx = make_score_context(data, fs, g);
        const SolveReport ns = fit_nonsmooth(fs, ctx);
        const SolveReport is = require_converged(fit_smoothed(
            fs, ctx, SmoothingMatrix::identity(ctx.dim(), data.size()), ns.beta_hat));
        rec.beta_ns = ns.beta_hat;
        rec.beta = is.beta_hat;
        rec.ok = rec.beta.allFinite();
        if (!rec.ok) rec.failure = "NonFiniteValue";
      } catch (const Error& e) {
        rec.failure = std::string(to_string(e.kind()));
      }
      recs.push_back(std::move(rec));
    }
    return recs;
  });

  for (std::size_t j = 0; j < sc.t0_list.size(); ++j) {
    const auto truth = true_coefficients(sc, sc.t0_list[j]);
    for (std::size_t k = 0; k < 2; ++k) {
      CompareCell cell;
      cell.t0 = sc.t0_list[j];
      cell.coef = k;
      cell.name = detail::sim_coef_names()[k];
      cell.truth = k == 0 ? truth.first : truth.second;
      std::vector<double> a, b;
      for (const auto& r : out.records) {
        if (r.t0_index != j) continue;
        if (!r.ok) { ++cell.n_failed; continue; }
        a.push_back(r.beta_ns(static_cast<Eigen::Index>(k)));
        b.push_back(r.beta(static_cast<Eigen::Index>(k)));
      }
      cell.n_used = static_cast<int>(a.size());
      if (a.size() >= 2) {
        const double m = static_cast<double>(a.size());
        double ma = 0, mb = 0;
        for (std::size_t i = 0; i < a.size(); ++i) { ma += a[i]; mb += b[i]; }
        ma /= m;
        mb /= m;
        double saa = 0, sbb = 0, sab = 0;
        for (std::size_t i = 0; i < a.size(); ++i) {
          saa += (a[i] - ma) * (a[i] - ma);
          sbb += (b[i] - mb) * (b[i] - mb);
          sab += (a[i] - ma) * (b[i] - mb);
        }
        cell.mean_ns = ma;
        cell.mean_is = mb;
        cell.sd_ns = std::sqrt(saa / (m - 1));
        cell.sd_is = std::sqrt(sbb / (m - 1));
        cell.correlation = sab / std::sqrt(saa * sbb);
        cell.slope = sab / saa;
      }
      out.cells.push_back(std::move(cell));
    }
  }
  return out;
}

}  // namespace isqr
