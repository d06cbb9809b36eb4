#pragma once

#include <string>
#include <utility>
#include <vector>

#include "isqr/solver.hpp"

namespace isqr {

struct FitDiagnostics {
  std::size_t n = 0;
  std::size_t n_effective = 0;
  std::size_t events_beyond_t0 = 0;
  std::size_t floored_weights = 0;
  int iterations = 0;
  bool converged = false;
  bool fell_back = false;
  SolveMethod method = SolveMethod::SmoothedFixedH;
};

struct FitResult {
  std::vector<std::string> names;
  Vector beta;
  CovarianceResult covariance;
  std::vector<std::pair<double, double>> ci;
  double level = 0.95;
  FitDiagnostics diagnostics;
};

/// Point estimate, sandwich covariance and Wald intervals for one (tau, t0).
inline FitResult fit_model(const FitSpec& spec, const SurvivalSample& sample, double level = 0.95) {
  spec.validate();
  validate_sample(sample);
  const StepSurvival g = fit_censoring_km(sample);
  const ScoreContext ctx = make_score_context(sample, spec, g);

  FitResult out;
  out.names = coefficient_names(sample);
  out.level = level;
  out.diagnostics.n = sample.size();
  out.diagnostics.n_effective = ctx.effective.size();
  out.diagnostics.events_beyond_t0 = ctx.events;
  out.diagnostics.floored_weights = ctx.floored_weights;

  if (spec.h_policy == HPolicy::FixedIdentity) {
    const SolveReport ns = fit_nonsmooth(spec, ctx);
    const SmoothingMatrix h = SmoothingMatrix::identity(ctx.dim(), sample.size());
    const SolveReport rep = require_converged(fit_smoothed(spec, ctx, h, ns.beta_hat));
    out.beta = rep.beta_hat;
    out.covariance = covariance_at(rep.beta_hat, spec, sample, ctx, h);
    out.diagnostics.iterations = rep.iterations;
    out.diagnostics.converged = rep.converged;
    out.diagnostics.method = rep.method;
  } else {
    IterativeFit it = fit_iterative(spec, sample);
    require_converged(it.report);
    out.beta = it.report.beta_hat;
    out.covariance = std::move(it.covariance);
    out.diagnostics.iterations = it.report.iterations;
    out.diagnostics.converged = it.report.converged;
    out.diagnostics.fell_back = it.fell_back;
    out.diagnostics.method = it.report.method;
  }
  out.ci = wald_ci(out.beta, out.covariance.var_beta, level);
  return out;
}

}  // namespace isqr
