#pragma once

#include <cmath>
#include <optional>
#include <utility>

#include "isqr/censoring_km.hpp"
#include "isqr/estimating.hpp"
#include "isqr/inference.hpp"
#include "isqr/lp.hpp"

namespace isqr {

enum class SolveMethod { NonSmoothLP, SmoothedFixedH, SmoothedIterative };

struct SolveReport {
  Vector beta_hat;
  int iterations = 0;
  bool converged = false;
  double final_score_norm = 0.0;  // max-abs smoothed score (Newton paths) or 0 (LP)
  SolveMethod method = SolveMethod::NonSmoothLP;
  int damped_steps = 0;           // Newton steps that needed halving
  int pseudo_inverse_steps = 0;
  double objective = 0.0;         // L1 objective at the solution (LP path)
};

inline const SolveReport& require_converged(const SolveReport& report) {
  if (!report.converged)
    fail(ErrorKind::MaxIterExceeded,
         "no convergence after " + std::to_string(report.iterations) + " iterations");
  return report;
}

namespace detail {

inline void require_identifiable(const ScoreContext& ctx) {
  if (ctx.events < static_cast<std::size_t>(ctx.dim()))
    fail(ErrorKind::Unidentifiable, "only " + std::to_string(ctx.events) +
                                        " events beyond t0 for " + std::to_string(ctx.dim()) +
                                        " coefficients");
}

}  // namespace detail

/// Data rows carry weight w_i on both sides; the two pseudo-observations sit
/// at response big_m with unit weight.
inline LpProblem build_l1_problem(const ScoreContext& ctx, double big_m) {
  Eigen::Index used = 0;
  for (Eigen::Index i = 0; i < ctx.w.size(); ++i) used += ctx.w(i) > 0.0 ? 1 : 0;
  const Eigen::Index q = ctx.dim();
  LpProblem lp;
  lp.a.resize(used + 2, q);
  lp.b.resize(used + 2);
  lp.cost_pos.resize(used + 2);
  Eigen::Index r = 0;
  for (Eigen::Index i = 0; i < ctx.w.size(); ++i) {
    if (!(ctx.w(i) > 0.0)) continue;
    lp.a.row(r) = ctx.rows.row(i);
    lp.b(r) = ctx.y(i);
    lp.cost_pos(r) = ctx.w(i);
    ++r;
  }
  const auto [first, second] = pseudo_directions(ctx);
  lp.a.row(r) = first.transpose();
  lp.a.row(r + 1) = second.transpose();
  lp.b(r) = lp.b(r + 1) = big_m;
  lp.cost_pos(r) = lp.cost_pos(r + 1) = 1.0;
  lp.cost_neg = lp.cost_pos;
  return lp;
}

namespace detail {

// A pseudo-observation that is interpolated (or overshot) means the data
// alone do not bound the solution at this big_m.
inline bool pseudo_rows_bind(const LpProblem& lp, const LpSolution& sol, double big_m) {
  for (Eigen::Index r = lp.a.rows() - 2; r < lp.a.rows(); ++r)
    if (big_m - lp.a.row(r).dot(sol.beta) <= 1e-6 * big_m) return true;
  return false;
}

}  // namespace detail

inline SolveReport fit_nonsmooth(const FitSpec& spec, const ScoreContext& ctx) {
  detail::require_identifiable(ctx);
  const LpProblem lp = build_l1_problem(ctx, spec.big_m);
  const LpSolution sol = solve_weighted_l1(lp);

  if (detail::pseudo_rows_bind(lp, sol, spec.big_m)) {
    // Distinguish a too-small constant from a problem with no finite root.
    const double larger = spec.big_m * 1e6;
    const LpProblem wide = build_l1_problem(ctx, larger);
    if (detail::pseudo_rows_bind(wide, solve_weighted_l1(wide), larger))
      fail(ErrorKind::Unidentifiable,
           "L1 solution is pinned by a pseudo-observation: no finite root of the estimating equations");
    fail(ErrorKind::BigMTooSmall, "big_m binds the L1 solution; increase it");
  }

  SolveReport rep;
  rep.beta_hat = sol.beta;
  rep.iterations = sol.iterations;
  rep.converged = true;
  rep.method = SolveMethod::NonSmoothLP;
  rep.objective = sol.objective / static_cast<double>(ctx.n);
  return rep;
}

inline SolveReport fit_nonsmooth(const FitSpec& spec, const SurvivalSample& sample) {
  spec.validate();
  validate_sample(sample);
  const StepSurvival g = fit_censoring_km(sample);
  return fit_nonsmooth(spec, make_score_context(sample, spec, g));
}

struct NewtonOptions {
  int max_iter = 100;
  double tol = 1e-8;
  int max_halvings = 10;
};

struct NewtonResult {
  Vector root;
  int iterations = 0;
  bool converged = false;
  double score_norm = 0.0;
  int damped_steps = 0;
  int pseudo_inverse_steps = 0;
};

/// Newton-Raphson for a smooth score with a supplied Jacobian. Steps that
/// increase the Euclidean score norm are halved; a singular Jacobian gets one
/// pseudo-inverse step, a second one is an error.
template <class ScoreFn, class JacobianFn>
NewtonResult newton_solve(ScoreFn&& score, JacobianFn&& jacobian, Vector init,
                          const NewtonOptions& opt) {
  NewtonResult res;
  res.root = std::move(init);
  Vector u = score(res.root);
  res.score_norm = u.cwiseAbs().maxCoeff();
  if (res.score_norm <= opt.tol) {
    res.converged = true;
    return res;
  }
  while (res.iterations < opt.max_iter) {
    ++res.iterations;
    const Matrix a = jacobian(res.root);
    Eigen::FullPivLU<Matrix> lu(a);
    lu.setThreshold(1e-12);
    Vector step;
    if (lu.isInvertible()) {
      step = lu.solve(u);
    } else {
      if (res.pseudo_inverse_steps > 0)
        fail(ErrorKind::SingularSlope, "slope matrix singular on repeated Newton steps");
      ++res.pseudo_inverse_steps;
      step = a.completeOrthogonalDecomposition().solve(u);
    }
    if (!step.allFinite()) fail(ErrorKind::SingularSlope, "non-finite Newton step");

    Vector next = res.root - step;
    Vector u_next = score(next);
    int halvings = 0;
    while (u_next.norm() > u.norm() && halvings < opt.max_halvings) {
      step *= 0.5;
      next = res.root - step;
      u_next = score(next);
      ++halvings;
    }
    if (halvings > 0) ++res.damped_steps;

    const double change = step.cwiseAbs().maxCoeff();
    res.root = std::move(next);
    u = std::move(u_next);
    res.score_norm = u.cwiseAbs().maxCoeff();
    if (res.score_norm <= opt.tol || (change <= opt.tol && res.score_norm <= 10.0 * opt.tol)) {
      res.converged = true;
      break;
    }
  }
  return res;
}

inline SolveReport fit_smoothed(const FitSpec& spec, const ScoreContext& ctx,
                                const SmoothingMatrix& h, const Vector& init) {
  detail::require_identifiable(ctx);
  if (!init.allFinite()) fail(ErrorKind::NonFiniteValue, "initial value must be finite");
  const NewtonResult nr = newton_solve(
      [&](const Vector& b) { return u_smoothed(b, ctx, h); },
      [&](const Vector& b) { return slope_matrix(b, ctx, h); }, init,
      NewtonOptions{spec.max_iter, spec.tol, 10});
  SolveReport rep;
  rep.beta_hat = nr.root;
  rep.iterations = nr.iterations;
  rep.converged = nr.converged;
  rep.final_score_norm = nr.score_norm;
  rep.method = SolveMethod::SmoothedFixedH;
  rep.damped_steps = nr.damped_steps;
  rep.pseudo_inverse_steps = nr.pseudo_inverse_steps;
  return rep;
}

/// Smoothed fit at H = I/n from the given start.
inline SolveReport fit_smoothed(const FitSpec& spec, const SurvivalSample& sample,
                                const Vector& init) {
  spec.validate();
  validate_sample(sample);
  const StepSurvival g = fit_censoring_km(sample);
  const ScoreContext ctx = make_score_context(sample, spec, g);
  return fit_smoothed(spec, ctx, SmoothingMatrix::identity(ctx.dim(), sample.size()), init);
}

/// Smoothed fit at H = I/n started from the non-smooth estimator.
inline SolveReport fit_smoothed(const FitSpec& spec, const SurvivalSample& sample) {
  spec.validate();
  validate_sample(sample);
  const StepSurvival g = fit_censoring_km(sample);
  const ScoreContext ctx = make_score_context(sample, spec, g);
  const SolveReport ns = fit_nonsmooth(spec, ctx);
  return fit_smoothed(spec, ctx, SmoothingMatrix::identity(ctx.dim(), sample.size()), ns.beta_hat);
}

struct IterativeFit {
  SolveReport report;
  CovarianceResult covariance;
  bool fell_back = false;  // Sigma lost positive definiteness; fixed H = I/n was used instead
};

namespace detail {

inline bool positive_definite(const Matrix& m) {
  Eigen::LLT<Matrix> llt(m);
  return llt.info() == Eigen::Success;
}

}  // namespace detail

/// Alternating algorithm: one Newton step at the current H, then a sandwich
/// update of Sigma and H = Sigma / n, until both settle.
inline IterativeFit fit_iterative(const FitSpec& spec, const SurvivalSample& sample) {
  spec.validate();
  validate_sample(sample);
  const StepSurvival g = fit_censoring_km(sample);
  const ScoreContext ctx = make_score_context(sample, spec, g);
  const std::size_t n = sample.size();
  const Eigen::Index q = ctx.dim();

  const SolveReport ns = fit_nonsmooth(spec, ctx);
  Vector beta = ns.beta_hat;
  Matrix sigma = Matrix::Identity(q, q);
  const Matrix eta = draw_multipliers(spec.seed, spec.resample_m, n);

  IterativeFit out;
  out.report.method = SolveMethod::SmoothedIterative;
  bool used_pinv = false;
  for (int k = 0; k < spec.max_iter; ++k) {
    const SmoothingMatrix h(sigma, n);
    const NewtonResult step = newton_solve(
        [&](const Vector& b) { return u_smoothed(b, ctx, h); },
        [&](const Vector& b) { return slope_matrix(b, ctx, h); }, beta,
        NewtonOptions{1, 0.0, 10});
    if (step.pseudo_inverse_steps > 0) {
      if (used_pinv) fail(ErrorKind::SingularSlope, "slope matrix singular on repeated steps");
      used_pinv = true;
      ++out.report.pseudo_inverse_steps;
    }
    out.report.damped_steps += step.damped_steps;
    const double beta_change = (step.root - beta).cwiseAbs().maxCoeff();
    beta = step.root;

    CovarianceResult cov = make_covariance(slope_matrix(beta, ctx, h),
                                           resample_v(beta, spec, sample, h, eta), n,
                                           spec.resample_m);
    if (!detail::positive_definite(cov.sigma)) {
      // fall back to the fixed-H estimator
      const SmoothingMatrix h0 = SmoothingMatrix::identity(q, n);
      out.report = fit_smoothed(spec, ctx, h0, ns.beta_hat);
      out.report.method = SolveMethod::SmoothedIterative;
      out.covariance = make_covariance(slope_matrix(out.report.beta_hat, ctx, h0),
                                       resample_v(out.report.beta_hat, spec, sample, h0, eta), n,
                                       spec.resample_m);
      out.fell_back = true;
      return out;
    }
    const double sigma_change = (cov.sigma - sigma).cwiseAbs().maxCoeff();
    const double sigma_scale = std::max(1.0, sigma.cwiseAbs().maxCoeff());
    sigma = cov.sigma;
    out.covariance = std::move(cov);
    out.report.iterations = k + 1;
    out.report.beta_hat = beta;
    out.report.final_score_norm = u_smoothed(beta, ctx, h).cwiseAbs().maxCoeff();
    if (beta_change <= spec.tol && sigma_change <= std::sqrt(spec.tol) * sigma_scale) {
      out.report.converged = true;
      break;
    }
  }
  return out;
}

}  // namespace isqr
