#pragma once

#include <cmath>
#include <span>
#include <utility>
#include <vector>

#include "isqr/censoring_km.hpp"
#include "isqr/data_model.hpp"
#include "isqr/normal.hpp"

namespace isqr {

/// Smoothing covariance H, stored already scaled by 1/n.
class SmoothingMatrix {
 public:
  SmoothingMatrix(const Matrix& sigma, std::size_t n) {
    if (sigma.rows() != sigma.cols())
      fail(ErrorKind::DimensionMismatch, "smoothing matrix must be square");
    if (n == 0) fail(ErrorKind::InvalidArgument, "smoothing matrix needs n > 0");
    if (!sigma.isApprox(sigma.transpose(), 1e-10))
      fail(ErrorKind::InvalidArgument, "smoothing matrix must be symmetric");
    h_ = 0.5 * (sigma + sigma.transpose()) / static_cast<double>(n);
  }

  static SmoothingMatrix identity(Eigen::Index dim, std::size_t n) {
    return SmoothingMatrix(Matrix::Identity(dim, dim), n);
  }

  const Matrix& h() const { return h_; }
  Eigen::Index dim() const { return h_.rows(); }

 private:
  Matrix h_;
};

/// Everything the estimating functions need, precomputed for one (tau, t0, G).
/// Rows are the effective subjects (Z_i > t0) in input order.
struct ScoreContext {
  std::size_t n = 0;  // full sample size, the divisor of every score
  double tau = 0.5;
  double t0 = 0.0;
  std::vector<std::size_t> effective;
  Matrix rows;       // design rows X_i
  Vector y;          // log(Z_i - t0)
  Vector w;          // weight on the indicator / Phi term
  Vector v;          // weight on the -tau term (1 for Li, w for Kim)
  std::size_t events = 0;
  std::size_t floored_weights = 0;

  Eigen::Index dim() const { return rows.cols(); }

  /// Direct construction, mostly for tests. Effective indices are 0..k-1.
  static ScoreContext from_arrays(Matrix rows, Vector y, Vector w, std::size_t n, double tau,
                                  Weighting scheme = Weighting::Li) {
    if (rows.rows() != y.size() || y.size() != w.size())
      fail(ErrorKind::LengthMismatch, "rows, y and w must have equal length");
    ScoreContext ctx;
    ctx.n = n;
    ctx.tau = tau;
    ctx.rows = std::move(rows);
    ctx.y = std::move(y);
    ctx.w = std::move(w);
    ctx.v = scheme == Weighting::Li ? Vector::Ones(ctx.w.size()) : ctx.w;
    for (Eigen::Index i = 0; i < ctx.w.size(); ++i) {
      ctx.effective.push_back(static_cast<std::size_t>(i));
      if (ctx.w(i) > 0.0) ++ctx.events;
    }
    return ctx;
  }
};

inline ScoreContext make_score_context(const SurvivalSample& sample, double tau, double t0,
                                       Weighting scheme, const StepSurvival& censoring,
                                       double g_floor) {
  ScoreContext ctx;
  ctx.n = sample.size();
  ctx.tau = tau;
  ctx.t0 = t0;
  ctx.effective = effective_indices(sample, t0);
  const auto k = static_cast<Eigen::Index>(ctx.effective.size());
  const auto q = static_cast<Eigen::Index>(sample.coef_dim());
  ctx.rows.resize(k, q);
  ctx.y.resize(k);
  ctx.w.resize(k);
  ctx.v.resize(k);
  for (Eigen::Index r = 0; r < k; ++r) {
    const std::size_t i = ctx.effective[static_cast<std::size_t>(r)];
    ctx.rows.row(r) = design_row(sample, i).transpose();
    if (ctx.rows.row(r).squaredNorm() == 0.0)
      fail(ErrorKind::ZeroSmoothingScale,
           "subject " + std::to_string(i) + " has an all-zero design row");
    ctx.y(r) = std::log(sample.subjects[i].time - t0);
    const IpcwWeight wt = ipcw_weight(i, t0, censoring, sample, scheme, g_floor);
    ctx.w(r) = wt.value;
    ctx.v(r) = scheme == Weighting::Li ? 1.0 : wt.value;
    if (sample.subjects[i].status == 1) ++ctx.events;
    if (wt.floored) ++ctx.floored_weights;
  }
  return ctx;
}

inline ScoreContext make_score_context(const SurvivalSample& sample, const FitSpec& spec,
                                       const StepSurvival& censoring) {
  return make_score_context(sample, spec.tau, spec.t0, spec.weighting, censoring, spec.g_floor);
}

namespace detail {

inline double smoothing_scale(const Eigen::Ref<const Vector>& x, const Matrix& h) {
  const double s2 = x.dot(h * x);
  if (!(s2 > 0.0)) fail(ErrorKind::ZeroSmoothingScale, "x'Hx must be positive on every row");
  return std::sqrt(s2);
}

inline void check_dims(const Vector& beta, const ScoreContext& ctx) {
  if (beta.size() != ctx.dim())
    fail(ErrorKind::DimensionMismatch, "coefficient vector has dimension " +
                                           std::to_string(beta.size()) + ", expected " +
                                           std::to_string(ctx.dim()));
}

}  // namespace detail

/// Non-smooth IPCW estimating function.
inline Vector u_nonsmooth(const Vector& beta, const ScoreContext& ctx) {
  detail::check_dims(beta, ctx);
  Vector u = Vector::Zero(ctx.dim());
  for (Eigen::Index i = 0; i < ctx.rows.rows(); ++i) {
    const double ind = ctx.y(i) <= ctx.rows.row(i).dot(beta) ? 1.0 : 0.0;
    u += ctx.rows.row(i).transpose() * (ind * ctx.w(i) - ctx.tau * ctx.v(i));
  }
  return u / static_cast<double>(ctx.n);
}

/// The two pseudo-observation directions of the L1 formulation:
/// first = -sum X_l w_l, second = 2 tau sum X_l v_l.
inline std::pair<Vector, Vector> pseudo_directions(const ScoreContext& ctx) {
  Vector first = Vector::Zero(ctx.dim());
  Vector second = Vector::Zero(ctx.dim());
  for (Eigen::Index i = 0; i < ctx.rows.rows(); ++i) {
    first -= ctx.rows.row(i).transpose() * ctx.w(i);
    second += ctx.rows.row(i).transpose() * (2.0 * ctx.tau * ctx.v(i));
  }
  return {first, second};
}

/// Weighted LAD objective plus the two big-M pseudo-observation terms, all
/// scaled by 1/n so that the subgradient is proportional to u_nonsmooth.
inline double l1_objective(const Vector& beta, const ScoreContext& ctx, double big_m) {
  detail::check_dims(beta, ctx);
  const auto [first, second] = pseudo_directions(ctx);
  const double arg1 = big_m - beta.dot(first);
  const double arg2 = big_m - beta.dot(second);
  if (arg1 < 0.0 || arg2 < 0.0)
    fail(ErrorKind::BigMTooSmall, "a pseudo-observation residual is negative at this beta");
  double lad = 0.0;
  for (Eigen::Index i = 0; i < ctx.rows.rows(); ++i)
    lad += ctx.w(i) * std::abs(ctx.y(i) - ctx.rows.row(i).dot(beta));
  return (lad + arg1 + arg2) / static_cast<double>(ctx.n);
}

/// Induced-smoothed estimating function: the indicator is replaced by
/// Phi((x'beta - y) / sqrt(x'Hx)).
inline Vector u_smoothed(const Vector& beta, const ScoreContext& ctx, const SmoothingMatrix& h) {
  detail::check_dims(beta, ctx);
  Vector u = Vector::Zero(ctx.dim());
  for (Eigen::Index i = 0; i < ctx.rows.rows(); ++i) {
    const auto x = ctx.rows.row(i).transpose();
    const double s = detail::smoothing_scale(x, h.h());
    const double phi = std_normal_cdf((x.dot(beta) - ctx.y(i)) / s);
    u += x * (phi * ctx.w(i) - ctx.tau * ctx.v(i));
  }
  return u / static_cast<double>(ctx.n);
}

/// Perturbed smoothed score. `ctx` must be built from the perturbed censoring
/// curve; eta is indexed by original subject and scales the whole summand.
inline Vector u_smoothed_perturbed(const Vector& beta, const ScoreContext& ctx,
                                   const SmoothingMatrix& h, std::span<const double> eta) {
  detail::check_dims(beta, ctx);
  if (eta.size() != ctx.n)
    fail(ErrorKind::LengthMismatch, "multiplier vector must have one entry per subject");
  Vector u = Vector::Zero(ctx.dim());
  for (Eigen::Index i = 0; i < ctx.rows.rows(); ++i) {
    const auto x = ctx.rows.row(i).transpose();
    const double s = detail::smoothing_scale(x, h.h());
    const double phi = std_normal_cdf((x.dot(beta) - ctx.y(i)) / s);
    const double e = eta[ctx.effective[static_cast<std::size_t>(i)]];
    u += x * (e * (phi * ctx.w(i) - ctx.tau * ctx.v(i)));
  }
  return u / static_cast<double>(ctx.n);
}

/// Analytic Jacobian of u_smoothed; symmetric positive semidefinite.
inline Matrix slope_matrix(const Vector& beta, const ScoreContext& ctx, const SmoothingMatrix& h) {
  detail::check_dims(beta, ctx);
  Matrix a = Matrix::Zero(ctx.dim(), ctx.dim());
  for (Eigen::Index i = 0; i < ctx.rows.rows(); ++i) {
    if (ctx.w(i) == 0.0) continue;
    const auto x = ctx.rows.row(i).transpose();
    const double s = detail::smoothing_scale(x, h.h());
    const double dens = std_normal_pdf((x.dot(beta) - ctx.y(i)) / s);
    a.noalias() += (ctx.w(i) * dens / s) * (x * x.transpose());
  }
  return a / static_cast<double>(ctx.n);
}

}  // namespace isqr
