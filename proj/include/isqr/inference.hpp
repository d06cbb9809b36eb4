#pragma once

#include <span>
#include <utility>
#include <vector>

#include "isqr/censoring_km.hpp"
#include "isqr/estimating.hpp"
#include "isqr/normal.hpp"
#include "isqr/rng.hpp"

namespace isqr {

enum class MultiplierLaw { UnitExponential };

struct CovarianceResult {
  Matrix sigma;     // asymptotic covariance of sqrt(n) (beta_hat - beta)
  Matrix var_beta;  // sigma / n
  Vector se;
  Matrix slope;     // A-hat at beta_hat
  Matrix v_hat;
  int resample_m = 0;
  MultiplierLaw multiplier_law = MultiplierLaw::UnitExponential;
};

/// m x n matrix of i.i.d. unit-exponential multipliers (mean 1, variance 1).
/// Entry (k, i) depends only on (seed, k, i).
inline Matrix draw_multipliers(std::uint64_t seed, int m, std::size_t n) {
  Matrix eta(m, static_cast<Eigen::Index>(n));
  for (int k = 0; k < m; ++k)
    for (std::size_t i = 0; i < n; ++i)
      eta(k, static_cast<Eigen::Index>(i)) = rng::exponential(
          rng::hash(seed, {rng::kMultiplier, static_cast<std::uint64_t>(k), i}));
  return eta;
}

/// Score-variance matrix from perturbed smoothed scores at beta_hat, using
/// the supplied multipliers (one row per replicate). Scaled by n so that
/// A^-1 V A^-1 / n estimates Var(beta_hat).
inline Matrix resample_v(const Vector& beta_hat, const FitSpec& spec, const SurvivalSample& sample,
                         const SmoothingMatrix& h, const Matrix& eta) {
  const std::size_t n = sample.size();
  if (static_cast<std::size_t>(eta.cols()) != n)
    fail(ErrorKind::LengthMismatch, "multiplier matrix needs one column per subject");
  if (eta.rows() < 2) fail(ErrorKind::InvalidArgument, "need at least two resamples");

  const Eigen::Index m = eta.rows();
  Matrix scores(m, beta_hat.size());
  std::vector<double> row(n);
  for (Eigen::Index k = 0; k < m; ++k) {
    for (std::size_t i = 0; i < n; ++i) row[i] = eta(k, static_cast<Eigen::Index>(i));
    const StepSurvival g_star = fit_perturbed_km(sample, row);
    const ScoreContext ctx = make_score_context(sample, spec, g_star);
    scores.row(k) = u_smoothed_perturbed(beta_hat, ctx, h, row).transpose();
  }

  if ((scores.rowwise() - scores.row(0)).cwiseAbs().maxCoeff() == 0.0)
    fail(ErrorKind::DegenerateResamples, "all perturbed scores are identical");
  const Vector mean = scores.colwise().mean().transpose();
  const Matrix centered = scores.rowwise() - mean.transpose();
  const Matrix cov = centered.transpose() * centered / static_cast<double>(m - 1);
  return static_cast<double>(n) * cov;
}

inline Matrix resample_v(const Vector& beta_hat, const FitSpec& spec, const SurvivalSample& sample,
                         const SmoothingMatrix& h) {
  return resample_v(beta_hat, spec, sample, h,
                    draw_multipliers(spec.seed, spec.resample_m, sample.size()));
}

/// A^-1 V A^-T, symmetrized.
inline Matrix sandwich(const Matrix& a_hat, const Matrix& v_hat) {
  Eigen::FullPivLU<Matrix> lu(a_hat);
  lu.setThreshold(1e-12);
  if (!lu.isInvertible()) fail(ErrorKind::SingularSlope, "slope matrix is not invertible");
  const Matrix a_inv = lu.inverse();
  const Matrix s = a_inv * v_hat * a_inv.transpose();
  return 0.5 * (s + s.transpose());
}

inline std::vector<std::pair<double, double>> wald_ci(const Vector& beta_hat,
                                                      const Matrix& var_beta, double level) {
  if (!(level > 0.0 && level < 1.0)) fail(ErrorKind::InvalidArgument, "level must lie in (0, 1)");
  const double z = std_normal_quantile(0.5 * (1.0 + level));
  std::vector<std::pair<double, double>> ci;
  for (Eigen::Index j = 0; j < beta_hat.size(); ++j) {
    const double se = std::sqrt(std::max(var_beta(j, j), 0.0));
    ci.emplace_back(beta_hat(j) - z * se, beta_hat(j) + z * se);
  }
  return ci;
}

inline CovarianceResult make_covariance(Matrix slope, Matrix v_hat, std::size_t n, int m) {
  CovarianceResult out;
  out.sigma = sandwich(slope, v_hat);
  out.var_beta = out.sigma / static_cast<double>(n);
  out.se = out.var_beta.diagonal().cwiseMax(0.0).cwiseSqrt();
  out.slope = std::move(slope);
  out.v_hat = std::move(v_hat);
  out.resample_m = m;
  return out;
}

/// Sandwich covariance of the smoothed estimator at beta_hat for a given H.
inline CovarianceResult covariance_at(const Vector& beta_hat, const FitSpec& spec,
                                      const SurvivalSample& sample, const ScoreContext& ctx,
                                      const SmoothingMatrix& h) {
  Matrix slope = slope_matrix(beta_hat, ctx, h);
  Matrix v = resample_v(beta_hat, spec, sample, h);
  return make_covariance(std::move(slope), std::move(v), sample.size(), spec.resample_m);
}

}  // namespace isqr
