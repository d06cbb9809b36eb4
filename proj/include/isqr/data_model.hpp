#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "isqr/errors.hpp"

namespace isqr {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

struct Subject {
  double time = 0.0;  // observed Z = min(T, C)
  int status = 0;     // 1 event, 0 censored
  std::vector<double> covariates;
};

struct SurvivalSample {
  std::vector<Subject> subjects;
  bool intercept = true;
  std::vector<std::string> covariate_names;

  std::size_t size() const { return subjects.size(); }
  std::size_t covariate_dim() const {
    return subjects.empty() ? covariate_names.size() : subjects.front().covariates.size();
  }
  // Coefficient dimension: covariates plus the optional intercept.
  std::size_t coef_dim() const { return covariate_dim() + (intercept ? 1 : 0); }
};

// How the inverse-probability-of-censoring weight enters the score.
//  Li:  X_i { I[.] * delta_i G(t0)/G(Z_i) - tau }
//  Kim: X_i delta_i / G(Z_i) { I[.] - tau }
enum class Weighting { Li, Kim };

// Fixed: H = I/n throughout. Iterative: H = Sigma/n, refreshed each outer step.
enum class HPolicy { FixedIdentity, Iterative };

struct FitSpec {
  double tau = 0.5;
  double t0 = 0.0;
  Weighting weighting = Weighting::Li;
  HPolicy h_policy = HPolicy::FixedIdentity;
  int max_iter = 100;
  double tol = 1e-8;
  int resample_m = 200;
  std::uint64_t seed = 20240521;
  double big_m = 1e6;
  double g_floor = 1e-10;

  void validate() const {
    if (!(tau > 0.0 && tau < 1.0)) fail(ErrorKind::InvalidArgument, "tau must lie in (0, 1)");
    if (!(t0 >= 0.0) || !std::isfinite(t0)) fail(ErrorKind::InvalidArgument, "t0 must be >= 0");
    if (max_iter < 1) fail(ErrorKind::InvalidArgument, "max_iter must be positive");
    if (!(tol > 0.0)) fail(ErrorKind::InvalidArgument, "tol must be positive");
    if (resample_m < 2) fail(ErrorKind::InvalidArgument, "resample_m must be >= 2");
    if (!(big_m > 0.0)) fail(ErrorKind::InvalidArgument, "big_m must be positive");
    if (!(g_floor > 0.0 && g_floor < 1.0))
      fail(ErrorKind::InvalidArgument, "g_floor must lie in (0, 1)");
  }
};

inline const SurvivalSample& validate_sample(const SurvivalSample& sample) {
  const std::size_t p = sample.covariate_dim();
  bool any_event = false;
  for (std::size_t i = 0; i < sample.subjects.size(); ++i) {
    const Subject& s = sample.subjects[i];
    const std::string where = "subject " + std::to_string(i);
    if (s.covariates.size() != p)
      fail(ErrorKind::DimensionMismatch, where + " has " + std::to_string(s.covariates.size()) +
                                             " covariates, expected " + std::to_string(p));
    if (!std::isfinite(s.time)) fail(ErrorKind::NonFiniteValue, where + ": time is not finite");
    if (s.time <= 0.0) fail(ErrorKind::NonPositiveTime, where + ": time must be positive");
    if (s.status != 0 && s.status != 1)
      fail(ErrorKind::InvalidArgument, where + ": status must be 0 or 1");
    for (double v : s.covariates)
      if (!std::isfinite(v)) fail(ErrorKind::NonFiniteValue, where + ": covariate not finite");
    any_event = any_event || s.status == 1;
  }
  if (!any_event) fail(ErrorKind::NoEvents, "no subject has status 1");
  return sample;
}

// Subjects still at risk strictly beyond t0, in input order.
inline std::vector<std::size_t> effective_indices(const SurvivalSample& sample, double t0) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < sample.subjects.size(); ++i)
    if (sample.subjects[i].time > t0) idx.push_back(i);
  if (idx.empty())
    fail(ErrorKind::EmptyRiskSet, "no subject observed beyond t0 = " + std::to_string(t0));
  return idx;
}

inline Vector design_row(const SurvivalSample& sample, std::size_t i) {
  const Subject& s = sample.subjects[i];
  const Eigen::Index off = sample.intercept ? 1 : 0;
  Vector x(static_cast<Eigen::Index>(s.covariates.size()) + off);
  if (sample.intercept) x(0) = 1.0;
  for (std::size_t j = 0; j < s.covariates.size(); ++j)
    x(off + static_cast<Eigen::Index>(j)) = s.covariates[j];
  return x;
}

inline std::vector<std::string> coefficient_names(const SurvivalSample& sample) {
  std::vector<std::string> names;
  if (sample.intercept) names.emplace_back("(Intercept)");
  for (std::size_t j = 0; j < sample.covariate_dim(); ++j)
    names.push_back(j < sample.covariate_names.size() ? sample.covariate_names[j]
                                                      : "x" + std::to_string(j + 1));
  return names;
}

}  // namespace isqr
