#pragma once

#include <algorithm>
#include <numeric>
#include <span>
#include <vector>

#include "isqr/data_model.hpp"

namespace isqr {

/// Right-continuous, nonincreasing step function starting at 1.
/// values[k] holds on [jump_times[k], jump_times[k+1]).
struct StepSurvival {
  std::vector<double> jump_times;
  std::vector<double> values;

  double operator()(double t) const {
    auto it = std::upper_bound(jump_times.begin(), jump_times.end(), t);
    if (it == jump_times.begin()) return 1.0;
    return values[static_cast<std::size_t>(it - jump_times.begin()) - 1];
  }
};

inline double eval_survival(const StepSurvival& curve, double t) { return curve(t); }

namespace detail {

// Product-limit estimate of the censoring survival function with per-subject
// multipliers on both the censoring counts and the risk set.
inline StepSurvival censoring_product_limit(const SurvivalSample& sample,
                                            std::span<const double> eta) {
  const std::size_t n = sample.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return sample.subjects[a].time < sample.subjects[b].time;
  });

  // at_risk[k] = sum of eta over sorted positions k..n-1
  std::vector<double> at_risk(n + 1, 0.0);
  for (std::size_t k = n; k-- > 0;) at_risk[k] = at_risk[k + 1] + eta[order[k]];

  StepSurvival curve;
  double value = 1.0;
  std::size_t k = 0;
  while (k < n) {
    const double u = sample.subjects[order[k]].time;
    const double risk = at_risk[k];
    double censored = 0.0;
    std::size_t j = k;
    for (; j < n && sample.subjects[order[j]].time == u; ++j)
      if (sample.subjects[order[j]].status == 0) censored += eta[order[j]];
    if (censored > 0.0) {
      value *= std::clamp(1.0 - censored / risk, 0.0, 1.0);
      curve.jump_times.push_back(u);
      curve.values.push_back(value);
    }
    k = j;
  }
  return curve;
}

}  // namespace detail

/// Kaplan-Meier estimate of the censoring distribution (status 0 is the "event").
inline StepSurvival fit_censoring_km(const SurvivalSample& sample) {
  const std::vector<double> ones(sample.size(), 1.0);
  return detail::censoring_product_limit(sample, ones);
}

/// Multiplier-perturbed censoring KM used by the resampling variance.
inline StepSurvival fit_perturbed_km(const SurvivalSample& sample, std::span<const double> eta) {
  if (eta.size() != sample.size())
    fail(ErrorKind::LengthMismatch, "multiplier vector length " + std::to_string(eta.size()) +
                                        " differs from sample size " +
                                        std::to_string(sample.size()));
  for (double e : eta)
    if (!(e > 0.0)) fail(ErrorKind::NonPositiveMultiplier, "multipliers must be positive");
  return detail::censoring_product_limit(sample, eta);
}

struct IpcwWeight {
  double value = 0.0;
  bool floored = false;  // G(Z_i) hit the floor; the fit proceeds with the floored value
};

inline IpcwWeight ipcw_weight(std::size_t i, double t0, const StepSurvival& curve,
                              const SurvivalSample& sample, Weighting scheme, double floor) {
  const Subject& s = sample.subjects[i];
  if (s.status == 0) return {};
  const double g_z = curve(s.time);
  IpcwWeight w;
  w.floored = g_z <= floor;
  const double denom = std::max(g_z, floor);
  w.value = scheme == Weighting::Li ? curve(t0) / denom : 1.0 / denom;
  return w;
}

}  // namespace isqr
