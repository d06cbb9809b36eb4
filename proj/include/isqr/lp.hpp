#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "isqr/errors.hpp"

namespace isqr {

// Weighted asymmetric-absolute-deviation regression
//
//   min_beta  sum_r  cost_pos[r] * (b_r - a_r'beta)^+  +  cost_neg[r] * (b_r - a_r'beta)^-
//
// solved through its dual, a bounded-variable LP with one equality row per
// coefficient:
//
//   max  sum_r b_r e_r   s.t.  A'e = A'cost_neg,   0 <= e_r <= cost_pos[r] + cost_neg[r]
//
// The primal coefficients are the simplex multipliers of the optimal basis, so
// every solution interpolates (at least) dim(beta) rows.
struct LpProblem {
  Eigen::MatrixXd a;  // one row per observation
  Eigen::VectorXd b;
  Eigen::VectorXd cost_pos;
  Eigen::VectorXd cost_neg;
};

struct LpSolution {
  Eigen::VectorXd beta;
  double objective = 0.0;
  int iterations = 0;
  std::vector<Eigen::Index> basic_rows;  // observations interpolated by beta
};

namespace detail {

class BoundedDualSimplex {
 public:
  explicit BoundedDualSimplex(const LpProblem& lp) : lp_(lp) {
    rows_ = lp.a.rows();
    dim_ = lp.a.cols();
    total_ = rows_ + dim_;
    upper_.resize(total_);
    value_.assign(static_cast<std::size_t>(total_), 0.0);
    state_.assign(static_cast<std::size_t>(total_), State::AtLower);
    for (Eigen::Index r = 0; r < rows_; ++r) upper_(r) = lp.cost_pos(r) + lp.cost_neg(r);
    rhs_ = lp.a.transpose() * lp.cost_neg;
    scale_ = 1.0 + lp.a.cwiseAbs().maxCoeff() + rhs_.cwiseAbs().maxCoeff();

    // Artificial k carries column sign(rhs_k) * e_k and starts basic.
    art_sign_.resize(dim_);
    basis_.resize(static_cast<std::size_t>(dim_));
    for (Eigen::Index k = 0; k < dim_; ++k) {
      art_sign_(k) = rhs_(k) >= 0.0 ? 1.0 : -1.0;
      upper_(rows_ + k) = std::numeric_limits<double>::infinity();
      basis_[static_cast<std::size_t>(k)] = rows_ + k;
      state_[static_cast<std::size_t>(rows_ + k)] = State::Basic;
    }
  }

  LpSolution solve() {
    // Phase 1: maximize -sum(artificials).
    Eigen::VectorXd cost = Eigen::VectorXd::Zero(total_);
    cost.tail(dim_).setConstant(-1.0);
    run(cost);
    refresh();
    double infeas = 0.0;
    for (Eigen::Index k = 0; k < dim_; ++k) infeas += value_[static_cast<std::size_t>(rows_ + k)];
    if (infeas > 1e-9 * scale_)
      fail(ErrorKind::Unidentifiable, "weighted L1 problem is unbounded (dual infeasible)");

    expel_artificials();
    for (Eigen::Index k = 0; k < dim_; ++k) upper_(rows_ + k) = 0.0;

    // Phase 2: maximize b'e.
    cost.setZero();
    cost.head(rows_) = lp_.b;
    run(cost);
    refresh();

    LpSolution out;
    out.iterations = iterations_;
    const Eigen::VectorXd pi = multipliers(cost);
    out.beta = pi;
    for (Eigen::Index j : basis_)
      if (j < rows_) out.basic_rows.push_back(j);
    std::sort(out.basic_rows.begin(), out.basic_rows.end());
    const Eigen::VectorXd resid = lp_.b - lp_.a * pi;
    for (Eigen::Index r = 0; r < rows_; ++r)
      out.objective += resid(r) >= 0.0 ? lp_.cost_pos(r) * resid(r) : -lp_.cost_neg(r) * resid(r);
    return out;
  }

 private:
  enum class State { AtLower, AtUpper, Basic };

  Eigen::VectorXd column(Eigen::Index j) const {
    if (j < rows_) return lp_.a.row(j).transpose();
    Eigen::VectorXd e = Eigen::VectorXd::Zero(dim_);
    e(j - rows_) = art_sign_(j - rows_);
    return e;
  }

  Eigen::MatrixXd basis_matrix() const {
    Eigen::MatrixXd bm(dim_, dim_);
    for (Eigen::Index k = 0; k < dim_; ++k) bm.col(k) = column(basis_[static_cast<std::size_t>(k)]);
    return bm;
  }

  // Recompute basic values from the nonbasic ones.
  void refresh() {
    lu_.compute(basis_matrix());
    Eigen::VectorXd r = rhs_;
    for (Eigen::Index j = 0; j < total_; ++j) {
      const auto sj = static_cast<std::size_t>(j);
      if (state_[sj] == State::Basic) continue;
      value_[sj] = state_[sj] == State::AtUpper ? upper_(j) : 0.0;
      if (value_[sj] != 0.0) r -= column(j) * value_[sj];
    }
    const Eigen::VectorXd xb = lu_.solve(r);
    for (Eigen::Index k = 0; k < dim_; ++k) value_[static_cast<std::size_t>(basis_[static_cast<std::size_t>(k)])] = xb(k);
  }

  Eigen::VectorXd multipliers(const Eigen::VectorXd& cost) const {
    Eigen::VectorXd cb(dim_);
    for (Eigen::Index k = 0; k < dim_; ++k) cb(k) = cost(basis_[static_cast<std::size_t>(k)]);
    return lu_.transpose().solve(cb);
  }

  void run(const Eigen::VectorXd& cost) {
    const int limit = 50 * static_cast<int>(total_) + 1000;
    int degenerate_streak = 0;
    for (;;) {
      if (++iterations_ > limit)
        fail(ErrorKind::Unidentifiable, "simplex iteration limit reached");
      refresh();
      const Eigen::VectorXd pi = multipliers(cost);

      // Pricing: Dantzig, switching to Bland's rule after a run of degenerate pivots.
      const bool bland = degenerate_streak > 20;
      Eigen::Index enter = -1;
      double best = 0.0;
      double dir = 0.0;
      for (Eigen::Index j = 0; j < total_; ++j) {
        const auto sj = static_cast<std::size_t>(j);
        if (state_[sj] == State::Basic || upper_(j) == 0.0) continue;
        const double d = cost(j) - column(j).dot(pi);
        const double eps = 1e-11 * (1.0 + std::abs(cost(j)) + scale_);
        double gain = 0.0;
        double s = 0.0;
        if (state_[sj] == State::AtLower && d > eps) { gain = d; s = 1.0; }
        if (state_[sj] == State::AtUpper && d < -eps) { gain = -d; s = -1.0; }
        if (s == 0.0) continue;
        if (bland) { enter = j; dir = s; break; }
        const double norm = column(j).norm();
        if (gain / (1.0 + norm) > best) { best = gain / (1.0 + norm); enter = j; dir = s; }
      }
      if (enter < 0) return;

      const Eigen::VectorXd alpha = lu_.solve(column(enter));
      // Basic values move as x_B - dir * t * alpha.
      double step = upper_(enter);
      Eigen::Index leave = -1;
      bool leave_to_upper = false;
      const double feas = 1e-12 * scale_;
      for (Eigen::Index k = 0; k < dim_; ++k) {
        const double rate = -dir * alpha(k);
        if (std::abs(alpha(k)) <= 1e-12) continue;
        const Eigen::Index j = basis_[static_cast<std::size_t>(k)];
        const double x = value_[static_cast<std::size_t>(j)];
        double t;
        bool to_upper;
        if (rate < 0.0) {
          t = std::max(x, 0.0) / -rate;
          to_upper = false;
        } else {
          if (!std::isfinite(upper_(j))) continue;
          t = std::max(upper_(j) - x, 0.0) / rate;
          to_upper = true;
        }
        if (t < step - feas || (bland && t <= step + feas && leave >= 0 && j < basis_[static_cast<std::size_t>(leave)])) {
          step = t;
          leave = k;
          leave_to_upper = to_upper;
        }
      }
      if (!std::isfinite(step)) fail(ErrorKind::Unidentifiable, "dual LP unbounded");
      degenerate_streak = step <= feas ? degenerate_streak + 1 : 0;

      const auto se = static_cast<std::size_t>(enter);
      if (leave < 0) {
        state_[se] = state_[se] == State::AtLower ? State::AtUpper : State::AtLower;
        continue;
      }
      const Eigen::Index out = basis_[static_cast<std::size_t>(leave)];
      state_[static_cast<std::size_t>(out)] = leave_to_upper ? State::AtUpper : State::AtLower;
      state_[se] = State::Basic;
      basis_[static_cast<std::size_t>(leave)] = enter;
    }
  }

  // Pivot zero-valued artificials out of the basis; a row that cannot be
  // cleared means the design is rank deficient.
  void expel_artificials() {
    for (Eigen::Index k = 0; k < dim_; ++k) {
      const Eigen::Index j = basis_[static_cast<std::size_t>(k)];
      if (j < rows_) continue;
      refresh();
      Eigen::Index best = -1;
      double best_mag = 1e-9;
      for (Eigen::Index c = 0; c < rows_; ++c) {
        if (state_[static_cast<std::size_t>(c)] == State::Basic) continue;
        const double mag = std::abs(lu_.solve(column(c))(k));
        if (mag > best_mag) { best_mag = mag; best = c; }
      }
      if (best < 0) fail(ErrorKind::Unidentifiable, "design matrix is rank deficient");
      state_[static_cast<std::size_t>(j)] = State::AtLower;
      state_[static_cast<std::size_t>(best)] = State::Basic;
      basis_[static_cast<std::size_t>(k)] = best;
      // degenerate pivot: the artificial was at zero, so no value changes
      refresh();
    }
  }

  const LpProblem& lp_;
  Eigen::Index rows_ = 0;
  Eigen::Index dim_ = 0;
  Eigen::Index total_ = 0;
  Eigen::VectorXd upper_;
  Eigen::VectorXd rhs_;
  Eigen::VectorXd art_sign_;
  std::vector<double> value_;
  std::vector<State> state_;
  std::vector<Eigen::Index> basis_;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu_;
  double scale_ = 1.0;
  int iterations_ = 0;
};

}  // namespace detail

inline LpSolution solve_weighted_l1(const LpProblem& lp) {
  if (lp.b.size() != lp.a.rows() || lp.cost_pos.size() != lp.a.rows() ||
      lp.cost_neg.size() != lp.a.rows())
    fail(ErrorKind::LengthMismatch, "LP arrays disagree in length");
  if (lp.a.rows() < lp.a.cols())
    fail(ErrorKind::Unidentifiable, "fewer observations than coefficients");
  detail::BoundedDualSimplex simplex(lp);
  return simplex.solve();
}

}  // namespace isqr
