#include <catch_amalgamated.hpp>

#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "helpers.hpp"
#include "isqr/inference.hpp"
#include "isqr/sim_harness.hpp"
#include "isqr/solver.hpp"

using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;
using isqr::Matrix;
using isqr::SmoothingMatrix;
using isqr::Vector;

namespace {

isqr::SurvivalSample simulated(int n, double cens, std::uint64_t rep) {
  isqr::SimScenario sc;
  sc.n = n;
  sc.censor_target = cens;
  sc.beta1_base = std::log(2.0);
  return isqr::generate_dataset(sc, rep);
}

Matrix random_pd(std::mt19937_64& gen, Eigen::Index q) {
  std::normal_distribution<double> norm;
  Matrix m(q, q);
  for (Eigen::Index i = 0; i < q; ++i)
    for (Eigen::Index j = 0; j < q; ++j) m(i, j) = norm(gen);
  return m * m.transpose() + 0.5 * Matrix::Identity(q, q);
}

}  // namespace

TEST_CASE("sandwich arithmetic") {
  CHECK(isqr::sandwich(Matrix::Identity(2, 2), Matrix::Identity(2, 2)) == Matrix::Identity(2, 2));
  Matrix a = Matrix::Zero(2, 2);
  a(0, 0) = 2.0;
  a(1, 1) = 4.0;
  const Matrix s = isqr::sandwich(a, Matrix::Identity(2, 2));
  CHECK(s(0, 0) == 0.25);
  CHECK(s(1, 1) == 0.0625);
  CHECK(s(0, 1) == 0.0);

  try {
    isqr::sandwich(Matrix::Ones(2, 2), Matrix::Identity(2, 2));
    FAIL("no throw");
  } catch (const isqr::Error& e) {
    CHECK(e.kind() == isqr::ErrorKind::SingularSlope);
  }
}

TEST_CASE("sandwich agrees with a solve-based computation") {
  std::mt19937_64 gen(3);
  for (int trial = 0; trial < 10; ++trial) {
    const Matrix a = random_pd(gen, 3);
    const Matrix v = random_pd(gen, 3);
    const Matrix s = isqr::sandwich(a, v);
    const Eigen::ColPivHouseholderQR<Matrix> qr(a);
    const Matrix left = qr.solve(v);                               // A^-1 V
    const Matrix ref = qr.solve(left.transpose()).transpose();     // A^-1 V A^-T
    CHECK((s - ref).cwiseAbs().maxCoeff() <= 1e-10 * std::max(1.0, ref.cwiseAbs().maxCoeff()));
    CHECK(s == s.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> es(s);
    CHECK(es.eigenvalues().minCoeff() > 0.0);
  }
}

TEST_CASE("normal quantile") {
  CHECK_THAT(isqr::std_normal_quantile(0.975), WithinAbs(1.959963984540054, 1e-12));
  CHECK(isqr::std_normal_quantile(0.5) == 0.0);
  for (double p : {1e-10, 0.001, 0.2, 0.7, 0.999})
    CHECK_THAT(isqr::std_normal_cdf(isqr::std_normal_quantile(p)), WithinRel(p, 1e-12));
}

TEST_CASE("Wald intervals") {
  Vector b(1);
  b << 1.608;
  Matrix var(1, 1);
  var << 0.068 * 0.068;
  const auto ci = isqr::wald_ci(b, var, 0.95);
  CHECK_THAT(ci[0].first, WithinAbs(1.474722449, 1e-8));
  CHECK_THAT(ci[0].second, WithinAbs(1.741277551, 1e-8));
  CHECK((ci[0].first <= 1.609 && 1.609 <= ci[0].second));

  const auto zero = isqr::wald_ci(b, Matrix::Zero(1, 1), 0.95);
  CHECK(zero[0].first == 1.608);
  CHECK(zero[0].second == 1.608);
  CHECK_THROWS_AS(isqr::wald_ci(b, var, 1.0), isqr::Error);
}

TEST_CASE("multipliers are unit exponential and keyed by position") {
  const Matrix eta = isqr::draw_multipliers(99, 400, 50);
  CHECK((eta.array() > 0.0).all());
  const double mean = eta.mean();
  const double var = (eta.array() - mean).square().sum() / static_cast<double>(eta.size() - 1);
  CHECK_THAT(mean, WithinAbs(1.0, 0.03));
  CHECK_THAT(var, WithinAbs(1.0, 0.1));
  const Matrix small = isqr::draw_multipliers(99, 10, 20);
  CHECK(small == eta.topLeftCorner(10, 20));
}

TEST_CASE("score variance is reproducible and positive semidefinite") {
  const auto s = simulated(200, 0.3, 1);
  isqr::FitSpec spec;
  const auto fit = isqr::fit_smoothed(spec, s);
  const auto h = SmoothingMatrix::identity(2, s.size());
  const Matrix v1 = isqr::resample_v(fit.beta_hat, spec, s, h);
  const Matrix v2 = isqr::resample_v(fit.beta_hat, spec, s, h);
  CHECK(v1 == v2);
  CHECK(v1 == v1.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> es(v1);
  CHECK(es.eigenvalues().minCoeff() >= 0.0);

  spec.seed += 1;
  CHECK(isqr::resample_v(fit.beta_hat, spec, s, h) != v1);
}

TEST_CASE("score variance stabilizes with more resamples") {
  const auto s = simulated(200, 0.3, 2);
  isqr::FitSpec spec;
  const auto fit = isqr::fit_smoothed(spec, s);
  const auto h = SmoothingMatrix::identity(2, s.size());
  spec.resample_m = 200;
  const Matrix a = isqr::resample_v(fit.beta_hat, spec, s, h);
  spec.resample_m = 2000;
  const Matrix b = isqr::resample_v(fit.beta_hat, spec, s, h);
  CHECK((a - b).norm() / b.norm() < 0.15);
}

TEST_CASE("score variance for a single subject has rank one") {
  const auto s = testing::make_sample({3.0}, {1}, {0.5});
  isqr::FitSpec spec;
  spec.resample_m = 500;
  const auto h = SmoothingMatrix::identity(2, 1);
  Vector beta(2);
  beta << 0.9, 0.4;
  const Matrix v = isqr::resample_v(beta, spec, s, h);
  const Vector x = (Vector(2) << 1.0, 0.5).finished();
  const double d = isqr::std_normal_cdf((x.dot(beta) - std::log(3.0)) / x.norm()) - spec.tau;
  // V = n Var(eta) (x d)(x d)'
  const Matrix eta = isqr::draw_multipliers(spec.seed, spec.resample_m, 1);
  const double mean = eta.mean();
  const double var_eta = (eta.array() - mean).square().sum() / (eta.size() - 1);
  const Matrix expect = var_eta * (x * d) * (x * d).transpose();
  CHECK((v - expect).cwiseAbs().maxCoeff() <= 1e-12 * expect.cwiseAbs().maxCoeff());
  CHECK(std::abs(v.determinant()) <= 1e-12 * v.squaredNorm());
}

TEST_CASE("score variance is invariant to relabeling with synchronized multipliers") {
  const auto s = simulated(120, 0.3, 3);
  isqr::FitSpec spec;
  spec.resample_m = 100;
  const auto fit = isqr::fit_smoothed(spec, s);
  const auto h = SmoothingMatrix::identity(2, s.size());
  const Matrix eta = isqr::draw_multipliers(spec.seed, spec.resample_m, s.size());

  std::vector<std::size_t> perm(s.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::shuffle(perm.begin(), perm.end(), std::mt19937_64(5));
  auto permuted = s;
  Matrix eta_p(eta.rows(), eta.cols());
  for (std::size_t i = 0; i < perm.size(); ++i) {
    permuted.subjects[i] = s.subjects[perm[i]];
    eta_p.col(static_cast<Eigen::Index>(i)) = eta.col(static_cast<Eigen::Index>(perm[i]));
  }
  const Matrix a = isqr::resample_v(fit.beta_hat, spec, s, h, eta);
  const Matrix b = isqr::resample_v(fit.beta_hat, spec, permuted, h, eta_p);
  CHECK((a - b).cwiseAbs().maxCoeff() <= 1e-12 * a.cwiseAbs().maxCoeff());
}

TEST_CASE("score variance error paths") {
  const auto s = simulated(50, 0.0, 4);
  isqr::FitSpec spec;
  const auto h = SmoothingMatrix::identity(2, s.size());
  const Vector beta = isqr::fit_smoothed(spec, s).beta_hat;
  try {
    isqr::resample_v(beta, spec, s, h, Matrix::Ones(5, 49));
    FAIL("no throw");
  } catch (const isqr::Error& e) {
    CHECK(e.kind() == isqr::ErrorKind::LengthMismatch);
  }
  try {
    isqr::resample_v(beta, spec, s, h, Matrix::Ones(5, 50));
    FAIL("no throw");
  } catch (const isqr::Error& e) {
    CHECK(e.kind() == isqr::ErrorKind::DegenerateResamples);
  }
}

TEST_CASE("covariance result fields are consistent") {
  const auto s = simulated(200, 0.3, 5);
  isqr::FitSpec spec;
  const auto g = isqr::fit_censoring_km(s);
  const auto ctx = isqr::make_score_context(s, spec, g);
  const auto h = SmoothingMatrix::identity(2, s.size());
  const auto fit = isqr::fit_smoothed(spec, ctx, h, isqr::fit_nonsmooth(spec, ctx).beta_hat);
  const auto cov = isqr::covariance_at(fit.beta_hat, spec, s, ctx, h);
  CHECK(cov.resample_m == spec.resample_m);
  CHECK(cov.multiplier_law == isqr::MultiplierLaw::UnitExponential);
  CHECK((cov.var_beta - cov.sigma / 200.0).cwiseAbs().maxCoeff() == 0.0);
  for (Eigen::Index j = 0; j < 2; ++j) CHECK(cov.se(j) == std::sqrt(cov.var_beta(j, j)));
  CHECK(cov.slope == isqr::slope_matrix(fit.beta_hat, ctx, h));
}

TEST_CASE("standard errors track the Monte Carlo spread") {
  isqr::SimScenario sc;
  sc.beta1_base = 0.0;
  isqr::FitSpec spec;
  spec.resample_m = 100;
  const int reps = 150;
  std::vector<double> est;
  double se = 0.0;
  for (int r = 0; r < reps; ++r) {
    const auto fit = isqr::fit_model(spec, isqr::generate_dataset(sc, static_cast<std::uint64_t>(r)));
    est.push_back(fit.beta(1));
    se += fit.covariance.se(1);
  }
  const double mean = std::accumulate(est.begin(), est.end(), 0.0) / reps;
  double ss = 0.0;
  for (double e : est) ss += (e - mean) * (e - mean);
  const double sd = std::sqrt(ss / (reps - 1));
  INFO("ESE " << se / reps << " SD " << sd);
  CHECK(std::abs(se / reps / sd - 1.0) <= 0.2);
}
