#include <catch_amalgamated.hpp>

#include <algorithm>
#include <limits>

#include "helpers.hpp"
#include "isqr/data_model.hpp"

using isqr::ErrorKind;
using testing::make_sample;

namespace {

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const isqr::Error& e) {
    return e.kind();
  }
  FAIL("expected an isqr::Error");
  return ErrorKind::InvalidArgument;
}

}  // namespace

TEST_CASE("effective_indices uses a strict risk set") {
  const auto s = make_sample({1, 2, 3}, {1, 1, 1});
  CHECK(isqr::effective_indices(s, 0.0) == std::vector<std::size_t>{0, 1, 2});
  CHECK(isqr::effective_indices(s, 2.0) == std::vector<std::size_t>{2});
  CHECK(kind_of([&] { isqr::effective_indices(s, 5.0); }) == ErrorKind::EmptyRiskSet);
}

TEST_CASE("effective_indices is monotone in t0") {
  const auto s = make_sample({0.3, 2.5, 1.1, 4.0, 0.9, 3.3}, {1, 0, 1, 1, 0, 1});
  std::vector<std::size_t> prev = isqr::effective_indices(s, 0.0);
  CHECK(prev.size() == s.size());
  for (double t0 : {0.5, 1.0, 2.0, 3.0, 3.9}) {
    const auto cur = isqr::effective_indices(s, t0);
    CHECK(std::includes(prev.begin(), prev.end(), cur.begin(), cur.end()));
    prev = cur;
  }
}

TEST_CASE("validate_sample rejects malformed input") {
  auto s = make_sample({1, 2}, {1, 0}, {0.5, 1.5});
  CHECK_NOTHROW(isqr::validate_sample(s));

  auto bad = s;
  bad.subjects[1].covariates.push_back(2.0);
  CHECK(kind_of([&] { isqr::validate_sample(bad); }) == ErrorKind::DimensionMismatch);

  bad = s;
  bad.subjects[0].time = 0.0;
  CHECK(kind_of([&] { isqr::validate_sample(bad); }) == ErrorKind::NonPositiveTime);

  bad = s;
  bad.subjects[0].time = std::numeric_limits<double>::infinity();
  CHECK(kind_of([&] { isqr::validate_sample(bad); }) == ErrorKind::NonFiniteValue);

  bad = s;
  bad.subjects[1].covariates[0] = std::numeric_limits<double>::quiet_NaN();
  CHECK(kind_of([&] { isqr::validate_sample(bad); }) == ErrorKind::NonFiniteValue);

  bad = s;
  bad.subjects[1].status = 2;
  CHECK(kind_of([&] { isqr::validate_sample(bad); }) == ErrorKind::InvalidArgument);

  bad = s;
  bad.subjects[0].status = 0;
  CHECK(kind_of([&] { isqr::validate_sample(bad); }) == ErrorKind::NoEvents);
}

TEST_CASE("design rows and coefficient names") {
  auto s = make_sample({1, 2}, {1, 0}, {0.5, 1.5});
  const isqr::Vector x = isqr::design_row(s, 1);
  REQUIRE(x.size() == 2);
  CHECK(x(0) == 1.0);
  CHECK(x(1) == 1.5);
  CHECK(isqr::coefficient_names(s) == std::vector<std::string>{"(Intercept)", "x"});
  CHECK(s.coef_dim() == 2);

  s.intercept = false;
  s.covariate_names.clear();
  CHECK(isqr::design_row(s, 0).size() == 1);
  CHECK(isqr::coefficient_names(s) == std::vector<std::string>{"x1"});
}

TEST_CASE("FitSpec validation") {
  isqr::FitSpec spec;
  CHECK_NOTHROW(spec.validate());
  spec.tau = 1.0;
  CHECK(kind_of([&] { spec.validate(); }) == ErrorKind::InvalidArgument);
  spec = {};
  spec.t0 = -1.0;
  CHECK(kind_of([&] { spec.validate(); }) == ErrorKind::InvalidArgument);
  spec = {};
  spec.resample_m = 1;
  CHECK(kind_of([&] { spec.validate(); }) == ErrorKind::InvalidArgument);
  spec = {};
  spec.g_floor = 0.0;
  CHECK(kind_of([&] { spec.validate(); }) == ErrorKind::InvalidArgument);
}
