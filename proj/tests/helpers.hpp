#pragma once

#include <initializer_list>
#include <vector>

#include "isqr/data_model.hpp"

namespace testing {

// Sample with one optional covariate column.
inline isqr::SurvivalSample make_sample(std::initializer_list<double> times,
                                        std::initializer_list<int> status,
                                        std::vector<double> x = {}, bool intercept = true) {
  isqr::SurvivalSample s;
  s.intercept = intercept;
  auto t = times.begin();
  auto d = status.begin();
  for (std::size_t i = 0; t != times.end(); ++t, ++d, ++i) {
    isqr::Subject sub;
    sub.time = *t;
    sub.status = *d;
    if (!x.empty()) sub.covariates = {x[i]};
    s.subjects.push_back(sub);
  }
  if (!x.empty()) s.covariate_names = {"x"};
  return s;
}

}  // namespace testing
