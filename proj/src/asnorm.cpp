// src/asnorm.cpp

// Copyright 2026  dcaplda authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include "dcaplda/asnorm.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace dcaplda {

void TopCohortStats(const Vector &cohort_scores, int n_top, double *mean,
                    double *std) {
  const int k = static_cast<int>(cohort_scores.size());
  if (n_top < 2 || n_top > k)
    throw ValidationError(ErrorCode::kInvalidArgument,
                          "n_top must be in [2, cohort size]");
  std::vector<double> top(cohort_scores.data(), cohort_scores.data() + k);
  std::partial_sort(top.begin(), top.begin() + n_top, top.end(),
                    std::greater<double>());
  double m = 0.0;
  for (int i = 0; i < n_top; ++i) m += top[i];
  m /= n_top;
  double ss = 0.0;
  for (int i = 0; i < n_top; ++i) ss += (top[i] - m) * (top[i] - m);
  double sd = std::sqrt(ss / (n_top - 1));
  if (!(sd > 0.0))
    throw NumericalError(ErrorCode::kDegenerateCohort,
                         "selected cohort scores have zero spread");
  *mean = m;
  *std = sd;
}

double AsNorm1(double s, const Vector &enroll_cohort_scores,
               const Vector &test_cohort_scores, int n_top) {
  double me, se, mt, st;
  TopCohortStats(enroll_cohort_scores, n_top, &me, &se);
  TopCohortStats(test_cohort_scores, n_top, &mt, &st);
  return 0.5 * ((s - me) / se + (s - mt) / st);
}

}  // namespace dcaplda
