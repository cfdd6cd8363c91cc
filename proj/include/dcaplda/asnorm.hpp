// include/dcaplda/asnorm.hpp

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

#ifndef DCAPLDA_ASNORM_HPP_
#define DCAPLDA_ASNORM_HPP_

#include "dcaplda/common.hpp"

namespace dcaplda {

// Adaptive symmetric score normalization: the average of an
// enrollment-normalized and a test-normalized score, each using the mean
// and standard deviation of the top n_top cohort scores for that side.
// With n_top == cohort size this is plain S-Norm. Top scores are ranked by
// value descending; the standard deviation uses the n-1 denominator.
double AsNorm1(double s, const Vector &enroll_cohort_scores,
               const Vector &test_cohort_scores, int n_top);

// One side's statistics: mean/std of the top n_top scores. Throws
// DegenerateCohort when the selected subset has zero standard deviation.
void TopCohortStats(const Vector &cohort_scores, int n_top, double *mean,
                    double *std);

}  // namespace dcaplda

#endif  // DCAPLDA_ASNORM_HPP_
