// include/dcaplda/metrics.hpp

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

#ifndef DCAPLDA_METRICS_HPP_
#define DCAPLDA_METRICS_HPP_

#include <vector>

#include "dcaplda/common.hpp"
#include "dcaplda/data_model.hpp"

namespace dcaplda {

// Scores interpreted as LLRs, with class labels.
struct ScoreSet {
  Vector llrs;
  std::vector<TrialLabel> labels;

  std::size_t NumTargets() const;
  std::size_t NumImpostors() const;
  void Validate() const;  // finite, both classes present
};

// Prior-weighted binary cross-entropy of the LLRs, in nats:
//   C_pi = -(pi/T) sum_tgt log q_i - ((1-pi)/N) sum_imp log(1-q_i)
// with q_i = sigmoid(l_i + logit(pi)). The uninformative reference
// (all-zero LLRs at pi = 0.5) is log 2 nats = 1 bit.
double WeightedCrossEntropyNats(const ScoreSet &scores, double pi);

// The same quantity in bits (Cllr convention).
double Cllr(const ScoreSet &scores, double pi);

// Affine calibration fitted by linear logistic regression (Newton with
// backtracking, convex). `converged` is false when the iteration cap is hit
// before the gradient norm target, which happens for separable score sets.
struct LinearCalFit {
  double alpha = 1.0;
  double beta = 0.0;
  bool converged = false;
  double cllr_bits = 0.0;  // Cllr of the recalibrated scores at pi
};
LinearCalFit FitGlobalCal(const ScoreSet &scores, double pi,
                          int max_iters = 200, double grad_tol = 1e-9);

double MinCllrLinear(const ScoreSet &scores, double pi);

// Optimal monotone LLR transform via pool-adjacent-violators; equal scores
// are pooled first. Returned LLRs reference the data prior (block-count
// logits minus log(T/N)); pure blocks map to +/-1e30.
Vector PavLlrs(const ScoreSet &scores);

double MinCllrPav(const ScoreSet &scores, double pi);

// Bayes decision threshold for unity costs: log((1-p)/p).
double BayesThreshold(double p_target);

// p P_miss + (1-p) P_fa. Bayes mode thresholds at BayesThreshold(p)
// (accept when llr > t); min mode sweeps all thresholds.
double Dcf(const ScoreSet &scores, double p_target, bool minimum);

// Equal error rate from the ROC convex hull.
double RocchEer(const ScoreSet &scores);

struct MetricReport {
  double cllr_p5_act = 0, cllr_p5_min = 0;
  double cllr_p01_act = 0, cllr_p01_min = 0;
  double dcf_act = 0, dcf_min = 0;
  double eer = 0;
  std::size_t n_tgt = 0, n_imp = 0;
};

// Full report; min Cllr uses the linear-logistic-regression variant and DCF
// uses p_target = 0.01 with unity costs. Throws if any actual metric falls
// below its minimum beyond tolerance (invariant breach).
MetricReport Evaluate(const ScoreSet &scores);

}  // namespace dcaplda

#endif  // DCAPLDA_METRICS_HPP_
