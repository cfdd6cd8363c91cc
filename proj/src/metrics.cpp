// src/metrics.cpp

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

#include "dcaplda/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace dcaplda {

namespace {

constexpr double kPureBlockLlr = 1e30;

double Logit(double p) { return std::log(p / (1.0 - p)); }

void CheckPrior(double pi) {
  if (!(pi > 0.0) || !(pi < 1.0))
    throw ValidationError(ErrorCode::kInvalidArgument,
                          "prior must lie in (0, 1)");
}

}  // namespace

std::size_t ScoreSet::NumTargets() const {
  return static_cast<std::size_t>(
      std::count(labels.begin(), labels.end(), TrialLabel::kTarget));
}

std::size_t ScoreSet::NumImpostors() const {
  return labels.size() - NumTargets();
}

void ScoreSet::Validate() const {
  if (static_cast<std::size_t>(llrs.size()) != labels.size())
    throw ValidationError(ErrorCode::kDimensionMismatch,
                          "llr and label counts differ");
  std::size_t t = NumTargets();
  if (t == 0)
    throw ValidationError(ErrorCode::kNoValidTargets,
                          "score set has no target trials");
  if (t == labels.size())
    throw ValidationError(ErrorCode::kNoValidImpostors,
                          "score set has no impostor trials");
}

double WeightedCrossEntropyNats(const ScoreSet &scores, double pi) {
  CheckPrior(pi);
  scores.Validate();
  const double gamma = Logit(pi);
  double tgt_sum = 0.0, imp_sum = 0.0;
  std::size_t n_tgt = 0, n_imp = 0;
  for (Eigen::Index i = 0; i < scores.llrs.size(); ++i) {
    double u = scores.llrs(i) + gamma;
    if (scores.labels[i] == TrialLabel::kTarget) {
      tgt_sum += Softplus(-u);  // -log sigmoid(u)
      ++n_tgt;
    } else {
      imp_sum += Softplus(u);  // -log(1 - sigmoid(u))
      ++n_imp;
    }
  }
  return pi * tgt_sum / static_cast<double>(n_tgt) +
         (1.0 - pi) * imp_sum / static_cast<double>(n_imp);
}

double Cllr(const ScoreSet &scores, double pi) {
  return WeightedCrossEntropyNats(scores, pi) / std::log(2.0);
}

LinearCalFit FitGlobalCal(const ScoreSet &scores, double pi, int max_iters,
                          double grad_tol) {
  CheckPrior(pi);
  scores.Validate();
  const double gamma = Logit(pi);
  const double wt = pi / static_cast<double>(scores.NumTargets());
  const double wn = (1.0 - pi) / static_cast<double>(scores.NumImpostors());

  auto objective = [&](double a, double b) {
    double f = 0.0;
    for (Eigen::Index i = 0; i < scores.llrs.size(); ++i) {
      double u = a * scores.llrs(i) + b + gamma;
      f += scores.labels[i] == TrialLabel::kTarget ? wt * Softplus(-u)
                                                   : wn * Softplus(u);
    }
    return f;
  };

  double alpha = 1.0, beta = 0.0;
  double f = objective(alpha, beta);
  bool converged = false;
  for (int it = 0; it < max_iters; ++it) {
    double g_a = 0.0, g_b = 0.0, h_aa = 0.0, h_ab = 0.0, h_bb = 0.0;
    for (Eigen::Index i = 0; i < scores.llrs.size(); ++i) {
      const double s = scores.llrs(i);
      const double u = alpha * s + beta + gamma;
      const double p = Sigmoid(u);
      const double w =
          scores.labels[i] == TrialLabel::kTarget ? wt : wn;
      const double du =
          scores.labels[i] == TrialLabel::kTarget ? -w * (1.0 - p) : w * p;
      const double h = w * p * (1.0 - p);
      g_a += du * s;
      g_b += du;
      h_aa += h * s * s;
      h_ab += h * s;
      h_bb += h;
    }
    if (std::sqrt(g_a * g_a + g_b * g_b) < grad_tol) {
      converged = true;
      break;
    }
    // Damped 2x2 Newton step with backtracking.
    double damp = 1e-12 * std::max(h_aa + h_bb, 1.0);
    double det = (h_aa + damp) * (h_bb + damp) - h_ab * h_ab;
    double da, db;
    if (det > 0.0 && std::isfinite(det)) {
      da = -((h_bb + damp) * g_a - h_ab * g_b) / det;
      db = -(-h_ab * g_a + (h_aa + damp) * g_b) / det;
    } else {
      da = -g_a;
      db = -g_b;
    }
    double step = 1.0;
    for (int ls = 0; ls < 60; ++ls) {
      double f_new = objective(alpha + step * da, beta + step * db);
      if (f_new <= f) {
        alpha += step * da;
        beta += step * db;
        f = f_new;
        break;
      }
      step *= 0.5;
    }
  }

  LinearCalFit fit;
  fit.alpha = alpha;
  fit.beta = beta;
  fit.converged = converged;
  fit.cllr_bits = f / std::log(2.0);
  return fit;
}

double MinCllrLinear(const ScoreSet &scores, double pi) {
  return FitGlobalCal(scores, pi).cllr_bits;
}

// PAV blocks over scores sorted ascending, with tied scores pre-pooled.
namespace {

struct PavBlock {
  double tgt = 0.0;
  double imp = 0.0;
  double Posterior() const { return tgt / (tgt + imp); }
};

// Returns pooled blocks plus, for each trial, its block index.
std::vector<PavBlock> PavFit(const ScoreSet &scores,
                             std::vector<int> *block_of_trial) {
  const std::size_t n = scores.labels.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) {
                     return scores.llrs(a) < scores.llrs(b);
                   });

  // Atoms: runs of equal score.
  std::vector<PavBlock> blocks;
  std::vector<int> atom_of_trial(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    PavBlock atom;
    while (j < n && scores.llrs(order[j]) == scores.llrs(order[i])) {
      if (scores.labels[order[j]] == TrialLabel::kTarget)
        atom.tgt += 1.0;
      else
        atom.imp += 1.0;
      atom_of_trial[order[j]] = static_cast<int>(blocks.size());
      ++j;
    }
    blocks.push_back(atom);
    i = j;
  }

  // Merge adjacent violators; posteriors must be non-decreasing with score.
  std::vector<PavBlock> stack;
  std::vector<int> first_atom;  // first atom index covered by stack block
  for (std::size_t a = 0; a < blocks.size(); ++a) {
    stack.push_back(blocks[a]);
    first_atom.push_back(static_cast<int>(a));
    while (stack.size() > 1 &&
           stack[stack.size() - 2].Posterior() >=
               stack[stack.size() - 1].Posterior()) {
      stack[stack.size() - 2].tgt += stack.back().tgt;
      stack[stack.size() - 2].imp += stack.back().imp;
      stack.pop_back();
      first_atom.pop_back();
    }
  }
  if (block_of_trial) {
    // Map each atom to its pooled block.
    std::vector<int> pooled_of_atom(blocks.size());
    for (std::size_t b = 0; b < stack.size(); ++b) {
      std::size_t a_end = b + 1 < stack.size()
                              ? static_cast<std::size_t>(first_atom[b + 1])
                              : blocks.size();
      for (std::size_t a = first_atom[b]; a < a_end; ++a)
        pooled_of_atom[a] = static_cast<int>(b);
    }
    block_of_trial->resize(n);
    for (std::size_t i = 0; i < n; ++i)
      (*block_of_trial)[i] = pooled_of_atom[atom_of_trial[i]];
  }
  return stack;
}

}  // namespace

Vector PavLlrs(const ScoreSet &scores) {
  scores.Validate();
  std::vector<int> block_of_trial;
  std::vector<PavBlock> blocks = PavFit(scores, &block_of_trial);
  const double prior_logit =
      std::log(static_cast<double>(scores.NumTargets()) /
               static_cast<double>(scores.NumImpostors()));
  std::vector<double> block_llr(blocks.size());
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    if (blocks[b].imp == 0.0)
      block_llr[b] = kPureBlockLlr;
    else if (blocks[b].tgt == 0.0)
      block_llr[b] = -kPureBlockLlr;
    else
      block_llr[b] =
          std::log(blocks[b].tgt / blocks[b].imp) - prior_logit;
  }
  Vector out(scores.llrs.size());
  for (Eigen::Index i = 0; i < out.size(); ++i)
    out(i) = block_llr[block_of_trial[i]];
  return out;
}

double MinCllrPav(const ScoreSet &scores, double pi) {
  ScoreSet recal;
  recal.llrs = PavLlrs(scores);
  recal.labels = scores.labels;
  return Cllr(recal, pi);
}

double BayesThreshold(double p_target) {
  CheckPrior(p_target);
  return std::log((1.0 - p_target) / p_target);
}

double Dcf(const ScoreSet &scores, double p_target, bool minimum) {
  CheckPrior(p_target);
  scores.Validate();
  const double n_tgt = static_cast<double>(scores.NumTargets());
  const double n_imp = static_cast<double>(scores.NumImpostors());
  auto cost_at = [&](double t) {
    double miss = 0.0, fa = 0.0;
    for (Eigen::Index i = 0; i < scores.llrs.size(); ++i) {
      if (scores.labels[i] == TrialLabel::kTarget) {
        if (!(scores.llrs(i) > t)) miss += 1.0;
      } else {
        if (scores.llrs(i) > t) fa += 1.0;
      }
    }
    return p_target * miss / n_tgt + (1.0 - p_target) * fa / n_imp;
  };
  if (!minimum) return cost_at(BayesThreshold(p_target));

  // Sweep: thresholds between consecutive distinct scores plus both ends.
  std::vector<double> sorted(scores.llrs.data(),
                             scores.llrs.data() + scores.llrs.size());
  std::sort(sorted.begin(), sorted.end());
  // Cumulative pass over the sorted scores is O(n); recompute via sorted
  // label order instead of calling cost_at per candidate.
  std::vector<std::size_t> order(scores.labels.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores.llrs(a) < scores.llrs(b);
  });
  // Threshold below everything: accept all.
  double miss = 0.0, fa = n_imp;
  double best = p_target * miss / n_tgt + (1.0 - p_target) * fa / n_imp;
  for (std::size_t i = 0; i < order.size();) {
    // Move threshold just above scores[order[i]] (and any ties).
    std::size_t j = i;
    while (j < order.size() &&
           scores.llrs(order[j]) == scores.llrs(order[i])) {
      if (scores.labels[order[j]] == TrialLabel::kTarget)
        miss += 1.0;
      else
        fa -= 1.0;
      ++j;
    }
    best = std::min(best,
                    p_target * miss / n_tgt + (1.0 - p_target) * fa / n_imp);
    i = j;
  }
  return best;
}

double RocchEer(const ScoreSet &scores) {
  scores.Validate();
  std::vector<PavBlock> blocks = PavFit(scores, nullptr);
  const double n_tgt = static_cast<double>(scores.NumTargets());
  const double n_imp = static_cast<double>(scores.NumImpostors());
  // Hull vertices as the threshold passes each block boundary (ascending
  // score): rejecting blocks 0..j-1 gives
  //   P_miss = sum_{b<j} tgt_b / T,  P_fa = sum_{b>=j} imp_b / N.
  double miss = 0.0;
  double fa = n_imp;
  double prev_miss = 0.0, prev_fa = 1.0;
  prev_miss = miss / n_tgt;
  prev_fa = fa / n_imp;
  for (std::size_t b = 0; b <= blocks.size(); ++b) {
    double pm = miss / n_tgt;
    double pf = fa / n_imp;
    if (b > 0) {
      // Segment from (prev_miss, prev_fa) to (pm, pf); find crossing with
      // the pm == pf diagonal.
      double d0 = prev_fa - prev_miss;
      double d1 = pf - pm;
      if (d0 >= 0.0 && d1 <= 0.0) {
        double denom = d0 - d1;
        double lambda = denom > 0.0 ? d0 / denom : 0.0;
        return prev_miss + lambda * (pm - prev_miss);
      }
    }
    prev_miss = pm;
    prev_fa = pf;
    if (b < blocks.size()) {
      miss += blocks[b].tgt;
      fa -= blocks[b].imp;
    }
  }
  return 0.0;  // hull never crossed the diagonal: perfect separation
}

MetricReport Evaluate(const ScoreSet &scores) {
  MetricReport r;
  r.n_tgt = scores.NumTargets();
  r.n_imp = scores.NumImpostors();
  r.cllr_p5_act = Cllr(scores, 0.5);
  r.cllr_p5_min = MinCllrLinear(scores, 0.5);
  r.cllr_p01_act = Cllr(scores, 0.01);
  r.cllr_p01_min = MinCllrLinear(scores, 0.01);
  r.dcf_act = Dcf(scores, 0.01, false);
  r.dcf_min = Dcf(scores, 0.01, true);
  r.eer = RocchEer(scores);
  const double tol = 1e-10;
  if (r.cllr_p5_act < r.cllr_p5_min - tol ||
      r.cllr_p01_act < r.cllr_p01_min - tol || r.dcf_act < r.dcf_min - tol)
    throw NumericalError(ErrorCode::kInvalidArgument,
                         "actual metric below minimum (invariant breach)");
  return r;
}

}  // namespace dcaplda
