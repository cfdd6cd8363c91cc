// include/dcaplda/plda.hpp

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

#ifndef DCAPLDA_PLDA_HPP_
#define DCAPLDA_PLDA_HPP_

#include <string>
#include <unordered_map>
#include <vector>

#include "dcaplda/common.hpp"
#include "dcaplda/data_model.hpp"

namespace dcaplda {

// Two-covariance model over length-normalized vectors w:
//   y ~ N(mu, B^-1),  w | y ~ N(y, W^-1)
// with B the between-speaker and W the within-speaker precision.
struct PldaModel {
  Vector mu;
  Matrix b;
  Matrix w;
  int Dim() const { return static_cast<int>(mu.size()); }
};

// Second-order score form:
//   s = 2 w1' Lambda w2 + w1' Gamma w1 + w2' Gamma w2 + (w1 + w2)' c + k
struct ScoreForm {
  Matrix lambda;
  Matrix gamma;
  Vector c;
  double k = 0.0;
  int Dim() const { return static_cast<int>(c.size()); }
};

// Training view of a preprocessed dataset: rows of w are samples, spk maps
// each row to a dense speaker index, spk_weight holds the per-speaker c_s.
// Speakers with fewer than min_samples samples are dropped with a warning.
struct SpeakerDataset {
  Matrix w;
  std::vector<int> spk;
  std::vector<double> spk_weight;
  int NumSpeakers() const { return static_cast<int>(spk_weight.size()); }
};

SpeakerDataset PrepareSpeakerDataset(
    const Matrix &w, const std::vector<SampleMeta> &metas,
    const std::unordered_map<std::string, double> &weights,
    int min_samples = 2);

struct SpdRepairOptions {
  // Floor eigenvalues at rel_floor * lambda_max after symmetrization.
  double rel_floor = 1e-10;
};

// Symmetrize and floor eigenvalues so Cholesky succeeds.
Matrix SpdRepair(const Matrix &a, const SpdRepairOptions &opts = {});

// Weighted sample-statistics initialization: mu0 is the weighted global
// mean, B0 the inverse weighted between-class scatter, W0 the inverse
// weighted within-class scatter, every sum normalized by sum_s c_s N_s.
// Scatter inverses are SPD-repaired.
PldaModel InitPlda(const SpeakerDataset &data,
                   const SpdRepairOptions &repair = {});

// One weighted EM step. Returns the updated model and the weighted marginal
// log-likelihood of the *input* model, so successive calls yield a
// non-decreasing sequence.
struct EmStepResult {
  PldaModel model;
  double loglike;
};
EmStepResult EmStep(const PldaModel &model, const SpeakerDataset &data);

struct EmOptions {
  int max_iters = 20;
  double rel_tol = 1e-7;
};

// Runs EM from `init` until max_iters or relative log-likelihood change
// below rel_tol. Optionally records the log-likelihood trace.
PldaModel RunEm(const PldaModel &init, const SpeakerDataset &data,
                const EmOptions &opts = {},
                std::vector<double> *loglike_trace = nullptr);

// Closed-form conversion of (mu, B, W) to the pairwise score polynomial.
ScoreForm ToScoreForm(const PldaModel &model);

// Scores every (row of w1) x (row of w2) pair, evaluated blockwise; blocks
// run in parallel and each output element is written once, so the result is
// schedule independent. ScorePairsRef is the naive serial reference.
Matrix ScorePairs(const ScoreForm &form, const Matrix &w1, const Matrix &w2,
                  int block = 1024);
Matrix ScorePairsRef(const ScoreForm &form, const Matrix &w1,
                     const Matrix &w2);

double ScorePair(const ScoreForm &form, const Eigen::Ref<const Vector> &w1,
                 const Eigen::Ref<const Vector> &w2);

// Direct evaluation of the defining log-likelihood ratio through the joint
// 2N-dimensional Gaussians of (w1, w2) under the same- and
// different-speaker hypotheses. Slow; used as the independent check of the
// closed-form score.
double OracleLlr(const PldaModel &model, const Eigen::Ref<const Vector> &w1,
                 const Eigen::Ref<const Vector> &w2);

}  // namespace dcaplda

#endif  // DCAPLDA_PLDA_HPP_
