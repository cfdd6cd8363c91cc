// include/dcaplda/backend.hpp

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

#ifndef DCAPLDA_BACKEND_HPP_
#define DCAPLDA_BACKEND_HPP_

#include <optional>
#include <string>
#include <vector>

#include "dcaplda/calibration.hpp"
#include "dcaplda/common.hpp"
#include "dcaplda/data_model.hpp"
#include "dcaplda/plda.hpp"
#include "dcaplda/preproc.hpp"

namespace dcaplda {

// Naming follows the usual convention: plda is the generative backend;
// d-plda trains everything discriminatively; suffixes select the
// condition-dependent calibration stages.
enum class Architecture { kPlda, kDPlda, kDPldaDd, kDPldaSd, kDPldaDsd };

Architecture ParseArchitecture(const std::string &name);
const char *ArchitectureName(Architecture arch);
CalStage StageFor(Architecture arch);

// Every parameter of the scoring pipeline. The PLDA generative parameters
// are kept alongside the derived score form for provenance and for the
// LLR oracle.
struct BackendParams {
  PreprocParams preproc;
  PldaModel plda;
  ScoreForm score;
  CalStage stage = CalStage::kGlobal;
  GlobalCal global;
  std::optional<DurationCal> dur;
  std::optional<SideInfoCal> side;
  // Scores are cohort-normalized before calibration when snorm_top > 0.
  int snorm_top = 0;

  int EmbeddingDim() const { return preproc.InDim(); }
};

// Per-sample forward quantities, cached so each sample is transformed once
// regardless of how many trials it appears in. Pre-norm magnitudes are kept
// for backpropagation through the length normalizations.
struct SampleCache {
  Matrix w;        // n x N
  Vector w_unorm;  // ||A_p x + m_p||
  Matrix m;        // n x M (side branch, before f)
  Vector m_unorm;
  Matrix z;        // n x S
  Matrix e;        // n x feature_dim (duration features)
};

// durations may be empty when the stage does not use them.
SampleCache PrepareSamples(const BackendParams &params, const Matrix &x_raw,
                           const Vector &durations);

struct TrialScores {
  Vector s;        // raw PLDA score
  Vector g;        // after duration stage (equals l when no side stage)
  Vector l;        // calibrated LLR
  Vector alpha_d, beta_d, alpha_s, beta_s;
};

// Forward pass over an explicit trial list; chunk-parallel with results
// written elementwise. ForwardTrialsRef is the per-trial serial reference
// built from the scalar ops.
TrialScores ForwardTrials(const BackendParams &params, const SampleCache &cache,
                          const TrialSet &trials);
TrialScores ForwardTrialsRef(const BackendParams &params,
                             const SampleCache &cache, const TrialSet &trials);

struct ModelDims {
  int embedding_dim = 512;
  int lda_dim = 300;
  int side_m_dim = 200;
  int side_s_dim = 6;
  int dur_feature_dim = 2;  // wlog
};

// Model size per architecture: LDA + score form + the calibration stages the
// architecture uses. Matrices count as full squares.
long long CountParameters(Architecture arch, const ModelDims &dims);

// A named view into one trainable parameter group, used by the optimizer,
// the gradient buffer and the finite-difference tests. `group` tags the L2
// regularization group.
struct ParamRef {
  std::string name;
  std::string group;
  double *data = nullptr;
  std::size_t size = 0;
};

// Trainable parameters of `params` for the given architecture, in a fixed
// order. freeze_backbone drops the preprocessing and score-form groups,
// leaving only calibration stages trainable.
std::vector<ParamRef> TrainableParams(BackendParams &params, Architecture arch,
                                      bool freeze_backbone);

std::size_t TotalSize(const std::vector<ParamRef> &refs);
std::vector<double> FlattenParams(const std::vector<ParamRef> &refs);
void UnflattenParams(const std::vector<double> &flat,
                     const std::vector<ParamRef> &refs);

}  // namespace dcaplda

#endif  // DCAPLDA_BACKEND_HPP_
