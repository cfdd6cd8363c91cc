// include/dcaplda/training.hpp

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

#ifndef DCAPLDA_TRAINING_HPP_
#define DCAPLDA_TRAINING_HPP_

#include <cstdint>
#include <limits>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "dcaplda/backend.hpp"
#include "dcaplda/common.hpp"
#include "dcaplda/data_model.hpp"

namespace dcaplda {

enum class BatchMethod { kPlain, kDomainBalanced };

BatchMethod ParseBatchMethod(const std::string &name);

struct BatchSpec {
  int batch_size = 2048;  // even
  BatchMethod method = BatchMethod::kDomainBalanced;
};

// Training samples organized by domain / speaker / session. Speakers with
// fewer than two sessions are dropped with a warning; a batch speaker must
// contribute two distinct sessions.
struct TrainingPool {
  Matrix x;    // raw embeddings, one row per kept sample
  Vector dur;  // seconds
  std::vector<SampleMeta> metas;
  std::vector<std::string> domains;
  std::vector<std::string> spk_ids;
  std::vector<int> spk_domain;
  std::vector<std::vector<std::vector<std::uint32_t>>> spk_session_rows;
  std::vector<std::vector<std::uint32_t>> domain_speakers;

  int NumSpeakers() const { return static_cast<int>(spk_ids.size()); }
  int NumDomains() const { return static_cast<int>(domains.size()); }
};

TrainingPool BuildPool(const EmbeddingTable &table,
                       const std::vector<SampleMeta> &metas);

// Speaker weights c_s: all ones, or the inverse of the speaker count of the
// speaker's domain (balanced-by-domain).
std::unordered_map<std::string, double> FlatSpeakerWeights(
    const TrainingPool &pool);
std::unordered_map<std::string, double> BalancedSpeakerWeights(
    const TrainingPool &pool);

// Randomly ordered list traversed with a cursor; reshuffled and restarted
// when exhausted, so each item is visited approximately equally often.
struct RotationList {
  std::vector<std::uint32_t> items;
  std::uint32_t pos = 0;
};

struct BatchCursors {
  RotationList all_speakers;                          // plain method
  std::vector<RotationList> domain_speakers;          // balanced method
  std::vector<std::vector<RotationList>> spk_sessions;  // [spk] over sessions
  std::vector<std::vector<RotationList>> sess_samples;  // [spk][sess]
  std::mt19937_64 rng;
};

BatchCursors InitCursors(const TrainingPool &pool, std::uint64_t seed);

struct Batch {
  std::vector<std::uint32_t> rows;  // into pool
  TrialSet trials;                  // indices into rows
};

// N/2 speakers (balanced: N/(2 D) per domain), two distinct sessions each,
// one sample per session; trials are all pairs with the usual masking.
Batch MakeBatch(const TrainingPool &pool, const BatchSpec &spec,
                BatchCursors *cursors);

// Prior-weighted cross-entropy over the valid trials of a set, in nats.
double WeightedXentLoss(const Vector &llrs, const TrialSet &trials, double pi);
// dLoss/dllr per trial; zero on masked trials.
Vector WeightedXentGrad(const Vector &llrs, const TrialSet &trials, double pi);

// Forward plus exact backward pass through the whole backend. Gradients are
// written into grad (resized to TotalSize(refs)), matching the layout of the
// flattened refs; refs must view `params`. Returns the loss in nats.
double LossAndGradients(const BackendParams &params,
                        const std::vector<ParamRef> &refs, const Matrix &x,
                        const Vector &dur, const TrialSet &trials, double pi,
                        std::vector<double> *grad);

struct TrainConfig {
  long long stage1_batches = 12000;
  long long stage2_batches = 3000;
  long long stage3_batches = 100;
  double lr1 = 0.0005;
  double lr2 = 0.001;
  double lr3 = 0.00001;
  double pi = 0.01;
  double l2_weight = 1e-4;
  std::map<std::string, double> l2_group_weights;  // overrides by group
  double grad_clip_norm = 4.0;
  int n_seeds = 1;
  std::uint64_t seed = 0;
  BatchSpec batch;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  bool freeze_backbone = false;
};

struct InitOptions {
  int lda_dim = 300;
  int side_m_dim = 200;
  int side_s_dim = 6;
  SideInfoTransform side_f = SideInfoTransform::kIdentity;
  DurationFeatureKind dur_kind = DurationFeatureKind::kWlog;
  std::vector<double> bin_edges = {8, 16, 32, 64, 128};
  double wlog_center_s = 30.0;
  double wlog_slope = 2.0;
  EmOptions em;
  FitLdaOptions lda;
  int cal_speakers = 1000;  // speakers used for global calibration init
  double side_init_std = 0.5;
};

// Seed-independent part of the initialization: weighted LDA basis, PLDA
// init plus EM, score form, and the global calibration fitted by logistic
// regression on trials from cal_speakers speakers.
struct GenerativeInit {
  LdaBasis basis;
  PreprocParams preproc;
  PldaModel plda;
  ScoreForm score;
  GlobalCal global_cal;
};

GenerativeInit FitGenerativeInit(
    const TrainingPool &pool,
    const std::unordered_map<std::string, double> &speaker_weights,
    const InitOptions &opts, const TrainConfig &config);

// Raw scores and labels of the valid all-pairs trials over cal_speakers
// speakers (selected deterministically from the seed), as used to fit the
// global calibration. Row indices into the pool are kept per side so the
// scores can be cohort-normalized before refitting.
struct CalTrialScores {
  Vector s;
  std::vector<TrialLabel> labels;
  std::vector<std::uint32_t> enroll_rows;
  std::vector<std::uint32_t> test_rows;
};
CalTrialScores CalibrationTrials(const TrainingPool &pool,
                                 const PreprocParams &preproc,
                                 const ScoreForm &score, int cal_speakers,
                                 std::uint64_t seed);

// Wires the architecture: calibration blocks start at zero except the pass-
// through/global k values; the side branch A_m/b_m come from the last M LDA
// dimensions and A_z/b_z are drawn N(0, side_init_std^2) from the seed. At
// this point every architecture scores identically to PLDA plus global
// calibration.
BackendParams AssembleInit(const GenerativeInit &gen, Architecture arch,
                           const InitOptions &opts, std::uint64_t seed);

struct DevSet {
  std::string name;
  Matrix x;
  Vector dur;
  TrialSet trials;
};

// Mean actual Cllr at pi = 0.01 (bits) over the dev sets.
double DevMetric(const BackendParams &params, const std::vector<DevSet> &devs);

struct TrainLogRow {
  int stage = 0;
  long long batch = 0;
  double train_loss = 0.0;
  std::vector<double> dev;  // per dev set, empty in stage 1
  double grad_norm = 0.0;
};

struct AdamState {
  std::vector<double> m, v;
  long long t = 0;
};

// Incremental trainer; the whole state is serializable so training is
// resumable and checkpoints carry cursor state and optimizer moments.
struct TrainerState {
  Architecture arch = Architecture::kDPldaDsd;
  TrainConfig config;
  BackendParams params;
  std::vector<double> anchor;  // L2 pulls parameters toward initialization
  AdamState adam;
  BatchCursors cursors;
  int stage = 1;
  long long iter = 0;
  double best2 = std::numeric_limits<double>::infinity();
  std::vector<double> best2_params;
  AdamState best2_adam;
  double best3 = std::numeric_limits<double>::infinity();
  std::vector<double> best3_params;
  std::vector<TrainLogRow> log;
  std::uint64_t seed = 0;
  bool done = false;
};

TrainerState InitTrainer(const TrainingPool &pool, BackendParams init,
                         Architecture arch, const TrainConfig &config,
                         std::uint64_t seed);

// Advances one minibatch update (running stage transitions as needed).
// Returns false once training is complete.
bool TrainStep(TrainerState *state, const TrainingPool &pool,
               const std::vector<DevSet> &devs);

// Final model: the dev-argmin checkpoint of stage 3.
BackendParams FinishTraining(const TrainerState &state);

struct SeedResult {
  std::uint64_t seed = 0;
  double dev_metric = 0.0;
};

struct TrainOutput {
  BackendParams params;
  std::vector<TrainLogRow> log;  // log of the winning seed
  double best_dev = 0.0;
  std::uint64_t best_seed = 0;
  std::vector<SeedResult> seed_results;
};

// Full training: n_seeds runs with seeds config.seed + i, each re-drawing
// the side-branch projection and the batch order; returns the per-seed
// dev-metric argmin.
TrainOutput TrainBackend(const TrainingPool &pool,
                         const std::vector<DevSet> &devs,
                         const GenerativeInit &gen, Architecture arch,
                         const InitOptions &opts, const TrainConfig &config);

}  // namespace dcaplda

#endif  // DCAPLDA_TRAINING_HPP_
