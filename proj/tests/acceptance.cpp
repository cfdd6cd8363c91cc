// tests/acceptance.cpp

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

// End-to-end acceptance suite. Each criterion prints a single PASS/FAIL
// line; the process exits nonzero if any requested criterion fails.
// Usage: acceptance [criterion numbers...]   (default: all)

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "dcaplda/asnorm.hpp"
#include "dcaplda/backend.hpp"
#include "dcaplda/cli.hpp"
#include "dcaplda/metrics.hpp"
#include "dcaplda/model_io.hpp"
#include "dcaplda/synth.hpp"
#include "dcaplda/training.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace dcaplda;
using testutil::TempDir;

namespace {

struct Check {
  bool ok = true;
  std::string detail;

  void Expect(bool cond, const std::string &what) {
    if (!cond) {
      ok = false;
      if (!detail.empty()) detail += "; ";
      detail += what;
    }
  }
  void Info(const std::string &what) {
    if (!detail.empty()) detail += "; ";
    detail += what;
  }
};

std::string Fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.5g", v);
  return buf;
}

// ---------------------------------------------------------------------------
// Criterion 1: exact parameter counts of the standard configuration.

void Criterion1(Check *c) {
  ModelDims dims;  // D=512, N=300, M=200, S=6, wlog
  long long plda = CountParameters(Architecture::kPlda, dims);
  long long dplda = CountParameters(Architecture::kDPlda, dims);
  long long dd = CountParameters(Architecture::kDPldaDd, dims);
  long long dsd = CountParameters(Architecture::kDPldaDsd, dims);
  c->Expect(plda == 334203, "plda=" + std::to_string(plda));
  c->Expect(dplda == 334203, "d-plda=" + std::to_string(dplda));
  c->Expect(dd == 334223, "d-plda-dd=" + std::to_string(dd));
  c->Expect(dsd == 438187, "d-plda-dsd=" + std::to_string(dsd));
  c->Expect(dsd - dd == 103964, "increment=" + std::to_string(dsd - dd));
}

// ---------------------------------------------------------------------------
// Criterion 2: closed-form score vs joint-Gaussian oracle.

void Criterion2(Check *c) {
  std::mt19937_64 rng(201);
  double worst = 0.0;
  int models = 0;
  for (int dim : {1, 2, 4, 8}) {
    for (int rep = 0; rep < 50; ++rep) {
      PldaModel model = testutil::RandomPldaModel(rng, dim);
      ScoreForm form = ToScoreForm(model);
      for (int p = 0; p < 50; ++p) {
        Vector w1 = testutil::RandomVector(rng, dim).normalized();
        Vector w2 = testutil::RandomVector(rng, dim).normalized();
        worst = std::max(worst, std::abs(ScorePair(form, w1, w2) -
                                         OracleLlr(model, w1, w2)));
      }
      ++models;
    }
  }
  c->Expect(models == 200, "model count");
  c->Expect(worst < 1e-8, "max |score - oracle| = " + Fmt(worst));
}

// ---------------------------------------------------------------------------
// Criterion 3: initialization equivalence over 1e5 synthetic trials.

void Criterion3(Check *c) {
  SynthSpec spec;
  spec.dim = 20;
  spec.speakers_per_domain = 80;
  spec.sessions_per_speaker = 3;
  spec.samples_per_session = 2;
  DomainProfile dom;
  dom.dur_lo_s = 4;
  dom.dur_hi_s = 120;
  dom.dur_exponent = 0.5;
  spec.domains = {dom};
  spec.rng_seed = 303;
  SynthCorpus corpus = Generate(spec);
  TrainingPool pool = BuildPool(corpus.table, corpus.metas);

  InitOptions opts;
  opts.lda_dim = 12;
  opts.side_m_dim = 8;
  opts.side_s_dim = 3;
  TrainConfig tcfg;
  tcfg.seed = 5;
  GenerativeInit gen =
      FitGenerativeInit(pool, FlatSpeakerWeights(pool), opts, tcfg);
  BackendParams dca = AssembleInit(gen, Architecture::kDPldaDsd, opts, 5);
  BackendParams plda = AssembleInit(gen, Architecture::kPlda, opts, 5);

  TrialSet trials = BuildTrialsAllPairs(pool.metas);
  c->Expect(trials.NumTrials() >= 100000,
            "only " + std::to_string(trials.NumTrials()) + " trials");
  SampleCache cache_d = PrepareSamples(dca, pool.x, pool.dur);
  SampleCache cache_p = PrepareSamples(plda, pool.x, pool.dur);
  TrialScores fw_d = ForwardTrials(dca, cache_d, trials);
  TrialScores fw_p = ForwardTrials(plda, cache_p, trials);
  double worst = (fw_d.l - fw_p.l).cwiseAbs().maxCoeff();
  c->Expect(worst < 1e-10, "max |llr diff| = " + Fmt(worst));
}

// ---------------------------------------------------------------------------
// Criterion 4: gradients vs central finite differences on a 16-trial batch.

void Criterion4(Check *c) {
  std::mt19937_64 rng(404);
  const int d = 10, n = 6, m = 5, s = 3;
  const int n_samples = 8;
  Matrix x = testutil::RandomGaussian(rng, n_samples, d);
  Vector dur(n_samples);
  std::uniform_real_distribution<double> uni(4.0, 120.0);
  for (int i = 0; i < n_samples; ++i) dur(i) = uni(rng);
  std::vector<SampleMeta> metas;
  for (int i = 0; i < n_samples; ++i)
    metas.push_back({"u" + std::to_string(i), "spk" + std::to_string(i / 4),
                     "sess" + std::to_string(i / 2), "dom", dur(i)});
  TrialSet all = BuildTrialsAllPairs(metas);
  // Keep exactly 16 valid trials: 8 targets, 8 impostors.
  TrialSet trials;
  trials.ids = all.ids;
  int kept_tgt = 0, kept_imp = 0;
  for (std::size_t i = 0; i < all.NumTrials(); ++i) {
    if (all.mask[i] != TrialMask::kValid) continue;
    bool tgt = all.labels[i] == TrialLabel::kTarget;
    if ((tgt && kept_tgt >= 8) || (!tgt && kept_imp >= 8)) continue;
    (tgt ? kept_tgt : kept_imp)++;
    trials.enroll.push_back(all.enroll[i]);
    trials.test.push_back(all.test[i]);
    trials.labels.push_back(all.labels[i]);
    trials.mask.push_back(TrialMask::kValid);
  }
  c->Expect(trials.NumTrials() == 16,
            "batch has " + std::to_string(trials.NumTrials()) + " trials");

  BackendParams params;
  params.preproc.a_p = testutil::RandomGaussian(rng, n, d, 0.4);
  params.preproc.m_p = testutil::RandomVector(rng, n, 0.1);
  params.plda = testutil::RandomPldaModel(rng, n);
  params.score = ToScoreForm(params.plda);
  params.stage = CalStage::kDurationSideInfo;
  DurationCal dcal;
  dcal.alpha = PolyBlock(2);
  dcal.beta = PolyBlock(2);
  dcal.alpha.lambda = Symmetrize(testutil::RandomGaussian(rng, 2, 2, 0.05));
  dcal.alpha.gamma = Symmetrize(testutil::RandomGaussian(rng, 2, 2, 0.05));
  dcal.alpha.c = testutil::RandomVector(rng, 2, 0.05);
  dcal.alpha.k = 0.8;
  dcal.beta.lambda = Symmetrize(testutil::RandomGaussian(rng, 2, 2, 0.05));
  dcal.beta.gamma = Symmetrize(testutil::RandomGaussian(rng, 2, 2, 0.05));
  dcal.beta.c = testutil::RandomVector(rng, 2, 0.05);
  dcal.beta.k = -0.1;
  params.dur = dcal;
  SideInfoCal side;
  side.a_m = testutil::RandomGaussian(rng, m, d, 0.4);
  side.b_m = testutil::RandomVector(rng, m, 0.1);
  side.a_z = testutil::RandomGaussian(rng, s, m, 0.5);
  side.b_z = testutil::RandomVector(rng, s, 0.5);
  side.alpha = PolyBlock(s);
  side.beta = PolyBlock(s);
  side.alpha.lambda = Symmetrize(testutil::RandomGaussian(rng, s, s, 0.05));
  side.alpha.gamma = Symmetrize(testutil::RandomGaussian(rng, s, s, 0.05));
  side.alpha.c = testutil::RandomVector(rng, s, 0.05);
  side.alpha.k = 1.1;
  side.beta.lambda = Symmetrize(testutil::RandomGaussian(rng, s, s, 0.05));
  side.beta.gamma = Symmetrize(testutil::RandomGaussian(rng, s, s, 0.05));
  side.beta.c = testutil::RandomVector(rng, s, 0.05);
  side.beta.k = -0.2;
  params.side = side;

  std::vector<ParamRef> refs =
      TrainableParams(params, Architecture::kDPldaDsd, false);
  std::vector<double> grad;
  const double pi = 0.1;
  LossAndGradients(params, refs, x, dur, trials, pi, &grad);

  const double h = 1e-5;
  std::size_t off = 0;
  for (const auto &r : refs) {
    double worst = 0.0;
    for (std::size_t i = 0; i < r.size; ++i) {
      double saved = r.data[i];
      double step = h * std::max(1.0, std::abs(saved));
      r.data[i] = saved + step;
      double up = LossAndGradients(params, refs, x, dur, trials, pi, nullptr);
      r.data[i] = saved - step;
      double dn = LossAndGradients(params, refs, x, dur, trials, pi, nullptr);
      r.data[i] = saved;
      double fd = (up - dn) / (2.0 * step);
      double rel = std::abs(fd - grad[off + i]) /
                   std::max({std::abs(fd), std::abs(grad[off + i]), 1e-6});
      worst = std::max(worst, rel);
    }
    c->Expect(worst < 1e-4, r.name + " rel err " + Fmt(worst));
    off += r.size;
  }
}

// ---------------------------------------------------------------------------
// Criterion 5: metric fixed points.

void Criterion5(Check *c) {
  ScoreSet zeros;
  zeros.llrs = Vector::Zero(10);
  for (int i = 0; i < 10; ++i)
    zeros.labels.push_back(i < 5 ? TrialLabel::kTarget
                                 : TrialLabel::kImpostor);
  c->Expect(std::abs(Cllr(zeros, 0.5) - 1.0) < 1e-12,
            "Cllr(0)=" + Fmt(Cllr(zeros, 0.5)));
  c->Expect(std::abs(BayesThreshold(0.01) - std::log(99.0)) < 1e-12,
            "threshold=" + Fmt(BayesThreshold(0.01)));

  // PAV vs the exhaustive isotonic oracle on every labeling of small sets.
  std::mt19937_64 rng(505);
  std::uniform_real_distribution<double> uni(-2.0, 2.0);
  double worst = 0.0;
  for (int size = 2; size <= 8; ++size) {
    for (int labels = 1; labels < (1 << size) - 1; ++labels) {
      ScoreSet set;
      set.llrs.resize(size);
      for (int i = 0; i < size; ++i) {
        set.llrs(i) = std::round(uni(rng) * 4.0) / 4.0;  // ties likely
        set.labels.push_back(((labels >> i) & 1) ? TrialLabel::kTarget
                                                 : TrialLabel::kImpostor);
      }
      for (double pi : {0.5, 0.01}) {
        worst = std::max(worst, std::abs(MinCllrPav(set, pi) -
                                         testutil::BruteForceMinCllr(set, pi)));
      }
    }
  }
  c->Expect(worst < 1e-10, "max |pav - oracle| = " + Fmt(worst));
}

// ---------------------------------------------------------------------------
// Criterion 6: EM sanity.

void Criterion6(Check *c) {
  std::mt19937_64 rng(606);
  double worst_drop = 0.0;
  for (int rep = 0; rep < 20; ++rep) {
    std::uniform_int_distribution<int> dim_dist(2, 6);
    std::uniform_int_distribution<int> spk_dist(20, 60);
    int dim = dim_dist(rng);
    PldaModel truth = testutil::RandomPldaModel(rng, dim);
    SpeakerDataset data =
        testutil::SampleFromModel(rng, truth, spk_dist(rng), 4);
    std::vector<double> trace;
    RunEm(InitPlda(data), data, {.max_iters = 20, .rel_tol = 0.0}, &trace);
    for (std::size_t i = 1; i < trace.size(); ++i) {
      double slack = 1e-8 * std::max(1.0, std::abs(trace[i - 1]));
      worst_drop = std::max(worst_drop, trace[i - 1] - trace[i] - slack);
    }
  }
  c->Expect(worst_drop <= 0.0,
            "log-likelihood dropped by " + Fmt(worst_drop));

  // Integer weight c_s = 2 equals duplicating the speaker.
  PldaModel truth = testutil::RandomPldaModel(rng, 4);
  SpeakerDataset data = testutil::SampleFromModel(rng, truth, 6, 5);
  SpeakerDataset weighted = data;
  weighted.spk_weight[1] = 2.0;
  SpeakerDataset duplicated = data;
  {
    std::vector<Eigen::Index> rows;
    for (Eigen::Index i = 0; i < data.w.rows(); ++i)
      if (data.spk[i] == 1) rows.push_back(i);
    duplicated.w.conservativeResize(data.w.rows() + rows.size(), 4);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      duplicated.w.row(data.w.rows() + i) = data.w.row(rows[i]);
      duplicated.spk.push_back(6);
    }
    duplicated.spk_weight.push_back(1.0);
  }
  PldaModel mw = InitPlda(weighted);
  PldaModel md = InitPlda(duplicated);
  double diff = std::max({(mw.mu - md.mu).cwiseAbs().maxCoeff(),
                          (mw.b - md.b).cwiseAbs().maxCoeff(),
                          (mw.w - md.w).cwiseAbs().maxCoeff()});
  c->Expect(diff < 1e-10, "weighting vs duplication diff " + Fmt(diff));
}

// ---------------------------------------------------------------------------
// Criteria 7 and 8 share a synthetic world: three training domains plus one
// held-out domain with a shifted duration range and its own condition shift.

struct World {
  SynthCorpus corpus;
  TrainingPool pool;                 // training-domain speakers
  std::vector<DevSet> dev_heldin;    // training-domain held-out speakers
  std::vector<DevSet> dev_heldout;   // held-out-domain dev speakers
  std::vector<DevSet> dev_combined;  // both
  // Evaluation splits.
  Matrix eval_x;
  Vector eval_dur;
  TrialSet eval_trials;  // held-out domain, disjoint speakers
  Matrix mm_x;           // duration-mismatched split (training domains,
  Vector mm_dur;         //   held-out speakers, re-chunked to 3-12 s)
  TrialSet mm_trials;

  InitOptions opts;
  TrainConfig tcfg;
};

DevSet MakeDevSet(const SynthCorpus &corpus,
                  const std::vector<SampleMeta> &metas,
                  const std::string &name) {
  DevSet dev;
  dev.name = name;
  dev.trials = BuildTrialsAllPairs(metas);
  dev.x.resize(static_cast<Eigen::Index>(metas.size()), corpus.table.Dim());
  dev.dur.resize(static_cast<Eigen::Index>(metas.size()));
  for (std::size_t i = 0; i < metas.size(); ++i) {
    dev.x.row(static_cast<Eigen::Index>(i)) =
        corpus.table.x.row(corpus.table.RowOf(metas[i].sample_id));
    dev.dur(static_cast<Eigen::Index>(i)) = metas[i].duration_s;
  }
  return dev;
}

// Index of a speaker within its domain, derived from generation order.
std::unordered_map<std::string, int> SpeakerOrdinals(
    const std::vector<SampleMeta> &metas) {
  std::unordered_map<std::string, int> ordinal;
  std::unordered_map<std::string, int> per_domain;
  for (const auto &m : metas) {
    if (ordinal.count(m.speaker_id)) continue;
    ordinal[m.speaker_id] = per_domain[m.domain_id]++;
  }
  return ordinal;
}

World BuildWorld() {
  SynthSpec spec;
  spec.dim = 20;
  spec.speakers_per_domain = 44;
  spec.sessions_per_speaker = 3;
  spec.samples_per_session = 2;
  spec.between_var_lo = 0.5;
  spec.between_var_hi = 2.0;
  spec.within_var = 1.0;
  spec.rng_seed = 777;
  // Training domains span the chunked duration range; the held-out domain
  // concentrates at the short end and carries its own condition shift.
  DomainProfile train_dom;
  train_dom.dur_lo_s = 4;
  train_dom.dur_hi_s = 240;
  train_dom.dur_exponent = 0.6;
  train_dom.dur_ref_s = 30;
  DomainProfile t0 = train_dom, t1 = train_dom, t2 = train_dom;
  t0.name = "t0";
  t0.shift_sigma = 0.7;
  t0.within_scale = 1.0;
  t1.name = "t1";
  t1.shift_sigma = 0.7;
  t1.within_scale = 1.63;
  t2.name = "t2";
  t2.shift_sigma = 0.7;
  t2.within_scale = 0.69;
  DomainProfile ho = train_dom;
  ho.name = "ho";
  ho.shift_sigma = 0.6;
  ho.within_scale = 1.2;
  ho.dur_lo_s = 3;
  ho.dur_hi_s = 12;
  spec.domains = {t0, t1, t2, ho};

  World world;
  world.corpus = Generate(spec);
  const SynthCorpus &corpus = world.corpus;
  auto ordinal = SpeakerOrdinals(corpus.metas);

  std::vector<SampleMeta> train, heldin_dev, mm_src, ho_dev, ho_eval;
  for (const auto &m : corpus.metas) {
    int ord = ordinal.at(m.speaker_id);
    if (m.domain_id == "ho") {
      (ord < 16 ? ho_dev : ho_eval).push_back(m);
    } else if (ord < 28) {
      train.push_back(m);
    } else if (ord < 34) {
      heldin_dev.push_back(m);
    } else {
      mm_src.push_back(m);
    }
  }

  EmbeddingTable train_table;
  train_table.x.resize(static_cast<Eigen::Index>(train.size()), spec.dim);
  for (std::size_t i = 0; i < train.size(); ++i) {
    train_table.ids.push_back(train[i].sample_id);
    train_table.x.row(static_cast<Eigen::Index>(i)) =
        corpus.table.x.row(corpus.table.RowOf(train[i].sample_id));
  }
  train_table.BuildIndex();
  world.pool = BuildPool(train_table, train);

  world.dev_heldin = {MakeDevSet(corpus, heldin_dev, "heldin")};
  world.dev_heldout = {MakeDevSet(corpus, ho_dev, "heldout")};
  world.dev_combined = {world.dev_heldin[0], world.dev_heldout[0]};

  DevSet eval = MakeDevSet(corpus, ho_eval, "eval");
  world.eval_x = eval.x;
  world.eval_dur = eval.dur;
  world.eval_trials = eval.trials;

  // Duration-mismatched split: training-domain speakers unseen in training,
  // re-chunked into the held-out duration range (no condition shift).
  {
    SynthCorpus sub;
    sub.spec = corpus.spec;
    sub.truth = corpus.truth;
    sub.rng = corpus.rng;
    sub.table.x.resize(static_cast<Eigen::Index>(mm_src.size()), spec.dim);
    sub.clean.resize(static_cast<Eigen::Index>(mm_src.size()), spec.dim);
    for (std::size_t i = 0; i < mm_src.size(); ++i) {
      Eigen::Index row = static_cast<Eigen::Index>(
          corpus.table.RowOf(mm_src[i].sample_id));
      sub.table.ids.push_back(mm_src[i].sample_id);
      sub.table.x.row(static_cast<Eigen::Index>(i)) = corpus.table.x.row(row);
      sub.clean.row(static_cast<Eigen::Index>(i)) = corpus.clean.row(row);
      sub.metas.push_back(mm_src[i]);
      sub.domain_of_row.push_back(corpus.domain_of_row[row]);
    }
    sub.table.BuildIndex();
    Chunk(&sub, 3.0, 12.0, 1);
    DevSet mm = MakeDevSet(sub, sub.metas, "mm");
    world.mm_x = mm.x;
    world.mm_dur = mm.dur;
    world.mm_trials = mm.trials;
  }

  world.opts.lda_dim = 12;
  world.opts.side_m_dim = 8;
  world.opts.side_s_dim = 3;
  world.opts.cal_speakers = 1000;
  world.opts.em.max_iters = 20;

  TrainConfig tcfg;
  tcfg.stage1_batches = 250;
  tcfg.stage2_batches = 80;
  tcfg.stage3_batches = 10;
  tcfg.lr1 = 3e-3;
  tcfg.lr2 = 6e-3;
  tcfg.lr3 = 3e-4;
  tcfg.batch.batch_size = 60;
  tcfg.batch.method = BatchMethod::kDomainBalanced;
  tcfg.pi = 0.01;
  tcfg.l2_weight = 1e-2;
  tcfg.grad_clip_norm = 4.0;
  world.tcfg = tcfg;
  return world;
}

ScoreSet ScoreSplit(const BackendParams &params, const Matrix &x,
                    const Vector &dur, const TrialSet &trials) {
  SampleCache cache = PrepareSamples(params, x, dur);
  TrialScores fw = ForwardTrials(params, cache, trials);
  ScoreSet set;
  std::vector<double> llrs;
  for (std::size_t i = 0; i < trials.NumTrials(); ++i) {
    if (trials.mask[i] != TrialMask::kValid) continue;
    llrs.push_back(fw.l(static_cast<Eigen::Index>(i)));
    set.labels.push_back(trials.labels[i]);
  }
  set.llrs = Eigen::Map<Vector>(llrs.data(), llrs.size());
  return set;
}

double Median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

void Criterion7(Check *c) {
  World world = BuildWorld();
  GenerativeInit gen = FitGenerativeInit(
      world.pool, BalancedSpeakerWeights(world.pool), world.opts, world.tcfg);

  auto run = [&](Architecture arch, std::uint64_t seed) {
    TrainConfig tcfg = world.tcfg;
    tcfg.seed = seed;
    TrainOutput out = TrainBackend(world.pool, world.dev_combined, gen, arch,
                                   world.opts, tcfg);
    return out.params;
  };

  std::vector<double> plda_cllr, dplda_cllr, dsd_cllr;
  std::vector<double> dplda_gap, dd_gap;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    BackendParams plda = run(Architecture::kPlda, seed);
    BackendParams dplda = run(Architecture::kDPlda, seed);
    BackendParams dd = run(Architecture::kDPldaDd, seed);
    BackendParams dsd = run(Architecture::kDPldaDsd, seed);

    ScoreSet p = ScoreSplit(plda, world.eval_x, world.eval_dur,
                            world.eval_trials);
    ScoreSet d = ScoreSplit(dplda, world.eval_x, world.eval_dur,
                            world.eval_trials);
    ScoreSet s = ScoreSplit(dsd, world.eval_x, world.eval_dur,
                            world.eval_trials);
    plda_cllr.push_back(Cllr(p, 0.5));
    dplda_cllr.push_back(Cllr(d, 0.5));
    dsd_cllr.push_back(Cllr(s, 0.5));

    ScoreSet d_mm = ScoreSplit(dplda, world.mm_x, world.mm_dur,
                               world.mm_trials);
    ScoreSet dd_mm = ScoreSplit(dd, world.mm_x, world.mm_dur,
                                world.mm_trials);
    dplda_gap.push_back(Cllr(d_mm, 0.5) - MinCllrLinear(d_mm, 0.5));
    dd_gap.push_back(Cllr(dd_mm, 0.5) - MinCllrLinear(dd_mm, 0.5));
  }
  double med_plda = Median(plda_cllr);
  double med_dplda = Median(dplda_cllr);
  double med_dsd = Median(dsd_cllr);
  c->Info("median held-out Cllr.5: dsd=" + Fmt(med_dsd) +
          " d-plda=" + Fmt(med_dplda) + " plda=" + Fmt(med_plda));
  c->Expect(med_dsd < med_dplda && med_dplda < med_plda,
            "ordering violated");
  double med_gap_dplda = Median(dplda_gap);
  double med_gap_dd = Median(dd_gap);
  c->Info("duration-mismatch act-min gap: dd=" + Fmt(med_gap_dd) +
          " d-plda=" + Fmt(med_gap_dplda));
  c->Expect(med_gap_dd <= 0.5 * med_gap_dplda, "gap closure below 50%");
}

void Criterion8(Check *c) {
  World world = BuildWorld();
  GenerativeInit gen = FitGenerativeInit(
      world.pool, BalancedSpeakerWeights(world.pool), world.opts, world.tcfg);

  int worse = 0;
  const int n_seeds = 10;
  for (std::uint64_t seed = 0; seed < n_seeds; ++seed) {
    TrainConfig tcfg = world.tcfg;
    tcfg.seed = seed;
    TrainOutput heldin_only = TrainBackend(
        world.pool, world.dev_heldin, gen, Architecture::kDPldaDsd,
        world.opts, tcfg);
    TrainOutput combined = TrainBackend(
        world.pool, world.dev_combined, gen, Architecture::kDPldaDsd,
        world.opts, tcfg);
    ScoreSet a = ScoreSplit(heldin_only.params, world.dev_heldout[0].x,
                            world.dev_heldout[0].dur,
                            world.dev_heldout[0].trials);
    ScoreSet b = ScoreSplit(combined.params, world.dev_heldout[0].x,
                            world.dev_heldout[0].dur,
                            world.dev_heldout[0].trials);
    if (Cllr(a, 0.5) > Cllr(b, 0.5)) ++worse;
  }
  c->Info("held-in-only selection worse in " + std::to_string(worse) +
          "/10 seeds");
  c->Expect(worse >= 8, "below 8/10");
}

// ---------------------------------------------------------------------------
// Criterion 9: AS-Norm reduction and monotonicity.

void Criterion9(Check *c) {
  std::mt19937_64 rng(909);
  double worst = 0.0;
  for (int rep = 0; rep < 50; ++rep) {
    const int k = 40;
    Vector ce = testutil::RandomVector(rng, k, 2.0);
    Vector ct = testutil::RandomVector(rng, k, 2.0);
    auto stats = [](const Vector &v, double *m, double *s) {
      *m = v.mean();
      *s = std::sqrt((v.array() - *m).square().sum() / (v.size() - 1));
    };
    double me, se, mt, st;
    stats(ce, &me, &se);
    stats(ct, &mt, &st);
    std::uniform_real_distribution<double> uni(-4.0, 4.0);
    for (int p = 0; p < 20; ++p) {
      double s = uni(rng);
      double plain = 0.5 * ((s - me) / se + (s - mt) / st);
      worst = std::max(worst, std::abs(AsNorm1(s, ce, ct, k) - plain));
    }
  }
  c->Expect(worst < 1e-12, "S-Norm reduction diff " + Fmt(worst));

  int violations = 0;
  for (int probe = 0; probe < 10000; ++probe) {
    const int k = 25;
    Vector ce = testutil::RandomVector(rng, k, 2.0);
    Vector ct = testutil::RandomVector(rng, k, 2.0);
    std::uniform_int_distribution<int> top_dist(2, k);
    int n_top = top_dist(rng);
    std::uniform_real_distribution<double> uni(-5.0, 5.0);
    double s1 = uni(rng), s2 = uni(rng);
    if (s1 == s2) continue;
    double z1 = AsNorm1(std::min(s1, s2), ce, ct, n_top);
    double z2 = AsNorm1(std::max(s1, s2), ce, ct, n_top);
    if (!(z1 < z2)) ++violations;
  }
  c->Expect(violations == 0,
            std::to_string(violations) + " monotonicity violations");
}

// ---------------------------------------------------------------------------
// Criterion 10: byte-identical training through the CLI.

void Criterion10(Check *c) {
  // The commands chat on stdout; keep the criterion line clean.
  std::stringstream sink;
  std::streambuf *saved = std::cout.rdbuf(sink.rdbuf());
  struct Restore {
    std::streambuf *buf;
    ~Restore() { std::cout.rdbuf(buf); }
  } restore{saved};
  TempDir tmp("acc10");
  SynthArgs synth;
  synth.out_dir = tmp.Path("corpus");
  synth.sets = {"synth.dim=12",
                "synth.n_domains=2",
                "synth.speakers_per_domain=14",
                "synth.sessions_per_speaker=3",
                "synth.samples_per_session=2",
                "synth.domain_shift_sigma=0.4",
                "synth.duration_exponent=0.5",
                "synth.seed=77"};
  c->Expect(CmdSynth(synth) == 0, "synth failed");
  SynthArgs dev = synth;
  dev.out_dir = tmp.Path("dev");
  dev.sets.push_back("synth.seed=78");
  dev.sets.push_back("synth.id_prefix=dev_");
  dev.sets.push_back("synth.speakers_per_domain=8");
  c->Expect(CmdSynth(dev) == 0, "dev synth failed");
  {
    auto metas = LoadMetadataTsv(tmp.Path("dev") + "/metadata.tsv");
    TrialSet trials = BuildTrialsAllPairs(metas);
    std::ofstream out(tmp.Path("dev_keys.tsv"));
    for (std::size_t i = 0; i < trials.NumTrials(); ++i) {
      if (trials.mask[i] != TrialMask::kValid) continue;
      out << trials.ids[trials.enroll[i]] << '\t'
          << trials.ids[trials.test[i]] << '\t'
          << (trials.labels[i] == TrialLabel::kTarget ? "tgt" : "imp") << '\n';
    }
  }
  auto train_once = [&](const std::string &out_dir) {
    TrainArgs t;
    t.train_emb = tmp.Path("corpus") + "/embeddings.dcae";
    t.train_meta = tmp.Path("corpus") + "/metadata.tsv";
    t.out_dir = out_dir;
    t.arch = "dca-plda";
    t.seed = 11;
    t.dev_specs = {"dev=" + tmp.Path("dev") + "/embeddings.dcae," +
                   tmp.Path("dev") + "/metadata.tsv," +
                   tmp.Path("dev_keys.tsv")};
    t.sets = {"preproc.lda_dim=8",      "cal.sideinfo_m_dim=5",
              "cal.sideinfo_s_dim=2",   "cal.init_speakers=100",
              "train.batch_size=16",    "train.batch_method=plain",
              "train.stage1_batches=20", "train.stage2_batches=10",
              "train.stage3_batches=4", "train.lr1=0.002",
              "train.lr2=0.004",        "train.lr3=0.0002"};
    return CmdTrain(t);
  };
  c->Expect(train_once(tmp.Path("r1")) == 0, "train 1 failed");
  c->Expect(train_once(tmp.Path("r2")) == 0, "train 2 failed");
  auto slurp = [](const std::string &p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  std::string m1 = slurp(tmp.Path("r1") + "/model.dcam");
  std::string m2 = slurp(tmp.Path("r2") + "/model.dcam");
  c->Expect(!m1.empty() && m1 == m2, "model files differ");
}

struct Criterion {
  int id;
  const char *name;
  std::function<void(Check *)> run;
};

}  // namespace

int main(int argc, char **argv) {
  std::vector<Criterion> criteria = {
      {1, "parameter-count reproduction", Criterion1},
      {2, "closed-form score vs joint-Gaussian oracle", Criterion2},
      {3, "initialization equivalence", Criterion3},
      {4, "gradient correctness vs finite differences", Criterion4},
      {5, "metric fixed points", Criterion5},
      {6, "EM sanity", Criterion6},
      {7, "robustness ordering on held-out condition", Criterion7},
      {8, "model selection needs unseen-condition dev sets", Criterion8},
      {9, "AS-Norm reduction and monotonicity", Criterion9},
      {10, "deterministic training", Criterion10},
  };
  std::vector<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.push_back(std::atoi(argv[i]));
  bool all_ok = true;
  for (const auto &criterion : criteria) {
    if (!wanted.empty() &&
        std::find(wanted.begin(), wanted.end(), criterion.id) == wanted.end())
      continue;
    Check check;
    try {
      criterion.run(&check);
    } catch (const std::exception &e) {
      check.ok = false;
      check.detail = std::string("exception: ") + e.what();
    }
    std::printf("%s criterion %d: %s%s%s\n", check.ok ? "PASS" : "FAIL",
                criterion.id, criterion.name,
                check.detail.empty() ? "" : " -- ", check.detail.c_str());
    std::fflush(stdout);
    all_ok = all_ok && check.ok;
  }
  return all_ok ? 0 : 1;
}
