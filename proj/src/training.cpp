// src/training.cpp

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

#include "dcaplda/training.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "dcaplda/metrics.hpp"

namespace dcaplda {

BatchMethod ParseBatchMethod(const std::string &name) {
  if (name == "plain") return BatchMethod::kPlain;
  if (name == "domain_balanced") return BatchMethod::kDomainBalanced;
  throw ValidationError(ErrorCode::kInvalidConfig,
                        "unknown batch method '" + name + "'");
}

TrainingPool BuildPool(const EmbeddingTable &table,
                       const std::vector<SampleMeta> &metas) {
  ValidateMeta(metas, table);
  TrainingPool pool;
  std::unordered_map<std::string, int> dom_index;
  std::unordered_map<std::string, int> spk_index;
  std::unordered_map<std::string, std::unordered_map<std::string, int>>
      sess_index;  // per speaker

  // First pass: find speakers with at least two sessions.
  std::unordered_map<std::string, std::unordered_map<std::string, int>>
      spk_sessions;
  for (const auto &m : metas) spk_sessions[m.speaker_id][m.session_id] = 1;
  std::size_t dropped = 0;
  for (const auto &[spk, sess] : spk_sessions)
    if (sess.size() < 2) ++dropped;
  if (dropped > 0)
    Warn(std::to_string(dropped) +
         " speaker(s) with fewer than 2 sessions skipped");

  std::vector<Eigen::Index> rows;
  for (const auto &m : metas) {
    if (spk_sessions[m.speaker_id].size() < 2) continue;
    auto [dit, dnew] =
        dom_index.emplace(m.domain_id, static_cast<int>(pool.domains.size()));
    if (dnew) {
      pool.domains.push_back(m.domain_id);
      pool.domain_speakers.emplace_back();
    }
    auto [sit, snew] =
        spk_index.emplace(m.speaker_id, static_cast<int>(pool.spk_ids.size()));
    if (snew) {
      pool.spk_ids.push_back(m.speaker_id);
      pool.spk_domain.push_back(dit->second);
      pool.spk_session_rows.emplace_back();
      pool.domain_speakers[dit->second].push_back(
          static_cast<std::uint32_t>(sit->second));
    }
    auto &smap = sess_index[m.speaker_id];
    auto [eit, enew] = smap.emplace(
        m.session_id,
        static_cast<int>(pool.spk_session_rows[sit->second].size()));
    if (enew) pool.spk_session_rows[sit->second].emplace_back();
    std::uint32_t row = static_cast<std::uint32_t>(pool.metas.size());
    pool.spk_session_rows[sit->second][eit->second].push_back(row);
    pool.metas.push_back(m);
    rows.push_back(static_cast<Eigen::Index>(table.RowOf(m.sample_id)));
  }
  if (pool.metas.empty())
    throw ValidationError(ErrorCode::kInsufficientSpeakers,
                          "no speaker has two or more sessions");
  pool.x.resize(static_cast<Eigen::Index>(rows.size()), table.Dim());
  pool.dur.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    pool.x.row(static_cast<Eigen::Index>(i)) = table.x.row(rows[i]);
    pool.dur(static_cast<Eigen::Index>(i)) = pool.metas[i].duration_s;
  }
  return pool;
}

std::unordered_map<std::string, double> FlatSpeakerWeights(
    const TrainingPool &pool) {
  std::unordered_map<std::string, double> w;
  for (const auto &id : pool.spk_ids) w[id] = 1.0;
  return w;
}

std::unordered_map<std::string, double> BalancedSpeakerWeights(
    const TrainingPool &pool) {
  std::unordered_map<std::string, double> w;
  for (int s = 0; s < pool.NumSpeakers(); ++s)
    w[pool.spk_ids[s]] =
        1.0 / static_cast<double>(pool.domain_speakers[pool.spk_domain[s]].size());
  return w;
}

namespace {

std::uint32_t NextFrom(RotationList *list, std::mt19937_64 *rng) {
  if (list->items.empty())
    throw ValidationError(ErrorCode::kInvalidArgument, "empty rotation list");
  if (list->pos >= list->items.size()) {
    std::shuffle(list->items.begin(), list->items.end(), *rng);
    list->pos = 0;
  }
  return list->items[list->pos++];
}

RotationList MakeRotation(std::size_t n, std::mt19937_64 *rng) {
  RotationList list;
  list.items.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    list.items[i] = static_cast<std::uint32_t>(i);
  std::shuffle(list.items.begin(), list.items.end(), *rng);
  return list;
}

}  // namespace

BatchCursors InitCursors(const TrainingPool &pool, std::uint64_t seed) {
  BatchCursors cur;
  cur.rng.seed(seed);
  cur.all_speakers.items.resize(pool.NumSpeakers());
  for (int s = 0; s < pool.NumSpeakers(); ++s)
    cur.all_speakers.items[s] = static_cast<std::uint32_t>(s);
  std::shuffle(cur.all_speakers.items.begin(), cur.all_speakers.items.end(),
               cur.rng);
  for (const auto &spk_list : pool.domain_speakers) {
    RotationList list;
    list.items = spk_list;
    std::shuffle(list.items.begin(), list.items.end(), cur.rng);
    cur.domain_speakers.push_back(std::move(list));
  }
  cur.spk_sessions.resize(pool.NumSpeakers());
  cur.sess_samples.resize(pool.NumSpeakers());
  for (int s = 0; s < pool.NumSpeakers(); ++s) {
    cur.spk_sessions[s].push_back(
        MakeRotation(pool.spk_session_rows[s].size(), &cur.rng));
    for (const auto &samples : pool.spk_session_rows[s]) {
      RotationList list;
      list.items = samples;
      std::shuffle(list.items.begin(), list.items.end(), cur.rng);
      cur.sess_samples[s].push_back(std::move(list));
    }
  }
  return cur;
}

Batch MakeBatch(const TrainingPool &pool, const BatchSpec &spec,
                BatchCursors *cursors) {
  if (spec.batch_size < 2 || spec.batch_size % 2 != 0)
    throw ValidationError(ErrorCode::kInvalidArgument,
                          "batch size must be even and >= 2");
  std::vector<std::uint32_t> speakers;
  if (spec.method == BatchMethod::kDomainBalanced) {
    const int d = pool.NumDomains();
    if (spec.batch_size % (2 * d) != 0)
      throw ValidationError(ErrorCode::kInvalidArgument,
                            "batch size must be divisible by 2 x n_domains "
                            "for domain-balanced batches");
    const int per_domain = spec.batch_size / (2 * d);
    for (int dom = 0; dom < d; ++dom)
      for (int i = 0; i < per_domain; ++i)
        speakers.push_back(
            NextFrom(&cursors->domain_speakers[dom], &cursors->rng));
  } else {
    for (int i = 0; i < spec.batch_size / 2; ++i)
      speakers.push_back(NextFrom(&cursors->all_speakers, &cursors->rng));
  }

  Batch batch;
  batch.rows.reserve(speakers.size() * 2);
  for (std::uint32_t spk : speakers) {
    RotationList *sess_rot = &cursors->spk_sessions[spk][0];
    std::uint32_t s1 = NextFrom(sess_rot, &cursors->rng);
    std::uint32_t s2 = s1;
    for (int tries = 0; tries < 8 && s2 == s1; ++tries)
      s2 = NextFrom(sess_rot, &cursors->rng);
    if (s2 == s1)
      throw ValidationError(ErrorCode::kInvalidArgument,
                            "speaker '" + pool.spk_ids[spk] +
                                "' cannot provide two distinct sessions");
    batch.rows.push_back(
        NextFrom(&cursors->sess_samples[spk][s1], &cursors->rng));
    batch.rows.push_back(
        NextFrom(&cursors->sess_samples[spk][s2], &cursors->rng));
  }

  const std::size_t n = batch.rows.size();
  batch.trials.ids.reserve(n);
  for (std::uint32_t r : batch.rows)
    batch.trials.ids.push_back(pool.metas[r].sample_id);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const SampleMeta &a = pool.metas[batch.rows[i]];
      const SampleMeta &b = pool.metas[batch.rows[j]];
      batch.trials.enroll.push_back(static_cast<std::uint32_t>(i));
      batch.trials.test.push_back(static_cast<std::uint32_t>(j));
      batch.trials.labels.push_back(LabelFor(a, b));
      batch.trials.mask.push_back(MaskFor(a, b));
    }
  }
  return batch;
}

namespace {

void CountValid(const TrialSet &trials, std::size_t *n_tgt,
                std::size_t *n_imp) {
  *n_tgt = 0;
  *n_imp = 0;
  for (std::size_t i = 0; i < trials.NumTrials(); ++i) {
    if (trials.mask[i] != TrialMask::kValid) continue;
    if (trials.labels[i] == TrialLabel::kTarget)
      ++*n_tgt;
    else
      ++*n_imp;
  }
  if (*n_tgt == 0)
    throw ValidationError(ErrorCode::kNoValidTargets,
                          "no valid target trials");
  if (*n_imp == 0)
    throw ValidationError(ErrorCode::kNoValidImpostors,
                          "no valid impostor trials");
}

}  // namespace

double WeightedXentLoss(const Vector &llrs, const TrialSet &trials,
                        double pi) {
  if (!(pi > 0.0) || !(pi < 1.0))
    throw ValidationError(ErrorCode::kInvalidArgument, "pi must be in (0,1)");
  if (static_cast<std::size_t>(llrs.size()) != trials.NumTrials())
    throw ValidationError(ErrorCode::kDimensionMismatch,
                          "llr count does not match trials");
  std::size_t n_tgt, n_imp;
  CountValid(trials, &n_tgt, &n_imp);
  const double gamma = std::log(pi / (1.0 - pi));
  double tgt_sum = 0.0, imp_sum = 0.0;
  for (std::size_t i = 0; i < trials.NumTrials(); ++i) {
    if (trials.mask[i] != TrialMask::kValid) continue;
    double u = llrs(static_cast<Eigen::Index>(i)) + gamma;
    if (trials.labels[i] == TrialLabel::kTarget)
      tgt_sum += Softplus(-u);
    else
      imp_sum += Softplus(u);
  }
  return pi * tgt_sum / static_cast<double>(n_tgt) +
         (1.0 - pi) * imp_sum / static_cast<double>(n_imp);
}

Vector WeightedXentGrad(const Vector &llrs, const TrialSet &trials,
                        double pi) {
  std::size_t n_tgt, n_imp;
  CountValid(trials, &n_tgt, &n_imp);
  const double gamma = std::log(pi / (1.0 - pi));
  const double wt = pi / static_cast<double>(n_tgt);
  const double wn = (1.0 - pi) / static_cast<double>(n_imp);
  Vector g = Vector::Zero(llrs.size());
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < llrs.size(); ++i) {
    if (trials.mask[i] != TrialMask::kValid) continue;
    double q = Sigmoid(llrs(i) + gamma);
    g(i) = trials.labels[i] == TrialLabel::kTarget ? -wt * (1.0 - q)
                                                   : wn * q;
  }
  return g;
}

namespace {

// Named views into the flat gradient buffer, laid out like the refs.
class GradMap {
 public:
  GradMap(const std::vector<ParamRef> &refs, std::vector<double> *buf) {
    std::size_t off = 0;
    for (const auto &r : refs) {
      spans_.emplace(r.name, std::make_pair(buf->data() + off, r.size));
      off += r.size;
    }
  }
  bool Has(const std::string &name) const { return spans_.count(name) > 0; }
  Eigen::Map<Matrix> Mat(const std::string &name, Eigen::Index rows,
                         Eigen::Index cols) {
    auto &[ptr, size] = spans_.at(name);
    if (size != static_cast<std::size_t>(rows * cols))
      throw ValidationError(ErrorCode::kDimensionMismatch,
                            "gradient span size for " + name);
    return Eigen::Map<Matrix>(ptr, rows, cols);
  }
  Eigen::Map<Vector> Vec(const std::string &name, Eigen::Index n) {
    auto &[ptr, size] = spans_.at(name);
    if (size != static_cast<std::size_t>(n))
      throw ValidationError(ErrorCode::kDimensionMismatch,
                            "gradient span size for " + name);
    return Eigen::Map<Vector>(ptr, n);
  }
  double &Scalar(const std::string &name) {
    return *spans_.at(name).first;
  }

 private:
  std::unordered_map<std::string, std::pair<double *, std::size_t>> spans_;
};

// Symmetric pair-coefficient matrix over batch samples, with row sums.
// Requires each unordered pair to appear at most once in the trial list.
struct PairCoef {
  Matrix c;
  Vector r;
  double total = 0.0;
};

void FillPairCoef(const TrialSet &trials, const Vector &chi, Eigen::Index n,
                  PairCoef *pc) {
  pc->c.setZero(n, n);
  pc->total = 0.0;
  for (std::size_t t = 0; t < trials.NumTrials(); ++t) {
    double v = chi(static_cast<Eigen::Index>(t));
    if (v == 0.0) continue;
    pc->c(trials.enroll[t], trials.test[t]) += v;
    pc->c(trials.test[t], trials.enroll[t]) += v;
    pc->total += v;
  }
  pc->r = pc->c.rowwise().sum();
}

// Parameter gradients of sum_t chi_t * poly(f_a, f_b) for one block.
void AccumBlockGrads(const Matrix &f, const PairCoef &pc,
                     Eigen::Map<Matrix> g_lambda, Eigen::Map<Matrix> g_gamma,
                     Eigen::Map<Vector> g_c, double &g_k) {
  g_lambda.noalias() += f.transpose() * pc.c * f;
  g_gamma.noalias() += f.transpose() * pc.r.asDiagonal() * f;
  g_c.noalias() += f.transpose() * pc.r;
  g_k += pc.total;
}

// Gradient w.r.t. the feature rows of the same sum.
Matrix FeatureGrad(const Matrix &f, const PairCoef &pc, const Matrix &lambda,
                   const Matrix &gamma, const Vector &c) {
  Matrix lambda_sym = Symmetrize(lambda);
  Matrix gamma_sym = Symmetrize(gamma);
  Matrix g = 2.0 * pc.c * f * lambda_sym;
  g.noalias() += 2.0 * pc.r.asDiagonal() * f * gamma_sym;
  g.noalias() += pc.r * c.transpose();
  return g;
}

// Backward through w = u / ||u||: g_u = (g_w - (w . g_w) w) / ||u||.
Matrix NormBackward(const Matrix &w, const Vector &unorm, const Matrix &gw) {
  Matrix gu(w.rows(), w.cols());
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < w.rows(); ++i) {
    double dot = w.row(i).dot(gw.row(i));
    gu.row(i) = (gw.row(i) - dot * w.row(i)) / unorm(i);
  }
  return gu;
}

}  // namespace

double LossAndGradients(const BackendParams &params,
                        const std::vector<ParamRef> &refs, const Matrix &x,
                        const Vector &dur, const TrialSet &trials, double pi,
                        std::vector<double> *grad) {
  SampleCache cache = PrepareSamples(params, x, dur);
  TrialScores fw = ForwardTrials(params, cache, trials);
  double loss = WeightedXentLoss(fw.l, trials, pi);
  if (grad == nullptr) return loss;

  grad->assign(TotalSize(refs), 0.0);
  GradMap g(refs, grad);
  const Eigen::Index n = x.rows();
  const Eigen::Index t = static_cast<Eigen::Index>(trials.NumTrials());
  const Vector dl = WeightedXentGrad(fw.l, trials, pi);

  const CalStage stage = params.stage;
  const bool has_dur = stage == CalStage::kDurationOnly ||
                       stage == CalStage::kDurationSideInfo;
  const bool has_side = stage == CalStage::kSideInfoOnly ||
                        stage == CalStage::kDurationSideInfo;

  // Per-trial coefficients for the raw score and each polynomial block.
  Vector chi_s(t), chi_ad, chi_bd, chi_as, chi_bs;
  if (has_dur) {
    chi_ad.resize(t);
    chi_bd.resize(t);
  }
  if (has_side) {
    chi_as.resize(t);
    chi_bs.resize(t);
  }
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < t; ++i) {
    const double d = dl(i);
    switch (stage) {
      case CalStage::kGlobal:
        chi_s(i) = d * params.global.alpha;
        break;
      case CalStage::kDurationOnly:
        chi_ad(i) = d * fw.s(i);
        chi_bd(i) = d;
        chi_s(i) = d * fw.alpha_d(i);
        break;
      case CalStage::kSideInfoOnly:
        chi_as(i) = d * fw.s(i);
        chi_bs(i) = d;
        chi_s(i) = d * fw.alpha_s(i);
        break;
      case CalStage::kDurationSideInfo: {
        const double dg = d * fw.alpha_s(i);
        chi_as(i) = d * fw.g(i);
        chi_bs(i) = d;
        chi_ad(i) = dg * fw.s(i);
        chi_bd(i) = dg;
        chi_s(i) = dg * fw.alpha_d(i);
        break;
      }
    }
  }

  if (stage == CalStage::kGlobal && g.Has("global.alpha")) {
    g.Scalar("global.alpha") = dl.dot(fw.s);
    g.Scalar("global.beta") = dl.sum();
  }

  PairCoef pc;
  const Eigen::Index dim_n = cache.w.cols();
  const bool train_backbone = g.Has("score.lambda");
  const bool train_preproc = g.Has("preproc.a_p");

  // Score-form path (and gradient into w when the backbone is trainable).
  Matrix gw;
  if (train_backbone || train_preproc) {
    FillPairCoef(trials, chi_s, n, &pc);
    if (train_backbone) {
      AccumBlockGrads(cache.w, pc, g.Mat("score.lambda", dim_n, dim_n),
                      g.Mat("score.gamma", dim_n, dim_n),
                      g.Vec("score.c", dim_n), g.Scalar("score.k"));
    }
    if (train_preproc)
      gw = FeatureGrad(cache.w, pc, params.score.lambda, params.score.gamma,
                       params.score.c);
  }

  if (has_dur && g.Has("dur.alpha.lambda")) {
    const Eigen::Index de = cache.e.cols();
    FillPairCoef(trials, chi_ad, n, &pc);
    AccumBlockGrads(cache.e, pc, g.Mat("dur.alpha.lambda", de, de),
                    g.Mat("dur.alpha.gamma", de, de), g.Vec("dur.alpha.c", de),
                    g.Scalar("dur.alpha.k"));
    FillPairCoef(trials, chi_bd, n, &pc);
    AccumBlockGrads(cache.e, pc, g.Mat("dur.beta.lambda", de, de),
                    g.Mat("dur.beta.gamma", de, de), g.Vec("dur.beta.c", de),
                    g.Scalar("dur.beta.k"));
  }

  if (has_side && g.Has("side.a_z")) {
    const SideInfoCal &side = *params.side;
    const Eigen::Index ds = cache.z.cols();
    const Eigen::Index dm = cache.m.cols();
    FillPairCoef(trials, chi_as, n, &pc);
    AccumBlockGrads(cache.z, pc, g.Mat("side.alpha.lambda", ds, ds),
                    g.Mat("side.alpha.gamma", ds, ds),
                    g.Vec("side.alpha.c", ds), g.Scalar("side.alpha.k"));
    Matrix gz = FeatureGrad(cache.z, pc, side.alpha.lambda, side.alpha.gamma,
                            side.alpha.c);
    FillPairCoef(trials, chi_bs, n, &pc);
    AccumBlockGrads(cache.z, pc, g.Mat("side.beta.lambda", ds, ds),
                    g.Mat("side.beta.gamma", ds, ds), g.Vec("side.beta.c", ds),
                    g.Scalar("side.beta.k"));
    gz.noalias() += FeatureGrad(cache.z, pc, side.beta.lambda,
                                side.beta.gamma, side.beta.c);

    // Through f to the pre-activation a = A_z m + b_z.
    Matrix ga(n, ds);
#pragma omp parallel for schedule(static)
    for (Eigen::Index i = 0; i < n; ++i) {
      switch (side.f) {
        case SideInfoTransform::kIdentity:
          ga.row(i) = gz.row(i);
          break;
        case SideInfoTransform::kSoftmax: {
          double dot = cache.z.row(i).dot(gz.row(i));
          ga.row(i) =
              cache.z.row(i).cwiseProduct(gz.row(i)) - dot * cache.z.row(i);
          break;
        }
        case SideInfoTransform::kLogSoftmax: {
          double sum = gz.row(i).sum();
          ga.row(i) = gz.row(i) - sum * cache.z.row(i).array().exp().matrix();
          break;
        }
      }
    }
    g.Mat("side.a_z", ds, dm).noalias() += ga.transpose() * cache.m;
    g.Vec("side.b_z", ds).noalias() += ga.colwise().sum().transpose();
    Matrix gm = ga * side.a_z;  // n x M
    Matrix gum = NormBackward(cache.m, cache.m_unorm, gm);
    g.Mat("side.a_m", dm, x.cols()).noalias() += gum.transpose() * x;
    g.Vec("side.b_m", dm).noalias() += gum.colwise().sum().transpose();
  }

  if (train_preproc) {
    Matrix guw = NormBackward(cache.w, cache.w_unorm, gw);
    g.Mat("preproc.a_p", dim_n, x.cols()).noalias() += guw.transpose() * x;
    g.Vec("preproc.m_p", dim_n).noalias() += guw.colwise().sum().transpose();
  }

  // Non-finite gradients are reported with the parameter name.
  std::size_t off = 0;
  for (const auto &r : refs) {
    for (std::size_t i = 0; i < r.size; ++i) {
      if (!std::isfinite((*grad)[off + i]))
        throw NumericalError(ErrorCode::kNonFiniteValue,
                             "non-finite gradient for " + r.name);
    }
    off += r.size;
  }
  return loss;
}

GenerativeInit FitGenerativeInit(
    const TrainingPool &pool,
    const std::unordered_map<std::string, double> &speaker_weights,
    const InitOptions &opts, const TrainConfig &config) {
  GenerativeInit gen;

  std::vector<int> spk_of_row(pool.metas.size());
  std::vector<double> spk_weight(pool.NumSpeakers());
  {
    std::unordered_map<std::string, int> spk_index;
    for (int s = 0; s < pool.NumSpeakers(); ++s) {
      spk_index.emplace(pool.spk_ids[s], s);
      auto it = speaker_weights.find(pool.spk_ids[s]);
      if (it == speaker_weights.end())
        throw ValidationError(ErrorCode::kInvalidArgument,
                              "no weight for speaker '" + pool.spk_ids[s] +
                                  "'");
      spk_weight[s] = it->second;
    }
    for (std::size_t i = 0; i < pool.metas.size(); ++i)
      spk_of_row[i] = spk_index.at(pool.metas[i].speaker_id);
  }

  const int limit =
      std::min<int>(static_cast<int>(pool.x.cols()), pool.NumSpeakers() - 1);
  if (opts.lda_dim > limit)
    throw ValidationError(ErrorCode::kInvalidArgument,
                          "LDA dimension " + std::to_string(opts.lda_dim) +
                              " exceeds min(D, n_speakers - 1) = " +
                              std::to_string(limit));
  gen.basis = FitLdaBasis(pool.x, spk_of_row, spk_weight, opts.lda);
  gen.preproc = HeadTransform(gen.basis, opts.lda_dim);

  Matrix w = ApplyPreprocAll(gen.preproc, pool.x);
  SpeakerDataset ds = PrepareSpeakerDataset(w, pool.metas, speaker_weights);
  gen.plda = RunEm(InitPlda(ds), ds, opts.em);
  gen.score = ToScoreForm(gen.plda);

  CalTrialScores cal = CalibrationTrials(pool, gen.preproc, gen.score,
                                         opts.cal_speakers, config.seed);
  ScoreSet cal_set;
  cal_set.llrs = cal.s;
  cal_set.labels = cal.labels;
  LinearCalFit fit = FitGlobalCal(cal_set, config.pi);
  gen.global_cal.alpha = fit.alpha;
  gen.global_cal.beta = fit.beta;
  return gen;
}

CalTrialScores CalibrationTrials(const TrainingPool &pool,
                                 const PreprocParams &preproc,
                                 const ScoreForm &score, int cal_speakers,
                                 std::uint64_t seed) {
  std::unordered_map<std::string, int> spk_index;
  for (int s = 0; s < pool.NumSpeakers(); ++s)
    spk_index.emplace(pool.spk_ids[s], s);

  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ull);
  std::vector<int> spk_order(pool.NumSpeakers());
  for (int s = 0; s < pool.NumSpeakers(); ++s) spk_order[s] = s;
  std::shuffle(spk_order.begin(), spk_order.end(), rng);
  const int n_cal = std::min<int>(cal_speakers, pool.NumSpeakers());
  std::vector<char> selected(pool.NumSpeakers(), 0);
  for (int i = 0; i < n_cal; ++i) selected[spk_order[i]] = 1;

  std::vector<std::uint32_t> cal_rows;
  std::vector<SampleMeta> cal_metas;
  for (std::size_t i = 0; i < pool.metas.size(); ++i) {
    if (!selected[spk_index.at(pool.metas[i].speaker_id)]) continue;
    cal_rows.push_back(static_cast<std::uint32_t>(i));
    cal_metas.push_back(pool.metas[i]);
  }
  TrialSet cal_trials = BuildTrialsAllPairs(cal_metas);

  Matrix x_cal(cal_rows.size(), pool.x.cols());
  for (std::size_t i = 0; i < cal_rows.size(); ++i)
    x_cal.row(static_cast<Eigen::Index>(i)) = pool.x.row(cal_rows[i]);
  Matrix w_cal = ApplyPreprocAll(preproc, x_cal);
  Matrix lw = w_cal * Symmetrize(score.lambda);
  Vector q(w_cal.rows());
  for (Eigen::Index i = 0; i < w_cal.rows(); ++i)
    q(i) = w_cal.row(i).dot(w_cal.row(i) * score.gamma) +
           w_cal.row(i).dot(score.c);

  CalTrialScores out;
  std::vector<double> llrs;
  for (std::size_t i = 0; i < cal_trials.NumTrials(); ++i) {
    if (cal_trials.mask[i] != TrialMask::kValid) continue;
    const Eigen::Index a = cal_trials.enroll[i], b = cal_trials.test[i];
    llrs.push_back(2.0 * lw.row(a).dot(w_cal.row(b)) + q(a) + q(b) + score.k);
    out.labels.push_back(cal_trials.labels[i]);
    out.enroll_rows.push_back(cal_rows[static_cast<std::size_t>(a)]);
    out.test_rows.push_back(cal_rows[static_cast<std::size_t>(b)]);
  }
  out.s = Eigen::Map<Vector>(llrs.data(), llrs.size());
  return out;
}

BackendParams AssembleInit(const GenerativeInit &gen, Architecture arch,
                           const InitOptions &opts, std::uint64_t seed) {
  BackendParams params;
  params.preproc = gen.preproc;
  params.plda = gen.plda;
  params.score = gen.score;
  params.stage = StageFor(arch);
  params.global = gen.global_cal;

  const bool has_dur = params.stage == CalStage::kDurationOnly ||
                       params.stage == CalStage::kDurationSideInfo;
  const bool has_side = params.stage == CalStage::kSideInfoOnly ||
                        params.stage == CalStage::kDurationSideInfo;
  if (has_dur) {
    DurationCal dur;
    dur.kind = opts.dur_kind;
    dur.bin_edges = opts.bin_edges;
    dur.wlog_center_s = opts.wlog_center_s;
    dur.wlog_slope = opts.wlog_slope;
    const int de = DurationFeatureDim(dur.kind, dur.bin_edges.size());
    dur.alpha = PolyBlock(de);
    dur.beta = PolyBlock(de);
    // The k values carry the global calibration at init.
    dur.alpha.k = gen.global_cal.alpha;
    dur.beta.k = gen.global_cal.beta;
    dur.Validate();
    params.dur = std::move(dur);
  }
  if (has_side) {
    const int d = gen.preproc.InDim();
    if (opts.side_m_dim > static_cast<int>(gen.basis.a.rows()))
      throw ValidationError(ErrorCode::kInvalidArgument,
                            "side-info M exceeds the LDA basis size");
    if (opts.side_s_dim > opts.side_m_dim)
      throw ValidationError(ErrorCode::kInvalidArgument,
                            "side-info S must not exceed M");
    SideInfoCal side;
    PreprocParams tail = TailTransform(gen.basis, opts.side_m_dim);
    side.a_m = tail.a_p;
    side.b_m = tail.m_p;
    side.f = opts.side_f;
    std::mt19937_64 rng(seed ^ 0xced1c0ffee5eed13ull);
    std::normal_distribution<double> normal(0.0, opts.side_init_std);
    side.a_z.resize(opts.side_s_dim, opts.side_m_dim);
    side.b_z.resize(opts.side_s_dim);
    for (Eigen::Index i = 0; i < side.a_z.rows(); ++i)
      for (Eigen::Index j = 0; j < side.a_z.cols(); ++j)
        side.a_z(i, j) = normal(rng);
    for (Eigen::Index i = 0; i < side.b_z.size(); ++i)
      side.b_z(i) = normal(rng);
    side.alpha = PolyBlock(opts.side_s_dim);
    side.beta = PolyBlock(opts.side_s_dim);
    if (params.stage == CalStage::kSideInfoOnly) {
      side.alpha.k = gen.global_cal.alpha;
      side.beta.k = gen.global_cal.beta;
    } else {
      // Pass-through on top of the duration stage.
      side.alpha.k = 1.0;
      side.beta.k = 0.0;
    }
    (void)d;
    params.side = std::move(side);
  }
  return params;
}

namespace {

std::vector<double> DevMetricsPerSet(const BackendParams &params,
                                     const std::vector<DevSet> &devs) {
  std::vector<double> out;
  out.reserve(devs.size());
  for (const auto &dev : devs) {
    SampleCache cache = PrepareSamples(params, dev.x, dev.dur);
    TrialScores fw = ForwardTrials(params, cache, dev.trials);
    ScoreSet set;
    std::vector<double> llrs;
    for (std::size_t i = 0; i < dev.trials.NumTrials(); ++i) {
      if (dev.trials.mask[i] != TrialMask::kValid) continue;
      llrs.push_back(fw.l(static_cast<Eigen::Index>(i)));
      set.labels.push_back(dev.trials.labels[i]);
    }
    set.llrs = Eigen::Map<Vector>(llrs.data(), llrs.size());
    out.push_back(Cllr(set, 0.01));
  }
  return out;
}

double Mean(const std::vector<double> &v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double GroupL2Weight(const TrainConfig &config, const std::string &group) {
  auto it = config.l2_group_weights.find(group);
  return it != config.l2_group_weights.end() ? it->second : config.l2_weight;
}

}  // namespace

double DevMetric(const BackendParams &params, const std::vector<DevSet> &devs) {
  if (devs.empty())
    throw ValidationError(ErrorCode::kInvalidArgument, "no dev sets");
  return Mean(DevMetricsPerSet(params, devs));
}

TrainerState InitTrainer(const TrainingPool &pool, BackendParams init,
                         Architecture arch, const TrainConfig &config,
                         std::uint64_t seed) {
  TrainerState st;
  st.arch = arch;
  st.config = config;
  st.params = std::move(init);
  st.seed = seed;
  st.cursors = InitCursors(pool, seed ^ 0x5bf03635c2a7e4ffull);
  std::vector<ParamRef> refs =
      TrainableParams(st.params, arch, config.freeze_backbone);
  st.anchor = FlattenParams(refs);
  st.adam.m.assign(st.anchor.size(), 0.0);
  st.adam.v.assign(st.anchor.size(), 0.0);
  st.adam.t = 0;
  return st;
}

bool TrainStep(TrainerState *st, const TrainingPool &pool,
               const std::vector<DevSet> &devs) {
  if (st->done) return false;
  const TrainConfig &cfg = st->config;
  std::vector<ParamRef> refs =
      TrainableParams(st->params, st->arch, cfg.freeze_backbone);
  if (refs.empty()) {  // generative architecture: nothing to train
    st->done = true;
    return false;
  }
  if (devs.empty())
    throw ValidationError(ErrorCode::kInvalidArgument,
                          "training requires at least one dev set");

  // Stage transitions.
  while (true) {
    if (st->stage == 1 && st->iter >= cfg.stage1_batches) {
      double dv = Mean(DevMetricsPerSet(st->params, devs));
      st->best2 = dv;
      st->best2_params = FlattenParams(refs);
      st->best2_adam = st->adam;
      st->stage = 2;
      st->iter = 0;
      continue;
    }
    if (st->stage == 2 && st->iter >= cfg.stage2_batches) {
      UnflattenParams(st->best2_params, refs);
      st->adam = st->best2_adam;
      st->best3 = st->best2;
      st->best3_params = st->best2_params;
      st->stage = 3;
      st->iter = 0;
      continue;
    }
    if (st->stage == 3 && st->iter >= cfg.stage3_batches) {
      st->done = true;
      return false;
    }
    break;
  }

  const double lr = st->stage == 1 ? cfg.lr1
                    : st->stage == 2 ? cfg.lr2
                                     : cfg.lr3;

  Batch batch = MakeBatch(pool, cfg.batch, &st->cursors);
  Matrix x(batch.rows.size(), pool.x.cols());
  Vector dur(batch.rows.size());
  for (std::size_t i = 0; i < batch.rows.size(); ++i) {
    x.row(static_cast<Eigen::Index>(i)) = pool.x.row(batch.rows[i]);
    dur(static_cast<Eigen::Index>(i)) = pool.dur(batch.rows[i]);
  }

  std::vector<double> grad;
  double loss =
      LossAndGradients(st->params, refs, x, dur, batch.trials, cfg.pi, &grad);
  if (!std::isfinite(loss))
    throw NumericalError(ErrorCode::kNonFiniteValue,
                         "training loss diverged (not finite)");

  // L2 regularization toward the initialization values, per group.
  {
    std::size_t off = 0;
    for (const auto &r : refs) {
      const double lambda = GroupL2Weight(cfg, r.group);
      if (lambda != 0.0) {
        for (std::size_t i = 0; i < r.size; ++i)
          grad[off + i] += 2.0 * lambda * (r.data[i] - st->anchor[off + i]);
      }
      off += r.size;
    }
  }

  double norm_sq = 0.0;
  for (double v : grad) norm_sq += v * v;
  const double grad_norm = std::sqrt(norm_sq);
  double scale = 1.0;
  if (cfg.grad_clip_norm > 0.0 && grad_norm > cfg.grad_clip_norm)
    scale = cfg.grad_clip_norm / grad_norm;

  // Adam with bias correction.
  st->adam.t += 1;
  const double b1 = cfg.adam_beta1, b2 = cfg.adam_beta2;
  const double bc1 = 1.0 - std::pow(b1, static_cast<double>(st->adam.t));
  const double bc2 = 1.0 - std::pow(b2, static_cast<double>(st->adam.t));
  {
    std::size_t off = 0;
    for (const auto &r : refs) {
      for (std::size_t i = 0; i < r.size; ++i) {
        const std::size_t k = off + i;
        const double gk = grad[k] * scale;
        st->adam.m[k] = b1 * st->adam.m[k] + (1.0 - b1) * gk;
        st->adam.v[k] = b2 * st->adam.v[k] + (1.0 - b2) * gk * gk;
        const double mhat = st->adam.m[k] / bc1;
        const double vhat = st->adam.v[k] / bc2;
        r.data[i] -= lr * mhat / (std::sqrt(vhat) + cfg.adam_eps);
      }
      off += r.size;
    }
  }

  TrainLogRow row;
  row.stage = st->stage;
  row.batch = st->iter + 1;
  row.train_loss = loss;
  row.grad_norm = grad_norm;
  if (st->stage >= 2) {
    row.dev = DevMetricsPerSet(st->params, devs);
    const double dv = Mean(row.dev);
    if (st->stage == 2 && dv < st->best2) {
      st->best2 = dv;
      st->best2_params = FlattenParams(refs);
      st->best2_adam = st->adam;
    }
    if (st->stage == 3 && dv < st->best3) {
      st->best3 = dv;
      st->best3_params = FlattenParams(refs);
    }
  }
  st->log.push_back(std::move(row));
  st->iter += 1;
  return true;
}

BackendParams FinishTraining(const TrainerState &state) {
  BackendParams params = state.params;
  if (!state.best3_params.empty()) {
    std::vector<ParamRef> refs =
        TrainableParams(params, state.arch, state.config.freeze_backbone);
    UnflattenParams(state.best3_params, refs);
  }
  return params;
}

TrainOutput TrainBackend(const TrainingPool &pool,
                         const std::vector<DevSet> &devs,
                         const GenerativeInit &gen, Architecture arch,
                         const InitOptions &opts, const TrainConfig &config) {
  TrainOutput out;
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < std::max(1, config.n_seeds); ++i) {
    const std::uint64_t seed = config.seed + static_cast<std::uint64_t>(i);
    BackendParams init = AssembleInit(gen, arch, opts, seed);
    if (arch == Architecture::kPlda) {
      // Generative pipeline: the initialization is the model.
      out.params = init;
      out.best_seed = seed;
      out.best_dev = devs.empty() ? 0.0 : DevMetric(init, devs);
      out.seed_results.push_back({seed, out.best_dev});
      return out;
    }
    TrainerState st = InitTrainer(pool, std::move(init), arch, config, seed);
    while (TrainStep(&st, pool, devs)) {
    }
    BackendParams model = FinishTraining(st);
    const double dev = st.best3;
    out.seed_results.push_back({seed, dev});
    if (dev < best) {
      best = dev;
      out.params = std::move(model);
      out.log = std::move(st.log);
      out.best_dev = dev;
      out.best_seed = seed;
    }
  }
  return out;
}

}  // namespace dcaplda
