// src/backend.cpp

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

#include "dcaplda/backend.hpp"

#include <algorithm>
#include <cmath>

namespace dcaplda {

Architecture ParseArchitecture(const std::string &name) {
  if (name == "plda") return Architecture::kPlda;
  if (name == "d-plda") return Architecture::kDPlda;
  if (name == "d-plda-dd") return Architecture::kDPldaDd;
  if (name == "d-plda-sd") return Architecture::kDPldaSd;
  if (name == "d-plda-dsd" || name == "dca-plda") return Architecture::kDPldaDsd;
  throw ValidationError(ErrorCode::kInvalidConfig,
                        "unknown architecture '" + name + "'");
}

const char *ArchitectureName(Architecture arch) {
  switch (arch) {
    case Architecture::kPlda: return "plda";
    case Architecture::kDPlda: return "d-plda";
    case Architecture::kDPldaDd: return "d-plda-dd";
    case Architecture::kDPldaSd: return "d-plda-sd";
    case Architecture::kDPldaDsd: return "d-plda-dsd";
  }
  return "?";
}

CalStage StageFor(Architecture arch) {
  switch (arch) {
    case Architecture::kPlda:
    case Architecture::kDPlda: return CalStage::kGlobal;
    case Architecture::kDPldaDd: return CalStage::kDurationOnly;
    case Architecture::kDPldaSd: return CalStage::kSideInfoOnly;
    case Architecture::kDPldaDsd: return CalStage::kDurationSideInfo;
  }
  return CalStage::kGlobal;
}

namespace {

bool NeedsDur(CalStage stage) {
  return stage == CalStage::kDurationOnly ||
         stage == CalStage::kDurationSideInfo;
}

bool NeedsSide(CalStage stage) {
  return stage == CalStage::kSideInfoOnly ||
         stage == CalStage::kDurationSideInfo;
}

}  // namespace

SampleCache PrepareSamples(const BackendParams &params, const Matrix &x_raw,
                           const Vector &durations) {
  const Eigen::Index n = x_raw.rows();
  SampleCache cache;

  Matrix u = x_raw * params.preproc.a_p.transpose();
  u.rowwise() += params.preproc.m_p.transpose();
  cache.w.resize(n, u.cols());
  cache.w_unorm.resize(n);
  bool degenerate = false;
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < n; ++i) {
    double nrm = u.row(i).norm();
    cache.w_unorm(i) = nrm;
    if (nrm == 0.0 || !std::isfinite(nrm)) {
      degenerate = true;
      continue;
    }
    cache.w.row(i) = u.row(i) / nrm;
  }
  if (degenerate)
    throw NumericalError(ErrorCode::kDegenerateEmbedding,
                         "zero vector before length norm");

  if (NeedsSide(params.stage)) {
    if (!params.side)
      throw ValidationError(ErrorCode::kInvalidArgument,
                            "stage needs side-info parameters");
    const SideInfoCal &side = *params.side;
    Matrix um = x_raw * side.a_m.transpose();
    um.rowwise() += side.b_m.transpose();
    cache.m.resize(n, um.cols());
    cache.m_unorm.resize(n);
    cache.z.resize(n, side.SDim());
#pragma omp parallel for schedule(static)
    for (Eigen::Index i = 0; i < n; ++i) {
      double nrm = um.row(i).norm();
      cache.m_unorm(i) = nrm;
      if (nrm == 0.0 || !std::isfinite(nrm)) {
        degenerate = true;
        continue;
      }
      cache.m.row(i) = um.row(i) / nrm;
      Vector a = side.a_z * cache.m.row(i).transpose() + side.b_z;
      cache.z.row(i) = ApplySideTransform(side.f, a).transpose();
    }
    if (degenerate)
      throw NumericalError(ErrorCode::kDegenerateEmbedding,
                           "zero vector before side-branch length norm");
  }

  if (NeedsDur(params.stage)) {
    if (!params.dur)
      throw ValidationError(ErrorCode::kInvalidArgument,
                            "stage needs duration parameters");
    if (durations.size() != n)
      throw ValidationError(ErrorCode::kInvalidArgument,
                            "stage needs a duration for every sample");
    cache.e.resize(n, params.dur->FeatureDim());
    for (Eigen::Index i = 0; i < n; ++i)
      cache.e.row(i) = DurationFeatures(durations(i), *params.dur).transpose();
  }
  return cache;
}

TrialScores ForwardTrials(const BackendParams &params, const SampleCache &cache,
                          const TrialSet &trials) {
  const Eigen::Index t = static_cast<Eigen::Index>(trials.NumTrials());
  TrialScores out;
  out.s.resize(t);
  out.g.resize(t);
  out.l.resize(t);
  const bool dur = NeedsDur(params.stage);
  const bool side = NeedsSide(params.stage);
  if (dur) {
    out.alpha_d.resize(t);
    out.beta_d.resize(t);
  }
  if (side) {
    out.alpha_s.resize(t);
    out.beta_s.resize(t);
  }

  // Per-sample score pieces: lw = w Lambda_sym, q = w'Gamma w + w'c.
  Matrix lambda_sym = Symmetrize(params.score.lambda);
  Matrix lw = cache.w * lambda_sym;
  Vector q(cache.w.rows());
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < cache.w.rows(); ++i)
    q(i) = cache.w.row(i).dot(cache.w.row(i) * params.score.gamma) +
           cache.w.row(i).dot(params.score.c);

#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < t; ++i) {
    const Eigen::Index a = trials.enroll[i];
    const Eigen::Index b = trials.test[i];
    double s = 2.0 * lw.row(a).dot(cache.w.row(b)) + q(a) + q(b) +
               params.score.k;
    out.s(i) = s;
    double g = s, l = s;
    if (dur) {
      Vector e1 = cache.e.row(a).transpose();
      Vector e2 = cache.e.row(b).transpose();
      double ad = PolyScalar(params.dur->alpha, e1, e2);
      double bd = PolyScalar(params.dur->beta, e1, e2);
      out.alpha_d(i) = ad;
      out.beta_d(i) = bd;
      g = ad * s + bd;
    } else if (params.stage == CalStage::kGlobal) {
      g = params.global.alpha * s + params.global.beta;
    }
    if (side) {
      Vector z1 = cache.z.row(a).transpose();
      Vector z2 = cache.z.row(b).transpose();
      double as = PolyScalar(params.side->alpha, z1, z2);
      double bs = PolyScalar(params.side->beta, z1, z2);
      out.alpha_s(i) = as;
      out.beta_s(i) = bs;
      double inner = dur ? g : s;
      l = as * inner + bs;
    } else {
      l = g;
    }
    out.g(i) = g;
    out.l(i) = l;
  }
  return out;
}

TrialScores ForwardTrialsRef(const BackendParams &params,
                             const SampleCache &cache, const TrialSet &trials) {
  const Eigen::Index t = static_cast<Eigen::Index>(trials.NumTrials());
  TrialScores out;
  out.s.resize(t);
  out.g.resize(t);
  out.l.resize(t);
  const bool dur = NeedsDur(params.stage);
  const bool side = NeedsSide(params.stage);
  for (Eigen::Index i = 0; i < t; ++i) {
    const Eigen::Index a = trials.enroll[i];
    const Eigen::Index b = trials.test[i];
    double s = ScorePair(params.score, cache.w.row(a).transpose(),
                         cache.w.row(b).transpose());
    Vector e1, e2, z1, z2;
    if (dur) {
      e1 = cache.e.row(a).transpose();
      e2 = cache.e.row(b).transpose();
    }
    if (side) {
      z1 = cache.z.row(a).transpose();
      z2 = cache.z.row(b).transpose();
    }
    out.s(i) = s;
    out.l(i) = Calibrate(params.stage, s, params.global,
                         params.dur ? &*params.dur : nullptr,
                         params.side ? &*params.side : nullptr,
                         dur ? &e1 : nullptr, dur ? &e2 : nullptr,
                         side ? &z1 : nullptr, side ? &z2 : nullptr);
    if (dur)
      out.g(i) = PolyScalar(params.dur->alpha, e1, e2) * s +
                 PolyScalar(params.dur->beta, e1, e2);
    else if (params.stage == CalStage::kGlobal)
      out.g(i) = params.global.alpha * s + params.global.beta;
    else
      out.g(i) = s;
  }
  return out;
}

long long CountParameters(Architecture arch, const ModelDims &dims) {
  const long long d = dims.embedding_dim;
  const long long n = dims.lda_dim;
  const long long m = dims.side_m_dim;
  const long long s = dims.side_s_dim;
  const long long e = dims.dur_feature_dim;
  // LDA + score form, shared by every architecture.
  long long total = n * d + n + 2 * n * n + n + 1;
  auto poly = [](long long dim) { return 2 * dim * dim + dim + 1; };
  switch (StageFor(arch)) {
    case CalStage::kGlobal:
      total += 2;
      break;
    case CalStage::kDurationOnly:
      total += 2 * poly(e);
      break;
    case CalStage::kSideInfoOnly:
      total += m * d + m + s * m + s + 2 * poly(s);
      break;
    case CalStage::kDurationSideInfo:
      total += 2 * poly(e) + m * d + m + s * m + s + 2 * poly(s);
      break;
  }
  return total;
}

namespace {

void PushMatrix(std::vector<ParamRef> *refs, const std::string &name,
                const std::string &group, Matrix &m) {
  refs->push_back({name, group, m.data(), static_cast<std::size_t>(m.size())});
}

void PushVector(std::vector<ParamRef> *refs, const std::string &name,
                const std::string &group, Vector &v) {
  refs->push_back({name, group, v.data(), static_cast<std::size_t>(v.size())});
}

void PushScalar(std::vector<ParamRef> *refs, const std::string &name,
                const std::string &group, double &x) {
  refs->push_back({name, group, &x, 1});
}

void PushBlock(std::vector<ParamRef> *refs, const std::string &prefix,
               const std::string &group, PolyBlock &b) {
  PushMatrix(refs, prefix + ".lambda", group, b.lambda);
  PushMatrix(refs, prefix + ".gamma", group, b.gamma);
  PushVector(refs, prefix + ".c", group, b.c);
  PushScalar(refs, prefix + ".k", group, b.k);
}

}  // namespace

std::vector<ParamRef> TrainableParams(BackendParams &params, Architecture arch,
                                      bool freeze_backbone) {
  std::vector<ParamRef> refs;
  if (arch == Architecture::kPlda) return refs;  // generative only
  if (!freeze_backbone) {
    PushMatrix(&refs, "preproc.a_p", "preproc", params.preproc.a_p);
    PushVector(&refs, "preproc.m_p", "preproc", params.preproc.m_p);
    PushMatrix(&refs, "score.lambda", "score", params.score.lambda);
    PushMatrix(&refs, "score.gamma", "score", params.score.gamma);
    PushVector(&refs, "score.c", "score", params.score.c);
    PushScalar(&refs, "score.k", "score", params.score.k);
  }
  const CalStage stage = StageFor(arch);
  if (stage == CalStage::kGlobal) {
    PushScalar(&refs, "global.alpha", "global", params.global.alpha);
    PushScalar(&refs, "global.beta", "global", params.global.beta);
  }
  if (NeedsDur(stage)) {
    if (!params.dur)
      throw ValidationError(ErrorCode::kInvalidArgument,
                            "architecture needs duration parameters");
    PushBlock(&refs, "dur.alpha", "dur", params.dur->alpha);
    PushBlock(&refs, "dur.beta", "dur", params.dur->beta);
  }
  if (NeedsSide(stage)) {
    if (!params.side)
      throw ValidationError(ErrorCode::kInvalidArgument,
                            "architecture needs side-info parameters");
    PushMatrix(&refs, "side.a_m", "side", params.side->a_m);
    PushVector(&refs, "side.b_m", "side", params.side->b_m);
    PushMatrix(&refs, "side.a_z", "side", params.side->a_z);
    PushVector(&refs, "side.b_z", "side", params.side->b_z);
    PushBlock(&refs, "side.alpha", "side", params.side->alpha);
    PushBlock(&refs, "side.beta", "side", params.side->beta);
  }
  return refs;
}

std::size_t TotalSize(const std::vector<ParamRef> &refs) {
  std::size_t n = 0;
  for (const auto &r : refs) n += r.size;
  return n;
}

std::vector<double> FlattenParams(const std::vector<ParamRef> &refs) {
  std::vector<double> flat;
  flat.reserve(TotalSize(refs));
  for (const auto &r : refs) flat.insert(flat.end(), r.data, r.data + r.size);
  return flat;
}

void UnflattenParams(const std::vector<double> &flat,
                     const std::vector<ParamRef> &refs) {
  if (flat.size() != TotalSize(refs))
    throw ValidationError(ErrorCode::kDimensionMismatch,
                          "flat parameter size mismatch");
  std::size_t off = 0;
  for (const auto &r : refs) {
    std::copy(flat.begin() + off, flat.begin() + off + r.size, r.data);
    off += r.size;
  }
}

}  // namespace dcaplda
