// src/calibration.cpp

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

#include "dcaplda/calibration.hpp"

#include <algorithm>
#include <cmath>

namespace dcaplda {

double PolyScalar(const PolyBlock &block, const Eigen::Ref<const Vector> &u,
                  const Eigen::Ref<const Vector> &v) {
  if (u.size() != block.Dim() || v.size() != block.Dim())
    throw ValidationError(ErrorCode::kDimensionMismatch,
                          "feature vector does not match block dimension");
  // 2 u' sym(Lambda) v written as u'Lv + v'Lu; the quadratic terms see only
  // the symmetric part of gamma automatically.
  double cross = u.dot(block.lambda * v) + v.dot(block.lambda * u);
  return cross + u.dot(block.gamma * u) + v.dot(block.gamma * v) +
         (u + v).dot(block.c) + block.k;
}

DurationFeatureKind ParseDurationFeatureKind(const std::string &name) {
  if (name == "log") return DurationFeatureKind::kLog;
  if (name == "bin") return DurationFeatureKind::kBin;
  if (name == "wlog") return DurationFeatureKind::kWlog;
  throw ValidationError(ErrorCode::kInvalidConfig,
                        "unknown duration feature kind '" + name + "'");
}

const char *DurationFeatureKindName(DurationFeatureKind kind) {
  switch (kind) {
    case DurationFeatureKind::kLog: return "log";
    case DurationFeatureKind::kBin: return "bin";
    case DurationFeatureKind::kWlog: return "wlog";
  }
  return "?";
}

int DurationFeatureDim(DurationFeatureKind kind, std::size_t n_bin_edges) {
  switch (kind) {
    case DurationFeatureKind::kLog: return 1;
    case DurationFeatureKind::kBin: return static_cast<int>(n_bin_edges) + 1;
    case DurationFeatureKind::kWlog: return 2;
  }
  return 0;
}

int DurationCal::FeatureDim() const {
  return DurationFeatureDim(kind, bin_edges.size());
}

void DurationCal::Validate() const {
  if (kind == DurationFeatureKind::kBin) {
    if (bin_edges.empty())
      throw ValidationError(ErrorCode::kInvalidConfig,
                            "bin duration features need thresholds");
    for (std::size_t i = 1; i < bin_edges.size(); ++i)
      if (!(bin_edges[i] > bin_edges[i - 1]))
        throw ValidationError(ErrorCode::kInvalidConfig,
                              "bin thresholds must be strictly increasing");
  }
  if (kind == DurationFeatureKind::kWlog) {
    if (!(wlog_center_s > 0.0) || !(wlog_slope > 0.0))
      throw ValidationError(ErrorCode::kInvalidConfig,
                            "wlog needs center > 0 and slope > 0");
  }
  if (alpha.Dim() != FeatureDim() || beta.Dim() != FeatureDim())
    throw ValidationError(ErrorCode::kDimensionMismatch,
                          "duration blocks do not match feature dimension");
}

Vector DurationFeatures(double d_seconds, const DurationCal &cal) {
  if (!(d_seconds > 0.0) || !std::isfinite(d_seconds))
    throw ValidationError(ErrorCode::kInvalidArgument,
                          "duration must be positive and finite");
  switch (cal.kind) {
    case DurationFeatureKind::kLog: {
      Vector e(1);
      e(0) = std::log(d_seconds);
      return e;
    }
    case DurationFeatureKind::kBin: {
      Vector e = Vector::Zero(static_cast<Eigen::Index>(cal.bin_edges.size()) + 1);
      std::size_t idx = 0;
      while (idx < cal.bin_edges.size() && d_seconds >= cal.bin_edges[idx])
        ++idx;
      e(static_cast<Eigen::Index>(idx)) = 1.0;
      return e;
    }
    case DurationFeatureKind::kWlog: {
      double logd = std::log(d_seconds);
      double sig =
          Sigmoid(cal.wlog_slope * (logd - std::log(cal.wlog_center_s)));
      Vector e(2);
      e(0) = logd * sig;
      e(1) = logd * (1.0 - sig);
      return e;
    }
  }
  throw ValidationError(ErrorCode::kInvalidArgument, "bad feature kind");
}

SideInfoTransform ParseSideInfoTransform(const std::string &name) {
  if (name == "identity") return SideInfoTransform::kIdentity;
  if (name == "softmax") return SideInfoTransform::kSoftmax;
  if (name == "log_softmax") return SideInfoTransform::kLogSoftmax;
  throw ValidationError(ErrorCode::kInvalidConfig,
                        "unknown side-info transform '" + name + "'");
}

const char *SideInfoTransformName(SideInfoTransform f) {
  switch (f) {
    case SideInfoTransform::kIdentity: return "identity";
    case SideInfoTransform::kSoftmax: return "softmax";
    case SideInfoTransform::kLogSoftmax: return "log_softmax";
  }
  return "?";
}

Vector ApplySideTransform(SideInfoTransform f, const Vector &a) {
  switch (f) {
    case SideInfoTransform::kIdentity:
      return a;
    case SideInfoTransform::kSoftmax: {
      Vector e = (a.array() - a.maxCoeff()).exp();
      return e / e.sum();
    }
    case SideInfoTransform::kLogSoftmax: {
      double m = a.maxCoeff();
      double lse = m + std::log((a.array() - m).exp().sum());
      return a.array() - lse;
    }
  }
  throw ValidationError(ErrorCode::kInvalidArgument, "bad transform");
}

Vector SideInfoVector(const SideInfoCal &cal,
                      const Eigen::Ref<const Vector> &x) {
  if (x.size() != cal.a_m.cols())
    throw ValidationError(ErrorCode::kDimensionMismatch,
                          "embedding does not match side branch input");
  Vector u = cal.a_m * x + cal.b_m;
  double sq = u.squaredNorm();
  if (sq == 0.0 || !std::isfinite(sq))
    throw NumericalError(ErrorCode::kDegenerateEmbedding,
                         "zero vector before side-branch length norm");
  Vector m = u / std::sqrt(sq);
  return ApplySideTransform(cal.f, cal.a_z * m + cal.b_z);
}

const char *CalStageName(CalStage stage) {
  switch (stage) {
    case CalStage::kGlobal: return "global";
    case CalStage::kDurationOnly: return "dd";
    case CalStage::kSideInfoOnly: return "sd";
    case CalStage::kDurationSideInfo: return "dsd";
  }
  return "?";
}

double Calibrate(CalStage stage, double s, const GlobalCal &global,
                 const DurationCal *dur, const SideInfoCal *side,
                 const Vector *e1, const Vector *e2, const Vector *z1,
                 const Vector *z2) {
  auto need = [](const void *p, const char *what) {
    if (p == nullptr)
      throw ValidationError(ErrorCode::kInvalidArgument,
                            std::string("calibration stage needs ") + what);
  };
  switch (stage) {
    case CalStage::kGlobal:
      return global.alpha * s + global.beta;
    case CalStage::kDurationOnly: {
      need(dur, "duration parameters");
      need(e1, "duration features");
      need(e2, "duration features");
      return PolyScalar(dur->alpha, *e1, *e2) * s +
             PolyScalar(dur->beta, *e1, *e2);
    }
    case CalStage::kSideInfoOnly: {
      need(side, "side-info parameters");
      need(z1, "side-info vectors");
      need(z2, "side-info vectors");
      return PolyScalar(side->alpha, *z1, *z2) * s +
             PolyScalar(side->beta, *z1, *z2);
    }
    case CalStage::kDurationSideInfo: {
      need(dur, "duration parameters");
      need(side, "side-info parameters");
      need(e1, "duration features");
      need(e2, "duration features");
      need(z1, "side-info vectors");
      need(z2, "side-info vectors");
      double inner = PolyScalar(dur->alpha, *e1, *e2) * s +
                     PolyScalar(dur->beta, *e1, *e2);
      return PolyScalar(side->alpha, *z1, *z2) * inner +
             PolyScalar(side->beta, *z1, *z2);
    }
  }
  throw ValidationError(ErrorCode::kInvalidArgument, "bad stage");
}

}  // namespace dcaplda
