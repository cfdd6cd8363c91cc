// include/dcaplda/calibration.hpp

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

#ifndef DCAPLDA_CALIBRATION_HPP_
#define DCAPLDA_CALIBRATION_HPP_

#include <string>
#include <vector>

#include "dcaplda/common.hpp"

namespace dcaplda {

struct GlobalCal {
  double alpha = 1.0;
  double beta = 0.0;
};

// Symmetric second-order form over a pair of feature vectors, identical in
// shape to the PLDA score polynomial. Lambda and gamma are effectively
// symmetric: the forward pass always uses their symmetric part.
struct PolyBlock {
  Matrix lambda;
  Matrix gamma;
  Vector c;
  double k = 0.0;

  PolyBlock() = default;
  explicit PolyBlock(int dim)
      : lambda(Matrix::Zero(dim, dim)),
        gamma(Matrix::Zero(dim, dim)),
        c(Vector::Zero(dim)) {}
  int Dim() const { return static_cast<int>(c.size()); }
  long long NumParameters() const {
    long long d = Dim();
    return 2 * d * d + d + 1;
  }
};

// 2 u' Lambda v + u' Gamma u + v' Gamma v + (u + v)' c + k
double PolyScalar(const PolyBlock &block, const Eigen::Ref<const Vector> &u,
                  const Eigen::Ref<const Vector> &v);

enum class DurationFeatureKind { kLog, kBin, kWlog };

DurationFeatureKind ParseDurationFeatureKind(const std::string &name);
const char *DurationFeatureKindName(DurationFeatureKind kind);

struct DurationCal {
  DurationFeatureKind kind = DurationFeatureKind::kWlog;
  std::vector<double> bin_edges;  // strictly increasing, kBin only
  double wlog_center_s = 30.0;    // c > 0, kWlog only
  double wlog_slope = 2.0;        // s > 0, kWlog only
  PolyBlock alpha;
  PolyBlock beta;

  int FeatureDim() const;
  void Validate() const;
};

int DurationFeatureDim(DurationFeatureKind kind, std::size_t n_bin_edges);

// log:  [log d]
// bin:  one-hot over |edges|+1 bins
// wlog: log(d) [sigma_sc(d), 1 - sigma_sc(d)]  with
//       sigma_sc(d) = sigmoid(slope (log d - log center))
Vector DurationFeatures(double d_seconds, const DurationCal &cal);

enum class SideInfoTransform { kIdentity, kSoftmax, kLogSoftmax };

SideInfoTransform ParseSideInfoTransform(const std::string &name);
const char *SideInfoTransformName(SideInfoTransform f);

// Side-information branch: m = Norm(A_m x + b_m), z = f(A_z m + b_z).
// Operates on the raw embedding x.
struct SideInfoCal {
  Matrix a_m;  // M x D
  Vector b_m;  // M
  Matrix a_z;  // S x M
  Vector b_z;  // S
  SideInfoTransform f = SideInfoTransform::kIdentity;
  PolyBlock alpha;  // dim S
  PolyBlock beta;   // dim S

  int MDim() const { return static_cast<int>(b_m.size()); }
  int SDim() const { return static_cast<int>(b_z.size()); }
};

Vector SideInfoVector(const SideInfoCal &cal, const Eigen::Ref<const Vector> &x);

// Applies f to the pre-activation a = A_z m + b_z.
Vector ApplySideTransform(SideInfoTransform f, const Vector &a);

enum class CalStage { kGlobal, kDurationOnly, kSideInfoOnly, kDurationSideInfo };

const char *CalStageName(CalStage stage);

// Scalar forward pass through the configured calibration stack.
//   global: l = alpha s + beta
//   DD:     l = alpha_d s + beta_d
//   SD:     l = alpha_s s + beta_s
//   DSD:    l = alpha_s (alpha_d s + beta_d) + beta_s
// e1/e2 are duration features and z1/z2 side-information vectors for trial
// sides; only the vectors the stage needs are read.
double Calibrate(CalStage stage, double s, const GlobalCal &global,
                 const DurationCal *dur, const SideInfoCal *side,
                 const Vector *e1, const Vector *e2, const Vector *z1,
                 const Vector *z2);

}  // namespace dcaplda

#endif  // DCAPLDA_CALIBRATION_HPP_
