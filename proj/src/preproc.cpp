// src/preproc.cpp

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

#include "dcaplda/preproc.hpp"

#include <algorithm>
#include <cmath>

namespace dcaplda {

namespace {

// Deterministic sign: flip each row so its first component with nonzero
// magnitude is positive.
void FixRowSigns(Matrix *a) {
  for (Eigen::Index r = 0; r < a->rows(); ++r) {
    double row_scale = a->row(r).cwiseAbs().maxCoeff();
    if (row_scale == 0.0) continue;
    for (Eigen::Index c = 0; c < a->cols(); ++c) {
      double v = (*a)(r, c);
      if (std::abs(v) > 1e-12 * row_scale) {
        if (v < 0.0) a->row(r) = -a->row(r);
        break;
      }
    }
  }
}

}  // namespace

LdaBasis FitLdaBasis(const Matrix &x, const std::vector<int> &speaker_of_row,
                     const std::vector<double> &speaker_weight,
                     const FitLdaOptions &opts) {
  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();
  if (static_cast<std::size_t>(n) != speaker_of_row.size())
    throw ValidationError(ErrorCode::kDimensionMismatch,
                          "speaker index size does not match rows");
  const int n_spk = static_cast<int>(speaker_weight.size());
  if (n_spk < 2)
    throw ValidationError(ErrorCode::kInsufficientSpeakers,
                          "LDA needs at least 2 speakers");
  for (double w : speaker_weight)
    if (!(w > 0.0))
      throw ValidationError(ErrorCode::kInvalidArgument,
                            "speaker weights must be positive");

  // Per-speaker counts and means.
  std::vector<double> count(n_spk, 0.0);
  Matrix spk_mean = Matrix::Zero(n_spk, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    int s = speaker_of_row[i];
    count[s] += 1.0;
    spk_mean.row(s) += x.row(i);
  }
  double denom = 0.0;  // sum_s c_s N_s
  for (int s = 0; s < n_spk; ++s) {
    if (count[s] == 0.0)
      throw ValidationError(ErrorCode::kInvalidArgument,
                            "speaker " + std::to_string(s) + " has no samples");
    spk_mean.row(s) /= count[s];
    denom += speaker_weight[s] * count[s];
  }

  Vector mu0 = Vector::Zero(d);
  for (int s = 0; s < n_spk; ++s)
    mu0 += speaker_weight[s] * count[s] * spk_mean.row(s).transpose();
  mu0 /= denom;

  Matrix sb = Matrix::Zero(d, d);
  for (int s = 0; s < n_spk; ++s) {
    Vector diff = spk_mean.row(s).transpose() - mu0;
    sb.noalias() += speaker_weight[s] * count[s] * diff * diff.transpose();
  }
  sb /= denom;

  Matrix sw = Matrix::Zero(d, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    int s = speaker_of_row[i];
    Vector diff = x.row(i).transpose() - spk_mean.row(s).transpose();
    sw.noalias() += speaker_weight[s] * diff * diff.transpose();
  }
  sw /= denom;
  sw = Symmetrize(sw);

  // Ridge when the within scatter is ill conditioned.
  Eigen::SelfAdjointEigenSolver<Matrix> sw_eig(sw);
  double lmax = sw_eig.eigenvalues().maxCoeff();
  double lmin = sw_eig.eigenvalues().minCoeff();
  if (!(lmax > 0.0) || lmin <= 0.0 || lmax / lmin > opts.ridge_cond_limit) {
    double eps = opts.ridge_rel * sw.trace() / static_cast<double>(d);
    sw += eps * Matrix::Identity(d, d);
  }
  Eigen::LLT<Matrix> llt(sw);
  if (llt.info() != Eigen::Success)
    throw NumericalError(
        ErrorCode::kSingularMatrix,
        "within-class scatter is singular; increase preproc.ridge_rel");
  // Whiten, diagonalize the whitened between scatter.
  Matrix l_inv =
      llt.matrixL().solve(Matrix::Identity(d, d));  // L^{-1}
  Matrix m = Symmetrize(l_inv * sb * l_inv.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> eig(m);
  if (eig.info() != Eigen::Success)
    throw NumericalError(ErrorCode::kSingularMatrix,
                         "eigendecomposition failed in LDA");

  LdaBasis basis;
  basis.a.resize(d, d);
  // Eigen sorts ascending; we want descending discriminability.
  for (Eigen::Index r = 0; r < d; ++r)
    basis.a.row(r) = (eig.eigenvectors().col(d - 1 - r).transpose() * l_inv);
  double eig_max = std::max(eig.eigenvalues().maxCoeff(), 0.0);
  basis.between_rank = 0;
  for (Eigen::Index r = 0; r < d; ++r)
    if (eig.eigenvalues()(d - 1 - r) > 1e-9 * std::max(eig_max, 1.0))
      ++basis.between_rank;
  FixRowSigns(&basis.a);

  // Scale each direction to unit weighted training variance, then shift
  // the projected mean to zero.
  Matrix proj = x * basis.a.transpose();  // n x d
  Vector pm = Vector::Zero(d);
  for (Eigen::Index i = 0; i < n; ++i)
    pm += speaker_weight[speaker_of_row[i]] * proj.row(i).transpose();
  pm /= denom;
  Vector var = Vector::Zero(d);
  for (Eigen::Index i = 0; i < n; ++i) {
    Vector diff = proj.row(i).transpose() - pm;
    var += speaker_weight[speaker_of_row[i]] * diff.cwiseProduct(diff);
  }
  var /= denom;
  for (Eigen::Index r = 0; r < d; ++r) {
    if (!(var(r) > 0.0))
      throw NumericalError(ErrorCode::kSingularMatrix,
                           "projected dimension " + std::to_string(r) +
                               " has zero variance");
    basis.a.row(r) /= std::sqrt(var(r));
  }
  basis.neg_mean = -(basis.a * mu0);
  return basis;
}

PreprocParams HeadTransform(const LdaBasis &basis, int n) {
  const int d = static_cast<int>(basis.a.rows());
  if (n < 1 || n > d)
    throw ValidationError(ErrorCode::kInvalidArgument,
                          "requested LDA dimension " + std::to_string(n) +
                              " exceeds available " + std::to_string(d));
  PreprocParams p;
  p.a_p = basis.a.topRows(n);
  p.m_p = basis.neg_mean.head(n);
  return p;
}

PreprocParams TailTransform(const LdaBasis &basis, int m) {
  const int d = static_cast<int>(basis.a.rows());
  if (m < 1 || m > d)
    throw ValidationError(ErrorCode::kInvalidArgument,
                          "requested tail dimension " + std::to_string(m) +
                              " exceeds available " + std::to_string(d));
  PreprocParams p;
  p.a_p = basis.a.bottomRows(m);
  p.m_p = basis.neg_mean.tail(m);
  return p;
}

PreprocParams FitLda(const EmbeddingTable &table,
                     const std::vector<SampleMeta> &metas,
                     const std::unordered_map<std::string, double> &weights,
                     int out_dim, const FitLdaOptions &opts) {
  std::vector<int> spk_of_row(metas.size());
  std::vector<double> spk_weight;
  std::unordered_map<std::string, int> spk_index;
  Matrix x(metas.size(), table.Dim());
  for (std::size_t i = 0; i < metas.size(); ++i) {
    x.row(i) = table.x.row(table.RowOf(metas[i].sample_id));
    auto [it, inserted] =
        spk_index.emplace(metas[i].speaker_id, static_cast<int>(spk_weight.size()));
    if (inserted) {
      auto wit = weights.find(metas[i].speaker_id);
      if (wit == weights.end())
        throw ValidationError(ErrorCode::kInvalidArgument,
                              "no weight for speaker '" + metas[i].speaker_id +
                                  "'");
      spk_weight.push_back(wit->second);
    }
    spk_of_row[i] = it->second;
  }
  const int limit = std::min<int>(table.Dim(),
                                  static_cast<int>(spk_weight.size()) - 1);
  if (out_dim > limit)
    throw ValidationError(ErrorCode::kInvalidArgument,
                          "LDA dimension " + std::to_string(out_dim) +
                              " exceeds min(D, n_speakers - 1) = " +
                              std::to_string(limit));
  LdaBasis basis = FitLdaBasis(x, spk_of_row, spk_weight, opts);
  return HeadTransform(basis, out_dim);
}

Vector ApplyPreproc(const PreprocParams &params,
                    const Eigen::Ref<const Vector> &x) {
  if (x.size() != params.a_p.cols())
    throw ValidationError(ErrorCode::kDimensionMismatch,
                          "embedding dimension " + std::to_string(x.size()) +
                              ", transform expects " +
                              std::to_string(params.a_p.cols()));
  Vector u = params.a_p * x + params.m_p;
  double sq = u.squaredNorm();
  if (sq == 0.0 || !std::isfinite(sq))
    throw NumericalError(ErrorCode::kDegenerateEmbedding,
                         "zero or non-finite vector before length norm");
  return u / std::sqrt(sq);
}

Matrix ApplyPreprocAllRef(const PreprocParams &params, const Matrix &x) {
  Matrix w(x.rows(), params.OutDim());
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    w.row(i) = ApplyPreproc(params, x.row(i).transpose()).transpose();
  return w;
}

Matrix ApplyPreprocAll(const PreprocParams &params, const Matrix &x) {
  if (x.cols() != params.a_p.cols())
    throw ValidationError(ErrorCode::kDimensionMismatch,
                          "embedding dimension mismatch");
  Matrix u = x * params.a_p.transpose();
  u.rowwise() += params.m_p.transpose();
  Matrix w(u.rows(), u.cols());
  bool degenerate = false;
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < u.rows(); ++i) {
    double sq = u.row(i).squaredNorm();
    if (sq == 0.0 || !std::isfinite(sq)) {
      degenerate = true;
      continue;
    }
    w.row(i) = u.row(i) / std::sqrt(sq);
  }
  if (degenerate)
    throw NumericalError(ErrorCode::kDegenerateEmbedding,
                         "zero or non-finite vector before length norm");
  return w;
}

}  // namespace dcaplda
