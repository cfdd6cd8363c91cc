// src/plda.cpp

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

#include "dcaplda/plda.hpp"

#include <algorithm>
#include <cmath>

namespace dcaplda {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

// Cholesky with failure mapped to a NumericalError.
Eigen::LLT<Matrix> CholeskyOrThrow(const Matrix &a, const std::string &what) {
  Eigen::LLT<Matrix> llt(a);
  if (llt.info() != Eigen::Success)
    throw NumericalError(ErrorCode::kSingularMatrix, what + " is not SPD");
  return llt;
}

double LogDetFromLlt(const Eigen::LLT<Matrix> &llt) {
  return 2.0 * Matrix(llt.matrixL()).diagonal().array().log().sum();
}

Matrix InverseSpd(const Matrix &a, const std::string &what) {
  Eigen::LLT<Matrix> llt = CholeskyOrThrow(a, what);
  return llt.solve(Matrix::Identity(a.rows(), a.cols()));
}

void CheckModel(const PldaModel &model) {
  if (model.b.rows() != model.Dim() || model.w.rows() != model.Dim())
    throw ValidationError(ErrorCode::kDimensionMismatch,
                          "model matrices do not match mu dimension");
  CholeskyOrThrow(model.b, "between precision B");
  CholeskyOrThrow(model.w, "within precision W");
}

// Sufficient statistics per speaker: counts, sums, and the weighted total
// second moment (shared across speakers).
struct SpeakerStats {
  std::vector<double> count;    // N_s
  Matrix sum;                   // n_spk x N, sum of w_i per speaker
  Matrix weighted_scatter;      // sum_s c_s sum_{i in s} w_i w_i'
  double weight_total = 0.0;    // sum_s c_s
  double weight_samples = 0.0;  // sum_s c_s N_s
};

SpeakerStats Accumulate(const SpeakerDataset &data) {
  const int n_spk = data.NumSpeakers();
  const Eigen::Index dim = data.w.cols();
  SpeakerStats st;
  st.count.assign(n_spk, 0.0);
  st.sum = Matrix::Zero(n_spk, dim);
  st.weighted_scatter = Matrix::Zero(dim, dim);
  for (Eigen::Index i = 0; i < data.w.rows(); ++i) {
    int s = data.spk[i];
    st.count[s] += 1.0;
    st.sum.row(s) += data.w.row(i);
  }
  for (Eigen::Index i = 0; i < data.w.rows(); ++i) {
    double c = data.spk_weight[data.spk[i]];
    st.weighted_scatter.noalias() +=
        c * data.w.row(i).transpose() * data.w.row(i);
  }
  for (int s = 0; s < n_spk; ++s) {
    st.weight_total += data.spk_weight[s];
    st.weight_samples += data.spk_weight[s] * st.count[s];
  }
  return st;
}

}  // namespace

SpeakerDataset PrepareSpeakerDataset(
    const Matrix &w, const std::vector<SampleMeta> &metas,
    const std::unordered_map<std::string, double> &weights, int min_samples) {
  if (static_cast<std::size_t>(w.rows()) != metas.size())
    throw ValidationError(ErrorCode::kDimensionMismatch,
                          "metadata does not match vector rows");
  std::unordered_map<std::string, int> counts;
  for (const auto &m : metas) counts[m.speaker_id] += 1;

  SpeakerDataset out;
  std::unordered_map<std::string, int> index;
  std::vector<Eigen::Index> keep;
  for (std::size_t i = 0; i < metas.size(); ++i) {
    const std::string &spk = metas[i].speaker_id;
    if (counts[spk] < min_samples) continue;
    auto [it, inserted] = index.emplace(spk, static_cast<int>(out.spk_weight.size()));
    if (inserted) {
      auto wit = weights.find(spk);
      if (wit == weights.end())
        throw ValidationError(ErrorCode::kInvalidArgument,
                              "no weight for speaker '" + spk + "'");
      if (!(wit->second > 0.0))
        throw ValidationError(ErrorCode::kInvalidArgument,
                              "weight for speaker '" + spk +
                                  "' must be positive");
      out.spk_weight.push_back(wit->second);
    }
    keep.push_back(static_cast<Eigen::Index>(i));
    out.spk.push_back(it->second);
  }
  std::size_t dropped = 0;
  for (const auto &[spk, c] : counts)
    if (c < min_samples) ++dropped;
  if (dropped > 0)
    Warn(std::to_string(dropped) + " speaker(s) with fewer than " +
         std::to_string(min_samples) + " samples excluded from PLDA training");
  out.w.resize(static_cast<Eigen::Index>(keep.size()), w.cols());
  for (std::size_t i = 0; i < keep.size(); ++i) out.w.row(i) = w.row(keep[i]);
  return out;
}

Matrix SpdRepair(const Matrix &a, const SpdRepairOptions &opts) {
  Matrix sym = Symmetrize(a);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(sym);
  if (eig.info() != Eigen::Success)
    throw NumericalError(ErrorCode::kSingularMatrix,
                         "eigendecomposition failed in SPD repair");
  double lmax = eig.eigenvalues().maxCoeff();
  if (!(lmax > 0.0))
    throw NumericalError(ErrorCode::kSingularMatrix,
                         "matrix has no positive eigenvalue");
  double floor = opts.rel_floor * lmax;
  if (eig.eigenvalues().minCoeff() >= floor) return sym;
  Vector fixed = eig.eigenvalues().cwiseMax(floor);
  return eig.eigenvectors() * fixed.asDiagonal() *
         eig.eigenvectors().transpose();
}

PldaModel InitPlda(const SpeakerDataset &data, const SpdRepairOptions &repair) {
  if (data.NumSpeakers() < 2)
    throw ValidationError(ErrorCode::kInsufficientSpeakers,
                          "PLDA initialization needs at least 2 usable speakers");
  const Eigen::Index dim = data.w.cols();
  SpeakerStats st = Accumulate(data);

  Vector mu0 = Vector::Zero(dim);
  for (int s = 0; s < data.NumSpeakers(); ++s)
    mu0 += data.spk_weight[s] * st.sum.row(s).transpose();
  mu0 /= st.weight_samples;

  Matrix between = Matrix::Zero(dim, dim);
  Matrix within = Matrix::Zero(dim, dim);
  for (int s = 0; s < data.NumSpeakers(); ++s) {
    Vector mean_s = st.sum.row(s).transpose() / st.count[s];
    Vector diff = mean_s - mu0;
    between.noalias() +=
        data.spk_weight[s] * st.count[s] * diff * diff.transpose();
    // within contribution: sum_i w_i w_i' - N_s mean_s mean_s'
    within.noalias() -= data.spk_weight[s] * st.count[s] * mean_s *
                        mean_s.transpose();
  }
  within += st.weighted_scatter;
  between /= st.weight_samples;
  within /= st.weight_samples;

  PldaModel model;
  model.mu = mu0;
  model.b = SpdRepair(InverseSpd(SpdRepair(between, repair), "between scatter"),
                      repair);
  model.w = SpdRepair(InverseSpd(SpdRepair(within, repair), "within scatter"),
                      repair);
  return model;
}

EmStepResult EmStep(const PldaModel &model, const SpeakerDataset &data) {
  CheckModel(model);
  const Eigen::Index dim = data.w.cols();
  const int n_spk = data.NumSpeakers();
  SpeakerStats st = Accumulate(data);

  Eigen::LLT<Matrix> llt_b = CholeskyOrThrow(model.b, "B");
  Eigen::LLT<Matrix> llt_w = CholeskyOrThrow(model.w, "W");
  const double logdet_b = LogDetFromLlt(llt_b);
  const double logdet_w = LogDetFromLlt(llt_w);
  const Vector b_mu = model.b * model.mu;
  const double mu_b_mu = model.mu.dot(b_mu);

  // Posterior precisions B + n W depend only on the speaker's sample count;
  // cache decompositions per distinct count.
  std::unordered_map<long long, std::pair<Matrix, double>> post_cache;
  auto posterior = [&](double n) -> const std::pair<Matrix, double> & {
    long long key = static_cast<long long>(n);
    auto it = post_cache.find(key);
    if (it == post_cache.end()) {
      Matrix p = model.b + n * model.w;
      Eigen::LLT<Matrix> llt = CholeskyOrThrow(p, "posterior precision");
      Matrix cov = llt.solve(Matrix::Identity(dim, dim));
      double logdet = LogDetFromLlt(llt);
      it = post_cache.emplace(key, std::make_pair(cov, logdet)).first;
    }
    return it->second;
  };

  double loglike = 0.0;
  double sum_w = 0.0;        // sum_s c_s
  Vector mean_acc = Vector::Zero(dim);
  Matrix y_moment = Matrix::Zero(dim, dim);   // sum_s c_s (Sigma_s + y y')
  Matrix cross_acc = Matrix::Zero(dim, dim);  // sum_s c_s y sum_w'
  Matrix cov_acc = Matrix::Zero(dim, dim);    // sum_s c_s n_s Sigma_s
  Matrix yy_count = Matrix::Zero(dim, dim);   // sum_s c_s n_s y y'

  // Quadratic data term sum_i w_i' W w_i, weighted.
  double data_quad = (model.w.cwiseProduct(st.weighted_scatter)).sum();

  for (int s = 0; s < n_spk; ++s) {
    const double n_s = st.count[s];
    const double c_s = data.spk_weight[s];
    const auto &[cov, logdet_p] = posterior(n_s);
    Vector h = b_mu + model.w * st.sum.row(s).transpose();
    Vector y_hat = cov * h;

    // log p(data_s) = -n N/2 log 2pi + 1/2 log|B| + n/2 log|W|
    //                 - 1/2 log|P| + 1/2 h'P^-1 h - 1/2 mu'B mu
    //                 - 1/2 sum_i w_i' W w_i
    loglike += c_s * (-0.5 * n_s * dim * kLog2Pi + 0.5 * logdet_b +
                      0.5 * n_s * logdet_w - 0.5 * logdet_p +
                      0.5 * h.dot(y_hat) - 0.5 * mu_b_mu);

    sum_w += c_s;
    mean_acc += c_s * y_hat;
    y_moment.noalias() += c_s * (cov + y_hat * y_hat.transpose());
    cross_acc.noalias() += c_s * y_hat * st.sum.row(s);
    cov_acc.noalias() += c_s * n_s * cov;
    yy_count.noalias() += c_s * n_s * y_hat * y_hat.transpose();
  }
  loglike -= 0.5 * data_quad;

  EmStepResult result;
  result.loglike = loglike;

  Vector mu_new = mean_acc / sum_w;
  Matrix b_cov = y_moment / sum_w - mu_new * mu_new.transpose();
  // E[(w - y)(w - y)'] summed over samples:
  //   sum_i w_i w_i' - y sum' - sum y' + n y y' + n Sigma
  Matrix w_cov = (st.weighted_scatter - cross_acc - cross_acc.transpose() +
                  yy_count + cov_acc) /
                 st.weight_samples;

  PldaModel updated;
  updated.mu = mu_new;
  b_cov = Symmetrize(b_cov);
  w_cov = Symmetrize(w_cov);
  {
    Eigen::LLT<Matrix> llt_bc(b_cov);
    Eigen::LLT<Matrix> llt_wc(w_cov);
    if (llt_bc.info() != Eigen::Success || llt_wc.info() != Eigen::Success)
      throw NumericalError(ErrorCode::kNonSpdUpdate,
                           "EM update produced a non-SPD covariance");
    updated.b = Symmetrize(llt_bc.solve(Matrix::Identity(dim, dim)));
    updated.w = Symmetrize(llt_wc.solve(Matrix::Identity(dim, dim)));
  }
  result.model = std::move(updated);
  return result;
}

PldaModel RunEm(const PldaModel &init, const SpeakerDataset &data,
                const EmOptions &opts, std::vector<double> *loglike_trace) {
  PldaModel model = init;
  double prev = 0.0;
  bool have_prev = false;
  for (int it = 0; it < opts.max_iters; ++it) {
    EmStepResult step;
    try {
      step = EmStep(model, data);
    } catch (const NumericalError &e) {
      throw NumericalError(ErrorCode::kNonSpdUpdate,
                           std::string(e.what()) + " (EM iteration " +
                               std::to_string(it) + ")");
    }
    if (loglike_trace) loglike_trace->push_back(step.loglike);
    model = std::move(step.model);
    if (have_prev) {
      double rel = std::abs(step.loglike - prev) /
                   std::max(1.0, std::abs(prev));
      if (rel < opts.rel_tol) break;
    }
    prev = step.loglike;
    have_prev = true;
  }
  return model;
}

ScoreForm ToScoreForm(const PldaModel &model) {
  CheckModel(model);
  const Eigen::Index dim = model.Dim();
  Matrix b_plus_2w = model.b + 2.0 * model.w;
  Matrix b_plus_w = model.b + model.w;
  Eigen::LLT<Matrix> llt_b2w = CholeskyOrThrow(b_plus_2w, "B + 2W");
  Eigen::LLT<Matrix> llt_bw = CholeskyOrThrow(b_plus_w, "B + W");
  Eigen::LLT<Matrix> llt_b = CholeskyOrThrow(model.b, "B");

  Matrix lambda_t = llt_b2w.solve(Matrix::Identity(dim, dim));  // (B+2W)^-1
  Matrix gamma_t = llt_bw.solve(Matrix::Identity(dim, dim));    // (B+W)^-1
  // log|lambda_t| = -log|B+2W|, log|gamma_t| = -log|B+W|
  double logdet_lambda_t = -LogDetFromLlt(llt_b2w);
  double logdet_gamma_t = -LogDetFromLlt(llt_bw);
  double logdet_b = LogDetFromLlt(llt_b);

  Vector b_mu = model.b * model.mu;
  double k_tilde = -2.0 * logdet_gamma_t - logdet_b + logdet_lambda_t +
                   model.mu.dot(b_mu);

  Matrix diff = lambda_t - gamma_t;
  ScoreForm form;
  form.lambda = Symmetrize(0.5 * model.w.transpose() * lambda_t * model.w);
  form.gamma = Symmetrize(0.5 * model.w.transpose() * diff * model.w);
  form.c = model.w.transpose() * diff * b_mu;
  form.k = 0.5 * k_tilde +
           0.5 * b_mu.dot((lambda_t - 2.0 * gamma_t) * b_mu);
  return form;
}

double ScorePair(const ScoreForm &form, const Eigen::Ref<const Vector> &w1,
                 const Eigen::Ref<const Vector> &w2) {
  if (w1.size() != form.Dim() || w2.size() != form.Dim())
    throw ValidationError(ErrorCode::kDimensionMismatch,
                          "vector does not match score form dimension");
  // The cross term is written out with both orientations so that an
  // asymmetric lambda still behaves as its symmetric part.
  double cross = w1.dot(form.lambda * w2) + w2.dot(form.lambda * w1);
  return cross + w1.dot(form.gamma * w1) + w2.dot(form.gamma * w2) +
         (w1 + w2).dot(form.c) + form.k;
}

Matrix ScorePairsRef(const ScoreForm &form, const Matrix &w1,
                     const Matrix &w2) {
  Matrix s(w1.rows(), w2.rows());
  for (Eigen::Index i = 0; i < w1.rows(); ++i)
    for (Eigen::Index j = 0; j < w2.rows(); ++j)
      s(i, j) = ScorePair(form, w1.row(i).transpose(), w2.row(j).transpose());
  return s;
}

Matrix ScorePairs(const ScoreForm &form, const Matrix &w1, const Matrix &w2,
                  int block) {
  if (w1.cols() != form.Dim() || w2.cols() != form.Dim())
    throw ValidationError(ErrorCode::kDimensionMismatch,
                          "vectors do not match score form dimension");
  if (block < 1) block = 1024;
  const Eigen::Index n1 = w1.rows(), n2 = w2.rows();
  Matrix lambda_sym = Symmetrize(form.lambda);
  // Per-side quadratic and linear terms.
  Matrix g1 = w1 * form.gamma;
  Matrix g2 = w2 * form.gamma;
  Vector q1(n1), q2(n2);
  for (Eigen::Index i = 0; i < n1; ++i)
    q1(i) = g1.row(i).dot(w1.row(i)) + w1.row(i).dot(form.c);
  for (Eigen::Index j = 0; j < n2; ++j)
    q2(j) = g2.row(j).dot(w2.row(j)) + w2.row(j).dot(form.c);

  Matrix s(n1, n2);
  const Eigen::Index nb1 = (n1 + block - 1) / block;
  const Eigen::Index nb2 = (n2 + block - 1) / block;
#pragma omp parallel for collapse(2) schedule(dynamic)
  for (Eigen::Index bi = 0; bi < nb1; ++bi) {
    for (Eigen::Index bj = 0; bj < nb2; ++bj) {
      const Eigen::Index r0 = bi * block, r1 = std::min<Eigen::Index>(r0 + block, n1);
      const Eigen::Index c0 = bj * block, c1 = std::min<Eigen::Index>(c0 + block, n2);
      s.block(r0, c0, r1 - r0, c1 - c0).noalias() =
          2.0 * w1.middleRows(r0, r1 - r0) * lambda_sym *
          w2.middleRows(c0, c1 - c0).transpose();
      s.block(r0, c0, r1 - r0, c1 - c0).colwise() +=
          q1.segment(r0, r1 - r0);
      s.block(r0, c0, r1 - r0, c1 - c0).rowwise() +=
          (q2.segment(c0, c1 - c0).transpose().array() + form.k).matrix();
    }
  }
  return s;
}

double OracleLlr(const PldaModel &model, const Eigen::Ref<const Vector> &w1,
                 const Eigen::Ref<const Vector> &w2) {
  const Eigen::Index dim = model.Dim();
  if (w1.size() != dim || w2.size() != dim)
    throw ValidationError(ErrorCode::kDimensionMismatch,
                          "vector does not match model dimension");
  Matrix b_cov = InverseSpd(model.b, "B");
  Matrix w_cov = InverseSpd(model.w, "W");
  Matrix total = b_cov + w_cov;

  Matrix sigma_same(2 * dim, 2 * dim);
  sigma_same.topLeftCorner(dim, dim) = total;
  sigma_same.bottomRightCorner(dim, dim) = total;
  sigma_same.topRightCorner(dim, dim) = b_cov;
  sigma_same.bottomLeftCorner(dim, dim) = b_cov;

  Matrix sigma_diff = Matrix::Zero(2 * dim, 2 * dim);
  sigma_diff.topLeftCorner(dim, dim) = total;
  sigma_diff.bottomRightCorner(dim, dim) = total;

  Vector z(2 * dim);
  z.head(dim) = w1 - model.mu;
  z.tail(dim) = w2 - model.mu;

  auto log_gauss = [&](const Matrix &sigma) {
    Eigen::LLT<Matrix> llt(sigma);
    if (llt.info() != Eigen::Success)
      throw NumericalError(ErrorCode::kSingularMatrix,
                           "joint covariance is not SPD");
    double logdet = LogDetFromLlt(llt);
    Vector solved = llt.solve(z);
    return -0.5 * (2 * dim * kLog2Pi + logdet + z.dot(solved));
  };
  return log_gauss(sigma_same) - log_gauss(sigma_diff);
}

}  // namespace dcaplda
