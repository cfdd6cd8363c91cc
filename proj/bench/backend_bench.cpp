// bench/backend_bench.cpp

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

// Compares the serial reference kernels with the parallel ones: pairwise
// scoring and the full condition-aware forward pass.

#include <omp.h>

#include <cstdio>
#include <cstdlib>
#include <random>

#include "dcaplda/backend.hpp"
#include "dcaplda/plda.hpp"

using namespace dcaplda;

namespace {

Matrix RandomUnitRows(std::mt19937_64 &rng, int n, int dim) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix m(n, dim);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < dim; ++j) m(i, j) = normal(rng);
    m.row(i) /= m.row(i).norm();
  }
  return m;
}

PldaModel RandomModel(std::mt19937_64 &rng, int dim) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix a(dim, dim), b(dim, dim);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) {
      a(i, j) = normal(rng);
      b(i, j) = normal(rng);
    }
  PldaModel model;
  model.mu = Vector::Zero(dim);
  model.b = a * a.transpose() + dim * Matrix::Identity(dim, dim);
  model.w = b * b.transpose() + dim * Matrix::Identity(dim, dim);
  return model;
}

double Now() { return omp_get_wtime(); }

}  // namespace

int main(int argc, char **argv) {
  const int n = argc > 1 ? std::atoi(argv[1]) : 2000;
  const int dim = argc > 2 ? std::atoi(argv[2]) : 128;
  std::mt19937_64 rng(7);

  PldaModel model = RandomModel(rng, dim);
  ScoreForm form = ToScoreForm(model);
  Matrix w1 = RandomUnitRows(rng, n, dim);
  Matrix w2 = RandomUnitRows(rng, n, dim);

  std::printf("pairwise scoring: %d x %d trials, dim %d, %d threads\n", n, n,
              dim, omp_get_max_threads());
  double t0 = Now();
  Matrix ref = ScorePairsRef(form, w1, w2);
  double t_ref = Now() - t0;
  t0 = Now();
  Matrix par = ScorePairs(form, w1, w2, 512);
  double t_par = Now() - t0;
  double max_diff = (ref - par).cwiseAbs().maxCoeff();
  std::printf("  serial reference: %8.3f s\n", t_ref);
  std::printf("  blocked parallel: %8.3f s  (%.1fx, max |diff| %.2e)\n",
              t_par, t_ref / t_par, max_diff);

  // Condition-aware forward pass over an all-pairs trial list.
  BackendParams params;
  const int raw_dim = dim * 2;
  params.preproc.a_p = Matrix::Random(dim, raw_dim);
  params.preproc.m_p = Vector::Zero(dim);
  params.plda = model;
  params.score = form;
  params.stage = CalStage::kDurationSideInfo;
  DurationCal dur;
  dur.alpha = PolyBlock(2);
  dur.beta = PolyBlock(2);
  dur.alpha.k = 1.0;
  params.dur = dur;
  SideInfoCal side;
  side.a_m = Matrix::Random(32, raw_dim);
  side.b_m = Vector::Zero(32);
  side.a_z = Matrix::Random(6, 32) * 0.5;
  side.b_z = Vector::Zero(6);
  side.alpha = PolyBlock(6);
  side.beta = PolyBlock(6);
  side.alpha.k = 1.0;
  params.side = side;

  const int ns = std::min(n, 1500);
  Matrix x = Matrix::Random(ns, raw_dim);
  Vector durs(ns);
  std::uniform_real_distribution<double> uni(4.0, 240.0);
  for (int i = 0; i < ns; ++i) durs(i) = uni(rng);
  TrialSet trials;
  for (std::uint32_t i = 0; i < static_cast<std::uint32_t>(ns); ++i)
    for (std::uint32_t j = i + 1; j < static_cast<std::uint32_t>(ns); ++j) {
      trials.enroll.push_back(i);
      trials.test.push_back(j);
      trials.labels.push_back(TrialLabel::kImpostor);
      trials.mask.push_back(TrialMask::kValid);
    }
  SampleCache cache = PrepareSamples(params, x, durs);

  std::printf("forward pass: %zu trials, %d samples\n", trials.NumTrials(),
              ns);
  t0 = Now();
  TrialScores fw_ref = ForwardTrialsRef(params, cache, trials);
  t_ref = Now() - t0;
  t0 = Now();
  TrialScores fw_par = ForwardTrials(params, cache, trials);
  t_par = Now() - t0;
  max_diff = (fw_ref.l - fw_par.l).cwiseAbs().maxCoeff();
  std::printf("  serial reference: %8.3f s\n", t_ref);
  std::printf("  parallel kernel:  %8.3f s  (%.1fx, max |diff| %.2e)\n",
              t_par, t_ref / t_par, max_diff);
  return 0;
}
