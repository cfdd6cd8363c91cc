// src/synth.cpp

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

#include "dcaplda/synth.hpp"

#include <cmath>

namespace dcaplda {

namespace {

Vector Gaussian(std::mt19937_64 &rng, Eigen::Index dim) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector v(dim);
  for (Eigen::Index i = 0; i < dim; ++i) v(i) = normal(rng);
  return v;
}

double LogUniform(std::mt19937_64 &rng, double lo, double hi) {
  if (lo == hi) return lo;
  std::uniform_real_distribution<double> uni(std::log(lo), std::log(hi));
  return std::exp(uni(rng));
}

// Random orthogonal matrix via QR of a Gaussian matrix, with the sign
// convention that makes the factorization unique.
Matrix RandomRotation(std::mt19937_64 &rng, Eigen::Index dim) {
  Matrix g(dim, dim);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (Eigen::Index i = 0; i < dim; ++i)
    for (Eigen::Index j = 0; j < dim; ++j) g(i, j) = normal(rng);
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ();
  Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index i = 0; i < dim; ++i)
    if (r(i, i) < 0.0) q.col(i) = -q.col(i);
  return q;
}

double NoiseScale(const DomainProfile &dom, double duration_s) {
  double scale = dom.within_scale;
  if (dom.dur_exponent != 0.0)
    scale *= std::pow(dom.dur_ref_s / duration_s, dom.dur_exponent);
  return scale;
}

}  // namespace

void SynthSpec::Validate() const {
  if (dim < 1 || speakers_per_domain < 1 || sessions_per_speaker < 1 ||
      samples_per_session < 1)
    throw ValidationError(ErrorCode::kInvalidArgument,
                          "synth spec counts must be positive");
  if (domains.empty())
    throw ValidationError(ErrorCode::kInvalidArgument,
                          "synth spec needs at least one domain");
  if (!(between_var_lo > 0.0) || !(between_var_hi >= between_var_lo) ||
      !(within_var > 0.0))
    throw ValidationError(ErrorCode::kInvalidArgument,
                          "synth spec variances must be positive");
  for (const auto &d : domains) {
    if (!(d.within_scale > 0.0))
      throw ValidationError(ErrorCode::kInvalidArgument,
                            "domain within_scale must be positive");
    if (!(d.dur_lo_s > 0.0) || !(d.dur_hi_s >= d.dur_lo_s))
      throw ValidationError(ErrorCode::kInvalidArgument,
                            "domain duration range invalid");
    if (!(d.dur_ref_s > 0.0))
      throw ValidationError(ErrorCode::kInvalidArgument,
                            "domain dur_ref_s must be positive");
  }
}

SynthCorpus Generate(const SynthSpec &spec) {
  spec.Validate();
  const Eigen::Index dim = spec.dim;
  SynthCorpus corpus;
  corpus.spec = spec;
  corpus.rng.seed(spec.rng_seed);

  // Ground-truth model. Between variances log-spaced, within isotropic; a
  // random rotation mixes axes so nothing aligns with the coordinates.
  Vector between_var(dim);
  for (Eigen::Index j = 0; j < dim; ++j) {
    double t = dim == 1 ? 0.0 : static_cast<double>(j) / (dim - 1);
    between_var(j) = std::exp(std::log(spec.between_var_lo) +
                              t * (std::log(spec.between_var_hi) -
                                   std::log(spec.between_var_lo)));
  }
  Matrix q = spec.rotate ? RandomRotation(corpus.rng, dim)
                         : Matrix::Identity(dim, dim);
  corpus.truth.mu = Vector::Zero(dim);
  corpus.truth.b =
      q * between_var.cwiseInverse().asDiagonal() * q.transpose();
  corpus.truth.b = Symmetrize(corpus.truth.b);
  corpus.truth.w = Matrix::Identity(dim, dim) / spec.within_var;
  Matrix between_sqrt = q * between_var.cwiseSqrt().asDiagonal();
  const double within_std = std::sqrt(spec.within_var);

  std::vector<Vector> domain_shift;
  for (const auto &dom : spec.domains) {
    Vector shift = Vector::Zero(dim);
    if (dom.shift_sigma > 0.0)
      shift = dom.shift_sigma * Gaussian(corpus.rng, dim);
    domain_shift.push_back(shift);
  }

  const std::size_t n_rows = spec.domains.size() * spec.speakers_per_domain *
                             spec.sessions_per_speaker *
                             spec.samples_per_session;
  corpus.table.x.resize(static_cast<Eigen::Index>(n_rows), dim);
  corpus.clean.resize(static_cast<Eigen::Index>(n_rows), dim);
  corpus.table.ids.reserve(n_rows);
  corpus.metas.reserve(n_rows);
  corpus.domain_of_row.reserve(n_rows);

  Eigen::Index row = 0;
  for (std::size_t di = 0; di < spec.domains.size(); ++di) {
    const DomainProfile &dom = spec.domains[di];
    const std::string dom_name =
        dom.name.empty() ? "dom" + std::to_string(di) : dom.name;
    for (int sp = 0; sp < spec.speakers_per_domain; ++sp) {
      Vector y = between_sqrt * Gaussian(corpus.rng, dim);
      if (spec.speaker_shift_sigma > 0.0)
        y += spec.speaker_shift_sigma * Gaussian(corpus.rng, dim);
      Vector base = y + domain_shift[di];
      const std::string spk_id =
          spec.id_prefix + dom_name + "_spk" + std::to_string(sp);
      for (int se = 0; se < spec.sessions_per_speaker; ++se) {
        const std::string sess_id = spk_id + "_sess" + std::to_string(se);
        for (int sa = 0; sa < spec.samples_per_session; ++sa) {
          double d = LogUniform(corpus.rng, dom.dur_lo_s, dom.dur_hi_s);
          double noise_std = within_std * std::sqrt(NoiseScale(dom, d));
          Vector x = base + noise_std * Gaussian(corpus.rng, dim);
          corpus.clean.row(row) = base.transpose();
          corpus.table.x.row(row) = x.transpose();
          corpus.table.ids.push_back(sess_id + "_smp" + std::to_string(sa));
          SampleMeta meta;
          meta.sample_id = corpus.table.ids.back();
          meta.speaker_id = spk_id;
          meta.session_id = sess_id;
          meta.domain_id = dom_name;
          meta.duration_s = d;
          corpus.metas.push_back(std::move(meta));
          corpus.domain_of_row.push_back(static_cast<int>(di));
          ++row;
        }
      }
    }
  }
  corpus.table.BuildIndex();
  return corpus;
}

void Chunk(SynthCorpus *corpus, double lo_s, double hi_s, int per_sample) {
  if (!(lo_s > 0.0) || !(hi_s >= lo_s))
    throw ValidationError(ErrorCode::kInvalidArgument,
                          "chunk range invalid");
  if (per_sample < 1)
    throw ValidationError(ErrorCode::kInvalidArgument,
                          "per_sample must be positive");
  const Eigen::Index n_old = corpus->table.x.rows();
  const Eigen::Index dim = corpus->table.x.cols();
  const double within_std = std::sqrt(corpus->spec.within_var);

  EmbeddingTable table;
  table.x.resize(n_old * per_sample, dim);
  table.ids.reserve(n_old * per_sample);
  std::vector<SampleMeta> metas;
  metas.reserve(n_old * per_sample);
  Matrix clean(n_old * per_sample, dim);
  std::vector<int> domain_of_row;
  domain_of_row.reserve(n_old * per_sample);

  Eigen::Index row = 0;
  for (Eigen::Index i = 0; i < n_old; ++i) {
    const DomainProfile &dom =
        corpus->spec.domains[corpus->domain_of_row[i]];
    for (int k = 0; k < per_sample; ++k) {
      double d = LogUniform(corpus->rng, lo_s, hi_s);
      double noise_std = within_std * std::sqrt(NoiseScale(dom, d));
      clean.row(row) = corpus->clean.row(i);
      table.x.row(row) = corpus->clean.row(i) +
                         noise_std * Gaussian(corpus->rng, dim).transpose();
      table.ids.push_back(corpus->metas[i].sample_id + "_c" +
                          std::to_string(k));
      SampleMeta meta = corpus->metas[i];  // session id inherited
      meta.sample_id = table.ids.back();
      meta.duration_s = d;
      metas.push_back(std::move(meta));
      domain_of_row.push_back(corpus->domain_of_row[i]);
      ++row;
    }
  }
  table.BuildIndex();
  corpus->table = std::move(table);
  corpus->metas = std::move(metas);
  corpus->clean = std::move(clean);
  corpus->domain_of_row = std::move(domain_of_row);
}

}  // namespace dcaplda
