// include/dcaplda/preproc.hpp

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

#ifndef DCAPLDA_PREPROC_HPP_
#define DCAPLDA_PREPROC_HPP_

#include <string>
#include <unordered_map>
#include <vector>

#include "dcaplda/common.hpp"
#include "dcaplda/data_model.hpp"

namespace dcaplda {

// Front end: w = Norm(A_p x + m_p). Rows of a_p are LDA directions scaled
// to unit training variance; m_p is the negated post-projection mean.
struct PreprocParams {
  Matrix a_p;  // N x D
  Vector m_p;  // N
  int OutDim() const { return static_cast<int>(a_p.rows()); }
  int InDim() const { return static_cast<int>(a_p.cols()); }
};

// Full set of discriminant directions (all D of them, sorted by descending
// between/within eigenvalue), each scaled to unit training variance and with
// a deterministic sign, plus the negated projected mean. The speaker branch
// keeps the first N rows; the side-information branch is initialized from
// the last M rows.
struct LdaBasis {
  Matrix a;         // D x D, rows are directions
  Vector neg_mean;  // D
  int between_rank = 0;
};

struct FitLdaOptions {
  double ridge_rel = 1e-6;          // ridge as a fraction of trace/D
  double ridge_cond_limit = 1e10;   // apply ridge above this condition number
};

// Weighted LDA on raw embeddings. Scatter matrices are speaker-weighted with
// per-speaker weights c_s and normalized by sum_s c_s N_s; integer weights
// are equivalent to duplicating a speaker's data.
LdaBasis FitLdaBasis(const Matrix &x, const std::vector<int> &speaker_of_row,
                     const std::vector<double> &speaker_weight,
                     const FitLdaOptions &opts = {});

PreprocParams HeadTransform(const LdaBasis &basis, int n);
PreprocParams TailTransform(const LdaBasis &basis, int m);

// Convenience wrapper resolving speakers through metadata. Weights map is
// keyed by speaker id and must cover every speaker.
PreprocParams FitLda(const EmbeddingTable &table,
                     const std::vector<SampleMeta> &metas,
                     const std::unordered_map<std::string, double> &weights,
                     int out_dim, const FitLdaOptions &opts = {});

Vector ApplyPreproc(const PreprocParams &params,
                    const Eigen::Ref<const Vector> &x);

// Row-parallel application; ApplyPreprocAllRef is the serial reference.
Matrix ApplyPreprocAll(const PreprocParams &params, const Matrix &x);
Matrix ApplyPreprocAllRef(const PreprocParams &params, const Matrix &x);

}  // namespace dcaplda

#endif  // DCAPLDA_PREPROC_HPP_
