// include/dcaplda/synth.hpp

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

#ifndef DCAPLDA_SYNTH_HPP_
#define DCAPLDA_SYNTH_HPP_

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "dcaplda/common.hpp"
#include "dcaplda/data_model.hpp"
#include "dcaplda/plda.hpp"

namespace dcaplda {

// One synthetic condition group. Samples from this domain get a domain mean
// shift drawn from N(0, shift_sigma^2 I), noise covariance scaled by
// within_scale * (dur_ref_s / d)^dur_exponent, and durations drawn
// log-uniform in [dur_lo_s, dur_hi_s].
struct DomainProfile {
  std::string name;
  double shift_sigma = 0.0;
  double within_scale = 1.0;
  double dur_lo_s = 10.0;
  double dur_hi_s = 60.0;
  double dur_exponent = 0.5;  // 0 disables the duration effect
  double dur_ref_s = 30.0;
};

struct SynthSpec {
  int dim = 16;
  int speakers_per_domain = 30;
  int sessions_per_speaker = 3;
  int samples_per_session = 2;
  std::vector<DomainProfile> domains;
  // Ground-truth model shape: per-dimension between variances are log-spaced
  // in [between_var_lo, between_var_hi]; within variance is isotropic. A
  // seeded random rotation mixes the axes when rotate is set.
  double between_var_lo = 0.3;
  double between_var_hi = 3.0;
  double within_var = 1.0;
  bool rotate = true;
  // Optional per-speaker shared condition shift (off by default).
  double speaker_shift_sigma = 0.0;
  std::uint64_t rng_seed = 0;
  std::string id_prefix;

  void Validate() const;
};

// Synthetic corpus plus everything needed to re-noise samples (chunking)
// and to compute ground-truth LLRs.
struct SynthCorpus {
  EmbeddingTable table;
  std::vector<SampleMeta> metas;
  PldaModel truth;          // base model, without domain effects
  Matrix clean;             // per-row noise-free part (speaker + shifts)
  std::vector<int> domain_of_row;
  SynthSpec spec;
  std::mt19937_64 rng;      // state after generation; chunking continues it
};

SynthCorpus Generate(const SynthSpec &spec);

// Duration-resampling chunker: per original sample, emits `per_sample` new
// samples with durations log-uniform in [lo_s, hi_s] and freshly drawn
// noise at the new duration. Chunks inherit the parent's session id and
// replace the originals.
void Chunk(SynthCorpus *corpus, double lo_s, double hi_s, int per_sample);

}  // namespace dcaplda

#endif  // DCAPLDA_SYNTH_HPP_
