// include/dcaplda/model_io.hpp

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

#ifndef DCAPLDA_MODEL_IO_HPP_
#define DCAPLDA_MODEL_IO_HPP_

#include <string>

#include "dcaplda/backend.hpp"
#include "dcaplda/training.hpp"

namespace dcaplda {

// Unified model container: magic "DCAM", u32 version, then tagged sections
// (fourcc, u64 payload size, payload). Doubles are stored exactly, so a
// write-read round trip is bit identical. `provenance` is free-form text
// (resolved config hash, seed, notes) stored verbatim.
void SaveModel(const std::string &path, const BackendParams &params,
               const std::string &provenance);

struct LoadedModel {
  BackendParams params;
  std::string provenance;
};

LoadedModel LoadModel(const std::string &path);

// Checkpoint: the model sections of the current parameters plus the full
// trainer state (optimizer moments, cursor state, RNG state, stage
// bookkeeping and log), sufficient to resume training exactly.
void SaveCheckpoint(const std::string &path, const TrainerState &state,
                    const std::string &provenance);

struct LoadedCheckpoint {
  TrainerState state;
  std::string provenance;
};

LoadedCheckpoint LoadCheckpoint(const std::string &path);

}  // namespace dcaplda

#endif  // DCAPLDA_MODEL_IO_HPP_
