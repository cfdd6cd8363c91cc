// include/dcaplda/data_model.hpp

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

#ifndef DCAPLDA_DATA_MODEL_HPP_
#define DCAPLDA_DATA_MODEL_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "dcaplda/common.hpp"

namespace dcaplda {

// A set of embedding vectors, one row per sample. Immutable after
// construction; validated on load.
struct EmbeddingTable {
  std::vector<std::string> ids;
  Matrix x;  // rows = samples, cols = embedding dimension

  std::size_t NumRows() const { return ids.size(); }
  int Dim() const { return static_cast<int>(x.cols()); }
  // id -> row index; throws UnknownId if absent.
  std::size_t RowOf(const std::string &id) const;
  const std::unordered_map<std::string, std::size_t> &Index() const;
  void BuildIndex();

 private:
  std::unordered_map<std::string, std::size_t> index_;
};

// Checks id uniqueness, finite entries and shape consistency.
void ValidateTable(const EmbeddingTable &table);

// Binary embedding container: magic "DCAE", u32 version, u32 n_rows,
// u32 n_cols, n_rows null-terminated UTF-8 ids, then row-major
// little-endian float32 data.
EmbeddingTable LoadEmbeddings(const std::string &path);
void SaveEmbeddings(const std::string &path, const EmbeddingTable &table);

// Dense score matrix in the same container layout, except that row and
// column id lists are both stored: magic "DCAS", version, n_rows, n_cols,
// row ids, col ids, float32 data.
struct ScoreMatrix {
  std::vector<std::string> row_ids;
  std::vector<std::string> col_ids;
  Matrix scores;
};
ScoreMatrix LoadScoreMatrix(const std::string &path);
void SaveScoreMatrix(const std::string &path, const ScoreMatrix &m);

struct SampleMeta {
  std::string sample_id;
  std::string speaker_id;
  std::string session_id;
  std::string domain_id;
  double duration_s = 0.0;
};

// TSV with a required header row. Columns sample_id, speaker_id, session_id,
// domain_id are required; duration_s is required unless duration_frames is
// present, in which case frames are converted at frames_per_second. Unknown
// columns are ignored.
std::vector<SampleMeta> LoadMetadataTsv(const std::string &path,
                                        double frames_per_second = 100.0);
void SaveMetadataTsv(const std::string &path,
                     const std::vector<SampleMeta> &metas);

// Checks durations, id resolution against the table, uniqueness, and that a
// (speaker, session) pair never spans two domains.
void ValidateMeta(const std::vector<SampleMeta> &metas,
                  const EmbeddingTable &table);

enum class TrialLabel : std::uint8_t { kTarget, kImpostor };

enum class TrialMask : std::uint8_t {
  kValid,
  kExcludedCrossDomain,
  kExcludedSameSessionImpostor,
  kExcludedSameSessionTarget,
};

const char *TrialMaskName(TrialMask mask);

// Enrollment/test pairs over a sample universe `ids`; entries of enroll/test
// index into `ids`.
struct TrialSet {
  std::vector<std::string> ids;
  std::vector<std::uint32_t> enroll;
  std::vector<std::uint32_t> test;
  std::vector<TrialLabel> labels;
  std::vector<TrialMask> mask;

  std::size_t NumTrials() const { return enroll.size(); }
  std::size_t NumValid() const;
};

// Label and mask for a pair of samples, as used for batch trials.
TrialLabel LabelFor(const SampleMeta &a, const SampleMeta &b);
TrialMask MaskFor(const SampleMeta &a, const SampleMeta &b);

enum class TrialPolicy { kAllPairs, kExplicitKeyFile };

// All unordered pairs (canonicalized as (min_id, max_id) lexicographically),
// labeled by speaker equality and masked by the cross-domain / same-session
// rules. Same-session target pairs are excluded as well: a target trial
// requires two distinct sessions.
TrialSet BuildTrialsAllPairs(const std::vector<SampleMeta> &metas);

// Pairs read from a key file (enroll <TAB> test <TAB> tgt|imp). Ids must
// resolve in the metadata; a tgt line whose sides have different speakers is
// an error. Masks follow the same metadata rules as the all-pairs policy.
TrialSet BuildTrialsFromKeyFile(const std::string &path,
                                const std::vector<SampleMeta> &metas);

// Lightweight key record for scoring, where no metadata may be available.
struct TrialKey {
  std::string enroll;
  std::string test;
  std::optional<TrialLabel> label;
};
std::vector<TrialKey> LoadTrialKeys(const std::string &path);

// Score file: enroll <TAB> test <TAB> llr.
struct ScoredTrial {
  std::string enroll;
  std::string test;
  double llr;
};
std::vector<ScoredTrial> LoadScores(const std::string &path);
void SaveScores(const std::string &path, const std::vector<ScoredTrial> &rows);

}  // namespace dcaplda

#endif  // DCAPLDA_DATA_MODEL_HPP_
