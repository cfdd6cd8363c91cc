// src/data_model.cpp

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

#include "dcaplda/data_model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace dcaplda {

namespace {

void WriteU32(std::ostream &os, std::uint32_t v) {
  os.write(reinterpret_cast<const char *>(&v), 4);
}

std::uint32_t ReadU32(std::istream &is, const std::string &what) {
  std::uint32_t v = 0;
  is.read(reinterpret_cast<char *>(&v), 4);
  if (!is)
    throw ValidationError(ErrorCode::kMalformedFile, "truncated " + what);
  return v;
}

std::string ReadCString(std::istream &is, const std::string &what) {
  std::string s;
  char c;
  while (is.get(c)) {
    if (c == '\0') return s;
    s.push_back(c);
  }
  throw ValidationError(ErrorCode::kMalformedFile, "truncated id in " + what);
}

std::vector<std::string> ReadIdList(std::istream &is, std::uint32_t n,
                                    const std::string &what) {
  std::vector<std::string> ids(n);
  for (std::uint32_t i = 0; i < n; ++i) ids[i] = ReadCString(is, what);
  return ids;
}

void WriteIdList(std::ostream &os, const std::vector<std::string> &ids) {
  for (const auto &id : ids) os.write(id.c_str(), id.size() + 1);
}

Matrix ReadF32Matrix(std::istream &is, std::uint32_t rows, std::uint32_t cols,
                     const std::string &what) {
  std::vector<float> buf(static_cast<std::size_t>(rows) * cols);
  is.read(reinterpret_cast<char *>(buf.data()),
          static_cast<std::streamsize>(buf.size() * sizeof(float)));
  if (!is)
    throw ValidationError(ErrorCode::kMalformedFile, "truncated data in " + what);
  Matrix m(rows, cols);
  for (std::uint32_t r = 0; r < rows; ++r)
    for (std::uint32_t c = 0; c < cols; ++c)
      m(r, c) = static_cast<double>(buf[static_cast<std::size_t>(r) * cols + c]);
  return m;
}

void WriteF32Matrix(std::ostream &os, const Matrix &m) {
  std::vector<float> buf(static_cast<std::size_t>(m.rows()) * m.cols());
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      buf[static_cast<std::size_t>(r) * m.cols() + c] =
          static_cast<float>(m(r, c));
  os.write(reinterpret_cast<const char *>(buf.data()),
           static_cast<std::streamsize>(buf.size() * sizeof(float)));
}

void CheckMagic(std::istream &is, const char expect[4],
                const std::string &path) {
  char magic[4] = {0, 0, 0, 0};
  is.read(magic, 4);
  if (!is || std::memcmp(magic, expect, 4) != 0)
    throw ValidationError(ErrorCode::kMalformedFile,
                          path + ": bad magic, expected " +
                              std::string(expect, 4));
}

constexpr std::uint32_t kFormatVersion = 1;

std::vector<std::string> SplitTabs(const std::string &line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = line.find('\t', start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  if (!out.empty() && !out.back().empty() && out.back().back() == '\r')
    out.back().pop_back();
  return out;
}

}  // namespace

std::size_t EmbeddingTable::RowOf(const std::string &id) const {
  auto it = index_.find(id);
  if (it == index_.end())
    throw ValidationError(ErrorCode::kUnknownId, "sample id '" + id + "'");
  return it->second;
}

const std::unordered_map<std::string, std::size_t> &EmbeddingTable::Index()
    const {
  return index_;
}

void EmbeddingTable::BuildIndex() {
  index_.clear();
  index_.reserve(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    auto [it, inserted] = index_.emplace(ids[i], i);
    if (!inserted)
      throw ValidationError(ErrorCode::kDuplicateId,
                            "sample id '" + ids[i] + "' appears twice");
  }
}

void ValidateTable(const EmbeddingTable &table) {
  if (static_cast<std::size_t>(table.x.rows()) != table.ids.size())
    throw ValidationError(ErrorCode::kMalformedFile,
                          "row count does not match id count");
  if (!table.x.allFinite())
    throw ValidationError(ErrorCode::kNonFiniteValue,
                          "embedding matrix contains a non-finite value");
}

EmbeddingTable LoadEmbeddings(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError(ErrorCode::kIoError, "cannot open " + path);
  CheckMagic(in, "DCAE", path);
  std::uint32_t version = ReadU32(in, path);
  if (version != kFormatVersion)
    throw ValidationError(ErrorCode::kMalformedFile,
                          path + ": unsupported format version " +
                              std::to_string(version));
  std::uint32_t rows = ReadU32(in, path);
  std::uint32_t cols = ReadU32(in, path);
  EmbeddingTable table;
  table.ids = ReadIdList(in, rows, path);
  table.x = ReadF32Matrix(in, rows, cols, path);
  table.BuildIndex();  // throws DuplicateId
  ValidateTable(table);
  return table;
}

void SaveEmbeddings(const std::string &path, const EmbeddingTable &table) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError(ErrorCode::kIoError, "cannot write " + path);
  out.write("DCAE", 4);
  WriteU32(out, kFormatVersion);
  WriteU32(out, static_cast<std::uint32_t>(table.ids.size()));
  WriteU32(out, static_cast<std::uint32_t>(table.x.cols()));
  WriteIdList(out, table.ids);
  WriteF32Matrix(out, table.x);
  if (!out) throw ValidationError(ErrorCode::kIoError, "write failed: " + path);
}

ScoreMatrix LoadScoreMatrix(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError(ErrorCode::kIoError, "cannot open " + path);
  CheckMagic(in, "DCAS", path);
  std::uint32_t version = ReadU32(in, path);
  if (version != kFormatVersion)
    throw ValidationError(ErrorCode::kMalformedFile,
                          path + ": unsupported format version");
  std::uint32_t rows = ReadU32(in, path);
  std::uint32_t cols = ReadU32(in, path);
  ScoreMatrix m;
  m.row_ids = ReadIdList(in, rows, path);
  m.col_ids = ReadIdList(in, cols, path);
  m.scores = ReadF32Matrix(in, rows, cols, path);
  return m;
}

void SaveScoreMatrix(const std::string &path, const ScoreMatrix &m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError(ErrorCode::kIoError, "cannot write " + path);
  out.write("DCAS", 4);
  WriteU32(out, kFormatVersion);
  WriteU32(out, static_cast<std::uint32_t>(m.row_ids.size()));
  WriteU32(out, static_cast<std::uint32_t>(m.col_ids.size()));
  WriteIdList(out, m.row_ids);
  WriteIdList(out, m.col_ids);
  WriteF32Matrix(out, m.scores);
}

std::vector<SampleMeta> LoadMetadataTsv(const std::string &path,
                                        double frames_per_second) {
  std::ifstream in(path);
  if (!in) throw ValidationError(ErrorCode::kIoError, "cannot open " + path);
  std::string line;
  if (!std::getline(in, line))
    throw ValidationError(ErrorCode::kMalformedFile,
                          path + ": missing header row");
  std::vector<std::string> header = SplitTabs(line);
  auto col = [&](const std::string &name) -> int {
    auto it = std::find(header.begin(), header.end(), name);
    return it == header.end() ? -1 : static_cast<int>(it - header.begin());
  };
  const int c_id = col("sample_id"), c_spk = col("speaker_id"),
            c_sess = col("session_id"), c_dom = col("domain_id");
  const int c_dur = col("duration_s"), c_frames = col("duration_frames");
  for (auto [idx, name] : {std::pair<int, const char *>{c_id, "sample_id"},
                           {c_spk, "speaker_id"},
                           {c_sess, "session_id"},
                           {c_dom, "domain_id"}}) {
    if (idx < 0)
      throw ValidationError(ErrorCode::kMissingColumn, std::string(name));
  }
  if (c_dur < 0 && c_frames < 0)
    throw ValidationError(ErrorCode::kMissingColumn, "duration_s");

  std::vector<SampleMeta> metas;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> f = SplitTabs(line);
    if (static_cast<int>(f.size()) < static_cast<int>(header.size()))
      throw ValidationError(ErrorCode::kMalformedFile,
                            path + ":" + std::to_string(lineno) +
                                ": fewer fields than header columns");
    SampleMeta m;
    m.sample_id = f[c_id];
    m.speaker_id = f[c_spk];
    m.session_id = f[c_sess];
    m.domain_id = f[c_dom];
    try {
      if (c_dur >= 0 && !f[c_dur].empty()) {
        m.duration_s = std::stod(f[c_dur]);
      } else if (c_frames >= 0) {
        m.duration_s = std::stod(f[c_frames]) / frames_per_second;
      }
    } catch (const std::exception &) {
      throw ValidationError(ErrorCode::kMalformedFile,
                            path + ":" + std::to_string(lineno) +
                                ": unparsable duration");
    }
    if (!std::isfinite(m.duration_s) || m.duration_s <= 0.0)
      throw ValidationError(ErrorCode::kInvalidMetadata,
                            "sample '" + m.sample_id +
                                "': duration must be finite and positive");
    metas.push_back(std::move(m));
  }
  return metas;
}

void SaveMetadataTsv(const std::string &path,
                     const std::vector<SampleMeta> &metas) {
  std::ofstream out(path);
  if (!out) throw ValidationError(ErrorCode::kIoError, "cannot write " + path);
  out << "sample_id\tspeaker_id\tsession_id\tdomain_id\tduration_s\n";
  char buf[64];
  for (const auto &m : metas) {
    std::snprintf(buf, sizeof(buf), "%.17g", m.duration_s);
    out << m.sample_id << '\t' << m.speaker_id << '\t' << m.session_id << '\t'
        << m.domain_id << '\t' << buf << '\n';
  }
}

void ValidateMeta(const std::vector<SampleMeta> &metas,
                  const EmbeddingTable &table) {
  std::unordered_map<std::string, std::string> sess_domain;
  std::unordered_map<std::string, bool> seen;
  for (const auto &m : metas) {
    table.RowOf(m.sample_id);  // throws UnknownId
    if (seen[m.sample_id])
      throw ValidationError(ErrorCode::kDuplicateId,
                            "metadata lists sample '" + m.sample_id +
                                "' twice");
    seen[m.sample_id] = true;
    if (!std::isfinite(m.duration_s) || m.duration_s <= 0.0)
      throw ValidationError(ErrorCode::kInvalidMetadata,
                            "sample '" + m.sample_id + "': bad duration");
    std::string key = m.speaker_id + "\x1f" + m.session_id;
    auto it = sess_domain.find(key);
    if (it == sess_domain.end()) {
      sess_domain.emplace(std::move(key), m.domain_id);
    } else if (it->second != m.domain_id) {
      throw ValidationError(ErrorCode::kInvalidMetadata,
                            "(speaker " + m.speaker_id + ", session " +
                                m.session_id + ") spans two domains");
    }
  }
}

const char *TrialMaskName(TrialMask mask) {
  switch (mask) {
    case TrialMask::kValid: return "valid";
    case TrialMask::kExcludedCrossDomain: return "excluded(cross-domain)";
    case TrialMask::kExcludedSameSessionImpostor:
      return "excluded(same-session-impostor)";
    case TrialMask::kExcludedSameSessionTarget:
      return "excluded(same-session-target)";
  }
  return "?";
}

std::size_t TrialSet::NumValid() const {
  std::size_t n = 0;
  for (TrialMask m : mask)
    if (m == TrialMask::kValid) ++n;
  return n;
}

TrialLabel LabelFor(const SampleMeta &a, const SampleMeta &b) {
  return a.speaker_id == b.speaker_id ? TrialLabel::kTarget
                                      : TrialLabel::kImpostor;
}

TrialMask MaskFor(const SampleMeta &a, const SampleMeta &b) {
  if (a.domain_id != b.domain_id) return TrialMask::kExcludedCrossDomain;
  if (a.session_id == b.session_id) {
    return a.speaker_id == b.speaker_id
               ? TrialMask::kExcludedSameSessionTarget
               : TrialMask::kExcludedSameSessionImpostor;
  }
  return TrialMask::kValid;
}

TrialSet BuildTrialsAllPairs(const std::vector<SampleMeta> &metas) {
  TrialSet set;
  const std::size_t n = metas.size();
  set.ids.reserve(n);
  for (const auto &m : metas) set.ids.push_back(m.sample_id);
  set.enroll.reserve(n * (n - 1) / 2);
  set.test.reserve(n * (n - 1) / 2);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      // Canonical orientation: lexicographically smaller id enrolls.
      std::size_t a = i, b = j;
      if (metas[j].sample_id < metas[i].sample_id) std::swap(a, b);
      set.enroll.push_back(static_cast<std::uint32_t>(a));
      set.test.push_back(static_cast<std::uint32_t>(b));
      set.labels.push_back(LabelFor(metas[a], metas[b]));
      set.mask.push_back(MaskFor(metas[a], metas[b]));
    }
  }
  return set;
}

TrialSet BuildTrialsFromKeyFile(const std::string &path,
                                const std::vector<SampleMeta> &metas) {
  std::unordered_map<std::string, std::size_t> row;
  for (std::size_t i = 0; i < metas.size(); ++i)
    row.emplace(metas[i].sample_id, i);
  TrialSet set;
  set.ids.reserve(metas.size());
  for (const auto &m : metas) set.ids.push_back(m.sample_id);
  for (const TrialKey &k : LoadTrialKeys(path)) {
    auto eit = row.find(k.enroll);
    auto tit = row.find(k.test);
    if (eit == row.end())
      throw ValidationError(ErrorCode::kUnknownId,
                            "key file id '" + k.enroll + "'");
    if (tit == row.end())
      throw ValidationError(ErrorCode::kUnknownId,
                            "key file id '" + k.test + "'");
    const SampleMeta &a = metas[eit->second];
    const SampleMeta &b = metas[tit->second];
    if (!k.label.has_value())
      throw ValidationError(ErrorCode::kMalformedFile,
                            path + ": key line missing tgt|imp label");
    if (*k.label == TrialLabel::kTarget && a.speaker_id != b.speaker_id)
      throw ValidationError(ErrorCode::kInvalidMetadata,
                            "pair (" + k.enroll + ", " + k.test +
                                ") labeled tgt but speakers differ");
    set.enroll.push_back(static_cast<std::uint32_t>(eit->second));
    set.test.push_back(static_cast<std::uint32_t>(tit->second));
    set.labels.push_back(*k.label);
    set.mask.push_back(MaskFor(a, b));
  }
  return set;
}

std::vector<TrialKey> LoadTrialKeys(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw ValidationError(ErrorCode::kIoError, "cannot open " + path);
  std::vector<TrialKey> keys;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> f = SplitTabs(line);
    if (f.size() < 2)
      throw ValidationError(ErrorCode::kMalformedFile,
                            path + ":" + std::to_string(lineno) +
                                ": expected enroll<TAB>test[<TAB>tgt|imp]");
    TrialKey k;
    k.enroll = f[0];
    k.test = f[1];
    if (f.size() >= 3 && !f[2].empty()) {
      if (f[2] == "tgt") {
        k.label = TrialLabel::kTarget;
      } else if (f[2] == "imp") {
        k.label = TrialLabel::kImpostor;
      } else {
        throw ValidationError(ErrorCode::kMalformedFile,
                              path + ":" + std::to_string(lineno) +
                                  ": label must be tgt or imp, got '" + f[2] +
                                  "'");
      }
    }
    keys.push_back(std::move(k));
  }
  return keys;
}

std::vector<ScoredTrial> LoadScores(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw ValidationError(ErrorCode::kIoError, "cannot open " + path);
  std::vector<ScoredTrial> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> f = SplitTabs(line);
    if (f.size() != 3)
      throw ValidationError(ErrorCode::kMalformedFile,
                            path + ":" + std::to_string(lineno) +
                                ": expected enroll<TAB>test<TAB>llr");
    try {
      rows.push_back({f[0], f[1], std::stod(f[2])});
    } catch (const std::exception &) {
      throw ValidationError(ErrorCode::kMalformedFile,
                            path + ":" + std::to_string(lineno) +
                                ": unparsable llr '" + f[2] + "'");
    }
  }
  return rows;
}

void SaveScores(const std::string &path,
                const std::vector<ScoredTrial> &rows) {
  std::ofstream out(path);
  if (!out) throw ValidationError(ErrorCode::kIoError, "cannot write " + path);
  char buf[64];
  for (const auto &r : rows) {
    std::snprintf(buf, sizeof(buf), "%.12g", r.llr);
    out << r.enroll << '\t' << r.test << '\t' << buf << '\n';
  }
}

}  // namespace dcaplda
