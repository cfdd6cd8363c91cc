// src/model_io.cpp

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

#include "dcaplda/model_io.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

namespace dcaplda {

namespace {

constexpr std::uint32_t kModelVersion = 1;

class Writer {
 public:
  void U32(std::uint32_t v) { Raw(&v, 4); }
  void U64(std::uint64_t v) { Raw(&v, 8); }
  void I64(long long v) { Raw(&v, 8); }
  void F64(double v) { Raw(&v, 8); }
  void Str(const std::string &s) {
    U64(s.size());
    Raw(s.data(), s.size());
  }
  void Mat(const Matrix &m) {
    U32(static_cast<std::uint32_t>(m.rows()));
    U32(static_cast<std::uint32_t>(m.cols()));
    Raw(m.data(), sizeof(double) * m.size());
  }
  void Vec(const Vector &v) {
    U32(static_cast<std::uint32_t>(v.size()));
    Raw(v.data(), sizeof(double) * v.size());
  }
  void F64s(const std::vector<double> &v) {
    U64(v.size());
    Raw(v.data(), sizeof(double) * v.size());
  }
  void U32s(const std::vector<std::uint32_t> &v) {
    U64(v.size());
    Raw(v.data(), sizeof(std::uint32_t) * v.size());
  }
  const std::string &Data() const { return buf_; }

 private:
  void Raw(const void *p, std::size_t n) {
    buf_.append(static_cast<const char *>(p), n);
  }
  std::string buf_;
};

class Reader {
 public:
  Reader(const char *p, std::size_t n) : p_(p), end_(p + n) {}
  std::uint32_t U32() {
    std::uint32_t v;
    Raw(&v, 4);
    return v;
  }
  std::uint64_t U64() {
    std::uint64_t v;
    Raw(&v, 8);
    return v;
  }
  long long I64() {
    long long v;
    Raw(&v, 8);
    return v;
  }
  double F64() {
    double v;
    Raw(&v, 8);
    return v;
  }
  std::string Str() {
    std::uint64_t n = U64();
    Check(n);
    std::string s(p_, n);
    p_ += n;
    return s;
  }
  Matrix Mat() {
    std::uint32_t rows = U32(), cols = U32();
    Matrix m(rows, cols);
    Raw(m.data(), sizeof(double) * m.size());
    return m;
  }
  Vector Vec() {
    std::uint32_t n = U32();
    Vector v(n);
    Raw(v.data(), sizeof(double) * v.size());
    return v;
  }
  std::vector<double> F64s() {
    std::uint64_t n = U64();
    std::vector<double> v(n);
    Raw(v.data(), sizeof(double) * n);
    return v;
  }
  std::vector<std::uint32_t> U32s() {
    std::uint64_t n = U64();
    std::vector<std::uint32_t> v(n);
    Raw(v.data(), sizeof(std::uint32_t) * n);
    return v;
  }
  bool Done() const { return p_ == end_; }

 private:
  void Check(std::uint64_t n) {
    if (static_cast<std::uint64_t>(end_ - p_) < n)
      throw ValidationError(ErrorCode::kMalformedFile,
                            "truncated model section");
  }
  void Raw(void *out, std::size_t n) {
    Check(n);
    std::memcpy(out, p_, n);
    p_ += n;
  }
  const char *p_;
  const char *end_;
};

void WriteBlock(Writer *w, const PolyBlock &b) {
  w->Mat(b.lambda);
  w->Mat(b.gamma);
  w->Vec(b.c);
  w->F64(b.k);
}

PolyBlock ReadBlock(Reader *r) {
  PolyBlock b;
  b.lambda = r->Mat();
  b.gamma = r->Mat();
  b.c = r->Vec();
  b.k = r->F64();
  return b;
}

void WriteSection(std::ostream &os, const char tag[4], const Writer &w) {
  os.write(tag, 4);
  std::uint64_t n = w.Data().size();
  os.write(reinterpret_cast<const char *>(&n), 8);
  os.write(w.Data().data(), static_cast<std::streamsize>(n));
}

void WriteRotation(Writer *w, const RotationList &r) {
  w->U32s(r.items);
  w->U32(r.pos);
}

RotationList ReadRotation(Reader *r) {
  RotationList list;
  list.items = r->U32s();
  list.pos = r->U32();
  return list;
}

void WriteAdam(Writer *w, const AdamState &a) {
  w->F64s(a.m);
  w->F64s(a.v);
  w->I64(a.t);
}

AdamState ReadAdam(Reader *r) {
  AdamState a;
  a.m = r->F64s();
  a.v = r->F64s();
  a.t = r->I64();
  return a;
}

void WriteModelSections(std::ostream &os, const BackendParams &params,
                        const std::string &provenance) {
  {
    Writer w;
    w.Mat(params.preproc.a_p);
    w.Vec(params.preproc.m_p);
    WriteSection(os, "PREP", w);
  }
  {
    Writer w;
    w.Vec(params.plda.mu);
    w.Mat(params.plda.b);
    w.Mat(params.plda.w);
    WriteSection(os, "PLDA", w);
  }
  {
    Writer w;
    w.Mat(params.score.lambda);
    w.Mat(params.score.gamma);
    w.Vec(params.score.c);
    w.F64(params.score.k);
    WriteSection(os, "SCOR", w);
  }
  {
    Writer w;
    w.U32(static_cast<std::uint32_t>(params.stage));
    w.U32(static_cast<std::uint32_t>(params.snorm_top));
    WriteSection(os, "STGE", w);
  }
  {
    Writer w;
    w.F64(params.global.alpha);
    w.F64(params.global.beta);
    WriteSection(os, "GCAL", w);
  }
  if (params.dur) {
    Writer w;
    w.U32(static_cast<std::uint32_t>(params.dur->kind));
    w.F64s(params.dur->bin_edges);
    w.F64(params.dur->wlog_center_s);
    w.F64(params.dur->wlog_slope);
    WriteBlock(&w, params.dur->alpha);
    WriteBlock(&w, params.dur->beta);
    WriteSection(os, "DCAL", w);
  }
  if (params.side) {
    Writer w;
    w.U32(static_cast<std::uint32_t>(params.side->f));
    w.Mat(params.side->a_m);
    w.Vec(params.side->b_m);
    w.Mat(params.side->a_z);
    w.Vec(params.side->b_z);
    WriteBlock(&w, params.side->alpha);
    WriteBlock(&w, params.side->beta);
    WriteSection(os, "SCAL", w);
  }
  {
    Writer w;
    w.Str(provenance);
    WriteSection(os, "PROV", w);
  }
}

void WriteConfig(Writer *w, const TrainConfig &c) {
  w->I64(c.stage1_batches);
  w->I64(c.stage2_batches);
  w->I64(c.stage3_batches);
  w->F64(c.lr1);
  w->F64(c.lr2);
  w->F64(c.lr3);
  w->F64(c.pi);
  w->F64(c.l2_weight);
  w->U64(c.l2_group_weights.size());
  for (const auto &[k, v] : c.l2_group_weights) {
    w->Str(k);
    w->F64(v);
  }
  w->F64(c.grad_clip_norm);
  w->U32(static_cast<std::uint32_t>(c.n_seeds));
  w->U64(c.seed);
  w->U32(static_cast<std::uint32_t>(c.batch.batch_size));
  w->U32(static_cast<std::uint32_t>(c.batch.method));
  w->F64(c.adam_beta1);
  w->F64(c.adam_beta2);
  w->F64(c.adam_eps);
  w->U32(c.freeze_backbone ? 1 : 0);
}

TrainConfig ReadConfig(Reader *r) {
  TrainConfig c;
  c.stage1_batches = r->I64();
  c.stage2_batches = r->I64();
  c.stage3_batches = r->I64();
  c.lr1 = r->F64();
  c.lr2 = r->F64();
  c.lr3 = r->F64();
  c.pi = r->F64();
  c.l2_weight = r->F64();
  std::uint64_t n = r->U64();
  for (std::uint64_t i = 0; i < n; ++i) {
    std::string k = r->Str();
    c.l2_group_weights[k] = r->F64();
  }
  c.grad_clip_norm = r->F64();
  c.n_seeds = static_cast<int>(r->U32());
  c.seed = r->U64();
  c.batch.batch_size = static_cast<int>(r->U32());
  c.batch.method = static_cast<BatchMethod>(r->U32());
  c.adam_beta1 = r->F64();
  c.adam_beta2 = r->F64();
  c.adam_eps = r->F64();
  c.freeze_backbone = r->U32() != 0;
  return c;
}

std::string RngToString(const std::mt19937_64 &rng) {
  std::ostringstream oss;
  oss << rng;
  return oss.str();
}

std::mt19937_64 RngFromString(const std::string &s) {
  std::istringstream iss(s);
  std::mt19937_64 rng;
  iss >> rng;
  if (!iss)
    throw ValidationError(ErrorCode::kMalformedFile, "bad RNG state");
  return rng;
}

}  // namespace

void SaveModel(const std::string &path, const BackendParams &params,
               const std::string &provenance) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ValidationError(ErrorCode::kIoError, "cannot write " + path);
  os.write("DCAM", 4);
  os.write(reinterpret_cast<const char *>(&kModelVersion), 4);
  WriteModelSections(os, params, provenance);
  if (!os) throw ValidationError(ErrorCode::kIoError, "write failed: " + path);
}

namespace {

struct ParsedFile {
  BackendParams params;
  std::string provenance;
  std::string trainer_blob;
  bool has_preproc = false, has_score = false;
};

ParsedFile ParseModelFile(const std::string &path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ValidationError(ErrorCode::kIoError, "cannot open " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "DCAM", 4) != 0)
    throw ValidationError(ErrorCode::kMalformedFile,
                          path + ": not a model file");
  std::uint32_t version = 0;
  is.read(reinterpret_cast<char *>(&version), 4);
  if (version != kModelVersion)
    throw ValidationError(ErrorCode::kMalformedFile,
                          path + ": unsupported model version");
  ParsedFile out;
  while (true) {
    char tag[4];
    is.read(tag, 4);
    if (is.eof() || is.gcount() == 0) break;
    if (is.gcount() != 4)
      throw ValidationError(ErrorCode::kMalformedFile, path + ": bad section");
    std::uint64_t size = 0;
    is.read(reinterpret_cast<char *>(&size), 8);
    if (!is)
      throw ValidationError(ErrorCode::kMalformedFile, path + ": bad section");
    std::string payload(size, '\0');
    is.read(payload.data(), static_cast<std::streamsize>(size));
    if (!is)
      throw ValidationError(ErrorCode::kMalformedFile,
                            path + ": truncated section");
    Reader r(payload.data(), payload.size());
    if (std::memcmp(tag, "PREP", 4) == 0) {
      out.params.preproc.a_p = r.Mat();
      out.params.preproc.m_p = r.Vec();
      out.has_preproc = true;
    } else if (std::memcmp(tag, "PLDA", 4) == 0) {
      out.params.plda.mu = r.Vec();
      out.params.plda.b = r.Mat();
      out.params.plda.w = r.Mat();
    } else if (std::memcmp(tag, "SCOR", 4) == 0) {
      out.params.score.lambda = r.Mat();
      out.params.score.gamma = r.Mat();
      out.params.score.c = r.Vec();
      out.params.score.k = r.F64();
      out.has_score = true;
    } else if (std::memcmp(tag, "STGE", 4) == 0) {
      out.params.stage = static_cast<CalStage>(r.U32());
      out.params.snorm_top = static_cast<int>(r.U32());
    } else if (std::memcmp(tag, "GCAL", 4) == 0) {
      out.params.global.alpha = r.F64();
      out.params.global.beta = r.F64();
    } else if (std::memcmp(tag, "DCAL", 4) == 0) {
      DurationCal dur;
      dur.kind = static_cast<DurationFeatureKind>(r.U32());
      dur.bin_edges = r.F64s();
      dur.wlog_center_s = r.F64();
      dur.wlog_slope = r.F64();
      dur.alpha = ReadBlock(&r);
      dur.beta = ReadBlock(&r);
      out.params.dur = std::move(dur);
    } else if (std::memcmp(tag, "SCAL", 4) == 0) {
      SideInfoCal side;
      side.f = static_cast<SideInfoTransform>(r.U32());
      side.a_m = r.Mat();
      side.b_m = r.Vec();
      side.a_z = r.Mat();
      side.b_z = r.Vec();
      side.alpha = ReadBlock(&r);
      side.beta = ReadBlock(&r);
      out.params.side = std::move(side);
    } else if (std::memcmp(tag, "PROV", 4) == 0) {
      out.provenance = r.Str();
    } else if (std::memcmp(tag, "TRNS", 4) == 0) {
      out.trainer_blob = payload;
    } else {
      throw ValidationError(ErrorCode::kMalformedFile,
                            path + ": unknown section " +
                                std::string(tag, 4));
    }
  }
  if (!out.has_preproc || !out.has_score)
    throw ValidationError(ErrorCode::kMalformedFile,
                          path + ": missing required sections");
  return out;
}

}  // namespace

LoadedModel LoadModel(const std::string &path) {
  ParsedFile parsed = ParseModelFile(path);
  LoadedModel out;
  out.params = std::move(parsed.params);
  out.provenance = std::move(parsed.provenance);
  return out;
}

void SaveCheckpoint(const std::string &path, const TrainerState &state,
                    const std::string &provenance) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ValidationError(ErrorCode::kIoError, "cannot write " + path);
  os.write("DCAM", 4);
  os.write(reinterpret_cast<const char *>(&kModelVersion), 4);
  WriteModelSections(os, state.params, provenance);

  Writer w;
  w.U32(static_cast<std::uint32_t>(state.arch));
  WriteConfig(&w, state.config);
  w.F64s(state.anchor);
  WriteAdam(&w, state.adam);
  // Cursor state.
  WriteRotation(&w, state.cursors.all_speakers);
  w.U64(state.cursors.domain_speakers.size());
  for (const auto &r : state.cursors.domain_speakers) WriteRotation(&w, r);
  w.U64(state.cursors.spk_sessions.size());
  for (const auto &per_spk : state.cursors.spk_sessions) {
    w.U64(per_spk.size());
    for (const auto &r : per_spk) WriteRotation(&w, r);
  }
  w.U64(state.cursors.sess_samples.size());
  for (const auto &per_spk : state.cursors.sess_samples) {
    w.U64(per_spk.size());
    for (const auto &r : per_spk) WriteRotation(&w, r);
  }
  w.Str(RngToString(state.cursors.rng));
  w.U32(static_cast<std::uint32_t>(state.stage));
  w.I64(state.iter);
  w.F64(state.best2);
  w.F64s(state.best2_params);
  WriteAdam(&w, state.best2_adam);
  w.F64(state.best3);
  w.F64s(state.best3_params);
  w.U64(state.seed);
  w.U32(state.done ? 1 : 0);
  w.U64(state.log.size());
  for (const auto &row : state.log) {
    w.U32(static_cast<std::uint32_t>(row.stage));
    w.I64(row.batch);
    w.F64(row.train_loss);
    w.F64s(row.dev);
    w.F64(row.grad_norm);
  }
  WriteSection(os, "TRNS", w);
  if (!os) throw ValidationError(ErrorCode::kIoError, "write failed: " + path);
}

LoadedCheckpoint LoadCheckpoint(const std::string &path) {
  ParsedFile parsed = ParseModelFile(path);
  if (parsed.trainer_blob.empty())
    throw ValidationError(ErrorCode::kMalformedFile,
                          path + ": no trainer state section");
  LoadedCheckpoint out;
  out.state.params = std::move(parsed.params);
  out.provenance = std::move(parsed.provenance);

  Reader r(parsed.trainer_blob.data(), parsed.trainer_blob.size());
  out.state.arch = static_cast<Architecture>(r.U32());
  out.state.config = ReadConfig(&r);
  out.state.anchor = r.F64s();
  out.state.adam = ReadAdam(&r);
  out.state.cursors.all_speakers = ReadRotation(&r);
  std::uint64_t n = r.U64();
  for (std::uint64_t i = 0; i < n; ++i)
    out.state.cursors.domain_speakers.push_back(ReadRotation(&r));
  n = r.U64();
  out.state.cursors.spk_sessions.resize(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    std::uint64_t m = r.U64();
    for (std::uint64_t j = 0; j < m; ++j)
      out.state.cursors.spk_sessions[i].push_back(ReadRotation(&r));
  }
  n = r.U64();
  out.state.cursors.sess_samples.resize(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    std::uint64_t m = r.U64();
    for (std::uint64_t j = 0; j < m; ++j)
      out.state.cursors.sess_samples[i].push_back(ReadRotation(&r));
  }
  out.state.cursors.rng = RngFromString(r.Str());
  out.state.stage = static_cast<int>(r.U32());
  out.state.iter = r.I64();
  out.state.best2 = r.F64();
  out.state.best2_params = r.F64s();
  out.state.best2_adam = ReadAdam(&r);
  out.state.best3 = r.F64();
  out.state.best3_params = r.F64s();
  out.state.seed = r.U64();
  out.state.done = r.U32() != 0;
  n = r.U64();
  for (std::uint64_t i = 0; i < n; ++i) {
    TrainLogRow row;
    row.stage = static_cast<int>(r.U32());
    row.batch = r.I64();
    row.train_loss = r.F64();
    row.dev = r.F64s();
    row.grad_norm = r.F64();
    out.state.log.push_back(std::move(row));
  }
  if (!r.Done())
    throw ValidationError(ErrorCode::kMalformedFile,
                          path + ": trailing checkpoint bytes");
  return out;
}

}  // namespace dcaplda
