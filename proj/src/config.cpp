// src/config.cpp

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

#include "dcaplda/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace dcaplda {

namespace {

// Registered keys with their defaults. Training defaults follow the paper's
// standard recipe; synth keys describe the synthetic corpus generator.
const std::vector<std::pair<const char *, const char *>> kDefaults = {
    {"data.frames_per_second", "100"},
    {"data.embedding_dim", "512"},
    {"preproc.lda_dim", "300"},
    {"preproc.ridge_rel", "1e-6"},
    {"plda.em_iters", "20"},
    {"plda.em_rel_tol", "1e-7"},
    {"score.block", "1024"},
    {"cal.duration_features", "wlog"},
    {"cal.wlog_center_s", "30"},
    {"cal.wlog_slope", "2"},
    {"cal.bin_edges", "8,16,32,64,128"},
    {"cal.sideinfo_m_dim", "200"},
    {"cal.sideinfo_s_dim", "6"},
    {"cal.sideinfo_f", "identity"},
    {"cal.sideinfo_init_std", "0.5"},
    {"cal.init_speakers", "1000"},
    {"train.arch", "d-plda-dsd"},
    {"train.freeze_backbone", "false"},
    {"train.weighting", "balanced"},
    {"train.batch_method", "domain_balanced"},
    {"train.batch_size", "2048"},
    {"train.stage1_batches", "12000"},
    {"train.stage2_batches", "3000"},
    {"train.stage3_batches", "100"},
    {"train.lr1", "0.0005"},
    {"train.lr2", "0.001"},
    {"train.lr3", "0.00001"},
    {"train.pi", "0.01"},
    {"train.l2_weight", "1e-4"},
    {"train.l2_weight_preproc", ""},
    {"train.l2_weight_score", ""},
    {"train.l2_weight_global", ""},
    {"train.l2_weight_dur", ""},
    {"train.l2_weight_side", ""},
    {"train.grad_clip_norm", "4.0"},
    {"train.seeds", "1"},
    {"train.seed", "0"},
    {"train.adam_beta1", "0.9"},
    {"train.adam_beta2", "0.999"},
    {"train.adam_eps", "1e-8"},
    {"eval.priors", "0.5,0.01"},
    {"eval.dcf_p_target", "0.01"},
    {"synth.dim", "16"},
    {"synth.n_domains", "2"},
    {"synth.speakers_per_domain", "30"},
    {"synth.sessions_per_speaker", "3"},
    {"synth.samples_per_session", "2"},
    {"synth.domain_shift_sigma", "0.5"},
    {"synth.within_scale", "1.0"},
    {"synth.duration_lo_s", "10"},
    {"synth.duration_hi_s", "60"},
    {"synth.duration_exponent", "0.5"},
    {"synth.duration_ref_s", "30"},
    {"synth.between_var_lo", "0.3"},
    {"synth.between_var_hi", "3.0"},
    {"synth.within_var", "1.0"},
    {"synth.speaker_shift_sigma", "0"},
    {"synth.rotate", "true"},
    {"synth.seed", "0"},
    {"synth.id_prefix", ""},
    {"synth.chunk_lo_s", "0"},
    {"synth.chunk_hi_s", "0"},
    {"synth.chunks_per_sample", "0"},
};

std::string Trim(const std::string &s) {
  std::size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

}  // namespace

RunConfig::RunConfig() {
  for (const auto &[k, v] : kDefaults) values_[k] = v;
}

void RunConfig::LoadFile(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw ValidationError(ErrorCode::kIoError, "cannot open " + path);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = Trim(line);
    if (t.empty() || t[0] == '#') continue;
    std::size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw ValidationError(ErrorCode::kInvalidConfig,
                            path + ":" + std::to_string(lineno) +
                                ": expected key = value");
    Set(Trim(t.substr(0, eq)), Trim(t.substr(eq + 1)));
  }
}

void RunConfig::Set(const std::string &key, const std::string &value) {
  auto it = values_.find(key);
  if (it == values_.end())
    throw ValidationError(ErrorCode::kInvalidConfig,
                          "unknown config key '" + key + "'");
  it->second = value;
}

void RunConfig::SetFromArg(const std::string &arg) {
  std::size_t eq = arg.find('=');
  if (eq == std::string::npos)
    throw ValidationError(ErrorCode::kInvalidConfig,
                          "--set expects key=value, got '" + arg + "'");
  Set(Trim(arg.substr(0, eq)), Trim(arg.substr(eq + 1)));
}

const std::string &RunConfig::GetString(const std::string &key) const {
  auto it = values_.find(key);
  if (it == values_.end())
    throw ValidationError(ErrorCode::kInvalidConfig,
                          "unknown config key '" + key + "'");
  return it->second;
}

double RunConfig::GetDouble(const std::string &key) const {
  const std::string &v = GetString(key);
  try {
    return std::stod(v);
  } catch (const std::exception &) {
    throw ValidationError(ErrorCode::kInvalidConfig,
                          "config key '" + key + "' is not a number: '" + v +
                              "'");
  }
}

long long RunConfig::GetInt(const std::string &key) const {
  const std::string &v = GetString(key);
  try {
    return std::stoll(v);
  } catch (const std::exception &) {
    throw ValidationError(ErrorCode::kInvalidConfig,
                          "config key '" + key + "' is not an integer: '" + v +
                              "'");
  }
}

bool RunConfig::GetBool(const std::string &key) const {
  const std::string &v = GetString(key);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ValidationError(ErrorCode::kInvalidConfig,
                        "config key '" + key + "' is not a boolean: '" + v +
                            "'");
}

std::vector<double> RunConfig::GetDoubleList(const std::string &key) const {
  const std::string &v = GetString(key);
  std::vector<double> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = Trim(item);
    if (item.empty()) continue;
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception &) {
      throw ValidationError(ErrorCode::kInvalidConfig,
                            "config key '" + key + "' has non-numeric item '" +
                                item + "'");
    }
  }
  return out;
}

std::uint64_t RunConfig::GetSeed(const std::string &key) const {
  const std::string &v = GetString(key);
  try {
    return std::stoull(v);
  } catch (const std::exception &) {
    throw ValidationError(ErrorCode::kInvalidConfig,
                          "config key '" + key + "' is not a seed: '" + v +
                              "'");
  }
}

std::string RunConfig::Resolved() const {
  std::ostringstream oss;
  for (const auto &[k, v] : values_) oss << k << " = " << v << "\n";
  return oss.str();
}

std::uint64_t RunConfig::Hash() const { return Fnv1a(Resolved()); }

void RunConfig::WriteResolved(const std::string &path) const {
  std::ofstream out(path);
  if (!out) throw ValidationError(ErrorCode::kIoError, "cannot write " + path);
  out << Resolved();
}

}  // namespace dcaplda
