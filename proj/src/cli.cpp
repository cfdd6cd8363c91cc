// src/cli.cpp

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

#include "dcaplda/cli.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "dcaplda/asnorm.hpp"
#include "dcaplda/config.hpp"
#include "dcaplda/metrics.hpp"
#include "dcaplda/model_io.hpp"
#include "dcaplda/synth.hpp"

namespace dcaplda {

namespace {

int Guard(const std::function<void()> &body) {
  try {
    body();
    return 0;
  } catch (const ValidationError &e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const NumericalError &e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

RunConfig MakeConfig(const std::string &path,
                     const std::vector<std::string> &sets) {
  RunConfig cfg;
  if (!path.empty()) cfg.LoadFile(path);
  for (const auto &arg : sets) cfg.SetFromArg(arg);
  return cfg;
}

std::string FmtG(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string FmtShort(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

InitOptions InitOptsFromConfig(const RunConfig &cfg) {
  InitOptions opts;
  opts.lda_dim = static_cast<int>(cfg.GetInt("preproc.lda_dim"));
  opts.lda.ridge_rel = cfg.GetDouble("preproc.ridge_rel");
  opts.side_m_dim = static_cast<int>(cfg.GetInt("cal.sideinfo_m_dim"));
  opts.side_s_dim = static_cast<int>(cfg.GetInt("cal.sideinfo_s_dim"));
  opts.side_f = ParseSideInfoTransform(cfg.GetString("cal.sideinfo_f"));
  opts.side_init_std = cfg.GetDouble("cal.sideinfo_init_std");
  opts.dur_kind = ParseDurationFeatureKind(cfg.GetString("cal.duration_features"));
  opts.bin_edges = cfg.GetDoubleList("cal.bin_edges");
  opts.wlog_center_s = cfg.GetDouble("cal.wlog_center_s");
  opts.wlog_slope = cfg.GetDouble("cal.wlog_slope");
  opts.em.max_iters = static_cast<int>(cfg.GetInt("plda.em_iters"));
  opts.em.rel_tol = cfg.GetDouble("plda.em_rel_tol");
  opts.cal_speakers = static_cast<int>(cfg.GetInt("cal.init_speakers"));
  return opts;
}

TrainConfig TrainCfgFromConfig(const RunConfig &cfg) {
  TrainConfig t;
  t.stage1_batches = cfg.GetInt("train.stage1_batches");
  t.stage2_batches = cfg.GetInt("train.stage2_batches");
  t.stage3_batches = cfg.GetInt("train.stage3_batches");
  t.lr1 = cfg.GetDouble("train.lr1");
  t.lr2 = cfg.GetDouble("train.lr2");
  t.lr3 = cfg.GetDouble("train.lr3");
  t.pi = cfg.GetDouble("train.pi");
  t.l2_weight = cfg.GetDouble("train.l2_weight");
  for (const char *group : {"preproc", "score", "global", "dur", "side"}) {
    std::string key = std::string("train.l2_weight_") + group;
    if (!cfg.GetString(key).empty())
      t.l2_group_weights[group] = cfg.GetDouble(key);
  }
  t.grad_clip_norm = cfg.GetDouble("train.grad_clip_norm");
  t.n_seeds = static_cast<int>(cfg.GetInt("train.seeds"));
  t.seed = cfg.GetSeed("train.seed");
  t.batch.batch_size = static_cast<int>(cfg.GetInt("train.batch_size"));
  t.batch.method = ParseBatchMethod(cfg.GetString("train.batch_method"));
  t.adam_beta1 = cfg.GetDouble("train.adam_beta1");
  t.adam_beta2 = cfg.GetDouble("train.adam_beta2");
  t.adam_eps = cfg.GetDouble("train.adam_eps");
  t.freeze_backbone = cfg.GetBool("train.freeze_backbone");
  return t;
}

std::vector<std::string> SplitOn(const std::string &s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(item);
  return out;
}

DevSet LoadDevSet(const std::string &spec, double fps) {
  // name=emb.dcae,meta.tsv,key.tsv
  std::size_t eq = spec.find('=');
  if (eq == std::string::npos)
    throw ValidationError(ErrorCode::kInvalidArgument,
                          "--dev expects name=emb,meta,key, got '" + spec +
                              "'");
  DevSet dev;
  dev.name = spec.substr(0, eq);
  std::vector<std::string> parts = SplitOn(spec.substr(eq + 1), ',');
  if (parts.size() != 3)
    throw ValidationError(ErrorCode::kInvalidArgument,
                          "--dev expects name=emb,meta,key, got '" + spec +
                              "'");
  EmbeddingTable table = LoadEmbeddings(parts[0]);
  std::vector<SampleMeta> metas = LoadMetadataTsv(parts[1], fps);
  ValidateMeta(metas, table);
  dev.trials = BuildTrialsFromKeyFile(parts[2], metas);
  dev.x.resize(static_cast<Eigen::Index>(metas.size()), table.Dim());
  dev.dur.resize(static_cast<Eigen::Index>(metas.size()));
  for (std::size_t i = 0; i < metas.size(); ++i) {
    dev.x.row(static_cast<Eigen::Index>(i)) =
        table.x.row(table.RowOf(metas[i].sample_id));
    dev.dur(static_cast<Eigen::Index>(i)) = metas[i].duration_s;
  }
  return dev;
}

std::vector<std::uint32_t> ResolveIdList(const std::string &path,
                                         const EmbeddingTable &table) {
  std::ifstream in(path);
  if (!in) throw ValidationError(ErrorCode::kIoError, "cannot open " + path);
  std::vector<std::uint32_t> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    rows.push_back(static_cast<std::uint32_t>(table.RowOf(line)));
  }
  if (rows.empty())
    throw ValidationError(ErrorCode::kInvalidArgument,
                          path + ": empty id list");
  return rows;
}

void WriteTrainLog(const std::string &path,
                   const std::vector<TrainLogRow> &log,
                   const std::vector<std::string> &dev_names) {
  std::ofstream out(path);
  if (!out) throw ValidationError(ErrorCode::kIoError, "cannot write " + path);
  out << "stage\tminibatch\ttrain_loss";
  for (const auto &name : dev_names) out << "\tdev_cllr01_" << name;
  out << "\tgrad_norm\n";
  for (const auto &row : log) {
    out << row.stage << '\t' << row.batch << '\t' << FmtG(row.train_loss);
    for (std::size_t i = 0; i < dev_names.size(); ++i)
      out << '\t' << (i < row.dev.size() ? FmtG(row.dev[i]) : std::string("-"));
    out << '\t' << FmtG(row.grad_norm) << '\n';
  }
}

}  // namespace

int CmdTrain(const TrainArgs &args) {
  return Guard([&] {
    RunConfig cfg = MakeConfig(args.config_path, args.sets);
    if (!args.arch.empty()) cfg.Set("train.arch", args.arch);
    if (args.seeds > 0) cfg.Set("train.seeds", std::to_string(args.seeds));
    if (args.seed >= 0) cfg.Set("train.seed", std::to_string(args.seed));

    const double fps = cfg.GetDouble("data.frames_per_second");
    EmbeddingTable table = LoadEmbeddings(args.train_emb);
    std::vector<SampleMeta> metas = LoadMetadataTsv(args.train_meta, fps);
    TrainingPool pool = BuildPool(table, metas);

    const std::string weighting = cfg.GetString("train.weighting");
    std::unordered_map<std::string, double> weights;
    if (weighting == "balanced") {
      weights = BalancedSpeakerWeights(pool);
    } else if (weighting == "flat") {
      weights = FlatSpeakerWeights(pool);
    } else {
      throw ValidationError(ErrorCode::kInvalidConfig,
                            "train.weighting must be balanced or flat");
    }

    Architecture arch = ParseArchitecture(cfg.GetString("train.arch"));
    InitOptions opts = InitOptsFromConfig(cfg);
    TrainConfig tcfg = TrainCfgFromConfig(cfg);

    std::vector<DevSet> devs;
    for (const auto &spec : args.dev_specs) devs.push_back(LoadDevSet(spec, fps));

    GenerativeInit gen = FitGenerativeInit(pool, weights, opts, tcfg);

    int snorm_top = 0;
    if (!args.snorm_cohort.empty()) {
      if (arch != Architecture::kPlda)
        throw ValidationError(ErrorCode::kInvalidArgument,
                              "cohort normalization is only supported for the "
                              "plda architecture");
      // Refit the global calibration on cohort-normalized scores.
      std::unordered_map<std::string, std::size_t> pool_row;
      for (std::size_t i = 0; i < pool.metas.size(); ++i)
        pool_row.emplace(pool.metas[i].sample_id, i);
      std::ifstream in(args.snorm_cohort);
      if (!in)
        throw ValidationError(ErrorCode::kIoError,
                              "cannot open " + args.snorm_cohort);
      std::vector<Eigen::Index> cohort_rows;
      std::string line;
      while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto it = pool_row.find(line);
        if (it == pool_row.end())
          throw ValidationError(ErrorCode::kUnknownId,
                                "cohort id '" + line + "'");
        cohort_rows.push_back(static_cast<Eigen::Index>(it->second));
      }
      const int k = static_cast<int>(cohort_rows.size());
      snorm_top = args.snorm_top > 0 ? args.snorm_top : k;

      Matrix x_cohort(cohort_rows.size(), pool.x.cols());
      for (std::size_t i = 0; i < cohort_rows.size(); ++i)
        x_cohort.row(static_cast<Eigen::Index>(i)) = pool.x.row(cohort_rows[i]);
      Matrix w_cohort = ApplyPreprocAll(gen.preproc, x_cohort);

      CalTrialScores cal = CalibrationTrials(pool, gen.preproc, gen.score,
                                             opts.cal_speakers, tcfg.seed);
      // Cohort scores for every pool row that appears in a calibration trial.
      std::unordered_map<std::uint32_t, Eigen::Index> side_index;
      std::vector<std::uint32_t> side_rows;
      for (auto v : {&cal.enroll_rows, &cal.test_rows})
        for (std::uint32_t r : *v)
          if (side_index.emplace(r, static_cast<Eigen::Index>(side_rows.size()))
                  .second)
            side_rows.push_back(r);
      Matrix x_sides(side_rows.size(), pool.x.cols());
      for (std::size_t i = 0; i < side_rows.size(); ++i)
        x_sides.row(static_cast<Eigen::Index>(i)) = pool.x.row(side_rows[i]);
      Matrix w_sides = ApplyPreprocAll(gen.preproc, x_sides);
      Matrix cohort_scores = ScorePairs(gen.score, w_sides, w_cohort);

      ScoreSet norm_set;
      norm_set.labels = cal.labels;
      norm_set.llrs.resize(cal.s.size());
      for (Eigen::Index i = 0; i < cal.s.size(); ++i) {
        Vector ce = cohort_scores.row(side_index.at(cal.enroll_rows[i]));
        Vector ct = cohort_scores.row(side_index.at(cal.test_rows[i]));
        norm_set.llrs(i) = AsNorm1(cal.s(i), ce, ct, snorm_top);
      }
      LinearCalFit fit = FitGlobalCal(norm_set, tcfg.pi);
      gen.global_cal.alpha = fit.alpha;
      gen.global_cal.beta = fit.beta;
    }

    TrainOutput out = TrainBackend(pool, devs, gen, arch, opts, tcfg);
    out.params.snorm_top = snorm_top;

    std::filesystem::create_directories(args.out_dir);
    char hash_buf[32];
    std::snprintf(hash_buf, sizeof(hash_buf), "%016llx",
                  static_cast<unsigned long long>(cfg.Hash()));
    std::ostringstream prov;
    prov << "config_hash=" << hash_buf << "\n"
         << "seed=" << out.best_seed << "\n"
         << "arch=" << ArchitectureName(arch) << "\n"
         << "weighting=" << weighting << "\n"
         << "weighted_lda=true\n";
    SaveModel(args.out_dir + "/model.dcam", out.params, prov.str());
    cfg.WriteResolved(args.out_dir + "/config.resolved");

    std::vector<std::string> dev_names;
    for (const auto &d : devs) dev_names.push_back(d.name);
    WriteTrainLog(args.out_dir + "/train_log.tsv", out.log, dev_names);
    {
      std::ofstream sm(args.out_dir + "/seed_metrics.tsv");
      sm << "seed\tdev_cllr01\n";
      for (const auto &r : out.seed_results)
        sm << r.seed << '\t' << FmtG(r.dev_metric) << '\n';
    }
    std::cout << "model: " << args.out_dir << "/model.dcam"
              << " arch=" << ArchitectureName(arch)
              << " best_seed=" << out.best_seed;
    if (!devs.empty()) std::cout << " dev_cllr01=" << FmtShort(out.best_dev);
    std::cout << "\n";
  });
}

int CmdScore(const ScoreArgs &args) {
  return Guard([&] {
    RunConfig cfg = MakeConfig(args.config_path, args.sets);
    const double fps = cfg.GetDouble("data.frames_per_second");
    const int block = static_cast<int>(cfg.GetInt("score.block"));
    LoadedModel model = LoadModel(args.model);
    const BackendParams &params = model.params;
    EmbeddingTable table = LoadEmbeddings(args.emb);

    const bool needs_dur = params.stage == CalStage::kDurationOnly ||
                           params.stage == CalStage::kDurationSideInfo;
    std::unordered_map<std::string, double> dur_of;
    if (!args.meta.empty()) {
      for (const auto &m : LoadMetadataTsv(args.meta, fps))
        dur_of[m.sample_id] = m.duration_s;
    }
    auto duration_for = [&](const std::string &id) -> double {
      auto it = dur_of.find(id);
      if (it == dur_of.end())
        throw ValidationError(
            ErrorCode::kInvalidMetadata,
            "missing duration for sample '" + id +
                "' (duration-dependent model needs metadata)");
      return it->second;
    };

    const bool snorm_requested =
        !args.snorm_cohort.empty() || params.snorm_top > 0;
    Matrix w_cohort;
    int snorm_top = 0;
    if (snorm_requested) {
      if (params.stage != CalStage::kGlobal)
        throw ValidationError(ErrorCode::kInvalidArgument,
                              "cohort normalization applies to globally "
                              "calibrated models only");
      if (args.snorm_cohort.empty())
        throw ValidationError(ErrorCode::kInvalidArgument,
                              "model was calibrated on normalized scores; "
                              "pass --snorm-cohort");
      std::vector<std::uint32_t> rows = ResolveIdList(args.snorm_cohort, table);
      Matrix x_cohort(rows.size(), table.Dim());
      for (std::size_t i = 0; i < rows.size(); ++i)
        x_cohort.row(static_cast<Eigen::Index>(i)) = table.x.row(rows[i]);
      w_cohort = ApplyPreprocAll(params.preproc, x_cohort);
      snorm_top = args.snorm_top > 0
                      ? args.snorm_top
                      : (params.snorm_top > 0 ? params.snorm_top
                                              : static_cast<int>(rows.size()));
    }

    if (!args.matrix_out.empty()) {
      if (args.enroll_list.empty() || args.test_list.empty())
        throw ValidationError(ErrorCode::kInvalidArgument,
                              "--matrix-out needs --enroll-list and "
                              "--test-list");
      std::ifstream ein(args.enroll_list), tin(args.test_list);
      if (!ein || !tin)
        throw ValidationError(ErrorCode::kIoError, "cannot open id list");
      auto read_ids = [&](std::ifstream &in) {
        std::vector<std::string> ids;
        std::string line;
        while (std::getline(in, line)) {
          if (!line.empty() && line.back() == '\r') line.pop_back();
          if (!line.empty()) ids.push_back(line);
        }
        return ids;
      };
      ScoreMatrix sm;
      sm.row_ids = read_ids(ein);
      sm.col_ids = read_ids(tin);

      // Unified cache over the union of both sides.
      std::vector<std::string> uniq;
      std::unordered_map<std::string, std::uint32_t> local;
      for (const auto *ids : {&sm.row_ids, &sm.col_ids})
        for (const auto &id : *ids)
          if (local.emplace(id, static_cast<std::uint32_t>(uniq.size())).second)
            uniq.push_back(id);
      Matrix x(uniq.size(), table.Dim());
      Vector dur = Vector::Zero(static_cast<Eigen::Index>(uniq.size()));
      for (std::size_t i = 0; i < uniq.size(); ++i) {
        x.row(static_cast<Eigen::Index>(i)) = table.x.row(table.RowOf(uniq[i]));
        if (needs_dur) dur(static_cast<Eigen::Index>(i)) = duration_for(uniq[i]);
      }
      SampleCache cache = PrepareSamples(params, x, dur);
      sm.scores.resize(static_cast<Eigen::Index>(sm.row_ids.size()),
                       static_cast<Eigen::Index>(sm.col_ids.size()));
      for (std::size_t r0 = 0; r0 < sm.row_ids.size();
           r0 += static_cast<std::size_t>(block)) {
        for (std::size_t c0 = 0; c0 < sm.col_ids.size();
             c0 += static_cast<std::size_t>(block)) {
          std::size_t r1 = std::min(r0 + block, sm.row_ids.size());
          std::size_t c1 = std::min(c0 + block, sm.col_ids.size());
          TrialSet trials;
          trials.ids = uniq;
          for (std::size_t r = r0; r < r1; ++r) {
            for (std::size_t c = c0; c < c1; ++c) {
              trials.enroll.push_back(local.at(sm.row_ids[r]));
              trials.test.push_back(local.at(sm.col_ids[c]));
              trials.labels.push_back(TrialLabel::kImpostor);
              trials.mask.push_back(TrialMask::kValid);
            }
          }
          TrialScores fw = ForwardTrials(params, cache, trials);
          std::size_t t = 0;
          for (std::size_t r = r0; r < r1; ++r)
            for (std::size_t c = c0; c < c1; ++c)
              sm.scores(static_cast<Eigen::Index>(r),
                        static_cast<Eigen::Index>(c)) = fw.l(t++);
        }
      }
      SaveScoreMatrix(args.matrix_out, sm);
      cfg.WriteResolved(args.matrix_out + ".config");
      std::cout << "matrix: " << args.matrix_out << " "
                << sm.row_ids.size() << "x" << sm.col_ids.size() << "\n";
      return;
    }

    std::vector<TrialKey> keys = LoadTrialKeys(args.keys);
    std::vector<std::string> uniq;
    std::unordered_map<std::string, std::uint32_t> local;
    for (const auto &k : keys) {
      for (const std::string *id : {&k.enroll, &k.test}) {
        if (local.emplace(*id, static_cast<std::uint32_t>(uniq.size())).second)
          uniq.push_back(*id);
      }
    }
    Matrix x(uniq.size(), table.Dim());
    Vector dur = Vector::Zero(static_cast<Eigen::Index>(uniq.size()));
    for (std::size_t i = 0; i < uniq.size(); ++i) {
      x.row(static_cast<Eigen::Index>(i)) = table.x.row(table.RowOf(uniq[i]));
      if (needs_dur) dur(static_cast<Eigen::Index>(i)) = duration_for(uniq[i]);
    }
    SampleCache cache = PrepareSamples(params, x, dur);
    Matrix cohort_scores;
    if (snorm_requested)
      cohort_scores = ScorePairs(params.score, cache.w, w_cohort, block);

    // Trials are evaluated in fixed-size slices to bound per-trial memory on
    // large keys; samples are transformed once above.
    const std::size_t slice = 1u << 20;
    std::vector<ScoredTrial> rows;
    rows.reserve(keys.size());
    for (std::size_t begin = 0; begin < keys.size(); begin += slice) {
      const std::size_t end = std::min(begin + slice, keys.size());
      TrialSet trials;
      trials.ids = uniq;
      for (std::size_t i = begin; i < end; ++i) {
        trials.enroll.push_back(local.at(keys[i].enroll));
        trials.test.push_back(local.at(keys[i].test));
        trials.labels.push_back(keys[i].label.value_or(TrialLabel::kImpostor));
        trials.mask.push_back(TrialMask::kValid);
      }
      TrialScores fw = ForwardTrials(params, cache, trials);
      for (std::size_t i = begin; i < end; ++i) {
        const Eigen::Index t = static_cast<Eigen::Index>(i - begin);
        double llr = fw.l(t);
        if (snorm_requested) {
          Vector ce = cohort_scores.row(trials.enroll[t]);
          Vector ct = cohort_scores.row(trials.test[t]);
          double zs = AsNorm1(fw.s(t), ce, ct, snorm_top);
          llr = params.global.alpha * zs + params.global.beta;
        }
        rows.push_back({keys[i].enroll, keys[i].test, llr});
      }
    }
    SaveScores(args.out, rows);
    cfg.WriteResolved(args.out + ".config");
    std::cout << "scores: " << args.out << " trials=" << rows.size() << "\n";
  });
}

int CmdEval(const EvalArgs &args) {
  return Guard([&] {
    if (args.scores.empty() || args.scores.size() != args.keys.size())
      throw ValidationError(ErrorCode::kInvalidArgument,
                            "eval needs matched --scores and --keys lists");
    RunConfig cfg = MakeConfig(args.config_path, args.sets);
    std::vector<double> extra_priors;
    for (double p : args.priors.empty() ? cfg.GetDoubleList("eval.priors")
                                        : args.priors) {
      if (!(p > 0.0) || !(p < 1.0))
        throw ValidationError(ErrorCode::kInvalidArgument,
                              "priors must lie in (0, 1)");
      if (p != 0.5 && p != 0.01) extra_priors.push_back(p);
    }
    struct SetRow {
      std::string name;
      MetricReport rep;
      double pav_p5 = 0, pav_p01 = 0;
      std::vector<std::pair<double, std::pair<double, double>>> extra;
    };
    std::vector<SetRow> rows;
    for (std::size_t si = 0; si < args.scores.size(); ++si) {
      std::unordered_map<std::string, double> score_of;
      for (const auto &st : LoadScores(args.scores[si])) {
        auto [it, inserted] = score_of.emplace(st.enroll + "\x1f" + st.test,
                                               st.llr);
        if (!inserted)
          throw ValidationError(ErrorCode::kDuplicateId,
                                "duplicate scored pair (" + st.enroll + ", " +
                                    st.test + ")");
      }
      ScoreSet set;
      std::vector<double> llrs;
      for (const auto &k : LoadTrialKeys(args.keys[si])) {
        if (!k.label.has_value())
          throw ValidationError(ErrorCode::kMalformedFile,
                                args.keys[si] + ": key lines need tgt|imp");
        auto it = score_of.find(k.enroll + "\x1f" + k.test);
        if (it == score_of.end())
          throw ValidationError(ErrorCode::kUnknownId,
                                "no score for pair (" + k.enroll + ", " +
                                    k.test + ")");
        llrs.push_back(it->second);
        set.labels.push_back(*k.label);
      }
      set.llrs = Eigen::Map<Vector>(llrs.data(), llrs.size());
      SetRow row;
      row.name = si < args.names.size()
                     ? args.names[si]
                     : std::filesystem::path(args.scores[si]).stem().string();
      row.rep = Evaluate(set);
      row.pav_p5 = MinCllrPav(set, 0.5);
      row.pav_p01 = MinCllrPav(set, 0.01);
      for (double p : extra_priors)
        row.extra.push_back({p, {Cllr(set, p), MinCllrLinear(set, p)}});
      rows.push_back(std::move(row));
    }

    auto print_row = [&](const SetRow &row) {
      const MetricReport &r = row.rep;
      std::cout << "set=" << row.name << " n_tgt=" << r.n_tgt
                << " n_imp=" << r.n_imp
                << " cllr_p5_act=" << FmtShort(r.cllr_p5_act)
                << " cllr_p5_min=" << FmtShort(r.cllr_p5_min)
                << " cllr_p5_min_pav=" << FmtShort(row.pav_p5)
                << " cllr_p01_act=" << FmtShort(r.cllr_p01_act)
                << " cllr_p01_min=" << FmtShort(r.cllr_p01_min)
                << " cllr_p01_min_pav=" << FmtShort(row.pav_p01)
                << " dcf_act=" << FmtShort(r.dcf_act)
                << " dcf_min=" << FmtShort(r.dcf_min)
                << " eer=" << FmtShort(r.eer);
      for (const auto &[p, v] : row.extra)
        std::cout << " cllr_act@" << FmtShort(p) << "=" << FmtShort(v.first)
                  << " cllr_min@" << FmtShort(p) << "=" << FmtShort(v.second);
      std::cout << "\n";
    };
    MetricReport avg;
    double avg_pav5 = 0, avg_pav01 = 0;
    for (const auto &row : rows) {
      print_row(row);
      avg.cllr_p5_act += row.rep.cllr_p5_act;
      avg.cllr_p5_min += row.rep.cllr_p5_min;
      avg.cllr_p01_act += row.rep.cllr_p01_act;
      avg.cllr_p01_min += row.rep.cllr_p01_min;
      avg.dcf_act += row.rep.dcf_act;
      avg.dcf_min += row.rep.dcf_min;
      avg.eer += row.rep.eer;
      avg.n_tgt += row.rep.n_tgt;
      avg.n_imp += row.rep.n_imp;
      avg_pav5 += row.pav_p5;
      avg_pav01 += row.pav_p01;
    }
    const double n = static_cast<double>(rows.size());
    avg.cllr_p5_act /= n;
    avg.cllr_p5_min /= n;
    avg.cllr_p01_act /= n;
    avg.cllr_p01_min /= n;
    avg.dcf_act /= n;
    avg.dcf_min /= n;
    avg.eer /= n;
    if (rows.size() > 1) {
      SetRow avg_row;
      avg_row.name = "average";
      avg_row.rep = avg;
      avg_row.pav_p5 = avg_pav5 / n;
      avg_row.pav_p01 = avg_pav01 / n;
      print_row(avg_row);
    }

    if (!args.out_tsv.empty()) {
      std::ofstream out(args.out_tsv);
      if (!out)
        throw ValidationError(ErrorCode::kIoError,
                              "cannot write " + args.out_tsv);
      out << "set\tn_tgt\tn_imp\tcllr_p5_act\tcllr_p5_min\tcllr_p5_min_pav\t"
             "cllr_p01_act\tcllr_p01_min\tcllr_p01_min_pav\tdcf_act\tdcf_min\t"
             "eer\n";
      auto tsv_row = [&](const std::string &name, const MetricReport &r,
                         double pav5, double pav01) {
        out << name << '\t' << r.n_tgt << '\t' << r.n_imp << '\t'
            << FmtG(r.cllr_p5_act) << '\t' << FmtG(r.cllr_p5_min) << '\t'
            << FmtG(pav5) << '\t' << FmtG(r.cllr_p01_act) << '\t'
            << FmtG(r.cllr_p01_min) << '\t' << FmtG(pav01) << '\t'
            << FmtG(r.dcf_act) << '\t' << FmtG(r.dcf_min) << '\t'
            << FmtG(r.eer) << '\n';
      };
      for (const auto &row : rows)
        tsv_row(row.name, row.rep, row.pav_p5, row.pav_p01);
      if (rows.size() > 1)
        tsv_row("average", avg, avg_pav5 / n, avg_pav01 / n);
      cfg.WriteResolved(args.out_tsv + ".config");
    }
  });
}

int CmdSynth(const SynthArgs &args) {
  return Guard([&] {
    RunConfig cfg = MakeConfig(args.config_path, args.sets);
    SynthSpec spec;
    spec.dim = static_cast<int>(cfg.GetInt("synth.dim"));
    spec.speakers_per_domain =
        static_cast<int>(cfg.GetInt("synth.speakers_per_domain"));
    spec.sessions_per_speaker =
        static_cast<int>(cfg.GetInt("synth.sessions_per_speaker"));
    spec.samples_per_session =
        static_cast<int>(cfg.GetInt("synth.samples_per_session"));
    spec.between_var_lo = cfg.GetDouble("synth.between_var_lo");
    spec.between_var_hi = cfg.GetDouble("synth.between_var_hi");
    spec.within_var = cfg.GetDouble("synth.within_var");
    spec.speaker_shift_sigma = cfg.GetDouble("synth.speaker_shift_sigma");
    spec.rotate = cfg.GetBool("synth.rotate");
    spec.rng_seed = cfg.GetSeed("synth.seed");
    spec.id_prefix = cfg.GetString("synth.id_prefix");

    const int n_domains = static_cast<int>(cfg.GetInt("synth.n_domains"));
    auto broadcast = [&](const std::string &key) {
      std::vector<double> v = cfg.GetDoubleList(key);
      if (v.size() == 1) v.assign(n_domains, v[0]);
      if (static_cast<int>(v.size()) != n_domains)
        throw ValidationError(ErrorCode::kInvalidConfig,
                              key + " needs 1 or n_domains values");
      return v;
    };
    std::vector<double> shift = broadcast("synth.domain_shift_sigma");
    std::vector<double> wscale = broadcast("synth.within_scale");
    std::vector<double> dlo = broadcast("synth.duration_lo_s");
    std::vector<double> dhi = broadcast("synth.duration_hi_s");
    std::vector<double> dexp = broadcast("synth.duration_exponent");
    std::vector<double> dref = broadcast("synth.duration_ref_s");
    for (int d = 0; d < n_domains; ++d) {
      DomainProfile dom;
      dom.name = "dom" + std::to_string(d);
      dom.shift_sigma = shift[d];
      dom.within_scale = wscale[d];
      dom.dur_lo_s = dlo[d];
      dom.dur_hi_s = dhi[d];
      dom.dur_exponent = dexp[d];
      dom.dur_ref_s = dref[d];
      spec.domains.push_back(std::move(dom));
    }

    SynthCorpus corpus = Generate(spec);
    const int chunks = static_cast<int>(cfg.GetInt("synth.chunks_per_sample"));
    if (chunks > 0)
      Chunk(&corpus, cfg.GetDouble("synth.chunk_lo_s"),
            cfg.GetDouble("synth.chunk_hi_s"), chunks);

    std::filesystem::create_directories(args.out_dir);
    const std::string emb_path = args.out_dir + "/embeddings.dcae";
    const std::string meta_path = args.out_dir + "/metadata.tsv";
    SaveEmbeddings(emb_path, corpus.table);
    SaveMetadataTsv(meta_path, corpus.metas);
    cfg.WriteResolved(args.out_dir + "/config.resolved");

    char buf[32];
    std::ofstream manifest(args.out_dir + "/MANIFEST");
    manifest << "seed = " << spec.rng_seed << "\n"
             << "dim = " << spec.dim << "\n"
             << "n_domains = " << n_domains << "\n"
             << "n_samples = " << corpus.table.NumRows() << "\n"
             << "n_speakers = " << n_domains * spec.speakers_per_domain << "\n"
             << "chunks_per_sample = " << chunks << "\n";
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(HashFile(emb_path)));
    manifest << "embeddings_hash = " << buf << "\n";
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(HashFile(meta_path)));
    manifest << "metadata_hash = " << buf << "\n";
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(cfg.Hash()));
    manifest << "config_hash = " << buf << "\n";
    std::cout << "corpus: " << args.out_dir << " samples="
              << corpus.table.NumRows() << "\n";
  });
}

int CmdInfo(const InfoArgs &args) {
  return Guard([&] {
    RunConfig cfg = MakeConfig(args.config_path, args.sets);
    ModelDims dims;
    dims.embedding_dim = static_cast<int>(cfg.GetInt("data.embedding_dim"));
    dims.lda_dim = static_cast<int>(cfg.GetInt("preproc.lda_dim"));
    dims.side_m_dim = static_cast<int>(cfg.GetInt("cal.sideinfo_m_dim"));
    dims.side_s_dim = static_cast<int>(cfg.GetInt("cal.sideinfo_s_dim"));
    dims.dur_feature_dim = DurationFeatureDim(
        ParseDurationFeatureKind(cfg.GetString("cal.duration_features")),
        cfg.GetDoubleList("cal.bin_edges").size());
    std::vector<Architecture> archs;
    if (args.arch == "all") {
      archs = {Architecture::kPlda, Architecture::kDPlda,
               Architecture::kDPldaDd, Architecture::kDPldaSd,
               Architecture::kDPldaDsd};
    } else {
      archs = {ParseArchitecture(args.arch)};
    }
    for (Architecture a : archs)
      std::cout << ArchitectureName(a) << "\t" << CountParameters(a, dims)
                << "\n";
  });
}

int RunCli(int argc, char **argv) {
  CLI::App app{"DCA-PLDA speaker verification backend"};
  app.require_subcommand(1);

  TrainArgs train;
  CLI::App *t = app.add_subcommand("train", "train a backend model");
  t->add_option("--config", train.config_path, "config file");
  t->add_option("--set", train.sets, "config override key=value");
  t->add_option("--train-emb", train.train_emb, "training embeddings")
      ->required();
  t->add_option("--train-meta", train.train_meta, "training metadata TSV")
      ->required();
  t->add_option("--dev", train.dev_specs, "dev set name=emb,meta,key");
  t->add_option("--out", train.out_dir, "output directory")->required();
  t->add_option("--arch", train.arch, "architecture");
  t->add_option("--seeds", train.seeds, "number of seeds");
  t->add_option("--seed", train.seed, "base seed");
  t->add_option("--snorm-cohort", train.snorm_cohort, "cohort id list");
  t->add_option("--snorm-top", train.snorm_top, "top-N cohort scores");

  ScoreArgs score;
  CLI::App *s = app.add_subcommand("score", "score trials with a model");
  s->add_option("--model", score.model, "model file")->required();
  s->add_option("--emb", score.emb, "embeddings")->required();
  s->add_option("--meta", score.meta, "metadata TSV (durations)");
  s->add_option("--keys", score.keys, "trial key file");
  s->add_option("--out", score.out, "output score file");
  s->add_option("--config", score.config_path, "config file");
  s->add_option("--set", score.sets, "config override key=value");
  s->add_option("--enroll-list", score.enroll_list, "enroll ids (matrix mode)");
  s->add_option("--test-list", score.test_list, "test ids (matrix mode)");
  s->add_option("--matrix-out", score.matrix_out, "score matrix output");
  s->add_option("--snorm-cohort", score.snorm_cohort, "cohort id list");
  s->add_option("--snorm-top", score.snorm_top, "top-N cohort scores");

  EvalArgs eval;
  CLI::App *e = app.add_subcommand("eval", "evaluate score files");
  e->add_option("--scores", eval.scores, "score files")->required();
  e->add_option("--keys", eval.keys, "key files (paired with scores)")
      ->required();
  e->add_option("--names", eval.names, "set names");
  e->add_option("--out", eval.out_tsv, "report TSV");
  e->add_option("--priors", eval.priors, "Cllr priors to report");
  e->add_option("--config", eval.config_path, "config file");
  e->add_option("--set", eval.sets, "config override key=value");

  SynthArgs synth;
  CLI::App *y = app.add_subcommand("synth", "generate a synthetic corpus");
  y->add_option("--config", synth.config_path, "config file");
  y->add_option("--set", synth.sets, "config override key=value");
  y->add_option("--out", synth.out_dir, "output directory")->required();

  InfoArgs info;
  CLI::App *i = app.add_subcommand("info", "print model size per architecture");
  i->add_option("--config", info.config_path, "config file");
  i->add_option("--set", info.sets, "config override key=value");
  i->add_option("--arch", info.arch, "architecture or 'all'");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &err) {
    return app.exit(err);
  }

  if (t->parsed()) return CmdTrain(train);
  if (s->parsed()) {
    if (score.matrix_out.empty() && (score.keys.empty() || score.out.empty())) {
      std::cerr << "error: score needs --keys and --out (or matrix mode)\n";
      return 2;
    }
    return CmdScore(score);
  }
  if (e->parsed()) return CmdEval(eval);
  if (y->parsed()) return CmdSynth(synth);
  if (i->parsed()) return CmdInfo(info);
  return 1;
}

}  // namespace dcaplda
