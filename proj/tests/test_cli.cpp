// tests/test_cli.cpp

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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>
#include <sstream>

#include "dcaplda/asnorm.hpp"
#include "dcaplda/cli.hpp"
#include "dcaplda/config.hpp"
#include "dcaplda/data_model.hpp"
#include "dcaplda/model_io.hpp"
#include "dcaplda/plda.hpp"
#include "dcaplda/preproc.hpp"
#include "dcaplda/synth.hpp"
#include "test_util.hpp"

using namespace dcaplda;
using testutil::TempDir;

namespace {

// Writes a small two-domain synthetic corpus plus a dev split and an eval
// key; returns the output directory.
struct Fixture {
  TempDir tmp{"cli"};
  std::string corpus_dir;
  std::string dev_spec;
  std::string key_path;

  Fixture() {
    corpus_dir = tmp.Path("corpus");
    SynthArgs synth;
    synth.out_dir = corpus_dir;
    synth.sets = {"synth.dim=12",         "synth.n_domains=2",
                  "synth.speakers_per_domain=16",
                  "synth.sessions_per_speaker=3",
                  "synth.samples_per_session=2",
                  "synth.domain_shift_sigma=0.4",
                  "synth.duration_exponent=0.5",
                  "synth.seed=5"};
    REQUIRE(CmdSynth(synth) == 0);

    // Dev corpus from a different seed.
    SynthArgs dev;
    dev.out_dir = tmp.Path("dev");
    dev.sets = synth.sets;
    dev.sets.push_back("synth.seed=6");
    dev.sets.push_back("synth.id_prefix=dev_");
    dev.sets.push_back("synth.speakers_per_domain=8");
    REQUIRE(CmdSynth(dev) == 0);

    // Keys over the dev corpus: its valid all-pairs trials.
    auto metas = LoadMetadataTsv(tmp.Path("dev") + "/metadata.tsv");
    TrialSet trials = BuildTrialsAllPairs(metas);
    key_path = tmp.Path("dev_keys.tsv");
    std::ofstream out(key_path);
    for (std::size_t i = 0; i < trials.NumTrials(); ++i) {
      if (trials.mask[i] != TrialMask::kValid) continue;
      out << trials.ids[trials.enroll[i]] << '\t' << trials.ids[trials.test[i]]
          << '\t'
          << (trials.labels[i] == TrialLabel::kTarget ? "tgt" : "imp")
          << '\n';
    }
    out.close();
    dev_spec = "dev=" + tmp.Path("dev") + "/embeddings.dcae," +
               tmp.Path("dev") + "/metadata.tsv," + key_path;
  }

  TrainArgs BaseTrain(const std::string &out, const std::string &arch) const {
    TrainArgs args;
    args.train_emb = corpus_dir + "/embeddings.dcae";
    args.train_meta = corpus_dir + "/metadata.tsv";
    args.out_dir = out;
    args.arch = arch;
    args.dev_specs = {dev_spec};
    args.sets = {"preproc.lda_dim=8",
                 "cal.sideinfo_m_dim=4",
                 "cal.sideinfo_s_dim=2",
                 "cal.init_speakers=100",
                 "train.batch_size=16",
                 "train.batch_method=plain",
                 "train.stage1_batches=8",
                 "train.stage2_batches=4",
                 "train.stage3_batches=2",
                 "train.lr1=0.002",
                 "train.lr2=0.002",
                 "train.lr3=0.0001"};
    return args;
  }
};

std::string Slurp(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("synth manifests are reproducible per seed") {
  TempDir tmp("synthdet");
  SynthArgs a;
  a.out_dir = tmp.Path("a");
  a.sets = {"synth.speakers_per_domain=6", "synth.seed=9"};
  SynthArgs b;
  b.out_dir = tmp.Path("b");
  b.sets = a.sets;
  REQUIRE(CmdSynth(a) == 0);
  REQUIRE(CmdSynth(b) == 0);
  CHECK(Slurp(tmp.Path("a") + "/MANIFEST") == Slurp(tmp.Path("b") + "/MANIFEST"));
  CHECK(Slurp(tmp.Path("a") + "/embeddings.dcae") ==
        Slurp(tmp.Path("b") + "/embeddings.dcae"));

  SynthArgs c;
  c.out_dir = tmp.Path("c");
  c.sets = {"synth.speakers_per_domain=6", "synth.seed=10"};
  REQUIRE(CmdSynth(c) == 0);
  CHECK(Slurp(tmp.Path("a") + "/MANIFEST") != Slurp(tmp.Path("c") + "/MANIFEST"));
}

TEST_CASE("synth chunking produces the short-duration variant") {
  TempDir tmp("synthchunk");
  SynthArgs a;
  a.out_dir = tmp.Path("a");
  a.sets = {"synth.speakers_per_domain=4",  "synth.seed=3",
            "synth.chunk_lo_s=4",           "synth.chunk_hi_s=16",
            "synth.chunks_per_sample=3"};
  REQUIRE(CmdSynth(a) == 0);
  auto metas = LoadMetadataTsv(tmp.Path("a") + "/metadata.tsv");
  CHECK(metas.size() == 4 * 2 * 3 * 2 * 3);  // spk x dom x sess x smp x chunks
  for (const auto &m : metas) {
    CHECK(m.duration_s >= 4.0);
    CHECK(m.duration_s <= 16.0);
  }
}

TEST_CASE("info reports the model sizes of the standard configuration") {
  // Captured through the library call; the CLI wraps the same function.
  InfoArgs args;
  CHECK(CmdInfo(args) == 0);
  ModelDims dims;  // defaults: D=512, N=300, M=200, S=6, wlog
  CHECK(CountParameters(Architecture::kPlda, dims) == 334203);
  CHECK(CountParameters(Architecture::kDPlda, dims) == 334203);
  CHECK(CountParameters(Architecture::kDPldaDd, dims) == 334223);
  CHECK(CountParameters(Architecture::kDPldaDsd, dims) == 438187);
  CHECK(CountParameters(Architecture::kDPldaDsd, dims) -
            CountParameters(Architecture::kDPldaDd, dims) ==
        103964);
}

TEST_CASE("unknown config keys are rejected with exit 2") {
  SynthArgs args;
  args.out_dir = "/tmp/should_not_exist_dcaplda";
  args.sets = {"synth.bogus_knob=1"};
  CHECK(CmdSynth(args) == 2);
}

TEST_CASE("standard-recipe defaults") {
  RunConfig cfg;
  CHECK(cfg.GetInt("train.stage1_batches") == 12000);
  CHECK(cfg.GetInt("train.stage2_batches") == 3000);
  CHECK(cfg.GetInt("train.stage3_batches") == 100);
  CHECK(cfg.GetDouble("train.lr1") == 0.0005);
  CHECK(cfg.GetDouble("train.lr2") == 0.001);
  CHECK(cfg.GetDouble("train.lr3") == 0.00001);
  CHECK(cfg.GetInt("train.batch_size") == 2048);
  CHECK(cfg.GetDouble("train.grad_clip_norm") == 4.0);
  CHECK(cfg.GetDouble("train.pi") == 0.01);
  CHECK(cfg.GetInt("preproc.lda_dim") == 300);
  CHECK(cfg.GetInt("cal.sideinfo_m_dim") == 200);
  CHECK(cfg.GetInt("cal.sideinfo_s_dim") == 6);
  CHECK(cfg.GetString("cal.sideinfo_f") == "identity");
  CHECK(cfg.GetString("cal.duration_features") == "wlog");
  CHECK(cfg.GetDouble("cal.wlog_center_s") == 30.0);
  CHECK(cfg.GetDouble("cal.wlog_slope") == 2.0);
  std::vector<double> edges = cfg.GetDoubleList("cal.bin_edges");
  CHECK(edges == std::vector<double>{8, 16, 32, 64, 128});
  CHECK(cfg.GetInt("cal.init_speakers") == 1000);
}

TEST_CASE("full train/score/eval round trip") {
  Fixture fx;

  SUBCASE("plda architecture is generative only and deterministic") {
    TrainArgs t1 = fx.BaseTrain(fx.tmp.Path("m1"), "plda");
    TrainArgs t2 = fx.BaseTrain(fx.tmp.Path("m2"), "plda");
    REQUIRE(CmdTrain(t1) == 0);
    REQUIRE(CmdTrain(t2) == 0);
    CHECK(Slurp(fx.tmp.Path("m1") + "/model.dcam") ==
          Slurp(fx.tmp.Path("m2") + "/model.dcam"));
    //

    ScoreArgs s;
    s.model = fx.tmp.Path("m1") + "/model.dcam";
    s.emb = fx.tmp.Path("dev") + "/embeddings.dcae";
    s.keys = fx.key_path;
    s.out = fx.tmp.Path("scores1.tsv");
    REQUIRE(CmdScore(s) == 0);
    s.out = fx.tmp.Path("scores2.tsv");
    REQUIRE(CmdScore(s) == 0);
    CHECK(Slurp(fx.tmp.Path("scores1.tsv")) ==
          Slurp(fx.tmp.Path("scores2.tsv")));

    EvalArgs e;
    e.scores = {fx.tmp.Path("scores1.tsv")};
    e.keys = {fx.key_path};
    e.out_tsv = fx.tmp.Path("report.tsv");
    REQUIRE(CmdEval(e) == 0);
    std::string report = Slurp(fx.tmp.Path("report.tsv"));
    CHECK(report.find("cllr_p5_act") != std::string::npos);
  }

  SUBCASE("dca-plda at init scores identically to plda plus global cal") {
    TrainArgs plda = fx.BaseTrain(fx.tmp.Path("plda"), "plda");
    REQUIRE(CmdTrain(plda) == 0);
    TrainArgs dca = fx.BaseTrain(fx.tmp.Path("dca"), "dca-plda");
    for (auto &s : dca.sets) {
      if (s.rfind("train.stage", 0) == 0) s = s.substr(0, s.find('=')) + "=0";
    }
    REQUIRE(CmdTrain(dca) == 0);

    ScoreArgs s;
    s.emb = fx.tmp.Path("dev") + "/embeddings.dcae";
    s.meta = fx.tmp.Path("dev") + "/metadata.tsv";
    s.keys = fx.key_path;
    s.model = fx.tmp.Path("plda") + "/model.dcam";
    s.out = fx.tmp.Path("plda_scores.tsv");
    REQUIRE(CmdScore(s) == 0);
    s.model = fx.tmp.Path("dca") + "/model.dcam";
    s.out = fx.tmp.Path("dca_scores.tsv");
    REQUIRE(CmdScore(s) == 0);

    auto a = LoadScores(fx.tmp.Path("plda_scores.tsv"));
    auto b = LoadScores(fx.tmp.Path("dca_scores.tsv"));
    REQUIRE(a.size() == b.size());
    double max_diff = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
      max_diff = std::max(max_diff, std::abs(a[i].llr - b[i].llr));
    CHECK(max_diff < 1e-10);
  }

  SUBCASE("training with seeds keeps the best-dev model") {
    TrainArgs t = fx.BaseTrain(fx.tmp.Path("seeds"), "d-plda");
    t.seeds = 3;
    REQUIRE(CmdTrain(t) == 0);
    std::string sm = Slurp(fx.tmp.Path("seeds") + "/seed_metrics.tsv");
    // Header plus three rows.
    CHECK(std::count(sm.begin(), sm.end(), '\n') == 4);
  }

  SUBCASE("duration-dependent model without metadata is a validation error") {
    TrainArgs t = fx.BaseTrain(fx.tmp.Path("dd"), "d-plda-dd");
    REQUIRE(CmdTrain(t) == 0);
    ScoreArgs s;
    s.model = fx.tmp.Path("dd") + "/model.dcam";
    s.emb = fx.tmp.Path("dev") + "/embeddings.dcae";
    s.keys = fx.key_path;
    s.out = fx.tmp.Path("dd_scores.tsv");
    CHECK(CmdScore(s) == 2);  // no --meta
    s.meta = fx.tmp.Path("dev") + "/metadata.tsv";
    CHECK(CmdScore(s) == 0);
  }

  SUBCASE("unknown id in the key file is a validation error") {
    TrainArgs t = fx.BaseTrain(fx.tmp.Path("unk"), "plda");
    REQUIRE(CmdTrain(t) == 0);
    std::string bad_keys = fx.tmp.Path("bad_keys.tsv");
    {
      std::ofstream out(bad_keys);
      out << "no_such_id\talso_missing\timp\n";
    }
    ScoreArgs s;
    s.model = fx.tmp.Path("unk") + "/model.dcam";
    s.emb = fx.tmp.Path("dev") + "/embeddings.dcae";
    s.keys = bad_keys;
    s.out = fx.tmp.Path("bad_scores.tsv");
    CHECK(CmdScore(s) == 2);
  }
}

TEST_CASE("training twice with one seed is byte identical") {
  Fixture fx;
  TrainArgs t1 = fx.BaseTrain(fx.tmp.Path("d1"), "dca-plda");
  TrainArgs t2 = fx.BaseTrain(fx.tmp.Path("d2"), "dca-plda");
  t1.seed = 4;
  t2.seed = 4;
  REQUIRE(CmdTrain(t1) == 0);
  REQUIRE(CmdTrain(t2) == 0);
  CHECK(Slurp(fx.tmp.Path("d1") + "/model.dcam") ==
        Slurp(fx.tmp.Path("d2") + "/model.dcam"));
  CHECK(Slurp(fx.tmp.Path("d1") + "/train_log.tsv") ==
        Slurp(fx.tmp.Path("d2") + "/train_log.tsv"));
}

TEST_CASE("missing metadata column surfaces as exit 2 naming the column") {
  Fixture fx;
  std::string bad_meta = fx.tmp.Path("bad_meta.tsv");
  {
    std::ofstream out(bad_meta);
    out << "sample_id\tspeaker_id\tsession_id\tduration_s\n";  // no domain_id
    out << "x\ts\tk\t10\n";
  }
  TrainArgs t = fx.BaseTrain(fx.tmp.Path("badmeta"), "plda");
  t.train_meta = bad_meta;
  CHECK(CmdTrain(t) == 2);
}

TEST_CASE("eval of all-zero LLRs reports one bit") {
  TempDir tmp("evalzero");
  std::string keys = tmp.Path("k.tsv");
  std::string scores = tmp.Path("s.tsv");
  {
    std::ofstream k(keys);
    std::ofstream s(scores);
    for (int i = 0; i < 10; ++i) {
      std::string e = "e" + std::to_string(i), t = "t" + std::to_string(i);
      k << e << '\t' << t << '\t' << (i < 5 ? "tgt" : "imp") << '\n';
      s << e << '\t' << t << "\t0\n";
    }
  }
  EvalArgs e;
  e.scores = {scores};
  e.keys = {keys};
  e.out_tsv = tmp.Path("report.tsv");
  REQUIRE(CmdEval(e) == 0);
  std::string report = Slurp(tmp.Path("report.tsv"));
  // Second line, fourth column is cllr_p5_act.
  std::istringstream iss(report);
  std::string header, row;
  std::getline(iss, header);
  std::getline(iss, row);
  std::vector<std::string> cols;
  std::stringstream rs(row);
  std::string col;
  while (std::getline(rs, col, '\t')) cols.push_back(col);
  REQUIRE(cols.size() >= 4);
  CHECK(std::stod(cols[3]) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("eval pairs multiple sets and appends an average row") {
  TempDir tmp("evalavg");
  for (int set = 0; set < 2; ++set) {
    std::ofstream k(tmp.Path("k" + std::to_string(set) + ".tsv"));
    std::ofstream s(tmp.Path("s" + std::to_string(set) + ".tsv"));
    for (int i = 0; i < 20; ++i) {
      std::string e = "e" + std::to_string(i), t = "t" + std::to_string(i);
      bool tgt = i % 2 == 0;
      k << e << '\t' << t << '\t' << (tgt ? "tgt" : "imp") << '\n';
      s << e << '\t' << t << '\t' << (tgt ? 2.0 + 0.1 * i : -2.0 - 0.1 * i)
        << '\n';
    }
  }
  EvalArgs e;
  e.scores = {tmp.Path("s0.tsv"), tmp.Path("s1.tsv")};
  e.keys = {tmp.Path("k0.tsv"), tmp.Path("k1.tsv")};
  e.names = {"one", "two"};
  e.out_tsv = tmp.Path("report.tsv");
  REQUIRE(CmdEval(e) == 0);
  std::string report = Slurp(tmp.Path("report.tsv"));
  CHECK(report.find("one\t") != std::string::npos);
  CHECK(report.find("two\t") != std::string::npos);
  CHECK(report.find("average\t") != std::string::npos);
}

TEST_CASE("model file round trip preserves every section") {
  TempDir tmp("model");
  std::mt19937_64 rng(91);
  BackendParams p;
  p.preproc.a_p = testutil::RandomGaussian(rng, 4, 6);
  p.preproc.m_p = testutil::RandomVector(rng, 4);
  p.plda = testutil::RandomPldaModel(rng, 4);
  p.score = ToScoreForm(p.plda);
  p.stage = CalStage::kDurationSideInfo;
  p.global = {1.2, -0.5};
  DurationCal dur;
  dur.kind = DurationFeatureKind::kBin;
  dur.bin_edges = {8, 16, 32};
  dur.alpha = PolyBlock(4);
  dur.beta = PolyBlock(4);
  dur.alpha.k = 0.5;
  p.dur = dur;
  SideInfoCal side;
  side.a_m = testutil::RandomGaussian(rng, 3, 6);
  side.b_m = testutil::RandomVector(rng, 3);
  side.a_z = testutil::RandomGaussian(rng, 2, 3);
  side.b_z = testutil::RandomVector(rng, 2);
  side.f = SideInfoTransform::kSoftmax;
  side.alpha = PolyBlock(2);
  side.beta = PolyBlock(2);
  p.side = side;
  p.snorm_top = 7;

  SaveModel(tmp.Path("m.dcam"), p, "hello=world");
  LoadedModel loaded = LoadModel(tmp.Path("m.dcam"));
  CHECK(loaded.provenance == "hello=world");
  CHECK((loaded.params.preproc.a_p - p.preproc.a_p).cwiseAbs().maxCoeff() ==
        0.0);
  CHECK((loaded.params.score.lambda - p.score.lambda).cwiseAbs().maxCoeff() ==
        0.0);
  CHECK(loaded.params.stage == CalStage::kDurationSideInfo);
  CHECK(loaded.params.snorm_top == 7);
  REQUIRE(loaded.params.dur.has_value());
  CHECK(loaded.params.dur->kind == DurationFeatureKind::kBin);
  CHECK(loaded.params.dur->bin_edges == dur.bin_edges);
  REQUIRE(loaded.params.side.has_value());
  CHECK(loaded.params.side->f == SideInfoTransform::kSoftmax);
  CHECK((loaded.params.side->a_z - side.a_z).cwiseAbs().maxCoeff() == 0.0);

  // Saving the loaded model reproduces the file exactly.
  SaveModel(tmp.Path("m2.dcam"), loaded.params, loaded.provenance);
  CHECK(Slurp(tmp.Path("m.dcam")) == Slurp(tmp.Path("m2.dcam")));
}

TEST_CASE("cohort-normalized scoring matches a manual computation") {
  Fixture fx;
  TrainArgs t = fx.BaseTrain(fx.tmp.Path("sn"), "plda");
  // Cohort: training samples of the first 8 ids.
  auto train_metas = LoadMetadataTsv(fx.corpus_dir + "/metadata.tsv");
  std::string cohort = fx.tmp.Path("cohort.txt");
  {
    std::ofstream out(cohort);
    for (int i = 0; i < 8; ++i) out << train_metas[i].sample_id << "\n";
  }
  t.snorm_cohort = cohort;
  t.snorm_top = 4;
  REQUIRE(CmdTrain(t) == 0);

  // Cohort ids must also resolve in the scored table, so score the training
  // embeddings against themselves here.
  std::string keys = fx.tmp.Path("self_keys.tsv");
  {
    std::ofstream out(keys);
    out << train_metas[10].sample_id << '\t' << train_metas[20].sample_id
        << "\timp\n";
  }
  ScoreArgs s;
  s.model = fx.tmp.Path("sn") + "/model.dcam";
  s.emb = fx.corpus_dir + "/embeddings.dcae";
  s.keys = keys;
  s.out = fx.tmp.Path("sn_scores.tsv");
  s.snorm_cohort = cohort;
  REQUIRE(CmdScore(s) == 0);
  auto rows = LoadScores(fx.tmp.Path("sn_scores.tsv"));
  REQUIRE(rows.size() == 1);

  // Manual recomputation.
  LoadedModel model = LoadModel(fx.tmp.Path("sn") + "/model.dcam");
  CHECK(model.params.snorm_top == 4);
  EmbeddingTable table = LoadEmbeddings(fx.corpus_dir + "/embeddings.dcae");
  auto wrow = [&](const std::string &id) {
    return ApplyPreproc(model.params.preproc,
                        table.x.row(table.RowOf(id)).transpose());
  };
  Vector w1 = wrow(train_metas[10].sample_id);
  Vector w2 = wrow(train_metas[20].sample_id);
  Matrix wc(8, w1.size());
  for (int i = 0; i < 8; ++i)
    wc.row(i) = wrow(train_metas[i].sample_id).transpose();
  double raw = ScorePair(model.params.score, w1, w2);
  // Full per-pair cohort scores via the reference scorer.
  Matrix ce = ScorePairsRef(model.params.score,
                            Matrix(w1.transpose()), wc);
  Matrix ct = ScorePairsRef(model.params.score,
                            Matrix(w2.transpose()), wc);
  double zs = AsNorm1(raw, ce.row(0).transpose(), ct.row(0).transpose(), 4);
  double expect =
      model.params.global.alpha * zs + model.params.global.beta;
  CHECK(rows[0].llr == doctest::Approx(expect).epsilon(1e-9));
}

TEST_CASE("score matrix export mode") {
  Fixture fx;
  TrainArgs t = fx.BaseTrain(fx.tmp.Path("mx"), "plda");
  REQUIRE(CmdTrain(t) == 0);
  auto metas = LoadMetadataTsv(fx.tmp.Path("dev") + "/metadata.tsv");
  std::string rows_path = fx.tmp.Path("rows.txt"),
              cols_path = fx.tmp.Path("cols.txt");
  {
    std::ofstream r(rows_path), c(cols_path);
    for (int i = 0; i < 5; ++i) r << metas[i].sample_id << "\n";
    for (int i = 5; i < 12; ++i) c << metas[i].sample_id << "\n";
  }
  ScoreArgs s;
  s.model = fx.tmp.Path("mx") + "/model.dcam";
  s.emb = fx.tmp.Path("dev") + "/embeddings.dcae";
  s.enroll_list = rows_path;
  s.test_list = cols_path;
  s.matrix_out = fx.tmp.Path("matrix.dcas");
  REQUIRE(CmdScore(s) == 0);
  ScoreMatrix m = LoadScoreMatrix(fx.tmp.Path("matrix.dcas"));
  CHECK(m.row_ids.size() == 5);
  CHECK(m.col_ids.size() == 7);
  CHECK(m.scores.rows() == 5);
  CHECK(m.scores.cols() == 7);
}
