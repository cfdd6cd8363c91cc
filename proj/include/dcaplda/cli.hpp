// include/dcaplda/cli.hpp

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

#ifndef DCAPLDA_CLI_HPP_
#define DCAPLDA_CLI_HPP_

#include <string>
#include <vector>

namespace dcaplda {

// Command implementations return process exit codes:
//   0 ok, 2 validation failure, 3 numerical failure, 1 anything else.

struct TrainArgs {
  std::string config_path;
  std::vector<std::string> sets;  // key=value overrides
  std::string train_emb;
  std::string train_meta;
  // name=emb.dcae,meta.tsv,key.tsv
  std::vector<std::string> dev_specs;
  std::string out_dir;
  std::string arch;  // optional override of train.arch
  int seeds = -1;    // optional override of train.seeds
  long long seed = -1;
  std::string snorm_cohort;  // cohort id list; plda architecture only
  int snorm_top = 0;         // 0 = full cohort (plain S-Norm)
};
int CmdTrain(const TrainArgs &args);

struct ScoreArgs {
  std::string model;
  std::string emb;
  std::string meta;  // required for duration-dependent stages
  std::string keys;
  std::string out;
  std::string config_path;
  std::vector<std::string> sets;
  // Full-matrix mode: score every enroll x test pair into a DCAS container.
  std::string enroll_list;
  std::string test_list;
  std::string matrix_out;
  std::string snorm_cohort;
  int snorm_top = 0;
};
int CmdScore(const ScoreArgs &args);

struct EvalArgs {
  std::vector<std::string> scores;
  std::vector<std::string> keys;   // paired with scores by position
  std::vector<std::string> names;  // optional set names
  std::string out_tsv;
  std::string config_path;
  std::vector<std::string> sets;
  // Cllr is also reported at these priors when they extend the standard
  // {0.5, 0.01} pair.
  std::vector<double> priors;
};
int CmdEval(const EvalArgs &args);

struct SynthArgs {
  std::string config_path;
  std::vector<std::string> sets;
  std::string out_dir;
};
int CmdSynth(const SynthArgs &args);

struct InfoArgs {
  std::string config_path;
  std::vector<std::string> sets;
  std::string arch = "all";
};
int CmdInfo(const InfoArgs &args);

int RunCli(int argc, char **argv);

}  // namespace dcaplda

#endif  // DCAPLDA_CLI_HPP_
