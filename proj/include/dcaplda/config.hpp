// include/dcaplda/config.hpp

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

#ifndef DCAPLDA_CONFIG_HPP_
#define DCAPLDA_CONFIG_HPP_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "dcaplda/common.hpp"

namespace dcaplda {

// Flat "section.key = value" text configuration. Every key has a registered
// default; unknown keys are rejected. The fully resolved config (all keys,
// sorted) is written next to every run's outputs.
class RunConfig {
 public:
  RunConfig();  // defaults

  void LoadFile(const std::string &path);
  void Set(const std::string &key, const std::string &value);
  // Parses "key=value".
  void SetFromArg(const std::string &arg);

  const std::string &GetString(const std::string &key) const;
  double GetDouble(const std::string &key) const;
  long long GetInt(const std::string &key) const;
  bool GetBool(const std::string &key) const;
  std::vector<double> GetDoubleList(const std::string &key) const;
  std::uint64_t GetSeed(const std::string &key) const;

  std::string Resolved() const;
  std::uint64_t Hash() const;
  void WriteResolved(const std::string &path) const;

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace dcaplda

#endif  // DCAPLDA_CONFIG_HPP_
