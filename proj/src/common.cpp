// src/common.cpp

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

#include "dcaplda/common.hpp"

#include <fstream>
#include <iostream>
#include <vector>

namespace dcaplda {

const char *ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kMalformedFile: return "MalformedFile";
    case ErrorCode::kNonFiniteValue: return "NonFiniteValue";
    case ErrorCode::kDuplicateId: return "DuplicateId";
    case ErrorCode::kUnknownId: return "UnknownId";
    case ErrorCode::kMissingColumn: return "MissingColumn";
    case ErrorCode::kInvalidMetadata: return "InvalidMetadata";
    case ErrorCode::kInsufficientSpeakers: return "InsufficientSpeakers";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kDegenerateEmbedding: return "DegenerateEmbedding";
    case ErrorCode::kDegenerateCohort: return "DegenerateCohort";
    case ErrorCode::kSingularMatrix: return "SingularMatrix";
    case ErrorCode::kNonSpdUpdate: return "NonSpdUpdate";
    case ErrorCode::kNoValidTargets: return "NoValidTargets";
    case ErrorCode::kNoValidImpostors: return "NoValidImpostors";
    case ErrorCode::kInvalidConfig: return "InvalidConfig";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kIoError: return "IoError";
  }
  return "UnknownError";
}

void Warn(const std::string &msg) { std::cerr << "WARNING: " << msg << "\n"; }

std::uint64_t Fnv1a(const void *data, std::size_t n, std::uint64_t seed) {
  const unsigned char *p = static_cast<const unsigned char *>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

std::uint64_t Fnv1a(const std::string &s, std::uint64_t seed) {
  return Fnv1a(s.data(), s.size(), seed);
}

std::uint64_t HashFile(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError(ErrorCode::kIoError, "cannot open " + path);
  std::vector<char> buf(1 << 16);
  std::uint64_t h = 1469598103934665603ull;
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    h = Fnv1a(buf.data(), static_cast<std::size_t>(in.gcount()), h);
  }
  return h;
}

}  // namespace dcaplda
