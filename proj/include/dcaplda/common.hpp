// include/dcaplda/common.hpp

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

#ifndef DCAPLDA_COMMON_HPP_
#define DCAPLDA_COMMON_HPP_

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace dcaplda {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class ErrorCode {
  kMalformedFile,
  kNonFiniteValue,
  kDuplicateId,
  kUnknownId,
  kMissingColumn,
  kInvalidMetadata,
  kInsufficientSpeakers,
  kDimensionMismatch,
  kDegenerateEmbedding,
  kDegenerateCohort,
  kSingularMatrix,
  kNonSpdUpdate,
  kNoValidTargets,
  kNoValidImpostors,
  kInvalidConfig,
  kInvalidArgument,
  kIoError,
};

const char *ErrorCodeName(ErrorCode code);

// Base error; CLI maps ValidationError to exit 2 and NumericalError to exit 3.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string &msg)
      : std::runtime_error(std::string(ErrorCodeName(code)) + ": " + msg),
        code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

void Warn(const std::string &msg);

inline double Sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

// log(1 + e^x) without overflow.
inline double Softplus(double x) {
  if (x > 35.0) return x;
  if (x < -35.0) return std::exp(x);
  return std::log1p(std::exp(x));
}

// log(sigmoid(x))
inline double LogSigmoid(double x) { return -Softplus(-x); }

inline Matrix Symmetrize(const Matrix &a) { return 0.5 * (a + a.transpose()); }

std::uint64_t Fnv1a(const void *data, std::size_t n,
                    std::uint64_t seed = 1469598103934665603ull);
std::uint64_t Fnv1a(const std::string &s,
                    std::uint64_t seed = 1469598103934665603ull);
std::uint64_t HashFile(const std::string &path);

// Fixed chunk size for parallel reductions: partial sums are produced per
// chunk and combined in chunk order, so results do not depend on the number
// of threads.
inline constexpr std::ptrdiff_t kReductionChunk = 4096;

}  // namespace dcaplda

#endif  // DCAPLDA_COMMON_HPP_
