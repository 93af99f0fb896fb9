// include/stepscore/common.h

// Copyright 2024  The stepscore authors

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

#ifndef STEPSCORE_COMMON_H_
#define STEPSCORE_COMMON_H_

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace stepscore {

enum class ErrorCode {
  kInvalidArgument = 1,
  kIo,
  kFormat,            // malformed file contents
  kUnsupportedFormat, // well-formed but not a variant we handle
  kShape,             // dimension mismatch
  kDegenerateData,    // e.g. single-class training set, single-speaker PLDA
  kRank,              // not enough data / zero variance for a decomposition
  kNumerical,         // singular matrix, non-finite values
  kUndefinedRate,     // denominator of a rate is zero
  kCoverage,          // a recording required by one input is missing in another
  kAlignment,         // key sets that must match do not
  kEmptyInput,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string &msg)
      : std::runtime_error(msg), code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void Throw(ErrorCode code, const std::string &msg) {
  throw Error(code, msg);
}

// A time interval with a label: "speech" / "non-speech" for SAD, a speaker id
// for diarization. Score is the mean frame probability where applicable.
struct LabeledSegment {
  double start = 0.0;
  double end = 0.0;
  std::string label;
  std::optional<double> score;

  double duration() const { return end - start; }
};

// Segments grouped by recording id; the in-memory form of label and RTTM
// files. std::map keeps recordings sorted so writers are deterministic.
using SegmentTable = std::map<std::string, std::vector<LabeledSegment>>;

// Deterministic RNG. mt19937_64 has a pinned algorithm in the standard, but
// <random> distributions do not, so the transforms are spelled out here to
// keep byte-identical outputs across platforms and library versions.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed ? seed : 0x9e3779b97f4a7c15ULL) {}

  uint64_t next_u64() {
    // xorshift64* : small, fast, and fully specified.
    uint64_t x = state_;
    x ^= x >> 12;
    x ^= x << 25;
    x ^= x >> 27;
    state_ = x;
    return x * 0x2545f4914f6cdd1dULL;
  }

  // Uniform in [0, 1).
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n).
  uint64_t uniform_int(uint64_t n) {
    if (n == 0) return 0;
    return next_u64() % n;
  }

  // Standard normal via Box-Muller (no cached spare; deterministic stream).
  double gaussian() {
    double u1 = uniform();
    double u2 = uniform();
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  template <typename T>
  void shuffle(std::vector<T> &v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(uniform_int(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  uint64_t state_;
};

}  // namespace stepscore

#endif  // STEPSCORE_COMMON_H_
