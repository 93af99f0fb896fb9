// include/stepscore/sst-select.h

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

#ifndef STEPSCORE_SST_SELECT_H_
#define STEPSCORE_SST_SELECT_H_

#include <string>
#include <utility>
#include <vector>

#include "stepscore/common.h"

namespace stepscore {

// An automatically transcribed segment with a confidence score.
struct HypSegment {
  std::string recording_id;
  double start = 0.0;
  double end = 0.0;
  bool is_speech = true;
  double confidence = 1.0;
  std::string transcript;  // optional, whitespace tokens

  double duration() const { return end - start; }
};

enum class RejectReason { kNone, kTooShort, kTooLong, kLowConfidence };

struct SelectionReport {
  double selected_speech_hours = 0.0;
  double selected_nonspeech_hours = 0.0;
  int64_t num_selected = 0;
  int64_t num_too_short = 0;
  int64_t num_too_long = 0;
  int64_t num_low_confidence = 0;
  double rejected_hours = 0.0;
};

// Keeps segments with min_dur <= duration <= max_dur (inclusive bounds) and
// confidence >= min_conf. Rejection reasons are assigned first-match:
// too-short, too-long, then low-confidence.
std::pair<std::vector<HypSegment>, SelectionReport> select_segments(
    const std::vector<HypSegment> &hyps, double min_dur, double max_dur,
    double min_conf);

// Duration totals by kind, in hours.
SelectionReport duration_report(const std::vector<HypSegment> &segments);

// Confidence-ranked truncation to a target-hour budget: segments are taken in
// descending confidence (input order breaks ties) while the running total is
// below the budget.
std::vector<HypSegment> select_budget(const std::vector<HypSegment> &segments,
                                      double target_hours);

// Manifest lines "rec start end weight source_tag" (TSV) covering the
// supervised set then the selected set.
std::vector<std::string> weighting_manifest(
    const std::vector<HypSegment> &supervised,
    const std::vector<HypSegment> &selected, double weight_sup,
    double weight_unsup);

// TSV: "rec start end kind confidence [transcript...]".
std::vector<HypSegment> read_hyp_tsv(const std::string &path);
void write_hyp_tsv(const std::string &path,
                   const std::vector<HypSegment> &segments);
void write_manifest(const std::string &path,
                    const std::vector<std::string> &lines);

}  // namespace stepscore

#endif  // STEPSCORE_SST_SELECT_H_
