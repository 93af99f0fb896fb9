// include/stepscore/metrics.h

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

#ifndef STEPSCORE_METRICS_H_
#define STEPSCORE_METRICS_H_

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "stepscore/common.h"

namespace stepscore {

// Half-open [start, end) intervals. Exposed for tests and callers that need
// exact duration bookkeeping.
using Interval = std::pair<double, double>;

// Sorts, drops empty intervals, merges overlaps/adjacency.
std::vector<Interval> normalize_intervals(std::vector<Interval> v);
std::vector<Interval> intersect_intervals(const std::vector<Interval> &a,
                                          const std::vector<Interval> &b);
// a \ b; both must be normalized.
std::vector<Interval> subtract_intervals(const std::vector<Interval> &a,
                                         const std::vector<Interval> &b);
double total_length(const std::vector<Interval> &v);

struct SadErrorStats {
  double p_fn = 0.0;  // missed speech / reference speech
  double p_fp = 0.0;  // false alarm / reference non-speech
  double ref_speech_dur = 0.0;
  double ref_nonspeech_dur = 0.0;
};

// Exact interval arithmetic over [0, file_dur]. Throws kUndefinedRate when the
// reference has no speech or no non-speech.
SadErrorStats sad_error_stats(const std::vector<LabeledSegment> &ref_speech,
                              const std::vector<LabeledSegment> &hyp_speech,
                              double file_dur);

// 0.75 * p_fn + 0.25 * p_fp
double dcf(const SadErrorStats &s);
double dcf(double p_fn, double p_fp);
// 0.25 * p_fn + 0.75 * p_fp
double dcf_inv(const SadErrorStats &s);
double dcf_inv(double p_fn, double p_fp);

struct DerBreakdown {
  double missed = 0.0;       // seconds
  double false_alarm = 0.0;  // seconds
  double confusion = 0.0;    // seconds
  double ref_speech = 0.0;   // seconds (scored)
  double der = 0.0;
};

// Frame-quantized diarization error rate. Time is discretized at `frame`
// seconds; frames whose midpoint falls within +-collar of any reference
// segment boundary are not scored. The reference-to-hypothesis speaker map is
// the exact maximum-overlap one-to-one assignment. Reference segments may
// overlap (different speakers); per-speaker intervals are merged first.
DerBreakdown der(const std::vector<LabeledSegment> &ref,
                 const std::vector<LabeledSegment> &hyp, double collar = 0.25,
                 double frame = 0.01);

struct WerBreakdown {
  int substitutions = 0;
  int insertions = 0;
  int deletions = 0;
  int ref_words = 0;
  double wer = 0.0;
};

// Whitespace tokenization with case folding.
std::vector<std::string> tokenize(const std::string &line);

// Minimal-edit alignment with unit costs; token comparison is
// case-insensitive; ties in the backtrace prefer substitutions.
WerBreakdown wer(const std::vector<std::string> &ref,
                 const std::vector<std::string> &hyp);

struct SpeakerCountRow {
  std::string recording_id;
  int ref_speakers = 0;
  int hyp_speakers = 0;
};

struct SpeakerCountReport {
  std::vector<SpeakerCountRow> rows;  // sorted by recording id
  double mae = 0.0;
};

// Distinct speaker labels per recording plus the mean absolute count error.
// Every reference recording must be present in the hypothesis.
SpeakerCountReport speaker_count_report(const SegmentTable &refs,
                                        const SegmentTable &hyps);

// RTTM: SPEAKER <rec> 1 <tbeg> <tdur> <NA> <NA> <spk> <NA> <NA>,
// times fixed-point with 2 decimals.
SegmentTable read_rttm(const std::string &path);
void write_rttm(const std::string &path, const SegmentTable &table);

// Transcripts: one line per utterance, "<utt_id> <token...>".
std::map<std::string, std::string> read_transcripts(const std::string &path);
void write_transcripts(const std::string &path,
                       const std::map<std::string, std::string> &table);

}  // namespace stepscore

#endif  // STEPSCORE_METRICS_H_
