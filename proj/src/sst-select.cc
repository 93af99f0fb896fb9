// src/sst-select.cc

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

#include "stepscore/sst-select.h"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

namespace stepscore {

namespace {
constexpr double kSecondsPerHour = 3600.0;
}

std::pair<std::vector<HypSegment>, SelectionReport> select_segments(
    const std::vector<HypSegment> &hyps, double min_dur, double max_dur,
    double min_conf) {
  if (!(min_dur < max_dur))
    Throw(ErrorCode::kInvalidArgument, "need min_dur < max_dur");

  std::vector<HypSegment> selected;
  SelectionReport rep;
  for (const auto &h : hyps) {
    const double d = h.duration();
    RejectReason why = RejectReason::kNone;
    if (d < min_dur)
      why = RejectReason::kTooShort;
    else if (d > max_dur)
      why = RejectReason::kTooLong;
    else if (h.confidence < min_conf)
      why = RejectReason::kLowConfidence;

    switch (why) {
      case RejectReason::kNone:
        ++rep.num_selected;
        (h.is_speech ? rep.selected_speech_hours
                     : rep.selected_nonspeech_hours) += d / kSecondsPerHour;
        selected.push_back(h);
        break;
      case RejectReason::kTooShort:
        ++rep.num_too_short;
        rep.rejected_hours += d / kSecondsPerHour;
        break;
      case RejectReason::kTooLong:
        ++rep.num_too_long;
        rep.rejected_hours += d / kSecondsPerHour;
        break;
      case RejectReason::kLowConfidence:
        ++rep.num_low_confidence;
        rep.rejected_hours += d / kSecondsPerHour;
        break;
    }
  }
  return {std::move(selected), rep};
}

SelectionReport duration_report(const std::vector<HypSegment> &segments) {
  SelectionReport rep;
  for (const auto &h : segments) {
    ++rep.num_selected;
    (h.is_speech ? rep.selected_speech_hours : rep.selected_nonspeech_hours) +=
        h.duration() / kSecondsPerHour;
  }
  return rep;
}

std::vector<HypSegment> select_budget(const std::vector<HypSegment> &segments,
                                      double target_hours) {
  std::vector<size_t> order(segments.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return segments[a].confidence > segments[b].confidence;
  });
  std::vector<HypSegment> out;
  double total = 0.0;
  for (size_t i : order) {
    if (total >= target_hours) break;
    out.push_back(segments[i]);
    total += segments[i].duration() / kSecondsPerHour;
  }
  return out;
}

std::vector<std::string> weighting_manifest(
    const std::vector<HypSegment> &supervised,
    const std::vector<HypSegment> &selected, double weight_sup,
    double weight_unsup) {
  if (weight_sup <= 0.0 || weight_unsup <= 0.0)
    Throw(ErrorCode::kInvalidArgument, "weights must be > 0");
  std::vector<std::string> lines;
  char buf[512];
  auto emit = [&](const HypSegment &h, double w, const char *tag) {
    std::snprintf(buf, sizeof(buf), "%s\t%.2f\t%.2f\t%.6g\t%s",
                  h.recording_id.c_str(), h.start, h.end, w, tag);
    lines.emplace_back(buf);
  };
  for (const auto &h : supervised) emit(h, weight_sup, "supervised");
  for (const auto &h : selected) emit(h, weight_unsup, "sst");
  return lines;
}

std::vector<HypSegment> read_hyp_tsv(const std::string &path) {
  std::ifstream f(path);
  if (!f) Throw(ErrorCode::kIo, "cannot open " + path);
  std::vector<HypSegment> out;
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream is(line);
    HypSegment h;
    std::string kind;
    if (!(is >> h.recording_id >> h.start >> h.end >> kind >> h.confidence) ||
        h.end < h.start)
      Throw(ErrorCode::kFormat,
            path + ":" + std::to_string(lineno) + ": bad segment line");
    if (kind == "speech")
      h.is_speech = true;
    else if (kind == "non-speech")
      h.is_speech = false;
    else
      Throw(ErrorCode::kFormat, path + ":" + std::to_string(lineno) +
                                    ": unknown kind '" + kind + "'");
    if (h.confidence < 0.0 || h.confidence > 1.0)
      Throw(ErrorCode::kFormat,
            path + ":" + std::to_string(lineno) + ": confidence outside [0,1]");
    std::string rest;
    std::getline(is, rest);
    const size_t first = rest.find_first_not_of(" \t");
    h.transcript = first == std::string::npos ? "" : rest.substr(first);
    out.push_back(std::move(h));
  }
  return out;
}

void write_hyp_tsv(const std::string &path,
                   const std::vector<HypSegment> &segments) {
  std::ofstream f(path);
  if (!f) Throw(ErrorCode::kIo, "cannot write " + path);
  char buf[256];
  for (const auto &h : segments) {
    std::snprintf(buf, sizeof(buf), "%s\t%.2f\t%.2f\t%s\t%.4f",
                  h.recording_id.c_str(), h.start, h.end,
                  h.is_speech ? "speech" : "non-speech", h.confidence);
    f << buf;
    if (!h.transcript.empty()) f << "\t" << h.transcript;
    f << "\n";
  }
  if (!f) Throw(ErrorCode::kIo, "short write to " + path);
}

void write_manifest(const std::string &path,
                    const std::vector<std::string> &lines) {
  std::ofstream f(path);
  if (!f) Throw(ErrorCode::kIo, "cannot write " + path);
  for (const auto &l : lines) f << l << "\n";
  if (!f) Throw(ErrorCode::kIo, "short write to " + path);
}

}  // namespace stepscore
