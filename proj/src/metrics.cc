// src/metrics.cc

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

#include "stepscore/metrics.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace stepscore {

// ---------------------------------------------------------------------------
// interval arithmetic
// ---------------------------------------------------------------------------

std::vector<Interval> normalize_intervals(std::vector<Interval> v) {
  std::erase_if(v, [](const Interval &i) { return i.second <= i.first; });
  std::sort(v.begin(), v.end());
  std::vector<Interval> out;
  for (const auto &iv : v) {
    if (!out.empty() && iv.first <= out.back().second)
      out.back().second = std::max(out.back().second, iv.second);
    else
      out.push_back(iv);
  }
  return out;
}

std::vector<Interval> intersect_intervals(const std::vector<Interval> &a,
                                          const std::vector<Interval> &b) {
  std::vector<Interval> out;
  size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    const double lo = std::max(a[i].first, b[j].first);
    const double hi = std::min(a[i].second, b[j].second);
    if (hi > lo) out.emplace_back(lo, hi);
    if (a[i].second < b[j].second)
      ++i;
    else
      ++j;
  }
  return out;
}

std::vector<Interval> subtract_intervals(const std::vector<Interval> &a,
                                         const std::vector<Interval> &b) {
  std::vector<Interval> out;
  size_t j = 0;
  for (const auto &iv : a) {
    double cur = iv.first;
    while (j < b.size() && b[j].second <= cur) ++j;
    size_t k = j;
    while (k < b.size() && b[k].first < iv.second) {
      if (b[k].first > cur) out.emplace_back(cur, b[k].first);
      cur = std::max(cur, b[k].second);
      if (cur >= iv.second) break;
      ++k;
    }
    if (cur < iv.second) out.emplace_back(cur, iv.second);
  }
  return out;
}

double total_length(const std::vector<Interval> &v) {
  double s = 0.0;
  for (const auto &iv : v) s += iv.second - iv.first;
  return s;
}

namespace {

std::vector<Interval> to_intervals(const std::vector<LabeledSegment> &segs,
                                   double clip_lo, double clip_hi) {
  std::vector<Interval> v;
  v.reserve(segs.size());
  for (const auto &s : segs)
    v.emplace_back(std::max(s.start, clip_lo), std::min(s.end, clip_hi));
  return normalize_intervals(std::move(v));
}

}  // namespace

SadErrorStats sad_error_stats(const std::vector<LabeledSegment> &ref_speech,
                              const std::vector<LabeledSegment> &hyp_speech,
                              double file_dur) {
  if (file_dur <= 0.0) Throw(ErrorCode::kInvalidArgument, "file_dur must be > 0");
  const auto ref = to_intervals(ref_speech, 0.0, file_dur);
  const auto hyp = to_intervals(hyp_speech, 0.0, file_dur);

  SadErrorStats st;
  st.ref_speech_dur = total_length(ref);
  st.ref_nonspeech_dur = file_dur - st.ref_speech_dur;
  if (st.ref_speech_dur <= 0.0)
    Throw(ErrorCode::kUndefinedRate, "reference has no speech");
  if (st.ref_nonspeech_dur <= 0.0)
    Throw(ErrorCode::kUndefinedRate, "reference has no non-speech");

  st.p_fn = total_length(subtract_intervals(ref, hyp)) / st.ref_speech_dur;
  st.p_fp = total_length(subtract_intervals(hyp, ref)) / st.ref_nonspeech_dur;
  return st;
}

double dcf(double p_fn, double p_fp) { return 0.75 * p_fn + 0.25 * p_fp; }
double dcf(const SadErrorStats &s) { return dcf(s.p_fn, s.p_fp); }
double dcf_inv(double p_fn, double p_fp) { return 0.25 * p_fn + 0.75 * p_fp; }
double dcf_inv(const SadErrorStats &s) { return dcf_inv(s.p_fn, s.p_fp); }

// ---------------------------------------------------------------------------
// DER
// ---------------------------------------------------------------------------

namespace {

// Maximum-weight one-to-one assignment (Kuhn-Munkres on the negated matrix).
// w is n x m; returns the optimal total weight.
double max_assignment(const std::vector<std::vector<double>> &w) {
  const int n = static_cast<int>(w.size());
  const int m = n == 0 ? 0 : static_cast<int>(w[0].size());
  const int dim = std::max(n, m);
  if (dim == 0) return 0.0;
  const double kInf = std::numeric_limits<double>::infinity();

  // a[i][j] = cost, padded square, 1-indexed.
  std::vector<std::vector<double>> a(dim + 1, std::vector<double>(dim + 1, 0.0));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j) a[i + 1][j + 1] = -w[i][j];

  std::vector<double> u(dim + 1, 0.0), v(dim + 1, 0.0);
  std::vector<int> p(dim + 1, 0), way(dim + 1, 0);
  for (int i = 1; i <= dim; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(dim + 1, kInf);
    std::vector<char> used(dim + 1, false);
    do {
      used[j0] = true;
      int i0 = p[j0], j1 = 0;
      double delta = kInf;
      for (int j = 1; j <= dim; ++j) {
        if (used[j]) continue;
        const double cur = a[i0][j] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= dim; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }

  double total = 0.0;
  for (int j = 1; j <= dim; ++j)
    if (p[j] >= 1 && p[j] <= n && j <= m) total += w[p[j] - 1][j - 1];
  return total;
}

// First frame whose midpoint (f + 0.5) * frame falls at or after t.
int first_frame(double t, double frame) {
  return std::max(0, static_cast<int>(std::ceil(t / frame - 0.5 - 1e-9)));
}

}  // namespace

DerBreakdown der(const std::vector<LabeledSegment> &ref,
                 const std::vector<LabeledSegment> &hyp, double collar,
                 double frame) {
  if (frame <= 0.0) Throw(ErrorCode::kInvalidArgument, "frame quantum must be > 0");

  // Index speakers; merge each speaker's intervals.
  std::map<std::string, std::vector<Interval>> ref_by, hyp_by;
  double t_max = 0.0;
  for (const auto &s : ref) {
    if (s.end > s.start) ref_by[s.label].emplace_back(s.start, s.end);
    t_max = std::max(t_max, s.end);
  }
  for (const auto &s : hyp) {
    if (s.end > s.start) hyp_by[s.label].emplace_back(s.start, s.end);
    t_max = std::max(t_max, s.end);
  }
  if (ref_by.empty()) Throw(ErrorCode::kUndefinedRate, "reference has no speech");

  const int nframes = first_frame(t_max, frame) + 1;

  // Per-frame active speaker lists via difference counts.
  const int nr = static_cast<int>(ref_by.size());
  const int nh = static_cast<int>(hyp_by.size());
  std::vector<std::vector<std::pair<int, int>>> ref_spans(nr), hyp_spans(nh);
  {
    int idx = 0;
    for (auto &[name, ivs] : ref_by) {
      for (const auto &iv : normalize_intervals(ivs))
        ref_spans[idx].emplace_back(first_frame(iv.first, frame),
                                    first_frame(iv.second, frame));
      ++idx;
    }
    idx = 0;
    for (auto &[name, ivs] : hyp_by) {
      for (const auto &iv : normalize_intervals(ivs))
        hyp_spans[idx].emplace_back(first_frame(iv.first, frame),
                                    first_frame(iv.second, frame));
      ++idx;
    }
  }

  // Collar mask around every reference boundary.
  std::vector<char> scored(nframes, 1);
  if (collar > 0.0) {
    for (const auto &[name, ivs] : ref_by) {
      for (const auto &iv : normalize_intervals(ivs)) {
        for (double b : {iv.first, iv.second}) {
          const int f0 = first_frame(b - collar, frame);
          // Last frame with midpoint <= b + collar (inclusive end of mask).
          const int f1 = static_cast<int>(
              std::floor((b + collar) / frame - 0.5 + 1e-9));
          for (int f = f0; f <= std::min(f1, nframes - 1); ++f) scored[f] = 0;
        }
      }
    }
  }

  std::vector<std::vector<char>> ref_act(nr, std::vector<char>(nframes, 0));
  std::vector<std::vector<char>> hyp_act(nh, std::vector<char>(nframes, 0));
  for (int r = 0; r < nr; ++r)
    for (auto [f0, f1] : ref_spans[r])
      for (int f = f0; f < std::min(f1, nframes); ++f) ref_act[r][f] = 1;
  for (int h = 0; h < nh; ++h)
    for (auto [f0, f1] : hyp_spans[h])
      for (int f = f0; f < std::min(f1, nframes); ++f) hyp_act[h][f] = 1;

  std::vector<std::vector<double>> overlap(nr, std::vector<double>(nh, 0.0));
  int64_t miss_f = 0, fa_f = 0, minsum_f = 0, ref_f = 0;
  std::vector<int> active_r, active_h;
  for (int f = 0; f < nframes; ++f) {
    if (!scored[f]) continue;
    active_r.clear();
    active_h.clear();
    for (int r = 0; r < nr; ++r)
      if (ref_act[r][f]) active_r.push_back(r);
    for (int h = 0; h < nh; ++h)
      if (hyp_act[h][f]) active_h.push_back(h);
    const int a = static_cast<int>(active_r.size());
    const int b = static_cast<int>(active_h.size());
    miss_f += std::max(0, a - b);
    fa_f += std::max(0, b - a);
    minsum_f += std::min(a, b);
    ref_f += a;
    for (int r : active_r)
      for (int h : active_h) overlap[r][h] += 1.0;
  }
  if (ref_f == 0) Throw(ErrorCode::kUndefinedRate, "no scored reference speech");

  const double matched = max_assignment(overlap);

  DerBreakdown out;
  out.missed = static_cast<double>(miss_f) * frame;
  out.false_alarm = static_cast<double>(fa_f) * frame;
  out.confusion = (static_cast<double>(minsum_f) - matched) * frame;
  out.ref_speech = static_cast<double>(ref_f) * frame;
  out.der = (out.missed + out.false_alarm + out.confusion) / out.ref_speech;
  return out;
}

// ---------------------------------------------------------------------------
// WER
// ---------------------------------------------------------------------------

std::vector<std::string> tokenize(const std::string &line) {
  std::vector<std::string> toks;
  std::istringstream is(line);
  std::string t;
  while (is >> t) {
    for (auto &c : t) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    toks.push_back(t);
  }
  return toks;
}

namespace {

bool tok_eq(const std::string &a, const std::string &b) {
  if (a.size() != b.size()) return false;
  for (size_t i = 0; i < a.size(); ++i)
    if (std::tolower(static_cast<unsigned char>(a[i])) !=
        std::tolower(static_cast<unsigned char>(b[i])))
      return false;
  return true;
}

}  // namespace

WerBreakdown wer(const std::vector<std::string> &ref,
                 const std::vector<std::string> &hyp) {
  const int n = static_cast<int>(ref.size());
  const int m = static_cast<int>(hyp.size());
  if (n == 0) Throw(ErrorCode::kUndefinedRate, "empty reference");

  std::vector<std::vector<int>> d(n + 1, std::vector<int>(m + 1, 0));
  for (int i = 0; i <= n; ++i) d[i][0] = i;
  for (int j = 0; j <= m; ++j) d[0][j] = j;
  for (int i = 1; i <= n; ++i)
    for (int j = 1; j <= m; ++j) {
      const int sub = d[i - 1][j - 1] + (tok_eq(ref[i - 1], hyp[j - 1]) ? 0 : 1);
      d[i][j] = std::min({sub, d[i - 1][j] + 1, d[i][j - 1] + 1});
    }

  WerBreakdown out;
  out.ref_words = n;
  int i = n, j = m;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0) {
      const bool eq = tok_eq(ref[i - 1], hyp[j - 1]);
      if (d[i][j] == d[i - 1][j - 1] + (eq ? 0 : 1)) {
        if (!eq) ++out.substitutions;
        --i;
        --j;
        continue;
      }
    }
    if (i > 0 && d[i][j] == d[i - 1][j] + 1) {
      ++out.deletions;
      --i;
    } else {
      ++out.insertions;
      --j;
    }
  }
  out.wer = static_cast<double>(out.substitutions + out.insertions +
                                out.deletions) / n;
  return out;
}

// ---------------------------------------------------------------------------
// speaker counts
// ---------------------------------------------------------------------------

SpeakerCountReport speaker_count_report(const SegmentTable &refs,
                                        const SegmentTable &hyps) {
  SpeakerCountReport rep;
  double abs_err = 0.0;
  for (const auto &[rec, segs] : refs) {
    auto it = hyps.find(rec);
    if (it == hyps.end())
      Throw(ErrorCode::kCoverage, "recording missing in hypothesis: " + rec);
    auto count = [](const std::vector<LabeledSegment> &v) {
      std::set<std::string> s;
      for (const auto &seg : v) s.insert(seg.label);
      return static_cast<int>(s.size());
    };
    SpeakerCountRow row{rec, count(segs), count(it->second)};
    abs_err += std::abs(row.ref_speakers - row.hyp_speakers);
    rep.rows.push_back(std::move(row));
  }
  rep.mae = refs.empty() ? 0.0 : abs_err / static_cast<double>(refs.size());
  return rep;
}

// ---------------------------------------------------------------------------
// file formats
// ---------------------------------------------------------------------------

SegmentTable read_rttm(const std::string &path) {
  std::ifstream f(path);
  if (!f) Throw(ErrorCode::kIo, "cannot open " + path);
  SegmentTable table;
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream is(line);
    std::string type, rec, chan;
    double tbeg, tdur;
    std::string na1, na2, spk;
    if (!(is >> type >> rec >> chan >> tbeg >> tdur >> na1 >> na2 >> spk) ||
        type != "SPEAKER")
      Throw(ErrorCode::kFormat,
            path + ":" + std::to_string(lineno) + ": bad RTTM line");
    table[rec].push_back({tbeg, tbeg + tdur, spk, std::nullopt});
  }
  for (auto &[rec, segs] : table)
    std::stable_sort(segs.begin(), segs.end(),
                     [](const auto &a, const auto &b) { return a.start < b.start; });
  return table;
}

void write_rttm(const std::string &path, const SegmentTable &table) {
  std::ofstream f(path);
  if (!f) Throw(ErrorCode::kIo, "cannot write " + path);
  char buf[256];
  for (const auto &[rec, segs] : table) {
    auto sorted = segs;
    std::stable_sort(sorted.begin(), sorted.end(),
                     [](const auto &a, const auto &b) { return a.start < b.start; });
    for (const auto &s : sorted) {
      std::snprintf(buf, sizeof(buf),
                    "SPEAKER %s 1 %.2f %.2f <NA> <NA> %s <NA> <NA>\n",
                    rec.c_str(), s.start, s.end - s.start, s.label.c_str());
      f << buf;
    }
  }
  if (!f) Throw(ErrorCode::kIo, "short write to " + path);
}

std::map<std::string, std::string> read_transcripts(const std::string &path) {
  std::ifstream f(path);
  if (!f) Throw(ErrorCode::kIo, "cannot open " + path);
  std::map<std::string, std::string> out;
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream is(line);
    std::string utt;
    if (!(is >> utt))
      Throw(ErrorCode::kFormat,
            path + ":" + std::to_string(lineno) + ": bad transcript line");
    std::string rest;
    std::getline(is, rest);
    if (!rest.empty() && rest[0] == ' ') rest.erase(0, 1);
    out[utt] = rest;
  }
  return out;
}

void write_transcripts(const std::string &path,
                       const std::map<std::string, std::string> &table) {
  std::ofstream f(path);
  if (!f) Throw(ErrorCode::kIo, "cannot write " + path);
  for (const auto &[utt, text] : table) f << utt << " " << text << "\n";
  if (!f) Throw(ErrorCode::kIo, "short write to " + path);
}

}  // namespace stepscore
