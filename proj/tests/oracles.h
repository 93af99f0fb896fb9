// tests/oracles.h

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

// Brute-force reference implementations used only by tests. These stay
// deliberately naive and independent of the library code paths they check.

#ifndef STEPSCORE_TESTS_ORACLES_H_
#define STEPSCORE_TESTS_ORACLES_H_

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "stepscore/common.h"

namespace oracles {

// 1 ms sampled SAD miss / false-alarm rates.
struct SampledSadStats {
  double p_fn = 0.0;
  double p_fp = 0.0;
};

inline SampledSadStats sampled_sad_stats(
    const std::vector<stepscore::LabeledSegment> &ref,
    const std::vector<stepscore::LabeledSegment> &hyp, double file_dur) {
  auto inside = [](const std::vector<stepscore::LabeledSegment> &segs, double t) {
    for (const auto &s : segs)
      if (t >= s.start && t < s.end) return true;
    return false;
  };
  int64_t ref_n = 0, nonref_n = 0, fn = 0, fp = 0;
  const int64_t cells = static_cast<int64_t>(std::llround(file_dur * 1000.0));
  for (int64_t k = 0; k < cells; ++k) {
    const double t = (static_cast<double>(k) + 0.5) / 1000.0;
    const bool r = inside(ref, t);
    const bool h = inside(hyp, t);
    if (r) {
      ++ref_n;
      if (!h) ++fn;
    } else {
      ++nonref_n;
      if (h) ++fp;
    }
  }
  SampledSadStats out;
  out.p_fn = ref_n ? static_cast<double>(fn) / ref_n : 0.0;
  out.p_fp = nonref_n ? static_cast<double>(fp) / nonref_n : 0.0;
  return out;
}

// Frame-sampled DER with exhaustive enumeration of speaker mappings.
// Usable up to ~6 reference speakers.
struct SampledDer {
  double missed = 0.0, false_alarm = 0.0, confusion = 0.0, ref_speech = 0.0;
  double der = 0.0;
};

inline SampledDer sampled_der(const std::vector<stepscore::LabeledSegment> &ref,
                              const std::vector<stepscore::LabeledSegment> &hyp,
                              double collar, double frame) {
  std::set<std::string> ref_names, hyp_names;
  double t_max = 0.0;
  for (const auto &s : ref) {
    ref_names.insert(s.label);
    t_max = std::max(t_max, s.end);
  }
  for (const auto &s : hyp) {
    hyp_names.insert(s.label);
    t_max = std::max(t_max, s.end);
  }
  const std::vector<std::string> rn(ref_names.begin(), ref_names.end());
  const std::vector<std::string> hn(hyp_names.begin(), hyp_names.end());
  const int nr = static_cast<int>(rn.size());
  const int nh = static_cast<int>(hn.size());

  const int64_t frames =
      static_cast<int64_t>(std::ceil(t_max / frame - 0.5 - 1e-9)) + 1;
  std::vector<std::vector<char>> ra(nr, std::vector<char>(frames, 0));
  std::vector<std::vector<char>> ha(nh, std::vector<char>(frames, 0));
  std::vector<char> scored(frames, 1);

  auto mark = [&](std::vector<char> &act, double s, double e) {
    for (int64_t f = 0; f < frames; ++f) {
      const double mid = (static_cast<double>(f) + 0.5) * frame;
      if (mid >= s && mid < e) act[f] = 1;
    }
  };
  for (const auto &s : ref)
    mark(ra[static_cast<size_t>(std::find(rn.begin(), rn.end(), s.label) -
                                rn.begin())],
         s.start, s.end);
  for (const auto &s : hyp)
    mark(ha[static_cast<size_t>(std::find(hn.begin(), hn.end(), s.label) -
                                hn.begin())],
         s.start, s.end);
  if (collar > 0.0) {
    // Boundaries of per-speaker merged reference intervals.
    for (int r = 0; r < nr; ++r) {
      std::vector<std::pair<double, double>> ivs;
      for (const auto &s : ref)
        if (s.label == rn[r]) ivs.emplace_back(s.start, s.end);
      std::sort(ivs.begin(), ivs.end());
      std::vector<std::pair<double, double>> merged;
      for (const auto &iv : ivs) {
        if (!merged.empty() && iv.first <= merged.back().second)
          merged.back().second = std::max(merged.back().second, iv.second);
        else
          merged.push_back(iv);
      }
      for (const auto &iv : merged)
        for (double b : {iv.first, iv.second})
          for (int64_t f = 0; f < frames; ++f) {
            const double mid = (static_cast<double>(f) + 0.5) * frame;
            if (mid >= b - collar && mid <= b + collar) scored[f] = 0;
          }
    }
  }

  // Pair overlaps on scored frames.
  std::vector<std::vector<double>> overlap(nr, std::vector<double>(nh, 0.0));
  int64_t miss = 0, fa = 0, minsum = 0, refsum = 0;
  for (int64_t f = 0; f < frames; ++f) {
    if (!scored[f]) continue;
    int a = 0, b = 0;
    for (int r = 0; r < nr; ++r) a += ra[r][f];
    for (int h = 0; h < nh; ++h) b += ha[h][f];
    miss += std::max(0, a - b);
    fa += std::max(0, b - a);
    minsum += std::min(a, b);
    refsum += a;
    for (int r = 0; r < nr; ++r)
      for (int h = 0; h < nh; ++h)
        if (ra[r][f] && ha[h][f]) overlap[r][h] += 1.0;
  }

  // Exhaustive injective map ref -> hyp maximizing matched overlap.
  double best = 0.0;
  std::vector<int> assign(nr, -1);
  std::vector<char> used(nh, 0);
  auto rec = [&](auto &&self, int r, double acc) -> void {
    if (r == nr) {
      best = std::max(best, acc);
      return;
    }
    self(self, r + 1, acc);  // leave r unmapped
    for (int h = 0; h < nh; ++h) {
      if (used[h]) continue;
      used[h] = 1;
      self(self, r + 1, acc + overlap[r][h]);
      used[h] = 0;
    }
  };
  rec(rec, 0, 0.0);

  SampledDer out;
  out.missed = static_cast<double>(miss) * frame;
  out.false_alarm = static_cast<double>(fa) * frame;
  out.confusion = (static_cast<double>(minsum) - best) * frame;
  out.ref_speech = static_cast<double>(refsum) * frame;
  out.der =
      (out.missed + out.false_alarm + out.confusion) / out.ref_speech;
  return out;
}

// Plain Levenshtein distance (costs only, no backtrace).
inline int edit_distance(const std::vector<std::string> &a,
                         const std::vector<std::string> &b) {
  const size_t n = a.size(), m = b.size();
  std::vector<std::vector<int>> d(n + 1, std::vector<int>(m + 1));
  for (size_t i = 0; i <= n; ++i) d[i][0] = static_cast<int>(i);
  for (size_t j = 0; j <= m; ++j) d[0][j] = static_cast<int>(j);
  for (size_t i = 1; i <= n; ++i)
    for (size_t j = 1; j <= m; ++j)
      d[i][j] = std::min({d[i - 1][j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1),
                          d[i - 1][j] + 1, d[i][j - 1] + 1});
  return d[n][m];
}

// Greedy average-linkage AHC recomputing every cluster-pair average from the
// original matrix at each step.
inline std::vector<int> ahc_reference(const Eigen::MatrixXd &scores,
                                      double threshold) {
  const int n = static_cast<int>(scores.rows());
  std::vector<std::vector<int>> clusters;
  for (int i = 0; i < n; ++i) clusters.push_back({i});

  while (clusters.size() > 1) {
    double best = -std::numeric_limits<double>::infinity();
    size_t bi = 0, bj = 0;
    for (size_t i = 0; i < clusters.size(); ++i)
      for (size_t j = i + 1; j < clusters.size(); ++j) {
        double sum = 0.0;
        for (int a : clusters[i])
          for (int b : clusters[j]) sum += scores(a, b);
        const double avg =
            sum / (static_cast<double>(clusters[i].size()) * clusters[j].size());
        if (avg > best) {
          best = avg;
          bi = i;
          bj = j;
        }
      }
    if (best < threshold) break;
    clusters[bi].insert(clusters[bi].end(), clusters[bj].begin(),
                        clusters[bj].end());
    std::sort(clusters[bi].begin(), clusters[bi].end());
    clusters.erase(clusters.begin() + static_cast<long>(bj));
    // Keep clusters ordered by smallest member so tie-breaking matches the
    // lowest-(i,j) rule.
    std::sort(clusters.begin(), clusters.end(),
              [](const auto &a, const auto &b) { return a.front() < b.front(); });
  }

  std::vector<int> labels(n, -1);
  std::map<int, int> dense;
  std::vector<int> owner(n);
  for (size_t c = 0; c < clusters.size(); ++c)
    for (int m : clusters[c]) owner[m] = static_cast<int>(c);
  for (int t = 0; t < n; ++t) {
    auto [it, ignore] = dense.emplace(owner[t], static_cast<int>(dense.size()));
    labels[t] = it->second;
  }
  return labels;
}

}  // namespace oracles

#endif  // STEPSCORE_TESTS_ORACLES_H_
