// tests/test_metrics.cc

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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "oracles.h"
#include "stepscore/metrics.h"
#include "test_util.h"

using namespace stepscore;
using testutil::TempDir;

namespace {

std::vector<LabeledSegment> segs(
    std::initializer_list<std::tuple<double, double, const char *>> list) {
  std::vector<LabeledSegment> out;
  for (const auto &[s, e, l] : list) out.push_back({s, e, l, std::nullopt});
  return out;
}

// Random speech segments on a 1 ms lattice so the sampling oracle is exact.
std::vector<LabeledSegment> random_speech(Rng &rng, double file_dur,
                                          int max_segs) {
  std::vector<LabeledSegment> out;
  const int n = 1 + static_cast<int>(rng.uniform_int(max_segs));
  for (int i = 0; i < n; ++i) {
    double s = std::floor(rng.uniform(0.0, file_dur - 0.3) * 1000.0) / 1000.0;
    double d = std::floor(rng.uniform(0.2, 5.0) * 1000.0) / 1000.0;
    out.push_back({s, std::min(s + d, file_dur), "speech", std::nullopt});
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// SAD error stats
// ---------------------------------------------------------------------------

TEST_CASE("sad_error_stats: hyp equals ref") {
  const auto ref = segs({{1.0, 4.0, "speech"}, {6.0, 8.0, "speech"}});
  const auto st = sad_error_stats(ref, ref, 10.0);
  CHECK(st.p_fn == 0.0);
  CHECK(st.p_fp == 0.0);
  CHECK(st.ref_speech_dur == doctest::Approx(5.0));
  CHECK(st.ref_nonspeech_dur == doctest::Approx(5.0));
}

TEST_CASE("sad_error_stats: partial miss") {
  // ref speech [0,10) in a 20 s file, hyp [0,8) -> p_fn 0.2, p_fp 0
  const auto st =
      sad_error_stats(segs({{0, 10, "speech"}}), segs({{0, 8, "speech"}}), 20.0);
  CHECK(st.p_fn == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(st.p_fp == 0.0);
}

TEST_CASE("sad_error_stats: hyp covers the whole file") {
  const auto st =
      sad_error_stats(segs({{2, 5, "speech"}}), segs({{0, 20, "speech"}}), 20.0);
  CHECK(st.p_fn == 0.0);
  CHECK(st.p_fp == doctest::Approx(1.0));
}

TEST_CASE("sad_error_stats: undefined rates") {
  try {
    sad_error_stats({}, segs({{0, 1, "speech"}}), 10.0);
    FAIL("expected error");
  } catch (const Error &e) {
    CHECK(e.code() == ErrorCode::kUndefinedRate);
  }
  try {
    sad_error_stats(segs({{0, 10, "speech"}}), {}, 10.0);
    FAIL("expected error");
  } catch (const Error &e) {
    CHECK(e.code() == ErrorCode::kUndefinedRate);
  }
}

TEST_CASE("sad_error_stats: agrees with 1 ms sampling on 100 random cases") {
  Rng rng(2024);
  for (int trial = 0; trial < 100; ++trial) {
    const double file_dur = std::floor(rng.uniform(10.0, 40.0) * 1000.0) / 1000.0;
    const auto ref = random_speech(rng, file_dur, 20);
    const auto hyp = random_speech(rng, file_dur, 20);
    SadErrorStats st;
    try {
      st = sad_error_stats(ref, hyp, file_dur);
    } catch (const Error &) {
      continue;  // degenerate draw (no speech or no silence)
    }
    const auto oracle = oracles::sampled_sad_stats(ref, hyp, file_dur);
    CHECK(std::abs(st.p_fn - oracle.p_fn) <= 2e-3);
    CHECK(std::abs(st.p_fp - oracle.p_fp) <= 2e-3);
  }
}

// ---------------------------------------------------------------------------
// DCF
// ---------------------------------------------------------------------------

TEST_CASE("dcf and dcf_inv: exact coefficients") {
  CHECK(dcf(0.0, 0.0) == 0.0);
  CHECK(std::abs(dcf(0.02, 0.04) - 0.025) < 1e-16);
  CHECK(std::abs(dcf(0.2, 0.0) - 0.15) < 1e-16);
  CHECK(std::abs(dcf_inv(0.02, 0.04) - 0.035) < 1e-16);
  CHECK(dcf_inv(0.0, 0.0) == 0.0);
  CHECK(std::abs(dcf_inv(0.0, 0.1) - 0.075) < 1e-16);
}

TEST_CASE("dcf and dcf_inv: affine in both rates") {
  Rng rng(17);
  for (int i = 0; i < 1000; ++i) {
    const double fn = rng.uniform(), fp = rng.uniform();
    CHECK(dcf(fn, fp) == doctest::Approx(0.75 * fn + 0.25 * fp).epsilon(1e-15));
    CHECK(dcf_inv(fn, fp) == doctest::Approx(0.25 * fn + 0.75 * fp).epsilon(1e-15));
  }
}

// ---------------------------------------------------------------------------
// DER
// ---------------------------------------------------------------------------

TEST_CASE("der: renamed speakers score zero") {
  const auto ref = segs({{0, 5, "alice"}, {5, 9, "bob"}});
  const auto hyp = segs({{0, 5, "x"}, {5, 9, "y"}});
  const auto d = der(ref, hyp, 0.0);
  CHECK(d.der == doctest::Approx(0.0));
}

TEST_CASE("der: split hypothesis confuses half") {
  // ref A[0,10); hyp X[0,5) Y[5,10): best map keeps one half, confusion 5 s.
  const auto d = der(segs({{0, 10, "A"}}), segs({{0, 5, "X"}, {5, 10, "Y"}}), 0.0);
  CHECK(d.confusion == doctest::Approx(5.0).epsilon(1e-9));
  CHECK(d.der == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("der: merged hypothesis confuses one reference speaker") {
  const auto d = der(segs({{0, 4, "A"}, {4, 8, "B"}}), segs({{0, 8, "X"}}), 0.0);
  CHECK(d.confusion == doctest::Approx(4.0).epsilon(1e-9));
  CHECK(d.der == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("der: collar removes boundary frames from scoring") {
  const auto ref = segs({{1.0, 3.0, "A"}});
  const auto hyp = segs({{1.1, 3.0, "A"}});
  const auto strict = der(ref, hyp, 0.0);
  CHECK(strict.missed == doctest::Approx(0.1).epsilon(1e-6));
  const auto forgiving = der(ref, hyp, 0.25);
  CHECK(forgiving.missed == doctest::Approx(0.0));
}

TEST_CASE("der: empty reference is an error") {
  try {
    der({}, segs({{0, 1, "X"}}), 0.0);
    FAIL("expected error");
  } catch (const Error &e) {
    CHECK(e.code() == ErrorCode::kUndefinedRate);
  }
}

TEST_CASE("der: equals the exhaustive-permutation oracle on random cases") {
  Rng rng(99);
  const char *names[] = {"s1", "s2", "s3", "s4", "s5", "s6"};
  for (int trial = 0; trial < 60; ++trial) {
    const int nref = 1 + static_cast<int>(rng.uniform_int(6));
    const int nhyp = 1 + static_cast<int>(rng.uniform_int(6));
    const int nsegs = 2 + static_cast<int>(rng.uniform_int(28));
    std::vector<LabeledSegment> ref, hyp;
    for (int i = 0; i < nsegs; ++i) {
      const double s = std::floor(rng.uniform(0.0, 25.0) * 100.0) / 100.0;
      const double d = std::floor(rng.uniform(0.1, 4.0) * 100.0) / 100.0;
      if (rng.uniform() < 0.55)
        ref.push_back({s, s + d, names[rng.uniform_int(nref)], std::nullopt});
      else
        hyp.push_back({s, s + d, names[rng.uniform_int(nhyp)], std::nullopt});
    }
    if (ref.empty()) ref.push_back({0.0, 1.0, "s1", std::nullopt});
    const double collar = rng.uniform() < 0.5 ? 0.0 : 0.25;

    const auto got = der(ref, hyp, collar);
    const auto want = oracles::sampled_der(ref, hyp, collar, 0.01);
    CHECK(std::abs(got.missed - want.missed) <= 1e-9);
    CHECK(std::abs(got.false_alarm - want.false_alarm) <= 1e-9);
    CHECK(std::abs(got.confusion - want.confusion) <= 1e-9);
    CHECK(std::abs(got.der - want.der) <= 1e-9);
  }
}

TEST_CASE("der: invariant under bijective renaming of hyp labels") {
  Rng rng(123);
  const auto ref = segs({{0, 3, "A"}, {2, 6, "B"}, {7, 9, "C"}});
  const auto hyp = segs({{0, 2.5, "u"}, {2.5, 6.5, "v"}, {7, 9.5, "w"}});
  auto renamed = hyp;
  for (auto &s : renamed) s.label = "spk_" + s.label + "_x";
  const auto a = der(ref, hyp, 0.25);
  const auto b = der(ref, renamed, 0.25);
  CHECK(a.der == b.der);
}

// ---------------------------------------------------------------------------
// WER
// ---------------------------------------------------------------------------

TEST_CASE("wer: basics") {
  CHECK(wer(tokenize("a b c"), tokenize("a b c")).wer == 0.0);
  const auto sub = wer(tokenize("a b c"), tokenize("a x c"));
  CHECK(sub.substitutions == 1);
  CHECK(sub.insertions == 0);
  CHECK(sub.deletions == 0);
  CHECK(sub.wer == doctest::Approx(1.0 / 3.0));
  const auto ins = wer(tokenize("a"), tokenize("a b"));
  CHECK(ins.insertions == 1);
  CHECK(ins.wer == doctest::Approx(1.0));
}

TEST_CASE("wer: case folding") {
  CHECK(wer(tokenize("Go East"), tokenize("go east")).wer == 0.0);
}

TEST_CASE("wer: empty reference is an error") {
  try {
    wer({}, tokenize("a"));
    FAIL("expected error");
  } catch (const Error &e) {
    CHECK(e.code() == ErrorCode::kUndefinedRate);
  }
}

TEST_CASE("wer: total edits equal the DP oracle on random cases") {
  Rng rng(31);
  const std::vector<std::string> vocab = {"a", "b", "c", "d", "e"};
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::string> ref, hyp;
    const int n = 1 + static_cast<int>(rng.uniform_int(12));
    const int m = static_cast<int>(rng.uniform_int(12));
    for (int i = 0; i < n; ++i) ref.push_back(vocab[rng.uniform_int(5)]);
    for (int j = 0; j < m; ++j) hyp.push_back(vocab[rng.uniform_int(5)]);
    const auto w = wer(ref, hyp);
    const int edits = oracles::edit_distance(ref, hyp);
    CHECK(w.substitutions + w.insertions + w.deletions == edits);
    CHECK(w.wer == doctest::Approx(static_cast<double>(edits) / n));
    // sanity bound on the counts
    CHECK(w.substitutions + w.insertions + w.deletions <=
          std::max(n, m) + std::abs(n - m));
  }
}

// ---------------------------------------------------------------------------
// speaker counts
// ---------------------------------------------------------------------------

TEST_CASE("speaker_count_report: identical tables") {
  SegmentTable t;
  t["r1"] = segs({{0, 1, "a"}, {1, 2, "b"}});
  const auto rep = speaker_count_report(t, t);
  CHECK(rep.mae == 0.0);
  REQUIRE(rep.rows.size() == 1);
  CHECK(rep.rows[0].ref_speakers == 2);
}

TEST_CASE("speaker_count_report: mean absolute error") {
  SegmentTable ref, hyp;
  const char *names[] = {"a", "b", "c", "d", "e", "f", "g", "h", "i", "j"};
  auto fill = [&](SegmentTable &t, const char *rec, int n) {
    for (int i = 0; i < n; ++i)
      t[rec].push_back({static_cast<double>(i), i + 0.5,
                        names[i % 10] + std::to_string(i), std::nullopt});
  };
  fill(ref, "r1", 7);
  fill(ref, "r2", 61);
  fill(hyp, "r1", 10);
  fill(hyp, "r2", 50);
  const auto rep = speaker_count_report(ref, hyp);
  CHECK(rep.mae == doctest::Approx(7.0));
}

TEST_CASE("speaker_count_report: label names are irrelevant") {
  SegmentTable ref, hyp;
  for (int i = 0; i < 5; ++i) {
    ref["r"].push_back({i * 1.0, i + 0.5, "ref" + std::to_string(i), std::nullopt});
    hyp["r"].push_back({i * 1.0, i + 0.5, "other" + std::to_string(i), std::nullopt});
  }
  CHECK(speaker_count_report(ref, hyp).mae == 0.0);
}

TEST_CASE("speaker_count_report: missing recording is a coverage error") {
  SegmentTable ref, hyp;
  ref["r1"] = segs({{0, 1, "a"}});
  try {
    speaker_count_report(ref, hyp);
    FAIL("expected error");
  } catch (const Error &e) {
    CHECK(e.code() == ErrorCode::kCoverage);
  }
}

// ---------------------------------------------------------------------------
// formats
// ---------------------------------------------------------------------------

TEST_CASE("rttm round trip") {
  TempDir tmp;
  SegmentTable t;
  t["rec_a"] = segs({{0.5, 2.25, "spk0"}, {3.0, 4.5, "spk1"}});
  t["rec_b"] = segs({{1.0, 2.0, "spk0"}});
  const auto path = tmp.file("h.rttm");
  write_rttm(path, t);
  const auto back = read_rttm(path);
  REQUIRE(back.size() == 2);
  REQUIRE(back.at("rec_a").size() == 2);
  CHECK(back.at("rec_a")[0].start == doctest::Approx(0.5));
  CHECK(back.at("rec_a")[0].end == doctest::Approx(2.25));
  CHECK(back.at("rec_a")[0].label == "spk0");
}

TEST_CASE("rttm: malformed line reports its number") {
  TempDir tmp;
  const auto path = tmp.file("bad.rttm");
  std::ofstream(path) << "SPEAKER r 1 0.00 1.00 <NA> <NA> s <NA> <NA>\n"
                      << "JUNK LINE\n";
  try {
    read_rttm(path);
    FAIL("expected error");
  } catch (const Error &e) {
    CHECK(e.code() == ErrorCode::kFormat);
    CHECK(std::string(e.what()).find(":2") != std::string::npos);
  }
}

TEST_CASE("transcripts round trip") {
  TempDir tmp;
  std::map<std::string, std::string> t{{"utt1", "hello there"},
                                       {"utt2", "go for launch"}};
  const auto path = tmp.file("text");
  write_transcripts(path, t);
  CHECK(read_transcripts(path) == t);
}

// ---------------------------------------------------------------------------
// interval helpers
// ---------------------------------------------------------------------------

TEST_CASE("interval algebra") {
  const auto norm = normalize_intervals({{3, 4}, {0, 1}, {0.5, 2}, {5, 5}});
  REQUIRE(norm.size() == 2);
  CHECK(norm[0].first == 0.0);
  CHECK(norm[0].second == 2.0);
  CHECK(total_length(norm) == doctest::Approx(3.0));
  const auto inter = intersect_intervals({{0, 2}, {3, 4}}, {{1, 3.5}});
  CHECK(total_length(inter) == doctest::Approx(1.5));
  const auto sub = subtract_intervals({{0, 10}}, {{2, 3}, {5, 7}});
  CHECK(total_length(sub) == doctest::Approx(7.0));
}
