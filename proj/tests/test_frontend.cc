// tests/test_frontend.cc

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

#include "stepscore/frontend.h"
#include "test_util.h"

using namespace stepscore;
using testutil::TempDir;

TEST_CASE("read_wav: 1 s of silence at 8 kHz") {
  TempDir tmp;
  const auto path = tmp.file("silence.wav");
  testutil::write_bytes(path, testutil::wav_bytes(std::vector<int16_t>(8000, 0), 8000));
  const auto audio = read_wav(path);
  CHECK(audio.sample_rate == 8000);
  CHECK(audio.samples.size() == 8000);
  CHECK(audio.duration() == doctest::Approx(1.0));
  CHECK(audio.recording_id == "silence");
  for (double s : audio.samples) CHECK(s == 0.0);
}

TEST_CASE("read_wav: full-scale square wave scaling") {
  TempDir tmp;
  std::vector<int16_t> pcm(1600);
  for (size_t i = 0; i < pcm.size(); ++i)
    pcm[i] = (i % 2 == 0) ? 32767 : -32767;
  const auto path = tmp.file("square.wav");
  testutil::write_bytes(path, testutil::wav_bytes(pcm, 16000));
  const auto audio = read_wav(path);
  const double full = 32767.0 / 32768.0;
  for (size_t i = 0; i < audio.samples.size(); ++i)
    CHECK(audio.samples[i] == (i % 2 == 0 ? full : -full));
}

TEST_CASE("read_wav: truncated data chunk is a format error") {
  TempDir tmp;
  auto bytes = testutil::wav_bytes(std::vector<int16_t>(100, 5), 8000);
  bytes.resize(bytes.size() - 60);  // cut into the payload
  const auto path = tmp.file("trunc.wav");
  testutil::write_bytes(path, bytes);
  try {
    read_wav(path);
    FAIL("expected error");
  } catch (const Error &e) {
    CHECK(e.code() == ErrorCode::kFormat);
  }
}

TEST_CASE("read_wav: stereo and non-PCM are unsupported") {
  TempDir tmp;
  const auto stereo = tmp.file("stereo.wav");
  testutil::write_bytes(stereo,
                        testutil::wav_bytes(std::vector<int16_t>(64, 0), 8000, 2));
  try {
    read_wav(stereo);
    FAIL("expected error");
  } catch (const Error &e) {
    CHECK(e.code() == ErrorCode::kUnsupportedFormat);
  }
  const auto alaw = tmp.file("alaw.wav");
  testutil::write_bytes(alaw, testutil::wav_bytes(std::vector<int16_t>(64, 0),
                                                  8000, 1, 16, 6));
  try {
    read_wav(alaw);
    FAIL("expected error");
  } catch (const Error &e) {
    CHECK(e.code() == ErrorCode::kUnsupportedFormat);
  }
}

TEST_CASE("write_wav round trip") {
  TempDir tmp;
  Rng rng(7);
  std::vector<double> samples(4000);
  for (auto &s : samples) s = rng.uniform(-0.9, 0.9);
  const auto path = tmp.file("rt.wav");
  write_wav(path, samples, 8000);
  const auto audio = read_wav(path);
  REQUIRE(audio.samples.size() == samples.size());
  for (size_t i = 0; i < samples.size(); ++i)
    CHECK(audio.samples[i] == doctest::Approx(samples[i]).epsilon(1e-3));
}

namespace {

AudioBuffer tone(double dur, int rate, double freq, uint64_t seed = 0) {
  AudioBuffer a;
  a.sample_rate = rate;
  a.recording_id = "tone";
  a.samples.resize(static_cast<size_t>(dur * rate));
  Rng rng(seed + 1);
  for (size_t i = 0; i < a.samples.size(); ++i) {
    a.samples[i] = 0.5 * std::sin(2.0 * M_PI * freq * i / rate);
    if (seed) a.samples[i] += 0.05 * rng.gaussian();
  }
  return a;
}

}  // namespace

TEST_CASE("compute_mfcc: frame count formula") {
  const auto audio = tone(1.0, 16000, 440.0);
  FrameSpec spec;
  const auto f = compute_mfcc(audio, spec);
  CHECK(f.num_frames() == 98);  // floor((16000-400)/160)+1
  CHECK(f.dim() == 13);
  CHECK(f.frame_rate == doctest::Approx(100.0));
  CHECK(f.rows.allFinite());
}

TEST_CASE("compute_mfcc: frame count matches a sliding-window loop") {
  Rng rng(42);
  for (int trial = 0; trial < 50; ++trial) {
    const int rate = rng.uniform() < 0.5 ? 8000 : 16000;
    const double window = rng.uniform(0.010, 0.040);
    const double hop = rng.uniform(0.005, window);
    const double dur = rng.uniform(window + 0.01, 0.8);
    AudioBuffer a;
    a.sample_rate = rate;
    a.recording_id = "rand";
    a.samples.assign(static_cast<size_t>(dur * rate), 0.0);
    for (auto &s : a.samples) s = rng.uniform(-0.5, 0.5);

    const int win = static_cast<int>(std::lround(window * rate));
    const int hopn = static_cast<int>(std::lround(hop * rate));
    if (win <= 0 || hopn <= 0 || hopn > win) continue;
    int64_t expected = 0;
    for (int64_t pos = 0; pos + win <= static_cast<int64_t>(a.samples.size());
         pos += hopn)
      ++expected;
    if (expected == 0) continue;

    FrameSpec spec{window, hop, 13, false};
    CHECK(compute_mfcc(a, spec).num_frames() == expected);
  }
}

TEST_CASE("compute_mfcc: silence gives identical frames") {
  AudioBuffer a;
  a.sample_rate = 8000;
  a.recording_id = "sil";
  a.samples.assign(8000, 0.0);
  const auto f = compute_mfcc(a, FrameSpec{});
  for (Eigen::Index t = 1; t < f.num_frames(); ++t)
    CHECK((f.rows.row(t) - f.rows.row(0)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("compute_mfcc: deterministic") {
  const auto audio = tone(0.5, 8000, 300.0, 3);
  const auto a = compute_mfcc(audio, FrameSpec{});
  const auto b = compute_mfcc(audio, FrameSpec{});
  CHECK((a.rows - b.rows).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("compute_mfcc: too-short audio errors") {
  AudioBuffer a;
  a.sample_rate = 8000;
  a.recording_id = "short";
  a.samples.assign(100, 0.1);  // 12.5 ms < 25 ms window
  try {
    compute_mfcc(a, FrameSpec{});
    FAIL("expected error");
  } catch (const Error &e) {
    CHECK(e.code() == ErrorCode::kEmptyInput);
  }
}

TEST_CASE("append_deltas: constant features give zero derivatives") {
  FeatureMatrix f;
  f.rows = Eigen::MatrixXd::Constant(20, 13, 3.5);
  const auto d = append_deltas(f);
  CHECK(d.dim() == 39);
  CHECK(d.num_frames() == 20);
  CHECK(d.rows.rightCols(26).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("append_deltas: linear ramp has constant delta, zero delta-delta") {
  FeatureMatrix f;
  const double slope = 0.25;
  f.rows.resize(30, 2);
  for (Eigen::Index t = 0; t < 30; ++t) {
    f.rows(t, 0) = slope * static_cast<double>(t);
    f.rows(t, 1) = 1.0;
  }
  const auto d = append_deltas(f);
  // Regression oracle: interior delta of a ramp equals its slope.
  for (Eigen::Index t = 2; t < 28; ++t)
    CHECK(d.rows(t, 2) == doctest::Approx(slope).epsilon(1e-12));
  // Delta of the delta stream is zero once both stages are in the interior.
  for (Eigen::Index t = 4; t < 26; ++t)
    CHECK(d.rows(t, 4) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("append_deltas: preserves frames, triples dim on random input") {
  Rng rng(5);
  FeatureMatrix f;
  f.rows.resize(17, 13);
  for (Eigen::Index t = 0; t < 17; ++t)
    for (Eigen::Index c = 0; c < 13; ++c) f.rows(t, c) = rng.gaussian();
  const auto d = append_deltas(f);
  CHECK(d.num_frames() == 17);
  CHECK(d.dim() == 39);
  CHECK((d.rows.leftCols(13) - f.rows).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("stack_context: context 1 is identity") {
  Rng rng(9);
  FeatureMatrix f;
  f.rows.resize(8, 4);
  for (Eigen::Index t = 0; t < 8; ++t)
    for (Eigen::Index c = 0; c < 4; ++c) f.rows(t, c) = rng.gaussian();
  const auto s = stack_context(f, 1);
  CHECK((s.rows - f.rows).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("stack_context: 30 frames of 13 dims gives 390") {
  FeatureMatrix f;
  f.rows = Eigen::MatrixXd::Random(50, 13);
  const auto s = stack_context(f, 30);
  CHECK(s.dim() == 390);
  CHECK(s.num_frames() == 50);
}

TEST_CASE("stack_context: edge replication enumeration") {
  FeatureMatrix f;
  f.rows.resize(4, 1);
  f.rows << 10, 20, 30, 40;
  const auto s = stack_context(f, 3);
  // frame 0 with context 3 -> rows (0, 0, 1) by edge replication
  CHECK(s.rows(0, 0) == 10);
  CHECK(s.rows(0, 1) == 10);
  CHECK(s.rows(0, 2) == 20);
  // interior frame
  CHECK(s.rows(2, 0) == 20);
  CHECK(s.rows(2, 1) == 30);
  CHECK(s.rows(2, 2) == 40);
  // trailing edge
  CHECK(s.rows(3, 0) == 30);
  CHECK(s.rows(3, 1) == 40);
  CHECK(s.rows(3, 2) == 40);
}

TEST_CASE("stack_context: output row depends only on the clamped window") {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 5 + static_cast<int>(rng.uniform_int(20));
    const int context = 1 + static_cast<int>(rng.uniform_int(8));
    FeatureMatrix f;
    f.rows.resize(n, 3);
    for (Eigen::Index t = 0; t < n; ++t)
      for (Eigen::Index c = 0; c < 3; ++c) f.rows(t, c) = rng.gaussian();
    const auto s = stack_context(f, context);
    const int lo = -(context / 2);
    for (int t = 0; t < n; ++t)
      for (int c = 0; c < context; ++c) {
        const int src = std::clamp(t + lo + c, 0, n - 1);
        CHECK((s.rows.block(t, 3 * c, 1, 3) - f.rows.row(src))
                  .cwiseAbs()
                  .maxCoeff() == 0.0);
      }
  }
}

TEST_CASE("feature file round trip") {
  TempDir tmp;
  const auto audio = tone(0.4, 8000, 500.0, 13);
  const auto f = compute_mfcc(audio, FrameSpec{0.025, 0.010, 13, true});
  const auto path = tmp.file("feats.bin");
  save_features(path, f);
  const auto g = load_features(path, f.recording_id);
  REQUIRE(g.num_frames() == f.num_frames());
  REQUIRE(g.dim() == f.dim());
  CHECK(g.frame_rate == f.frame_rate);
  // payload is f32
  CHECK((g.rows - f.rows).cwiseAbs().maxCoeff() < 1e-5);
  CHECK((g.rows.cast<float>().cast<double>() - g.rows).cwiseAbs().maxCoeff() == 0.0);
}
