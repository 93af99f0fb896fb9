// src/frontend.cc

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

#include "stepscore/frontend.h"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

namespace stepscore {

namespace {

constexpr double kLogFloor = 1e-15;
constexpr double kPreEmphasis = 0.97;

// ---------------------------------------------------------------------------
// little-endian binary helpers
// ---------------------------------------------------------------------------

template <typename T>
void write_le(std::ostream &os, T v) {
  os.write(reinterpret_cast<const char *>(&v), sizeof(T));
}

template <typename T>
bool read_le(std::istream &is, T *v) {
  is.read(reinterpret_cast<char *>(v), sizeof(T));
  return static_cast<size_t>(is.gcount()) == sizeof(T);
}

// ---------------------------------------------------------------------------
// WAV
// ---------------------------------------------------------------------------

std::string file_stem(const std::string &path) {
  return std::filesystem::path(path).stem().string();
}

}  // namespace

AudioBuffer read_wav(const std::string &path, const std::string &recording_id) {
  std::ifstream f(path, std::ios::binary);
  if (!f) Throw(ErrorCode::kIo, "cannot open " + path);

  char riff[4], wave[4];
  uint32_t riff_size = 0;
  if (!f.read(riff, 4) || !read_le(f, &riff_size) || !f.read(wave, 4))
    Throw(ErrorCode::kFormat, path + ": truncated RIFF header");
  if (std::memcmp(riff, "RIFF", 4) != 0 || std::memcmp(wave, "WAVE", 4) != 0)
    Throw(ErrorCode::kFormat, path + ": not a RIFF/WAVE file");

  bool have_fmt = false;
  uint16_t audio_format = 0, num_channels = 0, bits = 0;
  uint32_t sample_rate = 0;
  std::vector<int16_t> pcm;
  bool have_data = false;

  // Chunk walk; unknown chunks (LIST, fact, ...) are skipped.
  while (true) {
    char id[4];
    uint32_t size = 0;
    if (!f.read(id, 4)) break;
    if (!read_le(f, &size))
      Throw(ErrorCode::kFormat, path + ": truncated chunk header");
    if (std::memcmp(id, "fmt ", 4) == 0) {
      if (size < 16) Throw(ErrorCode::kFormat, path + ": fmt chunk too small");
      uint32_t byte_rate;
      uint16_t block_align;
      if (!read_le(f, &audio_format) || !read_le(f, &num_channels) ||
          !read_le(f, &sample_rate) || !read_le(f, &byte_rate) ||
          !read_le(f, &block_align) || !read_le(f, &bits))
        Throw(ErrorCode::kFormat, path + ": truncated fmt chunk");
      f.seekg(size - 16 + (size & 1), std::ios::cur);
      have_fmt = true;
    } else if (std::memcmp(id, "data", 4) == 0) {
      if (size % 2 != 0)
        Throw(ErrorCode::kFormat, path + ": odd data chunk size");
      pcm.resize(size / 2);
      f.read(reinterpret_cast<char *>(pcm.data()), size);
      if (static_cast<uint32_t>(f.gcount()) != size)
        Throw(ErrorCode::kFormat, path + ": truncated data chunk");
      have_data = true;
    } else {
      f.seekg(size + (size & 1), std::ios::cur);
      if (!f) Throw(ErrorCode::kFormat, path + ": truncated chunk body");
    }
    if (have_fmt && have_data) break;
  }
  if (!have_fmt || !have_data)
    Throw(ErrorCode::kFormat, path + ": missing fmt or data chunk");
  if (audio_format != 1)
    Throw(ErrorCode::kUnsupportedFormat,
          path + ": only PCM supported (format " + std::to_string(audio_format) + ")");
  if (num_channels != 1)
    Throw(ErrorCode::kUnsupportedFormat,
          path + ": only mono supported (" + std::to_string(num_channels) + " channels)");
  if (bits != 16)
    Throw(ErrorCode::kUnsupportedFormat,
          path + ": only 16-bit supported (" + std::to_string(bits) + " bits)");
  if (sample_rate == 0) Throw(ErrorCode::kFormat, path + ": zero sample rate");

  AudioBuffer out;
  out.sample_rate = static_cast<int>(sample_rate);
  out.recording_id = recording_id.empty() ? file_stem(path) : recording_id;
  out.samples.resize(pcm.size());
  for (size_t i = 0; i < pcm.size(); ++i) out.samples[i] = pcm[i] / 32768.0;
  return out;
}

void write_wav(const std::string &path, const std::vector<double> &samples,
               int sample_rate) {
  if (sample_rate <= 0) Throw(ErrorCode::kInvalidArgument, "bad sample rate");
  std::ofstream f(path, std::ios::binary);
  if (!f) Throw(ErrorCode::kIo, "cannot write " + path);

  const uint32_t data_bytes = static_cast<uint32_t>(samples.size() * 2);
  f.write("RIFF", 4);
  write_le<uint32_t>(f, 36 + data_bytes);
  f.write("WAVE", 4);
  f.write("fmt ", 4);
  write_le<uint32_t>(f, 16);
  write_le<uint16_t>(f, 1);  // PCM
  write_le<uint16_t>(f, 1);  // mono
  write_le<uint32_t>(f, static_cast<uint32_t>(sample_rate));
  write_le<uint32_t>(f, static_cast<uint32_t>(sample_rate * 2));
  write_le<uint16_t>(f, 2);
  write_le<uint16_t>(f, 16);
  f.write("data", 4);
  write_le<uint32_t>(f, data_bytes);
  for (double s : samples) {
    double c = std::clamp(s, -1.0, 1.0);
    write_le<int16_t>(f, static_cast<int16_t>(std::lrint(c * 32767.0)));
  }
  if (!f) Throw(ErrorCode::kIo, "short write to " + path);
}

// ---------------------------------------------------------------------------
// MFCC
// ---------------------------------------------------------------------------

namespace {

// In-place iterative radix-2 FFT.
void fft(std::vector<std::complex<double>> &x) {
  const size_t n = x.size();
  if (n <= 1) return;
  size_t j = 0;
  for (size_t i = 0; i < n; ++i) {
    if (j > i) std::swap(x[i], x[j]);
    size_t m = n >> 1;
    while (m >= 1 && j >= m) {
      j -= m;
      m >>= 1;
    }
    j += m;
  }
  for (size_t len = 2; len <= n; len <<= 1) {
    const double ang = -2.0 * M_PI / static_cast<double>(len);
    const std::complex<double> wlen(std::cos(ang), std::sin(ang));
    for (size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (size_t k = 0; k < len / 2; ++k) {
        std::complex<double> u = x[i + k];
        std::complex<double> v = x[i + k + len / 2] * w;
        x[i + k] = u + v;
        x[i + k + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
}

double hz_to_mel(double hz) { return 1127.0 * std::log1p(hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::exp(mel / 1127.0) - 1.0); }

// Triangular mel filterbank over FFT bins [0, nfft/2].
std::vector<std::vector<double>> mel_filterbank(int num_filters, int nfft,
                                                int sample_rate) {
  const int nbins = nfft / 2 + 1;
  const double low_hz = 20.0;
  const double high_hz = sample_rate / 2.0;
  const double mel_lo = hz_to_mel(low_hz), mel_hi = hz_to_mel(high_hz);
  std::vector<double> centers(num_filters + 2);
  for (int i = 0; i < num_filters + 2; ++i)
    centers[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * i / (num_filters + 1));

  std::vector<std::vector<double>> bank(num_filters,
                                        std::vector<double>(nbins, 0.0));
  for (int m = 0; m < num_filters; ++m) {
    const double fl = centers[m], fc = centers[m + 1], fr = centers[m + 2];
    for (int k = 0; k < nbins; ++k) {
      const double hz = static_cast<double>(k) * sample_rate / nfft;
      if (hz > fl && hz < fc)
        bank[m][k] = (hz - fl) / (fc - fl);
      else if (hz >= fc && hz < fr)
        bank[m][k] = (fr - hz) / (fr - fc);
    }
  }
  return bank;
}

}  // namespace

FeatureMatrix compute_mfcc(const AudioBuffer &audio, const FrameSpec &spec) {
  if (audio.sample_rate <= 0)
    Throw(ErrorCode::kInvalidArgument, "audio has no sample rate");
  if (spec.hop <= 0 || spec.hop > spec.window_len)
    Throw(ErrorCode::kInvalidArgument, "need 0 < hop <= window_len");
  const int win = static_cast<int>(std::lround(spec.window_len * audio.sample_rate));
  const int hop = static_cast<int>(std::lround(spec.hop * audio.sample_rate));
  if (win <= 0 || hop <= 0)
    Throw(ErrorCode::kInvalidArgument, "window/hop too small for sample rate");
  const int64_t n = static_cast<int64_t>(audio.samples.size());
  if (n < win)
    Throw(ErrorCode::kEmptyInput, audio.recording_id +
                                      ": audio shorter than one analysis window");

  const int64_t num_frames = (n - win) / hop + 1;
  const int num_filters = audio.sample_rate >= 16000 ? 40 : 23;
  if (spec.num_ceps < 1 || spec.num_ceps > num_filters)
    Throw(ErrorCode::kInvalidArgument, "num_ceps out of range for filterbank");

  int nfft = 1;
  while (nfft < win) nfft <<= 1;
  const int nbins = nfft / 2 + 1;
  const auto bank = mel_filterbank(num_filters, nfft, audio.sample_rate);

  // Precompute window and the orthonormal DCT-II rows we keep.
  std::vector<double> hamming(win);
  for (int i = 0; i < win; ++i)
    hamming[i] = 0.54 - 0.46 * std::cos(2.0 * M_PI * i / (win - 1));
  Eigen::MatrixXd dct(spec.num_ceps, num_filters);
  for (int k = 0; k < spec.num_ceps; ++k) {
    const double scale =
        k == 0 ? std::sqrt(1.0 / num_filters) : std::sqrt(2.0 / num_filters);
    for (int m = 0; m < num_filters; ++m)
      dct(k, m) = scale * std::cos(M_PI * k * (m + 0.5) / num_filters);
  }

  FeatureMatrix out;
  out.frame_rate = 1.0 / spec.hop;
  out.recording_id = audio.recording_id;
  out.rows.resize(num_frames, spec.num_ceps);

  std::vector<std::complex<double>> buf(nfft);
  std::vector<double> power(nbins), logmel(num_filters);
  for (int64_t t = 0; t < num_frames; ++t) {
    const double *frame = audio.samples.data() + t * hop;
    // Raw log energy before pre-emphasis and windowing.
    double energy = 0.0;
    for (int i = 0; i < win; ++i) energy += frame[i] * frame[i];
    const double log_energy = std::log(std::max(energy, kLogFloor));

    for (int i = 0; i < win; ++i) {
      const double prev = i == 0 ? frame[0] : frame[i - 1];
      buf[i] = (frame[i] - kPreEmphasis * prev) * hamming[i];
    }
    std::fill(buf.begin() + win, buf.end(), std::complex<double>(0.0, 0.0));
    fft(buf);
    for (int k = 0; k < nbins; ++k) power[k] = std::norm(buf[k]);
    for (int m = 0; m < num_filters; ++m) {
      double e = 0.0;
      for (int k = 0; k < nbins; ++k) e += power[k] * bank[m][k];
      logmel[m] = std::log(std::max(e, kLogFloor));
    }
    for (int k = 0; k < spec.num_ceps; ++k) {
      double c = 0.0;
      for (int m = 0; m < num_filters; ++m) c += dct(k, m) * logmel[m];
      out.rows(t, k) = c;
    }
    out.rows(t, 0) = log_energy;
  }

  if (spec.include_deltas) return append_deltas(out);
  return out;
}

FeatureMatrix append_deltas(const FeatureMatrix &feats) {
  if (feats.num_frames() == 0)
    Throw(ErrorCode::kEmptyInput, "no frames to differentiate");
  const Eigen::Index n = feats.num_frames(), d = feats.dim();

  // d_t = sum_{k=1..2} k (c_{t+k} - c_{t-k}) / (2 sum k^2), edges replicated.
  auto delta_of = [n, d](const Eigen::MatrixXd &src) {
    Eigen::MatrixXd out(n, d);
    constexpr double denom = 10.0;  // 2 * (1 + 4)
    for (Eigen::Index t = 0; t < n; ++t) {
      auto row = [&](Eigen::Index i) {
        return src.row(std::clamp<Eigen::Index>(i, 0, n - 1));
      };
      out.row(t) =
          (1.0 * (row(t + 1) - row(t - 1)) + 2.0 * (row(t + 2) - row(t - 2))) /
          denom;
    }
    return out;
  };

  Eigen::MatrixXd d1 = delta_of(feats.rows);
  Eigen::MatrixXd d2 = delta_of(d1);

  FeatureMatrix out;
  out.frame_rate = feats.frame_rate;
  out.recording_id = feats.recording_id;
  out.rows.resize(n, 3 * d);
  out.rows.leftCols(d) = feats.rows;
  out.rows.middleCols(d, d) = d1;
  out.rows.rightCols(d) = d2;
  return out;
}

FeatureMatrix stack_context(const FeatureMatrix &feats, int context) {
  if (context < 1) Throw(ErrorCode::kInvalidArgument, "context must be >= 1");
  const Eigen::Index n = feats.num_frames(), d = feats.dim();
  const int lo = -(context / 2);

  FeatureMatrix out;
  out.frame_rate = feats.frame_rate;
  out.recording_id = feats.recording_id;
  out.rows.resize(n, static_cast<Eigen::Index>(context) * d);
  for (Eigen::Index t = 0; t < n; ++t) {
    for (int c = 0; c < context; ++c) {
      const Eigen::Index src =
          std::clamp<Eigen::Index>(t + lo + c, 0, n - 1);
      out.rows.block(t, static_cast<Eigen::Index>(c) * d, 1, d) =
          feats.rows.row(src);
    }
  }
  return out;
}

void save_features(const std::string &path, const FeatureMatrix &feats) {
  std::ofstream f(path, std::ios::binary);
  if (!f) Throw(ErrorCode::kIo, "cannot write " + path);
  f.write("FEAT", 4);
  write_le<uint32_t>(f, 1);
  write_le<uint32_t>(f, static_cast<uint32_t>(feats.num_frames()));
  write_le<uint32_t>(f, static_cast<uint32_t>(feats.dim()));
  write_le<double>(f, feats.frame_rate);
  for (Eigen::Index r = 0; r < feats.num_frames(); ++r)
    for (Eigen::Index c = 0; c < feats.dim(); ++c)
      write_le<float>(f, static_cast<float>(feats.rows(r, c)));
  if (!f) Throw(ErrorCode::kIo, "short write to " + path);
}

FeatureMatrix load_features(const std::string &path,
                            const std::string &recording_id) {
  std::ifstream f(path, std::ios::binary);
  if (!f) Throw(ErrorCode::kIo, "cannot open " + path);
  char magic[4];
  uint32_t version = 0, rows = 0, cols = 0;
  double frame_rate = 0.0;
  if (!f.read(magic, 4) || std::memcmp(magic, "FEAT", 4) != 0)
    Throw(ErrorCode::kFormat, path + ": bad magic");
  if (!read_le(f, &version) || version != 1)
    Throw(ErrorCode::kFormat, path + ": unsupported version");
  if (!read_le(f, &rows) || !read_le(f, &cols) || !read_le(f, &frame_rate))
    Throw(ErrorCode::kFormat, path + ": truncated header");
  FeatureMatrix out;
  out.frame_rate = frame_rate;
  out.recording_id = recording_id.empty() ? file_stem(path) : recording_id;
  out.rows.resize(rows, cols);
  for (uint32_t r = 0; r < rows; ++r)
    for (uint32_t c = 0; c < cols; ++c) {
      float v;
      if (!read_le(f, &v)) Throw(ErrorCode::kFormat, path + ": truncated payload");
      out.rows(r, c) = v;
    }
  return out;
}

}  // namespace stepscore
