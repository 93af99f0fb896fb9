// include/stepscore/frontend.h

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

#ifndef STEPSCORE_FRONTEND_H_
#define STEPSCORE_FRONTEND_H_

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "stepscore/common.h"

namespace stepscore {

// Mono audio, samples normalized to [-1, 1].
struct AudioBuffer {
  std::vector<double> samples;
  int sample_rate = 0;
  std::string recording_id;

  double duration() const {
    return sample_rate > 0
               ? static_cast<double>(samples.size()) / sample_rate
               : 0.0;
  }
};

struct FrameSpec {
  double window_len = 0.025;  // seconds
  double hop = 0.010;         // seconds
  int num_ceps = 13;
  bool include_deltas = false;
};

// frames x dim, row per frame.
struct FeatureMatrix {
  Eigen::MatrixXd rows;
  double frame_rate = 100.0;  // frames per second
  std::string recording_id;

  Eigen::Index num_frames() const { return rows.rows(); }
  Eigen::Index dim() const { return rows.cols(); }
};

// Reads a RIFF/WAVE file. Only PCM 16-bit mono is accepted; anything else is
// an unsupported-format error, malformed containers are format errors.
// Samples are scaled by 1/32768. recording_id defaults to the file stem.
AudioBuffer read_wav(const std::string &path, const std::string &recording_id = "");

// Writes PCM 16-bit mono. Samples are clipped to [-1, 1].
void write_wav(const std::string &path, const std::vector<double> &samples,
               int sample_rate);

// MFCC with a fixed recipe: pre-emphasis 0.97, Hamming window, 23 mel filters
// below 16 kHz sample rate / 40 at or above, orthonormal DCT-II, log frame
// energy in place of c0. Appends deltas when the spec asks for them.
// Frame count is floor((num_samples - window)/hop) + 1; audio shorter than one
// window is an error.
FeatureMatrix compute_mfcc(const AudioBuffer &audio, const FrameSpec &spec);

// Appends first and second derivatives (symmetric +-2 frame regression with
// edge replication), tripling the dimension.
FeatureMatrix append_deltas(const FeatureMatrix &feats);

// Concatenates `context` consecutive rows centered on each frame (offsets
// -floor(c/2) .. c-1-floor(c/2), clamped at the edges). Frame count unchanged.
FeatureMatrix stack_context(const FeatureMatrix &feats, int context);

// Flat little-endian binary: magic "FEAT", version u32, rows u32, cols u32,
// frame_rate f64, then row-major f32 payload.
void save_features(const std::string &path, const FeatureMatrix &feats);
FeatureMatrix load_features(const std::string &path,
                            const std::string &recording_id = "");

}  // namespace stepscore

#endif  // STEPSCORE_FRONTEND_H_
