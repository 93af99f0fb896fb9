// include/stepscore/sad.h

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

#ifndef STEPSCORE_SAD_H_
#define STEPSCORE_SAD_H_

#include <Eigen/Dense>
#include <string>
#include <utility>
#include <vector>

#include "stepscore/common.h"
#include "stepscore/frontend.h"

namespace stepscore {

// Feed-forward speech/non-speech classifier. Hidden layers are ReLU, the
// final layer has two outputs turned into probabilities by softmax (index 1
// is speech).
struct MlpParams {
  std::vector<Eigen::MatrixXd> weights;  // out x in per layer
  std::vector<Eigen::VectorXd> biases;

  int input_dim() const {
    return weights.empty() ? 0 : static_cast<int>(weights.front().cols());
  }
  size_t num_layers() const { return weights.size(); }
  // Throws kShape when layer dimensions do not chain or the head is not 2-way.
  void validate() const;
};

struct FramePosteriors {
  std::vector<double> probs;  // speech probability per frame, in [0,1]
  double frame_rate = 100.0;
  std::string recording_id;
};

struct SadPostConfig {
  double f_thd = 0.02;  // frame probability threshold
  int s_min = 25;       // minimum segment length, frames
  double s_thd = 0.25;  // minimum mean segment probability
  int gap_merge = 0;    // non-speech gap (frames) absorbed into a segment
};

struct TrainHyper {
  double learning_rate = 0.05;
  double momentum = 0.9;
  int epochs = 20;
  int batch_size = 256;
  uint64_t seed = 1;
};

FramePosteriors mlp_forward(const MlpParams &params, const FeatureMatrix &feats);

// Mean cross-entropy over the batch and its gradient w.r.t. every parameter.
// grads_w / grads_b are resized to match params. Exposed for the trainer and
// for finite-difference checks.
double mlp_loss_and_grad(const MlpParams &params, const Eigen::MatrixXd &x,
                         const std::vector<int> &labels,
                         std::vector<Eigen::MatrixXd> *grads_w,
                         std::vector<Eigen::VectorXd> *grads_b);

// Mini-batch SGD with momentum. Labels align one-to-one with feature rows;
// both classes must be present. Deterministic under a fixed seed.
MlpParams mlp_train(const std::vector<FeatureMatrix> &features,
                    const std::vector<std::vector<int>> &labels,
                    const std::vector<int> &hidden_sizes,
                    const TrainHyper &hyper, double *final_loss = nullptr);

// threshold -> gap merge -> length filter -> mean-score filter.
// Segment times are frame_index / frame_rate, end exclusive.
std::vector<LabeledSegment> sad_postprocess(const FramePosteriors &post,
                                            const SadPostConfig &cfg);

enum class SadObjective { kDcf, kDcfInv };
enum class CostPooling { kPooledDurations, kAveragedRates };

struct SadTuneInput {
  FramePosteriors post;
  std::vector<LabeledSegment> ref_speech;
};

struct SadTuneGrid {
  std::vector<double> f_thd;
  std::vector<int> s_min;
  std::vector<double> s_thd;
  std::vector<int> gap_merge{0};
};

// Aggregate detection cost of one operating point over a set of recordings.
// File duration is taken from each posterior stream.
double evaluate_sad_config(const std::vector<SadTuneInput> &inputs,
                           const SadPostConfig &cfg, SadObjective objective,
                           CostPooling pooling = CostPooling::kPooledDurations);

// Exhaustive grid search; ties broken by lower f_thd, then s_thd, then s_min,
// then gap_merge.
std::pair<SadPostConfig, double> tune_postprocess(
    const std::vector<SadTuneInput> &inputs, SadObjective objective,
    const SadTuneGrid &grid,
    CostPooling pooling = CostPooling::kPooledDurations);

// Per-frame speech flags from reference speech segments (frame midpoint rule).
std::vector<int> frame_labels_from_segments(
    const std::vector<LabeledSegment> &speech, double frame_rate,
    int64_t num_frames);

// Model file: magic "SADM", version u32, layer count u32, then per layer
// in u32, out u32, f32 row-major weights, f32 bias.
void save_mlp(const std::string &path, const MlpParams &params);
MlpParams load_mlp(const std::string &path);

// Label files: "<recording_id> <start> <end> <label>" with 2-decimal times.
SegmentTable read_labels(const std::string &path);
void write_labels(const std::string &path, const SegmentTable &table);

}  // namespace stepscore

#endif  // STEPSCORE_SAD_H_
