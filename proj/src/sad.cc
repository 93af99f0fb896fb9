// src/sad.cc

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

#include "stepscore/sad.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

#include "stepscore/metrics.h"

namespace stepscore {

void MlpParams::validate() const {
  if (weights.empty() || weights.size() != biases.size())
    Throw(ErrorCode::kShape, "empty or inconsistent layer list");
  for (size_t l = 0; l < weights.size(); ++l) {
    if (weights[l].rows() != biases[l].size())
      Throw(ErrorCode::kShape, "bias size does not match layer output");
    if (l > 0 && weights[l].cols() != weights[l - 1].rows())
      Throw(ErrorCode::kShape, "layer dimensions do not chain");
  }
  if (weights.back().rows() != 2)
    Throw(ErrorCode::kShape, "final layer must have 2 outputs");
}

// ---------------------------------------------------------------------------
// forward / backward
// ---------------------------------------------------------------------------

namespace {

// Forward pass over a batch (rows = frames), keeping pre-activations.
// Returns per-frame logits (batch x 2).
Eigen::MatrixXd forward_keep(const MlpParams &p, const Eigen::MatrixXd &x,
                             std::vector<Eigen::MatrixXd> *activations) {
  Eigen::MatrixXd a = x;
  if (activations) activations->push_back(a);
  for (size_t l = 0; l < p.weights.size(); ++l) {
    Eigen::MatrixXd z =
        (a * p.weights[l].transpose()).rowwise() + p.biases[l].transpose();
    if (l + 1 < p.weights.size()) z = z.cwiseMax(0.0);  // ReLU
    a = std::move(z);
    if (activations && l + 1 < p.weights.size()) activations->push_back(a);
  }
  return a;
}

// Row-wise stable softmax probabilities.
Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd &logits) {
  Eigen::MatrixXd p = logits;
  for (Eigen::Index r = 0; r < p.rows(); ++r) {
    const double mx = p.row(r).maxCoeff();
    p.row(r) = (p.row(r).array() - mx).exp();
    p.row(r) /= p.row(r).sum();
  }
  return p;
}

}  // namespace

FramePosteriors mlp_forward(const MlpParams &params, const FeatureMatrix &feats) {
  params.validate();
  if (feats.dim() != params.input_dim())
    Throw(ErrorCode::kShape,
          "feature dim " + std::to_string(feats.dim()) + " != model input " +
              std::to_string(params.input_dim()));
  const Eigen::MatrixXd probs =
      softmax_rows(forward_keep(params, feats.rows, nullptr));
  FramePosteriors out;
  out.frame_rate = feats.frame_rate;
  out.recording_id = feats.recording_id;
  out.probs.resize(probs.rows());
  for (Eigen::Index r = 0; r < probs.rows(); ++r) out.probs[r] = probs(r, 1);
  return out;
}

double mlp_loss_and_grad(const MlpParams &params, const Eigen::MatrixXd &x,
                         const std::vector<int> &labels,
                         std::vector<Eigen::MatrixXd> *grads_w,
                         std::vector<Eigen::VectorXd> *grads_b) {
  const Eigen::Index n = x.rows();
  if (static_cast<Eigen::Index>(labels.size()) != n)
    Throw(ErrorCode::kShape, "labels do not align with frames");

  std::vector<Eigen::MatrixXd> acts;  // inputs to each layer
  const Eigen::MatrixXd logits = forward_keep(params, x, &acts);
  const Eigen::MatrixXd probs = softmax_rows(logits);

  double loss = 0.0;
  Eigen::MatrixXd delta = probs;  // dL/dlogits, per frame
  for (Eigen::Index r = 0; r < n; ++r) {
    const int y = labels[r];
    loss -= std::log(std::max(probs(r, y), 1e-300));
    delta(r, y) -= 1.0;
  }
  loss /= static_cast<double>(n);
  delta /= static_cast<double>(n);

  if (grads_w) {
    const size_t L = params.weights.size();
    grads_w->assign(L, Eigen::MatrixXd());
    grads_b->assign(L, Eigen::VectorXd());
    for (size_t l = L; l-- > 0;) {
      (*grads_w)[l] = delta.transpose() * acts[l];
      (*grads_b)[l] = delta.colwise().sum().transpose();
      if (l > 0) {
        delta = delta * params.weights[l];
        // ReLU mask: acts[l] holds the post-activation of layer l-1.
        delta.array() *= (acts[l].array() > 0.0).cast<double>();
      }
    }
  }
  return loss;
}

MlpParams mlp_train(const std::vector<FeatureMatrix> &features,
                    const std::vector<std::vector<int>> &labels,
                    const std::vector<int> &hidden_sizes,
                    const TrainHyper &hyper, double *final_loss) {
  if (features.empty() || features.size() != labels.size())
    Throw(ErrorCode::kInvalidArgument, "empty or misaligned training set");
  const Eigen::Index dim = features.front().dim();
  Eigen::Index total = 0;
  for (size_t i = 0; i < features.size(); ++i) {
    if (features[i].dim() != dim)
      Throw(ErrorCode::kShape, "feature dims differ across recordings");
    if (static_cast<Eigen::Index>(labels[i].size()) != features[i].num_frames())
      Throw(ErrorCode::kShape, "labels do not align with frames");
    total += features[i].num_frames();
  }

  Eigen::MatrixXd x(total, dim);
  std::vector<int> y;
  y.reserve(total);
  Eigen::Index row = 0;
  for (size_t i = 0; i < features.size(); ++i) {
    x.middleRows(row, features[i].num_frames()) = features[i].rows;
    row += features[i].num_frames();
    y.insert(y.end(), labels[i].begin(), labels[i].end());
  }
  int pos = 0;
  for (int v : y) {
    if (v != 0 && v != 1) Throw(ErrorCode::kInvalidArgument, "labels must be 0/1");
    pos += v;
  }
  if (pos == 0 || pos == static_cast<int>(y.size()))
    Throw(ErrorCode::kDegenerateData, "training data contains a single class");

  // He-style init.
  Rng rng(hyper.seed);
  MlpParams p;
  std::vector<int> dims;
  dims.push_back(static_cast<int>(dim));
  dims.insert(dims.end(), hidden_sizes.begin(), hidden_sizes.end());
  dims.push_back(2);
  for (size_t l = 0; l + 1 < dims.size(); ++l) {
    Eigen::MatrixXd w(dims[l + 1], dims[l]);
    const double scale = std::sqrt(2.0 / dims[l]);
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = scale * rng.gaussian();
    p.weights.push_back(std::move(w));
    p.biases.push_back(Eigen::VectorXd::Zero(dims[l + 1]));
  }
  p.validate();

  std::vector<Eigen::MatrixXd> vel_w, gw;
  std::vector<Eigen::VectorXd> vel_b, gb;
  for (size_t l = 0; l < p.weights.size(); ++l) {
    vel_w.push_back(Eigen::MatrixXd::Zero(p.weights[l].rows(), p.weights[l].cols()));
    vel_b.push_back(Eigen::VectorXd::Zero(p.biases[l].size()));
  }

  std::vector<int64_t> order(total);
  std::iota(order.begin(), order.end(), 0);
  const int batch = std::max(1, hyper.batch_size);

  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    rng.shuffle(order);
    for (int64_t start = 0; start < total; start += batch) {
      const int64_t bs = std::min<int64_t>(batch, total - start);
      Eigen::MatrixXd bx(bs, dim);
      std::vector<int> by(bs);
      for (int64_t i = 0; i < bs; ++i) {
        bx.row(i) = x.row(order[start + i]);
        by[i] = y[order[start + i]];
      }
      mlp_loss_and_grad(p, bx, by, &gw, &gb);
      for (size_t l = 0; l < p.weights.size(); ++l) {
        vel_w[l] = hyper.momentum * vel_w[l] - hyper.learning_rate * gw[l];
        vel_b[l] = hyper.momentum * vel_b[l] - hyper.learning_rate * gb[l];
        p.weights[l] += vel_w[l];
        p.biases[l] += vel_b[l];
      }
    }
  }
  if (final_loss) *final_loss = mlp_loss_and_grad(p, x, y, nullptr, nullptr);
  return p;
}

// ---------------------------------------------------------------------------
// postprocessing
// ---------------------------------------------------------------------------

std::vector<LabeledSegment> sad_postprocess(const FramePosteriors &post,
                                            const SadPostConfig &cfg) {
  if (post.frame_rate <= 0.0)
    Throw(ErrorCode::kInvalidArgument, "frame_rate must be > 0");
  if (cfg.s_min < 1 || cfg.gap_merge < 0)
    Throw(ErrorCode::kInvalidArgument, "bad postprocessing config");
  const int64_t n = static_cast<int64_t>(post.probs.size());

  // 1. threshold into runs of speech frames
  struct Run {
    int64_t begin, end;  // frame indices, end exclusive
  };
  std::vector<Run> runs;
  for (int64_t f = 0; f < n; ++f) {
    if (post.probs[f] >= cfg.f_thd) {
      if (!runs.empty() && runs.back().end == f)
        runs.back().end = f + 1;
      else
        runs.push_back({f, f + 1});
    }
  }

  // 2. absorb short non-speech gaps
  std::vector<Run> merged;
  for (const auto &r : runs) {
    if (!merged.empty() && r.begin - merged.back().end <= cfg.gap_merge)
      merged.back().end = r.end;
    else
      merged.push_back(r);
  }

  // 3. drop short segments, 4. drop low mean probability
  std::vector<LabeledSegment> out;
  for (const auto &r : merged) {
    if (r.end - r.begin < cfg.s_min) continue;
    double mean = 0.0;
    for (int64_t f = r.begin; f < r.end; ++f) mean += post.probs[f];
    mean /= static_cast<double>(r.end - r.begin);
    if (mean < cfg.s_thd) continue;
    out.push_back({static_cast<double>(r.begin) / post.frame_rate,
                   static_cast<double>(r.end) / post.frame_rate, "speech",
                   mean});
  }
  return out;
}

// ---------------------------------------------------------------------------
// tuning
// ---------------------------------------------------------------------------

double evaluate_sad_config(const std::vector<SadTuneInput> &inputs,
                           const SadPostConfig &cfg, SadObjective objective,
                           CostPooling pooling) {
  if (inputs.empty()) Throw(ErrorCode::kInvalidArgument, "no recordings");
  double fn = 0.0, fp = 0.0, speech = 0.0, nonspeech = 0.0;
  double rate_sum = 0.0;
  for (const auto &in : inputs) {
    const double file_dur =
        static_cast<double>(in.post.probs.size()) / in.post.frame_rate;
    const auto hyp = sad_postprocess(in.post, cfg);
    const auto st = sad_error_stats(in.ref_speech, hyp, file_dur);
    fn += st.p_fn * st.ref_speech_dur;
    fp += st.p_fp * st.ref_nonspeech_dur;
    speech += st.ref_speech_dur;
    nonspeech += st.ref_nonspeech_dur;
    rate_sum += objective == SadObjective::kDcf ? dcf(st) : dcf_inv(st);
  }
  if (pooling == CostPooling::kAveragedRates)
    return rate_sum / static_cast<double>(inputs.size());
  const double p_fn = fn / speech, p_fp = fp / nonspeech;
  return objective == SadObjective::kDcf ? dcf(p_fn, p_fp) : dcf_inv(p_fn, p_fp);
}

std::pair<SadPostConfig, double> tune_postprocess(
    const std::vector<SadTuneInput> &inputs, SadObjective objective,
    const SadTuneGrid &grid, CostPooling pooling) {
  if (grid.f_thd.empty() || grid.s_min.empty() || grid.s_thd.empty() ||
      grid.gap_merge.empty())
    Throw(ErrorCode::kInvalidArgument, "empty tuning grid");

  auto key = [](const SadPostConfig &c) {
    return std::make_tuple(c.f_thd, c.s_thd, c.s_min, c.gap_merge);
  };

  bool have_best = false;
  SadPostConfig best;
  double best_cost = 0.0;
  for (double f : grid.f_thd)
    for (int smin : grid.s_min)
      for (double sthd : grid.s_thd)
        for (int gap : grid.gap_merge) {
          const SadPostConfig cand{f, smin, sthd, gap};
          const double cost = evaluate_sad_config(inputs, cand, objective, pooling);
          if (!have_best || cost < best_cost ||
              (cost == best_cost && key(cand) < key(best))) {
            have_best = true;
            best = cand;
            best_cost = cost;
          }
        }
  return {best, best_cost};
}

std::vector<int> frame_labels_from_segments(
    const std::vector<LabeledSegment> &speech, double frame_rate,
    int64_t num_frames) {
  std::vector<int> out(num_frames, 0);
  for (const auto &s : speech) {
    // frames whose midpoint lies in [start, end)
    const int64_t f0 = std::max<int64_t>(
        0, static_cast<int64_t>(std::ceil(s.start * frame_rate - 0.5 - 1e-9)));
    const int64_t f1 = std::min<int64_t>(
        num_frames,
        static_cast<int64_t>(std::ceil(s.end * frame_rate - 0.5 - 1e-9)));
    for (int64_t f = f0; f < f1; ++f) out[f] = 1;
  }
  return out;
}

// ---------------------------------------------------------------------------
// serialization
// ---------------------------------------------------------------------------

namespace {

template <typename T>
void write_le(std::ostream &os, T v) {
  os.write(reinterpret_cast<const char *>(&v), sizeof(T));
}

template <typename T>
bool read_le(std::istream &is, T *v) {
  is.read(reinterpret_cast<char *>(v), sizeof(T));
  return static_cast<size_t>(is.gcount()) == sizeof(T);
}

}  // namespace

void save_mlp(const std::string &path, const MlpParams &params) {
  params.validate();
  std::ofstream f(path, std::ios::binary);
  if (!f) Throw(ErrorCode::kIo, "cannot write " + path);
  f.write("SADM", 4);
  write_le<uint32_t>(f, 1);
  write_le<uint32_t>(f, static_cast<uint32_t>(params.num_layers()));
  for (size_t l = 0; l < params.num_layers(); ++l) {
    const auto &w = params.weights[l];
    write_le<uint32_t>(f, static_cast<uint32_t>(w.cols()));
    write_le<uint32_t>(f, static_cast<uint32_t>(w.rows()));
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c)
        write_le<float>(f, static_cast<float>(w(r, c)));
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      write_le<float>(f, static_cast<float>(params.biases[l](r)));
  }
  if (!f) Throw(ErrorCode::kIo, "short write to " + path);
}

MlpParams load_mlp(const std::string &path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) Throw(ErrorCode::kIo, "cannot open " + path);
  char magic[4];
  uint32_t version = 0, layers = 0;
  if (!f.read(magic, 4) || std::memcmp(magic, "SADM", 4) != 0)
    Throw(ErrorCode::kFormat, path + ": bad magic");
  if (!read_le(f, &version) || version != 1)
    Throw(ErrorCode::kFormat, path + ": unsupported version");
  if (!read_le(f, &layers) || layers == 0 || layers > 64)
    Throw(ErrorCode::kFormat, path + ": bad layer count");
  MlpParams p;
  for (uint32_t l = 0; l < layers; ++l) {
    uint32_t in = 0, out = 0;
    if (!read_le(f, &in) || !read_le(f, &out) || in == 0 || out == 0)
      Throw(ErrorCode::kFormat, path + ": bad layer dims");
    Eigen::MatrixXd w(out, in);
    for (uint32_t r = 0; r < out; ++r)
      for (uint32_t c = 0; c < in; ++c) {
        float v;
        if (!read_le(f, &v)) Throw(ErrorCode::kFormat, path + ": truncated weights");
        w(r, c) = v;
      }
    Eigen::VectorXd b(out);
    for (uint32_t r = 0; r < out; ++r) {
      float v;
      if (!read_le(f, &v)) Throw(ErrorCode::kFormat, path + ": truncated bias");
      b(r) = v;
    }
    p.weights.push_back(std::move(w));
    p.biases.push_back(std::move(b));
  }
  try {
    p.validate();
  } catch (const Error &e) {
    Throw(ErrorCode::kFormat, path + ": " + e.what());
  }
  return p;
}

SegmentTable read_labels(const std::string &path) {
  std::ifstream f(path);
  if (!f) Throw(ErrorCode::kIo, "cannot open " + path);
  SegmentTable table;
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream is(line);
    std::string rec, label;
    double start, end;
    if (!(is >> rec >> start >> end >> label) || end < start)
      Throw(ErrorCode::kFormat,
            path + ":" + std::to_string(lineno) + ": bad label line");
    table[rec].push_back({start, end, label, std::nullopt});
  }
  for (auto &[rec, segs] : table)
    std::stable_sort(segs.begin(), segs.end(),
                     [](const auto &a, const auto &b) { return a.start < b.start; });
  return table;
}

void write_labels(const std::string &path, const SegmentTable &table) {
  std::ofstream f(path);
  if (!f) Throw(ErrorCode::kIo, "cannot write " + path);
  char buf[256];
  for (const auto &[rec, segs] : table) {
    auto sorted = segs;
    std::stable_sort(sorted.begin(), sorted.end(),
                     [](const auto &a, const auto &b) { return a.start < b.start; });
    for (const auto &s : sorted) {
      std::snprintf(buf, sizeof(buf), "%s %.2f %.2f %s\n", rec.c_str(), s.start,
                    s.end, s.label.c_str());
      f << buf;
    }
  }
  if (!f) Throw(ErrorCode::kIo, "short write to " + path);
}

}  // namespace stepscore
