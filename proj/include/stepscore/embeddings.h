// include/stepscore/embeddings.h

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

#ifndef STEPSCORE_EMBEDDINGS_H_
#define STEPSCORE_EMBEDDINGS_H_

#include <Eigen/Dense>
#include <string>
#include <utility>
#include <vector>

#include "stepscore/common.h"
#include "stepscore/frontend.h"

namespace stepscore {

struct Chunk {
  std::string recording_id;
  double start = 0.0;
  double end = 0.0;
  int source_segment = -1;
};

// A per-speaker training chunk assembled from one or more speech spans.
struct TrainChunk {
  std::string recording_id;
  std::string speaker;
  std::vector<std::pair<double, double>> spans;  // real-time pieces, in order

  double duration() const {
    double d = 0.0;
    for (const auto &s : spans) d += s.second - s.first;
    return d;
  }
};

enum class EmbeddingKind { kUnknown, kIvector, kXvector, kFused, kToy };

struct EmbeddingKey {
  std::string recording_id;
  double start = 0.0;
  double end = 0.0;
  std::string speaker;  // optional; set for training data

  bool same_interval(const EmbeddingKey &o) const {
    return recording_id == o.recording_id && start == o.start && end == o.end;
  }
};

// Fixed-dimension vectors keyed by (recording, chunk interval). Rows of
// `vectors` align with `keys`.
struct EmbeddingSet {
  std::vector<EmbeddingKey> keys;
  Eigen::MatrixXd vectors;
  EmbeddingKind kind = EmbeddingKind::kUnknown;

  int dim() const { return static_cast<int>(vectors.cols()); }
  int64_t size() const { return static_cast<int64_t>(keys.size()); }
};

// Sliding chunks within each speech segment: starts at segment_start + k*step
// while start + chunk_len fits; an end-anchored residual chunk covers any
// uncovered tail when the covered piece is at least min_len long. Segments
// shorter than chunk_len yield the whole segment if >= min_len, else nothing.
std::vector<Chunk> make_chunks(const std::vector<LabeledSegment> &segments,
                               const std::string &recording_id,
                               double chunk_len, double step, double min_len);

// Concatenates each speaker's segments (time order) into a virtual stream and
// cuts it into target_len pieces; the final partial piece is kept. Pieces
// record the real-time spans they cover.
std::vector<TrainChunk> merge_speaker_chunks(
    const std::vector<LabeledSegment> &segments,
    const std::string &recording_id, double target_len);

// Per-coefficient mean and standard deviation over the chunk's frames,
// projected to out_dim by a fixed seeded random matrix. A stand-in for
// external i/x-vector extractors, deterministic under a fixed seed.
Eigen::VectorXd extract_toy_embedding(const FeatureMatrix &feats,
                                      const Chunk &chunk, int out_dim,
                                      uint64_t seed);
Eigen::VectorXd extract_toy_embedding(const FeatureMatrix &feats,
                                      const TrainChunk &chunk, int out_dim,
                                      uint64_t seed);

struct WhitenModel {
  Eigen::VectorXd mean;
  Eigen::MatrixXd transform;  // rows = output dim
};

// Global mean + PCA whitening fit on the pooled sets. Eigenvalues are floored
// at 1e-10 * trace / dim; needs at least dim+1 vectors and nonzero variance.
WhitenModel fit_whitener(const std::vector<const EmbeddingSet *> &sets);
EmbeddingSet apply_whitener(const WhitenModel &model, const EmbeddingSet &set);

// Per-key concatenation; key sets must match exactly (interval comparison).
EmbeddingSet fuse(const EmbeddingSet &a, const EmbeddingSet &b);

// Assigns each entry the reference speaker with maximum time overlap.
void label_by_overlap(EmbeddingSet *set, const SegmentTable &refs);

// Binary: magic "EMBV", version u32, dim u32, count u64, then per entry
// recording id (u32 length + UTF-8), start f64, end f64, f32 vector.
// Text variant: one "rec start end v1 v2 ..." line per entry.
void save_embeddings(const std::string &path, const EmbeddingSet &set);
EmbeddingSet load_embeddings(const std::string &path);
void save_embeddings_text(const std::string &path, const EmbeddingSet &set);
EmbeddingSet load_embeddings_text(const std::string &path);

}  // namespace stepscore

#endif  // STEPSCORE_EMBEDDINGS_H_
