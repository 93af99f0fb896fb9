// src/embeddings.cc

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

#include "stepscore/embeddings.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace stepscore {

namespace {
constexpr double kTimeEps = 1e-9;
}

std::vector<Chunk> make_chunks(const std::vector<LabeledSegment> &segments,
                               const std::string &recording_id,
                               double chunk_len, double step, double min_len) {
  if (chunk_len <= 0.0 || step <= 0.0 || step > chunk_len + kTimeEps)
    Throw(ErrorCode::kInvalidArgument, "need chunk_len > 0 and 0 < step <= chunk_len");

  std::vector<Chunk> out;
  for (size_t i = 0; i < segments.size(); ++i) {
    const double s = segments[i].start, e = segments[i].end;
    if (e <= s) continue;
    double covered = s;
    for (int k = 0;; ++k) {
      const double cs = s + k * step;
      if (cs + chunk_len > e + kTimeEps) break;
      out.push_back({recording_id, cs, cs + chunk_len, static_cast<int>(i)});
      covered = cs + chunk_len;
    }
    if (covered < e - kTimeEps) {
      // End-anchored residual keeps the tail covered without emitting a
      // fragment shorter than min_len.
      const double rs = std::max(s, e - chunk_len);
      if (e - rs >= min_len - kTimeEps)
        out.push_back({recording_id, rs, e, static_cast<int>(i)});
    }
  }
  return out;
}

std::vector<TrainChunk> merge_speaker_chunks(
    const std::vector<LabeledSegment> &segments,
    const std::string &recording_id, double target_len) {
  if (target_len <= 0.0)
    Throw(ErrorCode::kInvalidArgument, "target_len must be > 0");
  for (const auto &s : segments)
    if (s.label.empty())
      Throw(ErrorCode::kInvalidArgument, "segments must carry speaker labels");

  std::map<std::string, std::vector<LabeledSegment>> by_speaker;
  for (const auto &s : segments)
    if (s.end > s.start) by_speaker[s.label].push_back(s);

  std::vector<TrainChunk> out;
  for (auto &[speaker, segs] : by_speaker) {
    std::stable_sort(segs.begin(), segs.end(),
                     [](const auto &a, const auto &b) { return a.start < b.start; });
    TrainChunk cur{recording_id, speaker, {}};
    double filled = 0.0;
    for (const auto &seg : segs) {
      double pos = seg.start;
      while (pos < seg.end - kTimeEps) {
        const double take = std::min(seg.end - pos, target_len - filled);
        cur.spans.emplace_back(pos, pos + take);
        pos += take;
        filled += take;
        if (filled >= target_len - kTimeEps) {
          out.push_back(std::move(cur));
          cur = TrainChunk{recording_id, speaker, {}};
          filled = 0.0;
        }
      }
    }
    if (!cur.spans.empty()) out.push_back(std::move(cur));
  }
  return out;
}

namespace {

// Frames whose midpoint lies in [start, end).
std::pair<int64_t, int64_t> frame_range(const FeatureMatrix &feats,
                                        double start, double end) {
  const double r = feats.frame_rate;
  const int64_t f0 = std::max<int64_t>(
      0, static_cast<int64_t>(std::ceil(start * r - 0.5 - 1e-9)));
  const int64_t f1 = std::min<int64_t>(
      feats.num_frames(),
      static_cast<int64_t>(std::ceil(end * r - 0.5 - 1e-9)));
  return {f0, f1};
}

Eigen::VectorXd stats_to_embedding(const Eigen::VectorXd &mean,
                                   const Eigen::VectorXd &stddev, int out_dim,
                                   uint64_t seed) {
  const int d = static_cast<int>(mean.size());
  Eigen::VectorXd stats(2 * d);
  stats.head(d) = mean;
  stats.tail(d) = stddev;

  // Fixed projection: depends on the seed and dimensions only, never on the
  // chunk, so all chunks share one matrix.
  Rng rng(seed ^ (static_cast<uint64_t>(out_dim) << 32) ^
          static_cast<uint64_t>(2 * d));
  Eigen::MatrixXd proj(out_dim, 2 * d);
  const double scale = 1.0 / std::sqrt(static_cast<double>(2 * d));
  for (int r = 0; r < out_dim; ++r)
    for (int c = 0; c < 2 * d; ++c) proj(r, c) = scale * rng.gaussian();
  return proj * stats;
}

Eigen::VectorXd accumulate_stats(
    const FeatureMatrix &feats,
    const std::vector<std::pair<double, double>> &spans, int out_dim,
    uint64_t seed, const std::string &what) {
  const Eigen::Index d = feats.dim();
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(d);
  Eigen::VectorXd sumsq = Eigen::VectorXd::Zero(d);
  int64_t count = 0;
  for (const auto &[s, e] : spans) {
    const auto [f0, f1] = frame_range(feats, s, e);
    for (int64_t f = f0; f < f1; ++f) {
      sum += feats.rows.row(f).transpose();
      sumsq += feats.rows.row(f).transpose().cwiseProduct(
          feats.rows.row(f).transpose());
      ++count;
    }
  }
  if (count == 0) Throw(ErrorCode::kEmptyInput, what + ": chunk covers no frames");
  const Eigen::VectorXd mean = sum / static_cast<double>(count);
  const Eigen::VectorXd var =
      (sumsq / static_cast<double>(count) - mean.cwiseProduct(mean))
          .cwiseMax(0.0);
  return stats_to_embedding(mean, var.cwiseSqrt(), out_dim, seed);
}

}  // namespace

Eigen::VectorXd extract_toy_embedding(const FeatureMatrix &feats,
                                      const Chunk &chunk, int out_dim,
                                      uint64_t seed) {
  if (out_dim < 1) Throw(ErrorCode::kInvalidArgument, "out_dim must be >= 1");
  return accumulate_stats(feats, {{chunk.start, chunk.end}}, out_dim, seed,
                          chunk.recording_id);
}

Eigen::VectorXd extract_toy_embedding(const FeatureMatrix &feats,
                                      const TrainChunk &chunk, int out_dim,
                                      uint64_t seed) {
  if (out_dim < 1) Throw(ErrorCode::kInvalidArgument, "out_dim must be >= 1");
  return accumulate_stats(feats, chunk.spans, out_dim, seed,
                          chunk.recording_id);
}

// ---------------------------------------------------------------------------
// whitening
// ---------------------------------------------------------------------------

WhitenModel fit_whitener(const std::vector<const EmbeddingSet *> &sets) {
  int64_t n = 0;
  int dim = -1;
  for (const auto *s : sets) {
    if (!s || s->size() == 0) continue;
    if (dim < 0) dim = s->dim();
    if (s->dim() != dim) Throw(ErrorCode::kShape, "embedding dims differ across sets");
    n += s->size();
  }
  if (dim <= 0 || n < dim + 1)
    Throw(ErrorCode::kRank, "need at least dim+1 vectors to fit a whitener");

  Eigen::MatrixXd x(n, dim);
  int64_t row = 0;
  for (const auto *s : sets) {
    if (!s || s->size() == 0) continue;
    x.middleRows(row, s->size()) = s->vectors;
    row += s->size();
  }

  WhitenModel model;
  model.mean = x.colwise().mean().transpose();
  Eigen::MatrixXd centered = x.rowwise() - model.mean.transpose();
  Eigen::MatrixXd cov =
      centered.transpose() * centered / static_cast<double>(n);
  const double trace = cov.trace();
  if (!(trace > 0.0)) Throw(ErrorCode::kRank, "zero covariance in whitening pool");

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  if (eig.info() != Eigen::Success)
    Throw(ErrorCode::kNumerical, "eigendecomposition failed");
  const double floor = 1e-10 * trace / dim;

  // Descending eigenvalue order.
  Eigen::VectorXd lam = eig.eigenvalues().reverse();
  Eigen::MatrixXd vec = eig.eigenvectors().rowwise().reverse();
  model.transform.resize(dim, dim);
  for (int i = 0; i < dim; ++i)
    model.transform.row(i) =
        vec.col(i).transpose() / std::sqrt(std::max(lam(i), floor));
  return model;
}

EmbeddingSet apply_whitener(const WhitenModel &model, const EmbeddingSet &set) {
  if (set.dim() != model.mean.size())
    Throw(ErrorCode::kShape, "whitener dim does not match embeddings");
  EmbeddingSet out = set;
  out.vectors = (set.vectors.rowwise() - model.mean.transpose()) *
                model.transform.transpose();
  return out;
}

// ---------------------------------------------------------------------------
// fusion / labeling
// ---------------------------------------------------------------------------

namespace {

struct KeyLess {
  bool operator()(const EmbeddingKey &a, const EmbeddingKey &b) const {
    if (a.recording_id != b.recording_id) return a.recording_id < b.recording_id;
    if (a.start != b.start) return a.start < b.start;
    return a.end < b.end;
  }
};

}  // namespace

EmbeddingSet fuse(const EmbeddingSet &a, const EmbeddingSet &b) {
  if (a.size() != b.size())
    Throw(ErrorCode::kAlignment, "embedding sets have different sizes");
  std::map<EmbeddingKey, int64_t, KeyLess> index;
  for (int64_t i = 0; i < b.size(); ++i) index[b.keys[i]] = i;

  EmbeddingSet out;
  out.kind = EmbeddingKind::kFused;
  out.keys = a.keys;
  out.vectors.resize(a.size(), a.dim() + b.dim());
  for (int64_t i = 0; i < a.size(); ++i) {
    auto it = index.find(a.keys[i]);
    if (it == index.end())
      Throw(ErrorCode::kAlignment,
            "key missing from second set: " + a.keys[i].recording_id);
    out.vectors.row(i) << a.vectors.row(i), b.vectors.row(it->second);
  }
  return out;
}

void label_by_overlap(EmbeddingSet *set, const SegmentTable &refs) {
  for (int64_t i = 0; i < set->size(); ++i) {
    auto &key = set->keys[i];
    auto it = refs.find(key.recording_id);
    if (it == refs.end())
      Throw(ErrorCode::kCoverage,
            "no reference segments for recording " + key.recording_id);
    std::map<std::string, double> overlap;
    for (const auto &seg : it->second) {
      const double ov =
          std::min(seg.end, key.end) - std::max(seg.start, key.start);
      if (ov > 0.0) overlap[seg.label] += ov;
    }
    std::string best;
    double best_ov = 0.0;
    for (const auto &[spk, ov] : overlap) {
      if (ov > best_ov) {
        best = spk;
        best_ov = ov;
      }
    }
    key.speaker = best;
  }
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

void check_duplicates(const EmbeddingSet &set, const std::string &path) {
  std::set<std::tuple<std::string, double, double>> seen;
  for (const auto &k : set.keys)
    if (!seen.emplace(k.recording_id, k.start, k.end).second)
      Throw(ErrorCode::kFormat, path + ": duplicate key " + k.recording_id);
}

}  // namespace

void save_embeddings(const std::string &path, const EmbeddingSet &set) {
  std::ofstream f(path, std::ios::binary);
  if (!f) Throw(ErrorCode::kIo, "cannot write " + path);
  f.write("EMBV", 4);
  write_le<uint32_t>(f, 1);
  write_le<uint32_t>(f, static_cast<uint32_t>(set.dim()));
  write_le<uint64_t>(f, static_cast<uint64_t>(set.size()));
  for (int64_t i = 0; i < set.size(); ++i) {
    const auto &k = set.keys[i];
    write_le<uint32_t>(f, static_cast<uint32_t>(k.recording_id.size()));
    f.write(k.recording_id.data(),
            static_cast<std::streamsize>(k.recording_id.size()));
    write_le<double>(f, k.start);
    write_le<double>(f, k.end);
    for (int c = 0; c < set.dim(); ++c)
      write_le<float>(f, static_cast<float>(set.vectors(i, c)));
  }
  if (!f) Throw(ErrorCode::kIo, "short write to " + path);
}

EmbeddingSet load_embeddings(const std::string &path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) Throw(ErrorCode::kIo, "cannot open " + path);
  char magic[4];
  uint32_t version = 0, dim = 0;
  uint64_t count = 0;
  if (!f.read(magic, 4) || std::memcmp(magic, "EMBV", 4) != 0)
    Throw(ErrorCode::kFormat, path + ": bad magic");
  if (!read_le(f, &version) || version != 1)
    Throw(ErrorCode::kFormat, path + ": unsupported version");
  if (!read_le(f, &dim) || !read_le(f, &count))
    Throw(ErrorCode::kFormat, path + ": truncated header");
  if (dim == 0 && count > 0) Throw(ErrorCode::kFormat, path + ": zero dim");

  EmbeddingSet set;
  set.vectors.resize(static_cast<Eigen::Index>(count), dim);
  for (uint64_t i = 0; i < count; ++i) {
    uint32_t len = 0;
    if (!read_le(f, &len) || len > (1u << 20))
      Throw(ErrorCode::kFormat, path + ": bad recording id length");
    std::string rec(len, '\0');
    f.read(rec.data(), len);
    double start, end;
    if (static_cast<uint32_t>(f.gcount()) != len || !read_le(f, &start) ||
        !read_le(f, &end))
      Throw(ErrorCode::kFormat, path + ": truncated entry");
    set.keys.push_back({rec, start, end, ""});
    for (uint32_t c = 0; c < dim; ++c) {
      float v;
      if (!read_le(f, &v)) Throw(ErrorCode::kFormat, path + ": truncated vector");
      set.vectors(static_cast<Eigen::Index>(i), c) = v;
    }
  }
  check_duplicates(set, path);
  return set;
}

void save_embeddings_text(const std::string &path, const EmbeddingSet &set) {
  std::ofstream f(path);
  if (!f) Throw(ErrorCode::kIo, "cannot write " + path);
  char buf[64];
  for (int64_t i = 0; i < set.size(); ++i) {
    const auto &k = set.keys[i];
    f << k.recording_id;
    std::snprintf(buf, sizeof(buf), " %.6f %.6f", k.start, k.end);
    f << buf;
    for (int c = 0; c < set.dim(); ++c) {
      std::snprintf(buf, sizeof(buf), " %.9g", set.vectors(i, c));
      f << buf;
    }
    f << "\n";
  }
  if (!f) Throw(ErrorCode::kIo, "short write to " + path);
}

EmbeddingSet load_embeddings_text(const std::string &path) {
  std::ifstream f(path);
  if (!f) Throw(ErrorCode::kIo, "cannot open " + path);
  std::vector<EmbeddingKey> keys;
  std::vector<std::vector<double>> rows;
  std::string line;
  int lineno = 0;
  int dim = -1;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream is(line);
    EmbeddingKey key;
    if (!(is >> key.recording_id >> key.start >> key.end))
      Throw(ErrorCode::kFormat,
            path + ":" + std::to_string(lineno) + ": bad entry");
    std::vector<double> v;
    double x;
    while (is >> x) v.push_back(x);
    if (v.empty())
      Throw(ErrorCode::kFormat,
            path + ":" + std::to_string(lineno) + ": no vector values");
    if (dim < 0) dim = static_cast<int>(v.size());
    if (static_cast<int>(v.size()) != dim)
      Throw(ErrorCode::kFormat, path + ":" + std::to_string(lineno) +
                                    ": dimension mismatch (" +
                                    std::to_string(v.size()) + " vs " +
                                    std::to_string(dim) + ")");
    keys.push_back(std::move(key));
    rows.push_back(std::move(v));
  }
  EmbeddingSet set;
  set.keys = std::move(keys);
  set.vectors.resize(static_cast<Eigen::Index>(rows.size()), std::max(dim, 0));
  for (size_t i = 0; i < rows.size(); ++i)
    for (int c = 0; c < dim; ++c)
      set.vectors(static_cast<Eigen::Index>(i), c) = rows[i][c];
  check_duplicates(set, path);
  return set;
}

}  // namespace stepscore
