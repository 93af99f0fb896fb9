// src/diarization.cc

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

#include "stepscore/diarization.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>

namespace stepscore {

namespace {

// Clamp the eigenvalues of a symmetric matrix from below; keeps covariances
// positive definite after degenerate updates.
Eigen::MatrixXd floor_spd(const Eigen::MatrixXd &m, double rel_floor,
                          double abs_floor = 1e-12) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(
      0.5 * (m + m.transpose()));
  if (eig.info() != Eigen::Success)
    Throw(ErrorCode::kNumerical, "eigendecomposition failed");
  const double floor =
      std::max(abs_floor, rel_floor * std::max(m.trace(), 0.0) /
                              static_cast<double>(m.rows()));
  Eigen::VectorXd lam = eig.eigenvalues().cwiseMax(floor);
  return eig.eigenvectors() * lam.asDiagonal() * eig.eigenvectors().transpose();
}

double logdet_spd(const Eigen::LLT<Eigen::MatrixXd> &llt) {
  return 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
}

Eigen::LLT<Eigen::MatrixXd> llt_or_throw(const Eigen::MatrixXd &m,
                                         const char *what) {
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() != Eigen::Success)
    Throw(ErrorCode::kNumerical, std::string(what) + ": matrix not positive definite");
  return llt;
}

}  // namespace

// ---------------------------------------------------------------------------
// PLDA training
// ---------------------------------------------------------------------------

PldaModel plda_fit(const EmbeddingSet &labeled, int max_iters, double tol,
                   std::vector<double> *ll_trace) {
  std::map<std::string, std::vector<int64_t>> by_speaker;
  for (int64_t i = 0; i < labeled.size(); ++i) {
    if (labeled.keys[i].speaker.empty())
      Throw(ErrorCode::kInvalidArgument, "embedding without speaker label");
    by_speaker[labeled.keys[i].speaker].push_back(i);
  }
  if (by_speaker.size() < 2)
    Throw(ErrorCode::kDegenerateData, "PLDA needs at least 2 speakers");
  for (const auto &[spk, rows] : by_speaker)
    if (rows.size() < 2)
      Throw(ErrorCode::kDegenerateData,
            "PLDA needs >= 2 vectors per speaker (" + spk + ")");

  const int d = labeled.dim();
  const int64_t n = labeled.size();
  const int64_t s_count = static_cast<int64_t>(by_speaker.size());

  PldaModel m;
  m.mu = labeled.vectors.colwise().mean().transpose();

  // Moment init: between = scatter of speaker means, within = residual.
  std::vector<Eigen::VectorXd> spk_means;
  std::vector<std::vector<int64_t>> spk_rows;
  Eigen::MatrixXd between = Eigen::MatrixXd::Zero(d, d);
  Eigen::MatrixXd within = Eigen::MatrixXd::Zero(d, d);
  for (const auto &[spk, rows] : by_speaker) {
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(d);
    for (int64_t i : rows) mean += labeled.vectors.row(i).transpose();
    mean /= static_cast<double>(rows.size());
    for (int64_t i : rows) {
      const Eigen::VectorXd dev = labeled.vectors.row(i).transpose() - mean;
      within += dev * dev.transpose();
    }
    const Eigen::VectorXd c = mean - m.mu;
    between += c * c.transpose();
    spk_means.push_back(mean);
    spk_rows.push_back(rows);
  }
  m.between = floor_spd(between / static_cast<double>(s_count), 1e-6);
  m.within = floor_spd(within / static_cast<double>(n), 1e-6);

  double prev_ll = -std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < max_iters; ++iter) {
    const Eigen::LLT<Eigen::MatrixXd> llt_w = llt_or_throw(m.within, "PLDA W");
    const Eigen::LLT<Eigen::MatrixXd> llt_b = llt_or_throw(m.between, "PLDA B");
    const Eigen::MatrixXd w_inv = llt_w.solve(Eigen::MatrixXd::Identity(d, d));
    const Eigen::MatrixXd b_inv = llt_b.solve(Eigen::MatrixXd::Identity(d, d));
    const double logdet_w = logdet_spd(llt_w);
    const double logdet_b = logdet_spd(llt_b);

    // E-step with the current parameters, marginal likelihood on the side.
    double ll = 0.0;
    Eigen::MatrixXd b_acc = Eigen::MatrixXd::Zero(d, d);
    Eigen::MatrixXd w_acc = Eigen::MatrixXd::Zero(d, d);
    for (size_t s = 0; s < spk_rows.size(); ++s) {
      const auto &rows = spk_rows[s];
      const double ns = static_cast<double>(rows.size());
      const Eigen::MatrixXd lambda = b_inv + ns * w_inv;
      const Eigen::LLT<Eigen::MatrixXd> llt_l = llt_or_throw(lambda, "PLDA E-step");
      const Eigen::MatrixXd sigma =
          llt_l.solve(Eigen::MatrixXd::Identity(d, d));
      const Eigen::VectorXd h = ns * (w_inv * (spk_means[s] - m.mu));
      const Eigen::VectorXd y_hat = llt_l.solve(h);

      // Marginal LL of this speaker's vectors under the current model.
      double quad = 0.0;
      for (int64_t i : rows) {
        const Eigen::VectorXd c = labeled.vectors.row(i).transpose() - m.mu;
        quad += c.dot(w_inv * c);
      }
      ll += -0.5 * ns * d * std::log(2.0 * M_PI) - 0.5 * ns * logdet_w -
            0.5 * logdet_b - 0.5 * logdet_spd(llt_l) - 0.5 * quad +
            0.5 * h.dot(y_hat);

      b_acc += y_hat * y_hat.transpose() + sigma;
      for (int64_t i : rows) {
        const Eigen::VectorXd r =
            labeled.vectors.row(i).transpose() - m.mu - y_hat;
        w_acc += r * r.transpose() + sigma;
      }
    }
    if (ll_trace) ll_trace->push_back(ll);

    // M-step.
    m.between = floor_spd(b_acc / static_cast<double>(s_count), 1e-10);
    m.within = floor_spd(w_acc / static_cast<double>(n), 1e-10);

    if (std::abs(ll - prev_ll) <= tol * (1.0 + std::abs(ll))) break;
    prev_ll = ll;
  }
  return m;
}

// ---------------------------------------------------------------------------
// pair scoring
// ---------------------------------------------------------------------------

PldaPairScorer::PldaPairScorer(const PldaModel &model) {
  const int d = model.dim();
  mu_ = model.mu;
  const Eigen::MatrixXd t = model.between + model.within;

  Eigen::MatrixXd same(2 * d, 2 * d);
  same.topLeftCorner(d, d) = t;
  same.bottomRightCorner(d, d) = t;
  same.topRightCorner(d, d) = model.between;
  same.bottomLeftCorner(d, d) = model.between;

  const Eigen::LLT<Eigen::MatrixXd> llt_t = llt_or_throw(t, "PLDA total cov");
  Eigen::LLT<Eigen::MatrixXd> llt_same(same);
  if (llt_same.info() != Eigen::Success)
    Throw(ErrorCode::kNumerical, "singular same-speaker covariance");

  diff_inv_ = llt_t.solve(Eigen::MatrixXd::Identity(d, d));
  const Eigen::MatrixXd same_inv =
      llt_same.solve(Eigen::MatrixXd::Identity(2 * d, 2 * d));
  // Enforce the block symmetry the structure guarantees analytically, so
  // score(x1,x2) == score(x2,x1) to the last bit.
  same_diag_ = 0.5 * (same_inv.topLeftCorner(d, d) +
                      same_inv.bottomRightCorner(d, d));
  same_off_ = 0.5 * (same_inv.topRightCorner(d, d) +
                     same_inv.bottomLeftCorner(d, d));
  same_off_ = 0.5 * (same_off_ + same_off_.transpose()).eval();
  same_diag_ = 0.5 * (same_diag_ + same_diag_.transpose()).eval();
  logdet_gain_ = 2.0 * logdet_spd(llt_t) - logdet_spd(llt_same);
  if (!std::isfinite(logdet_gain_))
    Throw(ErrorCode::kNumerical, "non-finite PLDA determinants");
}

double PldaPairScorer::score(const Eigen::VectorXd &x1,
                             const Eigen::VectorXd &x2) const {
  if (x1.size() != mu_.size() || x2.size() != mu_.size())
    Throw(ErrorCode::kShape, "vector dim does not match PLDA model");
  const Eigen::VectorXd c1 = x1 - mu_;
  const Eigen::VectorXd c2 = x2 - mu_;
  const double q_diff = c1.dot(diff_inv_ * c1) + c2.dot(diff_inv_ * c2);
  const double q_same = c1.dot(same_diag_ * c1) + c2.dot(same_diag_ * c2) +
                        c1.dot(same_off_ * c2) + c2.dot(same_off_ * c1);
  return 0.5 * (q_diff - q_same) + 0.5 * logdet_gain_;
}

double plda_score_pair(const PldaModel &model, const Eigen::VectorXd &x1,
                       const Eigen::VectorXd &x2) {
  return PldaPairScorer(model).score(x1, x2);
}

Eigen::MatrixXd plda_score_matrix(const PldaModel &model,
                                  const Eigen::MatrixXd &vectors) {
  const PldaPairScorer scorer(model);
  const Eigen::Index n = vectors.rows();
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double v =
          scorer.score(vectors.row(i).transpose(), vectors.row(j).transpose());
      s(i, j) = v;
      s(j, i) = v;
    }
  return s;
}

// ---------------------------------------------------------------------------
// per-recording PCA
// ---------------------------------------------------------------------------

std::pair<Eigen::MatrixXd, PldaModel> recording_pca_project(
    const PldaModel &model, const Eigen::MatrixXd &vectors, int k) {
  const int d = static_cast<int>(vectors.cols());
  const int64_t n = vectors.rows();
  if (d != model.dim()) Throw(ErrorCode::kShape, "vectors do not match model dim");
  if (k < 1 || k > d || static_cast<int64_t>(k) > n - 1)
    Throw(ErrorCode::kRank, "pca components out of range for this recording");

  const Eigen::RowVectorXd mean = vectors.colwise().mean();
  const Eigen::MatrixXd centered = vectors.rowwise() - mean;
  const Eigen::MatrixXd cov =
      centered.transpose() * centered / static_cast<double>(n);
  if (!(cov.trace() > 0.0))
    Throw(ErrorCode::kRank, "zero variance across chunk vectors");

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  if (eig.info() != Eigen::Success)
    Throw(ErrorCode::kNumerical, "eigendecomposition failed");
  // Top-k eigenvectors as rows, descending eigenvalue order.
  Eigen::MatrixXd p(k, d);
  for (int i = 0; i < k; ++i) p.row(i) = eig.eigenvectors().col(d - 1 - i).transpose();

  PldaModel proj;
  proj.mu = p * model.mu;
  proj.between = p * model.between * p.transpose();
  proj.within = p * model.within * p.transpose();
  return {vectors * p.transpose(), proj};
}

// ---------------------------------------------------------------------------
// AHC
// ---------------------------------------------------------------------------

Clustering ahc_cluster(const Eigen::MatrixXd &scores, const AhcConfig &cfg) {
  const int n = static_cast<int>(scores.rows());
  if (scores.cols() != n) Throw(ErrorCode::kInvalidArgument, "score matrix not square");
  Clustering out;
  if (n == 0) return out;
  if (!scores.allFinite())
    Throw(ErrorCode::kInvalidArgument, "score matrix has non-finite entries");
  const double scale = std::max(1.0, scores.cwiseAbs().maxCoeff());
  if ((scores - scores.transpose()).cwiseAbs().maxCoeff() > 1e-8 * scale)
    Throw(ErrorCode::kInvalidArgument, "score matrix not symmetric");

  // Cluster id = smallest member index; pair_sum holds the sum of
  // inter-cluster pairwise scores so averages stay exact per merge.
  std::vector<int> size(n, 1);
  std::vector<char> alive(n, 1);
  Eigen::MatrixXd pair_sum = scores;
  std::vector<int> cluster_of(n);
  std::iota(cluster_of.begin(), cluster_of.end(), 0);

  int active = n;
  while (active > 1) {
    int best_i = -1, best_j = -1;
    double best_avg = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i) {
      if (!alive[i]) continue;
      for (int j = i + 1; j < n; ++j) {
        if (!alive[j]) continue;
        const double avg =
            pair_sum(i, j) / (static_cast<double>(size[i]) * size[j]);
        if (avg > best_avg) {
          best_avg = avg;
          best_i = i;
          best_j = j;
        }
        // Ties resolve to the lowest (i, j) pair, which the scan order already
        // guarantees with the strict '>' above.
      }
    }
    if (best_avg < cfg.stop_threshold) break;

    // Merge j into i (i keeps the smaller representative index).
    for (int c = 0; c < n; ++c) {
      if (!alive[c] || c == best_i || c == best_j) continue;
      pair_sum(best_i, c) += pair_sum(best_j, c);
      pair_sum(c, best_i) = pair_sum(best_i, c);
    }
    size[best_i] += size[best_j];
    alive[best_j] = 0;
    for (int t = 0; t < n; ++t)
      if (cluster_of[t] == best_j) cluster_of[t] = best_i;
    --active;
  }

  // Dense labels in order of first appearance.
  std::map<int, int> dense;
  out.labels.resize(n);
  for (int t = 0; t < n; ++t) {
    auto [it, inserted] = dense.emplace(cluster_of[t], static_cast<int>(dense.size()));
    out.labels[t] = it->second;
  }
  out.num_speakers = static_cast<int>(dense.size());
  return out;
}

// ---------------------------------------------------------------------------
// VB resegmentation
// ---------------------------------------------------------------------------

namespace {

struct SpeakerPosterior {
  Eigen::VectorXd y_hat;
  Eigen::MatrixXd sigma;
  double trace_winv_sigma = 0.0;
  double logdet_sigma = 0.0;
};

}  // namespace

Clustering vb_resegment(const Eigen::MatrixXd &vectors, const Clustering &init,
                        const PldaModel &model, const VbConfig &cfg,
                        std::vector<double> *elbo_trace) {
  const int64_t n = vectors.rows();
  const int d = static_cast<int>(vectors.cols());
  if (init.num_speakers < 1)
    Throw(ErrorCode::kInvalidArgument, "init clustering has zero speakers");
  if (static_cast<int64_t>(init.labels.size()) != n)
    Throw(ErrorCode::kShape, "init labels do not align with vectors");
  if (d != model.dim()) Throw(ErrorCode::kShape, "vectors do not match model dim");
  if (!(cfg.loop_prob > 0.0 && cfg.loop_prob < 1.0))
    Throw(ErrorCode::kInvalidArgument, "loop_prob must be in (0,1)");
  if (cfg.max_iters < 1) Throw(ErrorCode::kInvalidArgument, "max_iters must be >= 1");

  const Eigen::LLT<Eigen::MatrixXd> llt_w = llt_or_throw(model.within, "VB W");
  const Eigen::LLT<Eigen::MatrixXd> llt_b = llt_or_throw(model.between, "VB B");
  const Eigen::MatrixXd w_inv = llt_w.solve(Eigen::MatrixXd::Identity(d, d));
  const Eigen::MatrixXd b_inv = llt_b.solve(Eigen::MatrixXd::Identity(d, d));
  const double logdet_w = logdet_spd(llt_w);
  const double logdet_b = logdet_spd(llt_b);
  const double a = cfg.acoustic_scale;

  // Centered observations and their cached quadratic terms.
  Eigen::MatrixXd c(n, d);
  for (int64_t t = 0; t < n; ++t)
    c.row(t) = vectors.row(t) - model.mu.transpose();
  Eigen::VectorXd c_quad(n);
  for (int64_t t = 0; t < n; ++t)
    c_quad(t) = c.row(t) * (w_inv * c.row(t).transpose());

  int s_num = init.num_speakers;
  Eigen::MatrixXd gamma = Eigen::MatrixXd::Zero(n, s_num);
  for (int64_t t = 0; t < n; ++t) gamma(t, init.labels[t]) = 1.0;

  std::vector<SpeakerPosterior> post(s_num);
  auto update_speakers = [&]() {
    for (int s = 0; s < s_num; ++s) {
      const double g = gamma.col(s).sum();
      const Eigen::MatrixXd lambda = b_inv + a * g * w_inv;
      const Eigen::LLT<Eigen::MatrixXd> llt_l = llt_or_throw(lambda, "VB update");
      post[s].sigma = llt_l.solve(Eigen::MatrixXd::Identity(d, d));
      const Eigen::VectorXd stat = c.transpose() * gamma.col(s);
      post[s].y_hat = llt_l.solve(a * (w_inv * stat));
      post[s].trace_winv_sigma = (w_inv * post[s].sigma).trace();
      post[s].logdet_sigma = -logdet_spd(llt_l);
    }
  };

  double prev_elbo = -std::numeric_limits<double>::infinity();
  const double norm_const = -0.5 * d * std::log(2.0 * M_PI) - 0.5 * logdet_w;

  for (int iter = 0; iter < cfg.max_iters; ++iter) {
    update_speakers();

    // Expected emission log-likelihoods, scaled.
    Eigen::MatrixXd log_emit(n, s_num);
    for (int s = 0; s < s_num; ++s) {
      const Eigen::VectorXd wy = w_inv * post[s].y_hat;
      const double y_quad = post[s].y_hat.dot(wy);
      const Eigen::VectorXd cross = c * wy;
      for (int64_t t = 0; t < n; ++t)
        log_emit(t, s) =
            a * (norm_const -
                 0.5 * (c_quad(t) - 2.0 * cross(t) + y_quad +
                        post[s].trace_winv_sigma));
    }

    // Scaled forward-backward. Transition: loop * I + (1 - loop)/S.
    const double stay = cfg.loop_prob + (1.0 - cfg.loop_prob) / s_num;
    const double move = (1.0 - cfg.loop_prob) / s_num;
    Eigen::MatrixXd alpha(n, s_num), beta(n, s_num);
    Eigen::VectorXd norms(n);
    {
      Eigen::VectorXd row =
          (log_emit.row(0).array() - log_emit.row(0).maxCoeff()).exp();
      row /= s_num;  // uniform initial distribution
      norms(0) = row.sum();
      alpha.row(0) = row / norms(0);
      for (int64_t t = 1; t < n; ++t) {
        const double total = alpha.row(t - 1).sum();  // == 1
        Eigen::VectorXd pred =
            (move * total) * Eigen::VectorXd::Ones(s_num) +
            (stay - move) * alpha.row(t - 1).transpose();
        const double mx = log_emit.row(t).maxCoeff();
        Eigen::VectorXd em = (log_emit.row(t).array() - mx).exp();
        Eigen::VectorXd un = pred.cwiseProduct(em);
        norms(t) = un.sum();
        alpha.row(t) = un / norms(t);
        norms(t) *= std::exp(mx);  // fold the max back into the scale
      }
      norms(0) *= std::exp(log_emit.row(0).maxCoeff());

      beta.row(n - 1).setOnes();
      for (int64_t t = n - 2; t >= 0; --t) {
        const double mx = log_emit.row(t + 1).maxCoeff();
        Eigen::VectorXd em = (log_emit.row(t + 1).array() - mx).exp();
        Eigen::VectorXd b = beta.row(t + 1).transpose().cwiseProduct(em);
        const double total = b.sum();
        Eigen::VectorXd next =
            (move * total) * Eigen::VectorXd::Ones(s_num) + (stay - move) * b;
        // Rescale with the same per-frame norm as forward (note the exp(mx)).
        beta.row(t) = (next * std::exp(mx) / norms(t + 1)).transpose();
      }
    }
    double log_z = norms.array().log().sum();

    gamma = alpha.cwiseProduct(beta);
    for (int64_t t = 0; t < n; ++t) gamma.row(t) /= gamma.row(t).sum();

    // ELBO = HMM evidence with expected emissions - KL(q(Y) || prior).
    double kl = 0.0;
    for (int s = 0; s < s_num; ++s) {
      kl += 0.5 * ((b_inv * post[s].sigma).trace() +
                   post[s].y_hat.dot(b_inv * post[s].y_hat) - d + logdet_b -
                   post[s].logdet_sigma);
    }
    const double elbo = log_z - kl;
    if (elbo_trace) elbo_trace->push_back(elbo);

    // Drop starved speakers; the variational model changes, so convergence
    // bookkeeping restarts.
    bool dropped = false;
    if (cfg.min_occupancy > 0.0 && s_num > 1) {
      std::vector<int> keep;
      for (int s = 0; s < s_num; ++s)
        if (gamma.col(s).sum() >= cfg.min_occupancy * static_cast<double>(n))
          keep.push_back(s);
      if (keep.empty()) {
        int best = 0;
        for (int s = 1; s < s_num; ++s)
          if (gamma.col(s).sum() > gamma.col(best).sum()) best = s;
        keep.push_back(best);
      }
      if (static_cast<int>(keep.size()) < s_num) {
        Eigen::MatrixXd g2(n, keep.size());
        std::vector<SpeakerPosterior> p2;
        for (size_t i = 0; i < keep.size(); ++i) {
          g2.col(i) = gamma.col(keep[i]);
          p2.push_back(post[keep[i]]);
        }
        for (int64_t t = 0; t < n; ++t) {
          const double sum = g2.row(t).sum();
          if (sum > 0.0)
            g2.row(t) /= sum;
          else
            g2.row(t).setConstant(1.0 / static_cast<double>(keep.size()));
        }
        gamma = std::move(g2);
        post = std::move(p2);
        s_num = static_cast<int>(keep.size());
        dropped = true;
      }
    }

    if (dropped) {
      prev_elbo = -std::numeric_limits<double>::infinity();
      continue;
    }
    if (elbo - prev_elbo < cfg.convergence_tol && iter > 0) break;
    prev_elbo = elbo;
  }

  Clustering out;
  out.recording_id = init.recording_id;
  out.labels.resize(n);
  std::map<int, int> dense;
  for (int64_t t = 0; t < n; ++t) {
    int best = 0;
    for (int s = 1; s < s_num; ++s)
      if (gamma(t, s) > gamma(t, best)) best = s;
    auto [it, inserted] = dense.emplace(best, static_cast<int>(dense.size()));
    out.labels[t] = it->second;
  }
  out.num_speakers = static_cast<int>(dense.size());
  return out;
}

// ---------------------------------------------------------------------------
// per-recording pipeline
// ---------------------------------------------------------------------------

std::vector<LabeledSegment> diarize_recording(
    const std::vector<Chunk> &chunks, const Eigen::MatrixXd &vectors,
    const WhitenModel *whitener, const PldaModel &plda, const AhcConfig &ahc,
    const VbConfig *vb) {
  const int64_t n = vectors.rows();
  if (static_cast<int64_t>(chunks.size()) != n)
    Throw(ErrorCode::kShape, "chunks do not align with vectors");
  if (n == 0) return {};

  Eigen::MatrixXd x = vectors;
  PldaModel model = plda;
  if (whitener) {
    EmbeddingSet tmp;
    tmp.keys.resize(n);
    tmp.vectors = x;
    x = apply_whitener(*whitener, tmp).vectors;
  }

  Clustering clusters;
  if (n == 1) {
    clusters.labels = {0};
    clusters.num_speakers = 1;
  } else {
    const int k = std::clamp<int>(ahc.pca_components, 1,
                                  std::min<int64_t>(model.dim(), n - 1));
    Eigen::MatrixXd proj_x;
    PldaModel proj_model;
    bool projected = true;
    try {
      std::tie(proj_x, proj_model) = recording_pca_project(model, x, k);
    } catch (const Error &e) {
      if (e.code() != ErrorCode::kRank) throw;
      projected = false;  // e.g. all chunk vectors identical
    }
    if (projected) {
      const Eigen::MatrixXd scores = plda_score_matrix(proj_model, proj_x);
      clusters = ahc_cluster(scores, ahc);
      if (vb && clusters.num_speakers >= 1)
        clusters = vb_resegment(proj_x, clusters, proj_model, *vb);
    } else {
      clusters.labels.assign(n, 0);
      clusters.num_speakers = 1;
    }
  }

  // Map chunk labels to the timeline: 10 ms frames, majority vote, ties to
  // the earliest-starting chunk among the tied labels.
  constexpr double kFrame = 0.01;
  double t_min = chunks[0].start, t_max = chunks[0].end;
  for (const auto &ch : chunks) {
    t_min = std::min(t_min, ch.start);
    t_max = std::max(t_max, ch.end);
  }
  const int64_t f_begin = std::max<int64_t>(
      0, static_cast<int64_t>(std::ceil(t_min / kFrame - 0.5 - 1e-9)));
  const int64_t f_end =
      static_cast<int64_t>(std::ceil(t_max / kFrame - 0.5 - 1e-9));

  std::vector<int64_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int64_t i, int64_t j) {
    return chunks[i].start < chunks[j].start;
  });

  std::vector<LabeledSegment> out;
  int cur_label = -1;
  double cur_start = 0.0, cur_end = 0.0;
  std::vector<int> votes(clusters.num_speakers);
  std::vector<double> earliest(clusters.num_speakers);

  for (int64_t f = f_begin; f < f_end; ++f) {
    const double mid = (static_cast<double>(f) + 0.5) * kFrame;
    std::fill(votes.begin(), votes.end(), 0);
    std::fill(earliest.begin(), earliest.end(),
              std::numeric_limits<double>::infinity());
    bool covered = false;
    for (int64_t oi : order) {
      const auto &ch = chunks[oi];
      if (ch.start > mid) break;
      if (mid < ch.end) {
        const int lab = clusters.labels[oi];
        ++votes[lab];
        earliest[lab] = std::min(earliest[lab], ch.start);
        covered = true;
      }
    }
    int winner = -1;
    if (covered) {
      for (int s = 0; s < clusters.num_speakers; ++s) {
        if (votes[s] == 0) continue;
        if (winner < 0 || votes[s] > votes[winner] ||
            (votes[s] == votes[winner] && earliest[s] < earliest[winner]))
          winner = s;
      }
    }
    const double fs = static_cast<double>(f) * kFrame;
    const double fe = fs + kFrame;
    if (winner >= 0 && winner == cur_label && std::abs(fs - cur_end) < 1e-9) {
      cur_end = fe;  // extend
    } else {
      if (cur_label >= 0)
        out.push_back({cur_start, cur_end, "spk" + std::to_string(cur_label),
                       std::nullopt});
      cur_label = winner;
      cur_start = fs;
      cur_end = fe;
    }
  }
  if (cur_label >= 0)
    out.push_back({cur_start, cur_end, "spk" + std::to_string(cur_label),
                   std::nullopt});
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

void write_mat(std::ostream &os, const Eigen::MatrixXd &m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) write_le<double>(os, m(r, c));
}

bool read_mat(std::istream &is, Eigen::MatrixXd *m) {
  for (Eigen::Index r = 0; r < m->rows(); ++r)
    for (Eigen::Index c = 0; c < m->cols(); ++c) {
      double v;
      if (!read_le(is, &v)) return false;
      (*m)(r, c) = v;
    }
  return true;
}

}  // namespace

void save_plda(const std::string &path, const PldaModel &model) {
  std::ofstream f(path, std::ios::binary);
  if (!f) Throw(ErrorCode::kIo, "cannot write " + path);
  f.write("PLDA", 4);
  write_le<uint32_t>(f, 1);
  write_le<uint32_t>(f, static_cast<uint32_t>(model.dim()));
  write_mat(f, model.mu);
  write_mat(f, model.between);
  write_mat(f, model.within);
  if (!f) Throw(ErrorCode::kIo, "short write to " + path);
}

PldaModel load_plda(const std::string &path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) Throw(ErrorCode::kIo, "cannot open " + path);
  char magic[4];
  uint32_t version = 0, dim = 0;
  if (!f.read(magic, 4) || std::memcmp(magic, "PLDA", 4) != 0)
    Throw(ErrorCode::kFormat, path + ": bad magic");
  if (!read_le(f, &version) || version != 1)
    Throw(ErrorCode::kFormat, path + ": unsupported version");
  if (!read_le(f, &dim) || dim == 0)
    Throw(ErrorCode::kFormat, path + ": bad dim");
  PldaModel m;
  m.mu.resize(dim);
  m.between.resize(dim, dim);
  m.within.resize(dim, dim);
  Eigen::MatrixXd mu(dim, 1);
  if (!read_mat(f, &mu) || !read_mat(f, &m.between) || !read_mat(f, &m.within))
    Throw(ErrorCode::kFormat, path + ": truncated payload");
  m.mu = mu.col(0);
  return m;
}

}  // namespace stepscore
