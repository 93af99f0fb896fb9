// include/stepscore/diarization.h

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

#ifndef STEPSCORE_DIARIZATION_H_
#define STEPSCORE_DIARIZATION_H_

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "stepscore/common.h"
#include "stepscore/embeddings.h"

namespace stepscore {

// Two-covariance PLDA: x = mu + y + e with y ~ N(0, B) between speakers and
// e ~ N(0, W) within. W is kept positive definite by eigenvalue flooring.
struct PldaModel {
  Eigen::VectorXd mu;
  Eigen::MatrixXd between;  // B
  Eigen::MatrixXd within;   // W

  int dim() const { return static_cast<int>(mu.size()); }
};

// EM fit from speaker-labeled embeddings. Needs >= 2 speakers with >= 2
// vectors each. The marginal log-likelihood is non-decreasing across
// iterations; stops on relative tolerance or max_iters.
PldaModel plda_fit(const EmbeddingSet &labeled, int max_iters = 50,
                   double tol = 1e-6, std::vector<double> *ll_trace = nullptr);

// Precomputed same/different-speaker Gaussians for pairwise LLR scoring.
class PldaPairScorer {
 public:
  explicit PldaPairScorer(const PldaModel &model);
  // log p(x1,x2 | same speaker) - log p(x1,x2 | different speakers)
  double score(const Eigen::VectorXd &x1, const Eigen::VectorXd &x2) const;

 private:
  Eigen::VectorXd mu_;
  Eigen::MatrixXd diff_inv_;   // (B + W)^-1
  Eigen::MatrixXd same_diag_;  // diagonal block of [[T,B],[B,T]]^-1
  Eigen::MatrixXd same_off_;   // off-diagonal block
  double logdet_gain_ = 0.0;   // logdet_diff - logdet_same
};

double plda_score_pair(const PldaModel &model, const Eigen::VectorXd &x1,
                       const Eigen::VectorXd &x2);

// Symmetric matrix of pairwise LLRs for rows of `vectors`.
Eigen::MatrixXd plda_score_matrix(const PldaModel &model,
                                  const Eigen::MatrixXd &vectors);

// PCA fit on this recording's vectors (k orthonormal rows); vectors and the
// model are mapped through the same linear transform. Throws kRank when k
// exceeds min(dim, n-1) or the vectors have zero variance.
std::pair<Eigen::MatrixXd, PldaModel> recording_pca_project(
    const PldaModel &model, const Eigen::MatrixXd &vectors, int k);

struct AhcConfig {
  double stop_threshold = 0.0;  // merge while best average score >= this
  int pca_components = 3;       // recording-dependent projection dim
};

struct VbConfig {
  double loop_prob = 0.99;
  int max_iters = 10;
  double acoustic_scale = 0.3;
  double min_occupancy = 0.01;  // fraction of chunks below which a speaker dies
  double convergence_tol = 1e-4;
};

struct Clustering {
  std::vector<int> labels;  // dense in [0, num_speakers)
  int num_speakers = 0;
  std::string recording_id;
};

// Average-linkage agglomerative clustering on a symmetric score matrix.
// Greedy highest-average merges until the best falls below stop_threshold;
// ties break on the lowest (i, j) cluster-representative pair.
Clustering ahc_cluster(const Eigen::MatrixXd &scores, const AhcConfig &cfg);

// Variational Bayes HMM over speaker states on time-ordered chunk vectors.
// Speaker latent means carry the PLDA between-class prior; emissions are
// Gaussian with the within-class covariance; transitions are
// loop_prob * I + (1 - loop_prob)/S. Acoustic log-likelihoods are scaled by
// acoustic_scale. Speakers whose total responsibility drops below
// min_occupancy * n_chunks are removed (the ELBO trace restarts there, since
// the model changes). Output labels are argmax responsibilities, densely
// relabeled.
Clustering vb_resegment(const Eigen::MatrixXd &vectors, const Clustering &init,
                        const PldaModel &model, const VbConfig &cfg,
                        std::vector<double> *elbo_trace = nullptr);

// Full per-recording pipeline: optional whitening, per-recording PCA, PLDA
// scores, AHC, optional VB, then chunk labels mapped to the timeline by
// 10 ms majority vote (ties to the earlier-starting chunk) and merged into
// speaker segments "spk0", "spk1", ...
std::vector<LabeledSegment> diarize_recording(
    const std::vector<Chunk> &chunks, const Eigen::MatrixXd &vectors,
    const WhitenModel *whitener, const PldaModel &plda, const AhcConfig &ahc,
    const VbConfig *vb);

// Model file: magic "PLDA", version u32, dim u32, then mu, B, W as f64
// row-major.
void save_plda(const std::string &path, const PldaModel &model);
PldaModel load_plda(const std::string &path);

}  // namespace stepscore

#endif  // STEPSCORE_DIARIZATION_H_
