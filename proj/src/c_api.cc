// src/c_api.cc

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

#include "stepscore/c_api.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <memory>
#include <numeric>
#include <string>
#include <vector>

#include "stepscore/common.h"
#include "stepscore/diarization.h"
#include "stepscore/embeddings.h"
#include "stepscore/frontend.h"
#include "stepscore/metrics.h"
#include "stepscore/sad.h"
#include "stepscore/sst-select.h"

using namespace stepscore;

namespace {

thread_local std::string g_last_error;

ss_status map_code(ErrorCode c) {
  switch (c) {
    case ErrorCode::kInvalidArgument: return SS_ERR_INVALID_ARGUMENT;
    case ErrorCode::kIo: return SS_ERR_IO;
    case ErrorCode::kFormat: return SS_ERR_FORMAT;
    case ErrorCode::kUnsupportedFormat: return SS_ERR_UNSUPPORTED_FORMAT;
    case ErrorCode::kShape: return SS_ERR_SHAPE;
    case ErrorCode::kDegenerateData: return SS_ERR_DEGENERATE_DATA;
    case ErrorCode::kRank: return SS_ERR_RANK;
    case ErrorCode::kNumerical: return SS_ERR_NUMERICAL;
    case ErrorCode::kUndefinedRate: return SS_ERR_UNDEFINED_RATE;
    case ErrorCode::kCoverage: return SS_ERR_COVERAGE;
    case ErrorCode::kAlignment: return SS_ERR_ALIGNMENT;
    case ErrorCode::kEmptyInput: return SS_ERR_EMPTY_INPUT;
  }
  return SS_ERR_INTERNAL;
}

template <typename Fn>
ss_status guard(Fn &&fn) {
  try {
    fn();
    return SS_OK;
  } catch (const Error &e) {
    g_last_error = e.what();
    return map_code(e.code());
  } catch (const std::exception &e) {
    g_last_error = e.what();
    return SS_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return SS_ERR_INTERNAL;
  }
}

ss_status fail(ss_status code, const char *msg) {
  g_last_error = msg;
  return code;
}

}  // namespace

// ---------------------------------------------------------------------------
// handle definitions
// ---------------------------------------------------------------------------

struct ss_audio { AudioBuffer v; };
struct ss_features { FeatureMatrix v; };
struct ss_segments { SegmentTable v; mutable std::vector<std::string> rec_cache; };
struct ss_mlp { MlpParams v; };
struct ss_posteriors { FramePosteriors v; };
struct ss_trainset {
  std::vector<FeatureMatrix> feats;
  std::vector<std::vector<int>> labels;
};
struct ss_spk_report { SpeakerCountReport v; };
struct ss_transcripts {
  std::map<std::string, std::string> v;
  mutable std::vector<std::string> utt_cache;
};
struct ss_chunks { std::vector<Chunk> v; };
struct ss_embeddings { EmbeddingSet v; };
struct ss_whitener { WhitenModel v; };
struct ss_plda { PldaModel v; };
struct ss_sst { std::vector<HypSegment> v; };

// ---------------------------------------------------------------------------
// misc
// ---------------------------------------------------------------------------

const char *ss_version(void) { return "stepscore 0.1.0"; }
const char *ss_last_error(void) { return g_last_error.c_str(); }

// ---------------------------------------------------------------------------
// audio
// ---------------------------------------------------------------------------

ss_status ss_audio_read_wav(const char *path, const char *recording_id,
                            ss_audio **out) {
  if (!path || !out) return fail(SS_ERR_INVALID_ARGUMENT, "null argument");
  return guard([&] {
    auto h = std::make_unique<ss_audio>();
    h->v = read_wav(path, recording_id ? recording_id : "");
    *out = h.release();
  });
}

ss_status ss_audio_write_wav(const char *path, const double *samples,
                             int64_t num_samples, int sample_rate) {
  if (!path || (!samples && num_samples > 0))
    return fail(SS_ERR_INVALID_ARGUMENT, "null argument");
  return guard([&] {
    write_wav(path, std::vector<double>(samples, samples + num_samples),
              sample_rate);
  });
}

ss_status ss_audio_create(const char *recording_id, const double *samples,
                          int64_t num_samples, int sample_rate,
                          ss_audio **out) {
  if (!recording_id || !out || (!samples && num_samples > 0))
    return fail(SS_ERR_INVALID_ARGUMENT, "null argument");
  return guard([&] {
    auto h = std::make_unique<ss_audio>();
    h->v.recording_id = recording_id;
    h->v.sample_rate = sample_rate;
    h->v.samples.assign(samples, samples + num_samples);
    *out = h.release();
  });
}

int ss_audio_sample_rate(const ss_audio *a) { return a ? a->v.sample_rate : 0; }
int64_t ss_audio_num_samples(const ss_audio *a) {
  return a ? static_cast<int64_t>(a->v.samples.size()) : 0;
}
double ss_audio_duration(const ss_audio *a) { return a ? a->v.duration() : 0.0; }
const char *ss_audio_recording_id(const ss_audio *a) {
  return a ? a->v.recording_id.c_str() : "";
}
void ss_audio_free(ss_audio *a) { delete a; }

// ---------------------------------------------------------------------------
// features
// ---------------------------------------------------------------------------

ss_status ss_features_mfcc(const ss_audio *a, double window_len, double hop,
                           int num_ceps, int include_deltas,
                           ss_features **out) {
  if (!a || !out) return fail(SS_ERR_INVALID_ARGUMENT, "null argument");
  return guard([&] {
    FrameSpec spec{window_len, hop, num_ceps, include_deltas != 0};
    auto h = std::make_unique<ss_features>();
    h->v = compute_mfcc(a->v, spec);
    *out = h.release();
  });
}

ss_status ss_features_append_deltas(const ss_features *f, ss_features **out) {
  if (!f || !out) return fail(SS_ERR_INVALID_ARGUMENT, "null argument");
  return guard([&] {
    auto h = std::make_unique<ss_features>();
    h->v = append_deltas(f->v);
    *out = h.release();
  });
}

ss_status ss_features_stack_context(const ss_features *f, int context,
                                    ss_features **out) {
  if (!f || !out) return fail(SS_ERR_INVALID_ARGUMENT, "null argument");
  return guard([&] {
    auto h = std::make_unique<ss_features>();
    h->v = stack_context(f->v, context);
    *out = h.release();
  });
}

int64_t ss_features_num_frames(const ss_features *f) {
  return f ? static_cast<int64_t>(f->v.num_frames()) : 0;
}
int ss_features_dim(const ss_features *f) {
  return f ? static_cast<int>(f->v.dim()) : 0;
}
double ss_features_frame_rate(const ss_features *f) {
  return f ? f->v.frame_rate : 0.0;
}

ss_status ss_features_save(const char *path, const ss_features *f) {
  if (!path || !f) return fail(SS_ERR_INVALID_ARGUMENT, "null argument");
  return guard([&] { save_features(path, f->v); });
}

ss_status ss_features_load(const char *path, const char *recording_id,
                           ss_features **out) {
  if (!path || !out) return fail(SS_ERR_INVALID_ARGUMENT, "null argument");
  return guard([&] {
    auto h = std::make_unique<ss_features>();
    h->v = load_features(path, recording_id ? recording_id : "");
    *out = h.release();
  });
}

void ss_features_free(ss_features *f) { delete f; }

// ---------------------------------------------------------------------------
// segments
// ---------------------------------------------------------------------------

namespace {

void refresh_rec_cache(const ss_segments *s) {
  s->rec_cache.clear();
  for (const auto &[rec, segs] : s->v) s->rec_cache.push_back(rec);
}

}  // namespace

ss_status ss_segments_create(ss_segments **out) {
  if (!out) return fail(SS_ERR_INVALID_ARGUMENT, "null argument");
  *out = new ss_segments();
  return SS_OK;
}

ss_status ss_segments_add(ss_segments *s, const char *recording_id,
                          double start, double end, const char *label,
                          double score) {
  if (!s || !recording_id || !label)
    return fail(SS_ERR_INVALID_ARGUMENT, "null argument");
  if (!(end > start)) return fail(SS_ERR_INVALID_ARGUMENT, "need end > start");
  return guard([&] {
    LabeledSegment seg{start, end, label, std::nullopt};
    if (!std::isnan(score)) seg.score = score;
    s->v[recording_id].push_back(std::move(seg));
    s->rec_cache.clear();
  });
}

int64_t ss_segments_num_recordings(const ss_segments *s) {
  return s ? static_cast<int64_t>(s->v.size()) : 0;
}

const char *ss_segments_recording(const ss_segments *s, int64_t index) {
  if (!s || index < 0 || index >= static_cast<int64_t>(s->v.size())) return nullptr;
  if (s->rec_cache.size() != s->v.size()) refresh_rec_cache(s);
  return s->rec_cache[index].c_str();
}

int64_t ss_segments_count(const ss_segments *s, const char *recording_id) {
  if (!s || !recording_id) return 0;
  auto it = s->v.find(recording_id);
  return it == s->v.end() ? 0 : static_cast<int64_t>(it->second.size());
}

ss_status ss_segments_get(const ss_segments *s, const char *recording_id,
                          int64_t index, double *start, double *end,
                          const char **label, double *score) {
  if (!s || !recording_id) return fail(SS_ERR_INVALID_ARGUMENT, "null argument");
  auto it = s->v.find(recording_id);
  if (it == s->v.end() || index < 0 ||
      index >= static_cast<int64_t>(it->second.size()))
    return fail(SS_ERR_INVALID_ARGUMENT, "segment index out of range");
  const auto &seg = it->second[index];
  if (start) *start = seg.start;
  if (end) *end = seg.end;
  if (label) *label = seg.label.c_str();
  if (score) *score = seg.score.value_or(NAN);
  return SS_OK;
}

ss_status ss_segments_read_labels(const char *path, ss_segments **out) {
  if (!path || !out) return fail(SS_ERR_INVALID_ARGUMENT, "null argument");
  return guard([&] {
    auto h = std::make_unique<ss_segments>();
    h->v = read_labels(path);
    *out = h.release();
  });
}

ss_status ss_segments_write_labels(const char *path, const ss_segments *s) {
  if (!path || !s) return fail(SS_ERR_INVALID_ARGUMENT, "null argument");
  return guard([&] { write_labels(path, s->v); });
}

ss_status ss_segments_read_rttm(const char *path, ss_segments **out) {
  if (!path || !out) return fail(SS_ERR_INVALID_ARGUMENT, "null argument");
  return guard([&] {
    auto h = std::make_unique<ss_segments>();
    h->v = read_rttm(path);
    *out = h.release();
  });
}

ss_status ss_segments_write_rttm(const char *path, const ss_segments *s) {
  if (!path || !s) return fail(SS_ERR_INVALID_ARGUMENT, "null argument");
  return guard([&] { write_rttm(path, s->v); });
}

void ss_segments_free(ss_segments *s) { delete s; }

// ---------------------------------------------------------------------------
// SAD
// ---------------------------------------------------------------------------

ss_status ss_mlp_load(const char *path, ss_mlp **out) {
  if (!path || !out) return fail(SS_ERR_INVALID_ARGUMENT, "null argument");
  return guard([&] {
    auto h = std::make_unique<ss_mlp>();
    h->v = load_mlp(path);
    *out = h.release();
  });
}

ss_status ss_mlp_save(const char *path, const ss_mlp *m) {
  if (!path || !m) return fail(SS_ERR_INVALID_ARGUMENT, "null argument");
  return guard([&] { save_mlp(path, m->v); });
}

int ss_mlp_input_dim(const ss_mlp *m) { return m ? m->v.input_dim() : 0; }
void ss_mlp_free(ss_mlp *m) { delete m; }

ss_status ss_trainset_create(ss_trainset **out) {
  if (!out) return fail(SS_ERR_INVALID_ARGUMENT, "null argument");
  *out = new ss_trainset();
  return SS_OK;
}

ss_status ss_trainset_add(ss_trainset *t, const ss_features *f,
                          const int *labels, int64_t num_labels) {
  if (!t || !f || !labels) return fail(SS_ERR_INVALID_ARGUMENT, "null argument");
  if (num_labels != static_cast<int64_t>(f->v.num_frames()))
    return fail(SS_ERR_SHAPE, "labels do not align with frames");
  return guard([&] {
    t->feats.push_back(f->v);
    t->labels.emplace_back(labels, labels + num_labels);
  });
}

ss_status ss_mlp_train(const ss_trainset *t, const int *hidden_sizes,
                       int num_hidden, double learning_rate, double momentum,
                       int epochs, int batch_size, uint64_t seed, ss_mlp **out,
                       double *final_loss) {
  if (!t || !hidden_sizes || num_hidden < 1 || !out)
    return fail(SS_ERR_INVALID_ARGUMENT, "null argument");
  return guard([&] {
    TrainHyper hyper;
    hyper.learning_rate = learning_rate;
    hyper.momentum = momentum;
    hyper.epochs = epochs;
    hyper.batch_size = batch_size;
    hyper.seed = seed;
    auto h = std::make_unique<ss_mlp>();
    h->v = mlp_train(t->feats, t->labels,
                     std::vector<int>(hidden_sizes, hidden_sizes + num_hidden),
                     hyper, final_loss);
    *out = h.release();
  });
}

void ss_trainset_free(ss_trainset *t) { delete t; }

ss_status ss_mlp_forward(const ss_mlp *m, const ss_features *f,
                         ss_posteriors **out) {
  if (!m || !f || !out) return fail(SS_ERR_INVALID_ARGUMENT, "null argument");
  return guard([&] {
    auto h = std::make_unique<ss_posteriors>();
    h->v = mlp_forward(m->v, f->v);
    *out = h.release();
  });
}

ss_status ss_posteriors_create(const char *recording_id, const double *probs,
                               int64_t num_frames, double frame_rate,
                               ss_posteriors **out) {
  if (!recording_id || !out || (!probs && num_frames > 0))
    return fail(SS_ERR_INVALID_ARGUMENT, "null argument");
  return guard([&] {
    auto h = std::make_unique<ss_posteriors>();
    h->v.recording_id = recording_id;
    h->v.frame_rate = frame_rate;
    h->v.probs.assign(probs, probs + num_frames);
    *out = h.release();
  });
}

int64_t ss_posteriors_num_frames(const ss_posteriors *p) {
  return p ? static_cast<int64_t>(p->v.probs.size()) : 0;
}
double ss_posteriors_frame_rate(const ss_posteriors *p) {
  return p ? p->v.frame_rate : 0.0;
}

ss_status ss_posteriors_values(const ss_posteriors *p, double *out,
                               int64_t capacity) {
  if (!p || !out) return fail(SS_ERR_INVALID_ARGUMENT, "null argument");
  if (capacity < static_cast<int64_t>(p->v.probs.size()))
    return fail(SS_ERR_INVALID_ARGUMENT, "buffer too small");
  std::copy(p->v.probs.begin(), p->v.probs.end(), out);
  return SS_OK;
}

void ss_posteriors_free(ss_posteriors *p) { delete p; }

ss_status ss_sad_postprocess(const ss_posteriors *p,
                             const ss_sad_post_config *cfg, ss_segments *into) {
  if (!p || !cfg || !into) return fail(SS_ERR_INVALID_ARGUMENT, "null argument");
  return guard([&] {
    SadPostConfig c{cfg->f_thd, cfg->s_min, cfg->s_thd, cfg->gap_merge};
    auto segs = sad_postprocess(p->v, c);
    auto &dst = into->v[p->v.recording_id];
    dst.insert(dst.end(), segs.begin(), segs.end());
    into->rec_cache.clear();
  });
}

ss_status ss_frame_labels(const ss_segments *refs, const char *recording_id,
                          double frame_rate, int64_t num_frames, int *out) {
  if (!refs || !recording_id || !out)
    return fail(SS_ERR_INVALID_ARGUMENT, "null argument");
  return guard([&] {
    auto it = refs->v.find(recording_id);
    if (it == refs->v.end())
      Throw(ErrorCode::kCoverage,
            std::string("no reference segments for ") + recording_id);
    auto flags = frame_labels_from_segments(it->second, frame_rate, num_frames);
    std::copy(flags.begin(), flags.end(), out);
  });
}

namespace {

std::vector<SadTuneInput> build_tune_inputs(const ss_posteriors *const *posts,
                                            int64_t n, const ss_segments *refs) {
  std::vector<SadTuneInput> inputs;
  for (int64_t i = 0; i < n; ++i) {
    if (!posts[i]) Throw(ErrorCode::kInvalidArgument, "null posterior stream");
    auto it = refs->v.find(posts[i]->v.recording_id);
    if (it == refs->v.end())
      Throw(ErrorCode::kCoverage, "no reference segments for recording " +
                                      posts[i]->v.recording_id);
    inputs.push_back({posts[i]->v, it->second});
  }
  return inputs;
}

}  // namespace

ss_status ss_sad_tune(const ss_posteriors *const *posts, int64_t n,
                      const ss_segments *refs, ss_objective objective,
                      ss_pooling pooling, const double *f_grid, int64_t nf,
                      const int *smin_grid, int64_t ns, const double *sthd_grid,
                      int64_t nt, const int *gap_grid, int64_t ng,
                      ss_sad_post_config *best, double *best_cost) {
  if (!posts || !refs || !f_grid || !smin_grid || !sthd_grid || !best)
    return fail(SS_ERR_INVALID_ARGUMENT, "null argument");
  return guard([&] {
    SadTuneGrid grid;
    grid.f_thd.assign(f_grid, f_grid + nf);
    grid.s_min.assign(smin_grid, smin_grid + ns);
    grid.s_thd.assign(sthd_grid, sthd_grid + nt);
    if (gap_grid && ng > 0)
      grid.gap_merge.assign(gap_grid, gap_grid + ng);
    const auto inputs = build_tune_inputs(posts, n, refs);
    auto [cfg, cost] = tune_postprocess(
        inputs,
        objective == SS_OBJECTIVE_DCF ? SadObjective::kDcf : SadObjective::kDcfInv,
        grid,
        pooling == SS_POOL_DURATIONS ? CostPooling::kPooledDurations
                                     : CostPooling::kAveragedRates);
    best->f_thd = cfg.f_thd;
    best->s_min = cfg.s_min;
    best->s_thd = cfg.s_thd;
    best->gap_merge = cfg.gap_merge;
    if (best_cost) *best_cost = cost;
  });
}

ss_status ss_sad_eval_config(const ss_posteriors *const *posts, int64_t n,
                             const ss_segments *refs, ss_objective objective,
                             ss_pooling pooling, const ss_sad_post_config *cfg,
                             double *cost) {
  if (!posts || !refs || !cfg || !cost)
    return fail(SS_ERR_INVALID_ARGUMENT, "null argument");
  return guard([&] {
    const auto inputs = build_tune_inputs(posts, n, refs);
    *cost = evaluate_sad_config(
        inputs, SadPostConfig{cfg->f_thd, cfg->s_min, cfg->s_thd, cfg->gap_merge},
        objective == SS_OBJECTIVE_DCF ? SadObjective::kDcf : SadObjective::kDcfInv,
        pooling == SS_POOL_DURATIONS ? CostPooling::kPooledDurations
                                     : CostPooling::kAveragedRates);
  });
}

// ---------------------------------------------------------------------------
// metrics
// ---------------------------------------------------------------------------

ss_status ss_sad_error_stats(const ss_segments *refs, const ss_segments *hyps,
                             const char *recording_id, double file_dur,
                             double *p_fn, double *p_fp, double *ref_speech_dur,
                             double *ref_nonspeech_dur) {
  if (!refs || !hyps || !recording_id)
    return fail(SS_ERR_INVALID_ARGUMENT, "null argument");
  return guard([&] {
    auto rit = refs->v.find(recording_id);
    if (rit == refs->v.end())
      Throw(ErrorCode::kCoverage,
            std::string("no reference segments for ") + recording_id);
    static const std::vector<LabeledSegment> kEmpty;
    auto hit = hyps->v.find(recording_id);
    const auto &hyp = hit == hyps->v.end() ? kEmpty : hit->second;
    const auto st = sad_error_stats(rit->second, hyp, file_dur);
    if (p_fn) *p_fn = st.p_fn;
    if (p_fp) *p_fp = st.p_fp;
    if (ref_speech_dur) *ref_speech_dur = st.ref_speech_dur;
    if (ref_nonspeech_dur) *ref_nonspeech_dur = st.ref_nonspeech_dur;
  });
}

double ss_dcf(double p_fn, double p_fp) { return dcf(p_fn, p_fp); }
double ss_dcf_inv(double p_fn, double p_fp) { return dcf_inv(p_fn, p_fp); }

ss_status ss_der(const ss_segments *refs, const ss_segments *hyps,
                 const char *recording_id, double collar, double frame,
                 ss_der_breakdown *out) {
  if (!refs || !hyps || !recording_id || !out)
    return fail(SS_ERR_INVALID_ARGUMENT, "null argument");
  return guard([&] {
    auto rit = refs->v.find(recording_id);
    if (rit == refs->v.end())
      Throw(ErrorCode::kCoverage,
            std::string("no reference segments for ") + recording_id);
    static const std::vector<LabeledSegment> kEmpty;
    auto hit = hyps->v.find(recording_id);
    const auto &hyp = hit == hyps->v.end() ? kEmpty : hit->second;
    const auto d = der(rit->second, hyp, collar, frame);
    out->missed = d.missed;
    out->false_alarm = d.false_alarm;
    out->confusion = d.confusion;
    out->ref_speech = d.ref_speech;
    out->der = d.der;
  });
}

ss_status ss_wer(const char *ref_line, const char *hyp_line,
                 ss_wer_breakdown *out) {
  if (!ref_line || !hyp_line || !out)
    return fail(SS_ERR_INVALID_ARGUMENT, "null argument");
  return guard([&] {
    const auto w = wer(tokenize(ref_line), tokenize(hyp_line));
    out->substitutions = w.substitutions;
    out->insertions = w.insertions;
    out->deletions = w.deletions;
    out->ref_words = w.ref_words;
    out->wer = w.wer;
  });
}

ss_status ss_spk_report_create(const ss_segments *refs, const ss_segments *hyps,
                               ss_spk_report **out) {
  if (!refs || !hyps || !out) return fail(SS_ERR_INVALID_ARGUMENT, "null argument");
  return guard([&] {
    auto h = std::make_unique<ss_spk_report>();
    h->v = speaker_count_report(refs->v, hyps->v);
    *out = h.release();
  });
}

int64_t ss_spk_report_size(const ss_spk_report *r) {
  return r ? static_cast<int64_t>(r->v.rows.size()) : 0;
}

ss_status ss_spk_report_row(const ss_spk_report *r, int64_t index,
                            const char **recording_id, int *ref_count,
                            int *hyp_count) {
  if (!r || index < 0 || index >= static_cast<int64_t>(r->v.rows.size()))
    return fail(SS_ERR_INVALID_ARGUMENT, "row index out of range");
  const auto &row = r->v.rows[index];
  if (recording_id) *recording_id = row.recording_id.c_str();
  if (ref_count) *ref_count = row.ref_speakers;
  if (hyp_count) *hyp_count = row.hyp_speakers;
  return SS_OK;
}

double ss_spk_report_mae(const ss_spk_report *r) { return r ? r->v.mae : 0.0; }
void ss_spk_report_free(ss_spk_report *r) { delete r; }

// ---------------------------------------------------------------------------
// transcripts
// ---------------------------------------------------------------------------

ss_status ss_transcripts_create(ss_transcripts **out) {
  if (!out) return fail(SS_ERR_INVALID_ARGUMENT, "null argument");
  *out = new ss_transcripts();
  return SS_OK;
}

ss_status ss_transcripts_set(ss_transcripts *t, const char *utt_id,
                             const char *text) {
  if (!t || !utt_id || !text) return fail(SS_ERR_INVALID_ARGUMENT, "null argument");
  t->v[utt_id] = text;
  t->utt_cache.clear();
  return SS_OK;
}

ss_status ss_transcripts_read(const char *path, ss_transcripts **out) {
  if (!path || !out) return fail(SS_ERR_INVALID_ARGUMENT, "null argument");
  return guard([&] {
    auto h = std::make_unique<ss_transcripts>();
    h->v = read_transcripts(path);
    *out = h.release();
  });
}

ss_status ss_transcripts_write(const char *path, const ss_transcripts *t) {
  if (!path || !t) return fail(SS_ERR_INVALID_ARGUMENT, "null argument");
  return guard([&] { write_transcripts(path, t->v); });
}

int64_t ss_transcripts_size(const ss_transcripts *t) {
  return t ? static_cast<int64_t>(t->v.size()) : 0;
}

const char *ss_transcripts_utt(const ss_transcripts *t, int64_t index) {
  if (!t || index < 0 || index >= static_cast<int64_t>(t->v.size())) return nullptr;
  if (t->utt_cache.size() != t->v.size()) {
    t->utt_cache.clear();
    for (const auto &[utt, text] : t->v) t->utt_cache.push_back(utt);
  }
  return t->utt_cache[index].c_str();
}

const char *ss_transcripts_get(const ss_transcripts *t, const char *utt_id) {
  if (!t || !utt_id) return nullptr;
  auto it = t->v.find(utt_id);
  return it == t->v.end() ? nullptr : it->second.c_str();
}

void ss_transcripts_free(ss_transcripts *t) { delete t; }

// ---------------------------------------------------------------------------
// embeddings
// ---------------------------------------------------------------------------

ss_status ss_chunks_make(const ss_segments *speech, const char *recording_id,
                         double chunk_len, double step, double min_len,
                         ss_chunks **out) {
  if (!speech || !recording_id || !out)
    return fail(SS_ERR_INVALID_ARGUMENT, "null argument");
  return guard([&] {
    static const std::vector<LabeledSegment> kEmpty;
    auto it = speech->v.find(recording_id);
    const auto &segs = it == speech->v.end() ? kEmpty : it->second;
    auto h = std::make_unique<ss_chunks>();
    h->v = make_chunks(segs, recording_id, chunk_len, step, min_len);
    *out = h.release();
  });
}

int64_t ss_chunks_count(const ss_chunks *c) {
  return c ? static_cast<int64_t>(c->v.size()) : 0;
}

ss_status ss_chunks_get(const ss_chunks *c, int64_t index, double *start,
                        double *end) {
  if (!c || index < 0 || index >= static_cast<int64_t>(c->v.size()))
    return fail(SS_ERR_INVALID_ARGUMENT, "chunk index out of range");
  if (start) *start = c->v[index].start;
  if (end) *end = c->v[index].end;
  return SS_OK;
}

void ss_chunks_free(ss_chunks *c) { delete c; }

ss_status ss_toy_embed_chunks(const ss_features *f, const ss_chunks *c,
                              int out_dim, uint64_t seed, ss_embeddings **out) {
  if (!f || !c || !out) return fail(SS_ERR_INVALID_ARGUMENT, "null argument");
  return guard([&] {
    auto h = std::make_unique<ss_embeddings>();
    h->v.kind = EmbeddingKind::kToy;
    h->v.vectors.resize(static_cast<Eigen::Index>(c->v.size()), out_dim);
    for (size_t i = 0; i < c->v.size(); ++i) {
      h->v.keys.push_back({c->v[i].recording_id, c->v[i].start, c->v[i].end, ""});
      h->v.vectors.row(static_cast<Eigen::Index>(i)) =
          extract_toy_embedding(f->v, c->v[i], out_dim, seed).transpose();
    }
    *out = h.release();
  });
}

ss_status ss_toy_embed_speaker_chunks(const ss_features *f,
                                      const ss_segments *speaker_refs,
                                      const char *recording_id,
                                      double target_len, int out_dim,
                                      uint64_t seed, ss_embeddings **out) {
  if (!f || !speaker_refs || !recording_id || !out)
    return fail(SS_ERR_INVALID_ARGUMENT, "null argument");
  return guard([&] {
    auto it = speaker_refs->v.find(recording_id);
    if (it == speaker_refs->v.end())
      Throw(ErrorCode::kCoverage,
            std::string("no reference segments for ") + recording_id);
    const auto chunks = merge_speaker_chunks(it->second, recording_id, target_len);
    auto h = std::make_unique<ss_embeddings>();
    h->v.kind = EmbeddingKind::kToy;
    h->v.vectors.resize(static_cast<Eigen::Index>(chunks.size()), out_dim);
    for (size_t i = 0; i < chunks.size(); ++i) {
      const auto &ch = chunks[i];
      h->v.keys.push_back({ch.recording_id, ch.spans.front().first,
                           ch.spans.back().second, ch.speaker});
      h->v.vectors.row(static_cast<Eigen::Index>(i)) =
          extract_toy_embedding(f->v, ch, out_dim, seed).transpose();
    }
    *out = h.release();
  });
}

ss_status ss_embeddings_load(const char *path, ss_embeddings **out) {
  if (!path || !out) return fail(SS_ERR_INVALID_ARGUMENT, "null argument");
  return guard([&] {
    auto h = std::make_unique<ss_embeddings>();
    h->v = load_embeddings(path);
    *out = h.release();
  });
}

ss_status ss_embeddings_save(const char *path, const ss_embeddings *e) {
  if (!path || !e) return fail(SS_ERR_INVALID_ARGUMENT, "null argument");
  return guard([&] { save_embeddings(path, e->v); });
}

ss_status ss_embeddings_load_text(const char *path, ss_embeddings **out) {
  if (!path || !out) return fail(SS_ERR_INVALID_ARGUMENT, "null argument");
  return guard([&] {
    auto h = std::make_unique<ss_embeddings>();
    h->v = load_embeddings_text(path);
    *out = h.release();
  });
}

int64_t ss_embeddings_count(const ss_embeddings *e) { return e ? e->v.size() : 0; }
int ss_embeddings_dim(const ss_embeddings *e) { return e ? e->v.dim() : 0; }

ss_status ss_embeddings_key(const ss_embeddings *e, int64_t index,
                            const char **recording_id, double *start,
                            double *end, const char **speaker) {
  if (!e || index < 0 || index >= e->v.size())
    return fail(SS_ERR_INVALID_ARGUMENT, "embedding index out of range");
  const auto &k = e->v.keys[index];
  if (recording_id) *recording_id = k.recording_id.c_str();
  if (start) *start = k.start;
  if (end) *end = k.end;
  if (speaker) *speaker = k.speaker.c_str();
  return SS_OK;
}

ss_status ss_embeddings_vector(const ss_embeddings *e, int64_t index,
                               double *out, int64_t capacity) {
  if (!e || !out || index < 0 || index >= e->v.size())
    return fail(SS_ERR_INVALID_ARGUMENT, "embedding index out of range");
  if (capacity < e->v.dim()) return fail(SS_ERR_INVALID_ARGUMENT, "buffer too small");
  for (int c = 0; c < e->v.dim(); ++c) out[c] = e->v.vectors(index, c);
  return SS_OK;
}

ss_status ss_embeddings_concat(const ss_embeddings *a, const ss_embeddings *b,
                               ss_embeddings **out) {
  if (!a || !b || !out) return fail(SS_ERR_INVALID_ARGUMENT, "null argument");
  return guard([&] {
    if (a->v.size() > 0 && b->v.size() > 0 && a->v.dim() != b->v.dim())
      Throw(ErrorCode::kShape, "embedding dims differ");
    auto h = std::make_unique<ss_embeddings>();
    h->v = a->v;
    h->v.keys.insert(h->v.keys.end(), b->v.keys.begin(), b->v.keys.end());
    const int dim = a->v.size() > 0 ? a->v.dim() : b->v.dim();
    h->v.vectors.conservativeResize(a->v.size() + b->v.size(), dim);
    if (b->v.size() > 0) h->v.vectors.bottomRows(b->v.size()) = b->v.vectors;
    *out = h.release();
  });
}

ss_status ss_embeddings_fuse(const ss_embeddings *a, const ss_embeddings *b,
                             ss_embeddings **out) {
  if (!a || !b || !out) return fail(SS_ERR_INVALID_ARGUMENT, "null argument");
  return guard([&] {
    auto h = std::make_unique<ss_embeddings>();
    h->v = fuse(a->v, b->v);
    *out = h.release();
  });
}

ss_status ss_embeddings_label(ss_embeddings *e, const ss_segments *refs) {
  if (!e || !refs) return fail(SS_ERR_INVALID_ARGUMENT, "null argument");
  return guard([&] { label_by_overlap(&e->v, refs->v); });
}

void ss_embeddings_free(ss_embeddings *e) { delete e; }

ss_status ss_whitener_fit(const ss_embeddings *const *sets, int64_t n,
                          ss_whitener **out) {
  if (!sets || !out) return fail(SS_ERR_INVALID_ARGUMENT, "null argument");
  return guard([&] {
    std::vector<const EmbeddingSet *> pool;
    for (int64_t i = 0; i < n; ++i)
      if (sets[i]) pool.push_back(&sets[i]->v);
    auto h = std::make_unique<ss_whitener>();
    h->v = fit_whitener(pool);
    *out = h.release();
  });
}

ss_status ss_whitener_apply(const ss_whitener *w, const ss_embeddings *e,
                            ss_embeddings **out) {
  if (!w || !e || !out) return fail(SS_ERR_INVALID_ARGUMENT, "null argument");
  return guard([&] {
    auto h = std::make_unique<ss_embeddings>();
    h->v = apply_whitener(w->v, e->v);
    *out = h.release();
  });
}

void ss_whitener_free(ss_whitener *w) { delete w; }

// ---------------------------------------------------------------------------
// diarization
// ---------------------------------------------------------------------------

ss_status ss_plda_fit(const ss_embeddings *labeled, ss_plda **out) {
  if (!labeled || !out) return fail(SS_ERR_INVALID_ARGUMENT, "null argument");
  return guard([&] {
    auto h = std::make_unique<ss_plda>();
    h->v = plda_fit(labeled->v);
    *out = h.release();
  });
}

ss_status ss_plda_save(const char *path, const ss_plda *p) {
  if (!path || !p) return fail(SS_ERR_INVALID_ARGUMENT, "null argument");
  return guard([&] { save_plda(path, p->v); });
}

ss_status ss_plda_load(const char *path, ss_plda **out) {
  if (!path || !out) return fail(SS_ERR_INVALID_ARGUMENT, "null argument");
  return guard([&] {
    auto h = std::make_unique<ss_plda>();
    h->v = load_plda(path);
    *out = h.release();
  });
}

int ss_plda_dim(const ss_plda *p) { return p ? p->v.dim() : 0; }

ss_status ss_plda_score_pair(const ss_plda *p, const double *x1,
                             const double *x2, int dim, double *llr) {
  if (!p || !x1 || !x2 || !llr) return fail(SS_ERR_INVALID_ARGUMENT, "null argument");
  return guard([&] {
    Eigen::VectorXd v1 = Eigen::Map<const Eigen::VectorXd>(x1, dim);
    Eigen::VectorXd v2 = Eigen::Map<const Eigen::VectorXd>(x2, dim);
    *llr = plda_score_pair(p->v, v1, v2);
  });
}

void ss_plda_free(ss_plda *p) { delete p; }

ss_status ss_ahc(const double *scores, int64_t n, double stop_threshold,
                 int *labels_out, int *num_clusters) {
  if ((!scores && n > 0) || !labels_out)
    return fail(SS_ERR_INVALID_ARGUMENT, "null argument");
  return guard([&] {
    Eigen::MatrixXd m(n, n);
    for (int64_t r = 0; r < n; ++r)
      for (int64_t c = 0; c < n; ++c) m(r, c) = scores[r * n + c];
    AhcConfig cfg;
    cfg.stop_threshold = stop_threshold;
    const auto cl = ahc_cluster(m, cfg);
    std::copy(cl.labels.begin(), cl.labels.end(), labels_out);
    if (num_clusters) *num_clusters = cl.num_speakers;
  });
}

ss_status ss_diarize_recording(const ss_embeddings *e, const char *recording_id,
                               const ss_whitener *whitener, const ss_plda *plda,
                               const ss_ahc_config *ahc, const ss_vb_config *vb,
                               ss_segments *into) {
  if (!e || !recording_id || !plda || !ahc || !into)
    return fail(SS_ERR_INVALID_ARGUMENT, "null argument");
  return guard([&] {
    // Collect this recording's chunks in time order.
    std::vector<int64_t> rows;
    for (int64_t i = 0; i < e->v.size(); ++i)
      if (e->v.keys[i].recording_id == recording_id) rows.push_back(i);
    std::stable_sort(rows.begin(), rows.end(), [&](int64_t a, int64_t b) {
      return e->v.keys[a].start < e->v.keys[b].start;
    });
    std::vector<Chunk> chunks;
    Eigen::MatrixXd vectors(rows.size(), e->v.dim());
    for (size_t i = 0; i < rows.size(); ++i) {
      const auto &k = e->v.keys[rows[i]];
      chunks.push_back({k.recording_id, k.start, k.end, -1});
      vectors.row(static_cast<Eigen::Index>(i)) = e->v.vectors.row(rows[i]);
    }

    AhcConfig acfg{ahc->stop_threshold, ahc->pca_components};
    VbConfig vcfg;
    if (vb) {
      vcfg.loop_prob = vb->loop_prob;
      vcfg.max_iters = vb->max_iters;
      vcfg.acoustic_scale = vb->acoustic_scale;
      vcfg.min_occupancy = vb->min_occupancy;
      vcfg.convergence_tol = vb->convergence_tol;
    }
    const auto segs =
        diarize_recording(chunks, vectors, whitener ? &whitener->v : nullptr,
                          plda->v, acfg, vb ? &vcfg : nullptr);
    auto &dst = into->v[recording_id];
    dst.insert(dst.end(), segs.begin(), segs.end());
    into->rec_cache.clear();
  });
}

// ---------------------------------------------------------------------------
// SST
// ---------------------------------------------------------------------------

namespace {

ss_sst_report to_c_report(const SelectionReport &r) {
  return {r.selected_speech_hours, r.selected_nonspeech_hours, r.num_selected,
          r.num_too_short,         r.num_too_long,             r.num_low_confidence,
          r.rejected_hours};
}

}  // namespace

ss_status ss_sst_read(const char *path, ss_sst **out) {
  if (!path || !out) return fail(SS_ERR_INVALID_ARGUMENT, "null argument");
  return guard([&] {
    auto h = std::make_unique<ss_sst>();
    h->v = read_hyp_tsv(path);
    *out = h.release();
  });
}

ss_status ss_sst_write(const char *path, const ss_sst *s) {
  if (!path || !s) return fail(SS_ERR_INVALID_ARGUMENT, "null argument");
  return guard([&] { write_hyp_tsv(path, s->v); });
}

int64_t ss_sst_count(const ss_sst *s) {
  return s ? static_cast<int64_t>(s->v.size()) : 0;
}

ss_status ss_sst_select(const ss_sst *s, double min_dur, double max_dur,
                        double min_conf, ss_sst **selected,
                        ss_sst_report *report) {
  if (!s || !selected) return fail(SS_ERR_INVALID_ARGUMENT, "null argument");
  return guard([&] {
    auto [sel, rep] = select_segments(s->v, min_dur, max_dur, min_conf);
    auto h = std::make_unique<ss_sst>();
    h->v = std::move(sel);
    if (report) *report = to_c_report(rep);
    *selected = h.release();
  });
}

ss_status ss_sst_select_budget(const ss_sst *s, double target_hours,
                               ss_sst **selected) {
  if (!s || !selected) return fail(SS_ERR_INVALID_ARGUMENT, "null argument");
  return guard([&] {
    auto h = std::make_unique<ss_sst>();
    h->v = select_budget(s->v, target_hours);
    *selected = h.release();
  });
}

ss_status ss_sst_duration_report(const ss_sst *s, ss_sst_report *report) {
  if (!s || !report) return fail(SS_ERR_INVALID_ARGUMENT, "null argument");
  return guard([&] { *report = to_c_report(duration_report(s->v)); });
}

ss_status ss_sst_write_manifest(const char *path, const ss_sst *supervised,
                                const ss_sst *selected, double weight_sup,
                                double weight_unsup) {
  if (!path || !supervised || !selected)
    return fail(SS_ERR_INVALID_ARGUMENT, "null argument");
  return guard([&] {
    write_manifest(path, weighting_manifest(supervised->v, selected->v,
                                            weight_sup, weight_unsup));
  });
}

void ss_sst_free(ss_sst *s) { delete s; }
