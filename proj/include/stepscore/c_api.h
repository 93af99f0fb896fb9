/* include/stepscore/c_api.h */

/* Copyright 2024  The stepscore authors */

/* Licensed under the Apache License, Version 2.0 (the "License");
   you may not use this file except in compliance with the License.
   You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

   THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
   KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
   WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
   MERCHANTABLITY OR NON-INFRINGEMENT.
   See the Apache 2 License for the specific language governing permissions and
   limitations under the License. */

/* C interface to the stepscore library: speech activity detection, speaker
 * diarization and scoring. All objects are opaque handles created and freed
 * through this API; every fallible call returns ss_status and leaves a
 * human-readable message in ss_last_error() (thread-local). Handles are
 * immutable once built unless noted, and may be shared across threads. */

#ifndef STEPSCORE_C_API_H_
#define STEPSCORE_C_API_H_

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#ifndef SS_API
#define SS_API __attribute__((visibility("default")))
#endif

typedef enum ss_status {
  SS_OK = 0,
  SS_ERR_INVALID_ARGUMENT = 1,
  SS_ERR_IO = 2,
  SS_ERR_FORMAT = 3,
  SS_ERR_UNSUPPORTED_FORMAT = 4,
  SS_ERR_SHAPE = 5,
  SS_ERR_DEGENERATE_DATA = 6,
  SS_ERR_RANK = 7,
  SS_ERR_NUMERICAL = 8,
  SS_ERR_UNDEFINED_RATE = 9,
  SS_ERR_COVERAGE = 10,
  SS_ERR_ALIGNMENT = 11,
  SS_ERR_EMPTY_INPUT = 12,
  SS_ERR_INTERNAL = 13
} ss_status;

SS_API const char *ss_version(void);
/* Message for the most recent failing call on this thread. */
SS_API const char *ss_last_error(void);

/* ------------------------------------------------------------------ audio */

typedef struct ss_audio ss_audio;

SS_API ss_status ss_audio_read_wav(const char *path, const char *recording_id,
                                   ss_audio **out);
SS_API ss_status ss_audio_write_wav(const char *path, const double *samples,
                                    int64_t num_samples, int sample_rate);
SS_API ss_status ss_audio_create(const char *recording_id,
                                 const double *samples, int64_t num_samples,
                                 int sample_rate, ss_audio **out);
SS_API int ss_audio_sample_rate(const ss_audio *a);
SS_API int64_t ss_audio_num_samples(const ss_audio *a);
SS_API double ss_audio_duration(const ss_audio *a);
SS_API const char *ss_audio_recording_id(const ss_audio *a);
SS_API void ss_audio_free(ss_audio *a);

/* --------------------------------------------------------------- features */

typedef struct ss_features ss_features;

SS_API ss_status ss_features_mfcc(const ss_audio *a, double window_len,
                                  double hop, int num_ceps, int include_deltas,
                                  ss_features **out);
SS_API ss_status ss_features_append_deltas(const ss_features *f,
                                           ss_features **out);
SS_API ss_status ss_features_stack_context(const ss_features *f, int context,
                                           ss_features **out);
SS_API int64_t ss_features_num_frames(const ss_features *f);
SS_API int ss_features_dim(const ss_features *f);
SS_API double ss_features_frame_rate(const ss_features *f);
SS_API ss_status ss_features_save(const char *path, const ss_features *f);
SS_API ss_status ss_features_load(const char *path, const char *recording_id,
                                  ss_features **out);
SS_API void ss_features_free(ss_features *f);

/* --------------------------------------------------------------- segments */

/* A table of labeled time segments grouped by recording id. Used for SAD
 * labels, reference speech and RTTM speaker segments alike. */
typedef struct ss_segments ss_segments;

SS_API ss_status ss_segments_create(ss_segments **out);
/* score: mean probability, or NAN when not applicable. */
SS_API ss_status ss_segments_add(ss_segments *s, const char *recording_id,
                                 double start, double end, const char *label,
                                 double score);
SS_API int64_t ss_segments_num_recordings(const ss_segments *s);
SS_API const char *ss_segments_recording(const ss_segments *s, int64_t index);
SS_API int64_t ss_segments_count(const ss_segments *s, const char *recording_id);
SS_API ss_status ss_segments_get(const ss_segments *s, const char *recording_id,
                                 int64_t index, double *start, double *end,
                                 const char **label, double *score);
SS_API ss_status ss_segments_read_labels(const char *path, ss_segments **out);
SS_API ss_status ss_segments_write_labels(const char *path,
                                          const ss_segments *s);
SS_API ss_status ss_segments_read_rttm(const char *path, ss_segments **out);
SS_API ss_status ss_segments_write_rttm(const char *path, const ss_segments *s);
SS_API void ss_segments_free(ss_segments *s);

/* -------------------------------------------------------------------- SAD */

typedef struct ss_mlp ss_mlp;
typedef struct ss_posteriors ss_posteriors;
typedef struct ss_trainset ss_trainset;

typedef struct ss_sad_post_config {
  double f_thd;
  int s_min;
  double s_thd;
  int gap_merge;
} ss_sad_post_config;

SS_API ss_status ss_mlp_load(const char *path, ss_mlp **out);
SS_API ss_status ss_mlp_save(const char *path, const ss_mlp *m);
SS_API int ss_mlp_input_dim(const ss_mlp *m);
SS_API void ss_mlp_free(ss_mlp *m);

SS_API ss_status ss_trainset_create(ss_trainset **out);
/* labels: one 0/1 flag per feature frame. */
SS_API ss_status ss_trainset_add(ss_trainset *t, const ss_features *f,
                                 const int *labels, int64_t num_labels);
SS_API ss_status ss_mlp_train(const ss_trainset *t, const int *hidden_sizes,
                              int num_hidden, double learning_rate,
                              double momentum, int epochs, int batch_size,
                              uint64_t seed, ss_mlp **out, double *final_loss);
SS_API void ss_trainset_free(ss_trainset *t);

SS_API ss_status ss_mlp_forward(const ss_mlp *m, const ss_features *f,
                                ss_posteriors **out);
SS_API ss_status ss_posteriors_create(const char *recording_id,
                                      const double *probs, int64_t num_frames,
                                      double frame_rate, ss_posteriors **out);
SS_API int64_t ss_posteriors_num_frames(const ss_posteriors *p);
SS_API double ss_posteriors_frame_rate(const ss_posteriors *p);
SS_API ss_status ss_posteriors_values(const ss_posteriors *p, double *out,
                                      int64_t capacity);
SS_API void ss_posteriors_free(ss_posteriors *p);

/* Appends this recording's speech segments to `into`. */
SS_API ss_status ss_sad_postprocess(const ss_posteriors *p,
                                    const ss_sad_post_config *cfg,
                                    ss_segments *into);

/* Per-frame 0/1 speech flags from reference segments of one recording. */
SS_API ss_status ss_frame_labels(const ss_segments *refs,
                                 const char *recording_id, double frame_rate,
                                 int64_t num_frames, int *out);

typedef enum ss_objective { SS_OBJECTIVE_DCF = 0, SS_OBJECTIVE_DCF_INV = 1 } ss_objective;
typedef enum ss_pooling { SS_POOL_DURATIONS = 0, SS_POOL_AVERAGE_RATES = 1 } ss_pooling;

/* Exhaustive grid search over postprocessing parameters. `posts` holds one
 * posterior stream per recording; references are matched by recording id. */
SS_API ss_status ss_sad_tune(const ss_posteriors *const *posts, int64_t n,
                             const ss_segments *refs, ss_objective objective,
                             ss_pooling pooling, const double *f_grid,
                             int64_t nf, const int *smin_grid, int64_t ns,
                             const double *sthd_grid, int64_t nt,
                             const int *gap_grid, int64_t ng,
                             ss_sad_post_config *best, double *best_cost);
SS_API ss_status ss_sad_eval_config(const ss_posteriors *const *posts,
                                    int64_t n, const ss_segments *refs,
                                    ss_objective objective, ss_pooling pooling,
                                    const ss_sad_post_config *cfg,
                                    double *cost);

/* ---------------------------------------------------------------- metrics */

SS_API ss_status ss_sad_error_stats(const ss_segments *refs,
                                    const ss_segments *hyps,
                                    const char *recording_id, double file_dur,
                                    double *p_fn, double *p_fp,
                                    double *ref_speech_dur,
                                    double *ref_nonspeech_dur);
SS_API double ss_dcf(double p_fn, double p_fp);
SS_API double ss_dcf_inv(double p_fn, double p_fp);

typedef struct ss_der_breakdown {
  double missed;
  double false_alarm;
  double confusion;
  double ref_speech;
  double der;
} ss_der_breakdown;

SS_API ss_status ss_der(const ss_segments *refs, const ss_segments *hyps,
                        const char *recording_id, double collar, double frame,
                        ss_der_breakdown *out);

typedef struct ss_wer_breakdown {
  int substitutions;
  int insertions;
  int deletions;
  int ref_words;
  double wer;
} ss_wer_breakdown;

/* Lines are whitespace-tokenized and case-folded. */
SS_API ss_status ss_wer(const char *ref_line, const char *hyp_line,
                        ss_wer_breakdown *out);

typedef struct ss_spk_report ss_spk_report;

SS_API ss_status ss_spk_report_create(const ss_segments *refs,
                                      const ss_segments *hyps,
                                      ss_spk_report **out);
SS_API int64_t ss_spk_report_size(const ss_spk_report *r);
SS_API ss_status ss_spk_report_row(const ss_spk_report *r, int64_t index,
                                   const char **recording_id, int *ref_count,
                                   int *hyp_count);
SS_API double ss_spk_report_mae(const ss_spk_report *r);
SS_API void ss_spk_report_free(ss_spk_report *r);

/* ----------------------------------------------------------- transcripts */

typedef struct ss_transcripts ss_transcripts;

SS_API ss_status ss_transcripts_create(ss_transcripts **out);
SS_API ss_status ss_transcripts_set(ss_transcripts *t, const char *utt_id,
                                    const char *text);
SS_API ss_status ss_transcripts_read(const char *path, ss_transcripts **out);
SS_API ss_status ss_transcripts_write(const char *path,
                                      const ss_transcripts *t);
SS_API int64_t ss_transcripts_size(const ss_transcripts *t);
SS_API const char *ss_transcripts_utt(const ss_transcripts *t, int64_t index);
/* NULL when the utterance is absent. */
SS_API const char *ss_transcripts_get(const ss_transcripts *t,
                                      const char *utt_id);
SS_API void ss_transcripts_free(ss_transcripts *t);

/* ------------------------------------------------------------- embeddings */

typedef struct ss_chunks ss_chunks;
typedef struct ss_embeddings ss_embeddings;
typedef struct ss_whitener ss_whitener;

/* Sliding-window chunks over one recording's speech segments. */
SS_API ss_status ss_chunks_make(const ss_segments *speech,
                                const char *recording_id, double chunk_len,
                                double step, double min_len, ss_chunks **out);
SS_API int64_t ss_chunks_count(const ss_chunks *c);
SS_API ss_status ss_chunks_get(const ss_chunks *c, int64_t index,
                               double *start, double *end);
SS_API void ss_chunks_free(ss_chunks *c);

/* Toy embeddings (per-coefficient mean+std, fixed seeded projection) for the
 * chunks of one recording. */
SS_API ss_status ss_toy_embed_chunks(const ss_features *f, const ss_chunks *c,
                                     int out_dim, uint64_t seed,
                                     ss_embeddings **out);
/* Speaker-merged training chunks (target_len pieces per speaker) straight to
 * labeled embeddings. */
SS_API ss_status ss_toy_embed_speaker_chunks(const ss_features *f,
                                             const ss_segments *speaker_refs,
                                             const char *recording_id,
                                             double target_len, int out_dim,
                                             uint64_t seed,
                                             ss_embeddings **out);

SS_API ss_status ss_embeddings_load(const char *path, ss_embeddings **out);
SS_API ss_status ss_embeddings_save(const char *path, const ss_embeddings *e);
SS_API ss_status ss_embeddings_load_text(const char *path, ss_embeddings **out);
SS_API int64_t ss_embeddings_count(const ss_embeddings *e);
SS_API int ss_embeddings_dim(const ss_embeddings *e);
SS_API ss_status ss_embeddings_key(const ss_embeddings *e, int64_t index,
                                   const char **recording_id, double *start,
                                   double *end, const char **speaker);
SS_API ss_status ss_embeddings_vector(const ss_embeddings *e, int64_t index,
                                      double *out, int64_t capacity);
/* Merges entries of b into a copy of a (keys must not collide). */
SS_API ss_status ss_embeddings_concat(const ss_embeddings *a,
                                      const ss_embeddings *b,
                                      ss_embeddings **out);
/* Per-key vector concatenation; key sets must match. */
SS_API ss_status ss_embeddings_fuse(const ss_embeddings *a,
                                    const ss_embeddings *b,
                                    ss_embeddings **out);
/* Assigns speaker labels by maximum overlap with reference segments. */
SS_API ss_status ss_embeddings_label(ss_embeddings *e, const ss_segments *refs);
SS_API void ss_embeddings_free(ss_embeddings *e);

SS_API ss_status ss_whitener_fit(const ss_embeddings *const *sets, int64_t n,
                                 ss_whitener **out);
SS_API ss_status ss_whitener_apply(const ss_whitener *w,
                                   const ss_embeddings *e, ss_embeddings **out);
SS_API void ss_whitener_free(ss_whitener *w);

/* ------------------------------------------------------------ diarization */

typedef struct ss_plda ss_plda;

typedef struct ss_ahc_config {
  double stop_threshold;
  int pca_components;
} ss_ahc_config;

typedef struct ss_vb_config {
  double loop_prob;
  int max_iters;
  double acoustic_scale;
  double min_occupancy;
  double convergence_tol;
} ss_vb_config;

SS_API ss_status ss_plda_fit(const ss_embeddings *labeled, ss_plda **out);
SS_API ss_status ss_plda_save(const char *path, const ss_plda *p);
SS_API ss_status ss_plda_load(const char *path, ss_plda **out);
SS_API int ss_plda_dim(const ss_plda *p);
SS_API ss_status ss_plda_score_pair(const ss_plda *p, const double *x1,
                                    const double *x2, int dim, double *llr);
SS_API void ss_plda_free(ss_plda *p);

/* Average-linkage AHC over a symmetric n x n score matrix (row-major).
 * labels_out must hold n ints. */
SS_API ss_status ss_ahc(const double *scores, int64_t n, double stop_threshold,
                        int *labels_out, int *num_clusters);

/* Whole per-recording pipeline over the entries of `e` that belong to
 * `recording_id` (time order): optional whitening, per-recording PCA, PLDA
 * scoring, AHC, optional VB resegmentation. Appends speaker segments to
 * `into`. */
SS_API ss_status ss_diarize_recording(const ss_embeddings *e,
                                      const char *recording_id,
                                      const ss_whitener *whitener,
                                      const ss_plda *plda,
                                      const ss_ahc_config *ahc,
                                      const ss_vb_config *vb,
                                      ss_segments *into);

/* ---------------------------------------------------------------- SST */

typedef struct ss_sst ss_sst;

typedef struct ss_sst_report {
  double selected_speech_hours;
  double selected_nonspeech_hours;
  int64_t num_selected;
  int64_t num_too_short;
  int64_t num_too_long;
  int64_t num_low_confidence;
  double rejected_hours;
} ss_sst_report;

SS_API ss_status ss_sst_read(const char *path, ss_sst **out);
SS_API ss_status ss_sst_write(const char *path, const ss_sst *s);
SS_API int64_t ss_sst_count(const ss_sst *s);
SS_API ss_status ss_sst_select(const ss_sst *s, double min_dur, double max_dur,
                               double min_conf, ss_sst **selected,
                               ss_sst_report *report);
SS_API ss_status ss_sst_select_budget(const ss_sst *s, double target_hours,
                                      ss_sst **selected);
SS_API ss_status ss_sst_duration_report(const ss_sst *s, ss_sst_report *report);
SS_API ss_status ss_sst_write_manifest(const char *path,
                                       const ss_sst *supervised,
                                       const ss_sst *selected,
                                       double weight_sup, double weight_unsup);
SS_API void ss_sst_free(ss_sst *s);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* STEPSCORE_C_API_H_ */
