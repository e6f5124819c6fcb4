/* C API for the silentwave backscatter lip-motion pipeline. */

#ifndef SILENTWAVE_H
#define SILENTWAVE_H

/* Generated by cbindgen from silentwave-ffi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Call outcome. Non-zero values indicate failure; see
 * `sw_last_error_message` for details.
 */
typedef enum SwStatus {
  SW_STATUS_OK = 0,
  SW_STATUS_NULL_ARGUMENT = 1,
  SW_STATUS_INVALID_ARGUMENT = 2,
  SW_STATUS_IO_ERROR = 3,
  SW_STATUS_PROCESSING_ERROR = 4,
  SW_STATUS_BUFFER_TOO_SMALL = 5,
} SwStatus;

/**
 * Opaque complex baseband recording.
 */
typedef struct SwIqRecording SwIqRecording;

/**
 * Opaque subword lexicon.
 */
typedef struct SwLexicon SwLexicon;

/**
 * Opaque trained sequence model.
 */
typedef struct SwModel SwModel;

/**
 * Opaque lip-motion trace.
 */
typedef struct SwMotionTrace SwMotionTrace;

/**
 * Opaque list of unit segments.
 */
typedef struct SwSegmentList SwSegmentList;

/**
 * Isolation-chain settings; mirror of the library defaults.
 */
typedef struct SwIsolationParams {
  double delta_f1_hz;
  double bandwidth_hz;
  double trace_rate_hz;
  size_t smooth_len;
  double lowpass_high_hz;
  size_t lowpass_taps;
  double gate_window_s;
  double gate_alpha;
  size_t vmd_modes;
  double vmd_penalty;
  double vmd_tol;
  size_t vmd_max_iter;
  double keep_low_hz;
  double keep_high_hz;
} SwIsolationParams;

/**
 * Segmenter thresholds (see library docs for semantics).
 */
typedef struct SwSegmenterParams {
  double w_s;
  double w_l;
  double w_f;
  double lambda1;
  double lambda2;
  double min_region_s;
  double activity_ratio;
} SwSegmenterParams;

/**
 * STFT frontend settings for decoding.
 */
typedef struct SwFrontendParams {
  double resample_hz;
  size_t window_len;
  size_t hop;
  double log_floor;
} SwFrontendParams;

/**
 * Word-level alignment counts and derived metrics.
 */
typedef struct SwEvalResult {
  double wer;
  double word_accuracy;
  size_t correct;
  size_t substitutions;
  size_t deletions;
  size_t insertions;
} SwEvalResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copy the last error message (NUL-terminated) into `buf`. Returns the
 * full message length in bytes, excluding the terminator; pass a null
 * buffer to query the required capacity.
 */
size_t sw_last_error_message(char *buf, size_t cap);

/**
 * Library version as a static NUL-terminated string.
 */
const char *sw_version(void);

/**
 * Read an IQ file (interleaved little-endian f32 pairs with a sidecar
 * manifest) into a new handle.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum SwStatus sw_iq_read(const char *path, struct SwIqRecording **out);

/**
 * Build a recording from interleaved I/Q floats (`n_pairs` complex
 * samples).
 *
 * # Safety
 * `iq_interleaved` must point to `2 * n_pairs` floats.
 */
enum SwStatus sw_iq_from_samples(const float *iq_interleaved,
                                 size_t n_pairs,
                                 double sample_rate_hz,
                                 struct SwIqRecording **out);

/**
 * # Safety
 * `iq` must be a handle from this library (or null).
 */
void sw_iq_free(struct SwIqRecording *iq);

/**
 * # Safety
 * `iq` must be a valid handle.
 */
size_t sw_iq_len(const struct SwIqRecording *iq);

/**
 * # Safety
 * `iq` must be a valid handle.
 */
double sw_iq_sample_rate(const struct SwIqRecording *iq);

/**
 * Fill `out` with the default isolation parameters.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum SwStatus sw_isolation_params_default(struct SwIsolationParams *out);

/**
 * Run the full isolation chain (sideband isolation, phase differences,
 * gating, VMD) on a recording.
 *
 * # Safety
 * All pointers must be valid; `params` may be null for defaults.
 */
enum SwStatus sw_extract_trace(const struct SwIqRecording *iq,
                               const struct SwIsolationParams *params,
                               struct SwMotionTrace **out);

/**
 * # Safety
 * `trace` must be a handle from this library (or null).
 */
void sw_trace_free(struct SwMotionTrace *trace);

/**
 * # Safety
 * `trace` must be a valid handle.
 */
size_t sw_trace_len(const struct SwMotionTrace *trace);

/**
 * # Safety
 * `trace` must be a valid handle.
 */
double sw_trace_sample_rate(const struct SwMotionTrace *trace);

/**
 * Copy trace samples into `buf`; writes at most `cap` values and stores
 * the copied count in `written`.
 *
 * # Safety
 * `buf` must point to at least `cap` doubles.
 */
enum SwStatus sw_trace_values(const struct SwMotionTrace *trace,
                              double *buf,
                              size_t cap,
                              size_t *written);

/**
 * Number of gated-out intervals.
 *
 * # Safety
 * `trace` must be a valid handle.
 */
size_t sw_trace_gap_count(const struct SwMotionTrace *trace);

/**
 * Fetch one gated-out interval in seconds.
 *
 * # Safety
 * Pointers must be valid.
 */
enum SwStatus sw_trace_gap(const struct SwMotionTrace *trace,
                           size_t index,
                           double *start_s,
                           double *end_s);

/**
 * Read a trace file written by the pipeline.
 *
 * # Safety
 * `path` must be NUL-terminated; `out` valid.
 */
enum SwStatus sw_trace_read(const char *path, struct SwMotionTrace **out);

/**
 * Write a trace (values, gaps, provenance) to `path` with its sidecar.
 *
 * # Safety
 * Pointers must be valid.
 */
enum SwStatus sw_trace_write(const char *path, const struct SwMotionTrace *trace);

/**
 * Fill `out` with the default segmenter parameters.
 *
 * # Safety
 * `out` must be valid.
 */
enum SwStatus sw_segmenter_params_default(struct SwSegmenterParams *out);

/**
 * Segment a trace into lip-motion units.
 *
 * # Safety
 * Pointers must be valid; `params` may be null for defaults.
 */
enum SwStatus sw_segment(const struct SwMotionTrace *trace,
                         const struct SwSegmenterParams *params,
                         struct SwSegmentList **out);

/**
 * # Safety
 * `list` must be a handle from this library (or null).
 */
void sw_segments_free(struct SwSegmentList *list);

/**
 * # Safety
 * `list` must be a valid handle.
 */
size_t sw_segments_len(const struct SwSegmentList *list);

/**
 * Fetch one segment's boundaries in seconds.
 *
 * # Safety
 * Pointers must be valid.
 */
enum SwStatus sw_segments_get(const struct SwSegmentList *list,
                              size_t index,
                              double *start_s,
                              double *end_s);

/**
 * Load a lexicon file.
 *
 * # Safety
 * Pointers must be valid.
 */
enum SwStatus sw_lexicon_load(const char *path, struct SwLexicon **out);

/**
 * # Safety
 * `lex` must be a handle from this library (or null).
 */
void sw_lexicon_free(struct SwLexicon *lex);

/**
 * # Safety
 * `lex` must be a valid handle.
 */
size_t sw_lexicon_size(const struct SwLexicon *lex);

/**
 * Tokenize `text` into ids (ending with `<eos>`). Writes up to `cap` ids
 * and stores the full count in `written`; returns `SW_STATUS_BUFFER_TOO_SMALL`
 * when `cap` is insufficient.
 *
 * # Safety
 * Pointers must be valid; `ids` must hold `cap` entries.
 */
enum SwStatus sw_lexicon_tokenize(const struct SwLexicon *lex,
                                  const char *text,
                                  uint32_t *ids,
                                  size_t cap,
                                  size_t *written);

/**
 * Detokenize ids back to text (NUL-terminated). Stores the full byte
 * length (excluding the terminator) in `written`.
 *
 * # Safety
 * Pointers must be valid; `buf` must hold `cap` bytes.
 */
enum SwStatus sw_lexicon_detokenize(const struct SwLexicon *lex,
                                    const uint32_t *ids,
                                    size_t n_ids,
                                    char *buf,
                                    size_t cap,
                                    size_t *written);

/**
 * Load a model checkpoint.
 *
 * # Safety
 * Pointers must be valid.
 */
enum SwStatus sw_model_load(const char *path, struct SwModel **out);

/**
 * # Safety
 * `model` must be a handle from this library (or null).
 */
void sw_model_free(struct SwModel *model);

/**
 * Fill `out` with the reference frontend (1 kHz, 256-sample window,
 * 10-sample hop).
 *
 * # Safety
 * `out` must be valid.
 */
enum SwStatus sw_frontend_params_default(struct SwFrontendParams *out);

/**
 * Beam-decode a trace into token ids (ending with `<eos>`). Stores the
 * full token count in `written`.
 *
 * # Safety
 * Pointers must be valid; `ids` must hold `cap` entries; `frontend` may
 * be null for the reference framing.
 */
enum SwStatus sw_decode_trace(const struct SwModel *model,
                              const struct SwMotionTrace *trace,
                              const struct SwFrontendParams *frontend,
                              uint32_t beam_width,
                              uint32_t max_len,
                              uint32_t *ids,
                              size_t cap,
                              size_t *written);

/**
 * Word error rate of `hypothesis` against `reference`.
 *
 * # Safety
 * Pointers must be valid NUL-terminated strings.
 */
enum SwStatus sw_wer(const char *reference, const char *hypothesis, struct SwEvalResult *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SILENTWAVE_H */
