#ifndef STLAB_H
#define STLAB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum StlabStatus {
  STLAB_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  STLAB_STATUS_NULL = 1,
  /**
   * A string argument was not valid UTF-8.
   */
  STLAB_STATUS_UTF8 = 2,
  STLAB_STATUS_IO = 3,
  /**
   * Malformed input data.
   */
  STLAB_STATUS_DATA = 4,
  STLAB_STATUS_NUMERICAL = 5,
  /**
   * An argument was outside its valid range.
   */
  STLAB_STATUS_DOMAIN = 6,
  /**
   * The library panicked; the call had no effect on caller-visible state.
   */
  STLAB_STATUS_PANIC = 7,
} StlabStatus;

/**
 * Opaque corpus manifest.
 */
typedef struct StlabManifest StlabManifest;

/**
 * Opaque trained model with its vocabulary.
 */
typedef struct StlabModel StlabModel;

typedef struct StlabCorpusStats {
  size_t n_utterances;
  double total_hours;
  double mean_duration_sec;
} StlabCorpusStats;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or an empty string.
 * The pointer stays valid until the next failing call on the same thread.
 */
const char *stlab_last_error_message(void);

/**
 * # Safety
 * `s` must be null or a string returned by this library, not yet freed.
 */
void stlab_string_free(char *s);

/**
 * Loads a TSV manifest. The split is inferred from the file name.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum StlabStatus stlab_manifest_load(const char *path, struct StlabManifest **out);

/**
 * # Safety
 * `m` must be a live manifest handle; `out` must be writable.
 */
enum StlabStatus stlab_manifest_len(const struct StlabManifest *m, size_t *out);

/**
 * # Safety
 * `m` must be a live manifest handle; `out` must be writable.
 */
enum StlabStatus stlab_manifest_stats(const struct StlabManifest *m, struct StlabCorpusStats *out);

/**
 * # Safety
 * `m` must be null or a handle from [`stlab_manifest_load`], not yet freed.
 */
void stlab_manifest_free(struct StlabManifest *m);

/**
 * Corpus BLEU over `n` hypothesis/reference pairs.
 *
 * # Safety
 * `hyps` and `refs` must each point to `n` NUL-terminated strings.
 */
enum StlabStatus stlab_corpus_bleu(const char *const *hyps,
                                   const char *const *refs,
                                   size_t n,
                                   double *out);

/**
 * # Safety
 * `hyp` and `reference` must be NUL-terminated strings.
 */
enum StlabStatus stlab_sentence_bleu(const char *hyp, const char *reference, double *out);

/**
 * Corpus chrF++ over `n` pairs.
 *
 * # Safety
 * `hyps` and `refs` must each point to `n` NUL-terminated strings.
 */
enum StlabStatus stlab_chrf_pp(const char *const *hyps,
                               const char *const *refs,
                               size_t n,
                               double *out);

/**
 * Learning rate at optimizer step `step` (1-based) for linear warmup over
 * `warmup_steps` followed by inverse square-root decay.
 *
 * # Safety
 * `out` must be writable.
 */
enum StlabStatus stlab_lr_at_step(uint64_t step,
                                  double lr_peak,
                                  uint64_t warmup_steps,
                                  double *out);

/**
 * Numerals found in `text` as a JSON array of decimal strings, e.g.
 * `["87400000","15"]`. Free the result with [`stlab_string_free`].
 *
 * # Safety
 * `text` must be a NUL-terminated string; `out` must be writable.
 */
enum StlabStatus stlab_extract_numerals(const char *text, char **out);

/**
 * Loads a checkpoint written by `stlab train`.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum StlabStatus stlab_model_load(const char *path, struct StlabModel **out);

/**
 * Translates a 16 kHz mono PCM wav file. A beam of 1 decodes greedily.
 * Free the result with [`stlab_string_free`].
 *
 * # Safety
 * `model` must be a live model handle, `wav_path` a NUL-terminated string
 * and `out` writable.
 */
enum StlabStatus stlab_model_decode_wav(const struct StlabModel *model,
                                        const char *wav_path,
                                        size_t beam,
                                        char **out);

/**
 * # Safety
 * `m` must be null or a handle from [`stlab_model_load`], not yet freed.
 */
void stlab_model_free(struct StlabModel *m);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* STLAB_H */
