#ifndef CTCLM_H
#define CTCLM_H

/* Generated by cbindgen from crates/ffi/src. Do not edit. */

#include <stddef.h>
#include <stdint.h>

#define CTCLM_SMOOTHING_MKN 0

#define CTCLM_SMOOTHING_ADD_K 1

/**
 * Result of every fallible call.
 */
typedef enum CtclmStatus {
  CTCLM_STATUS_OK = 0,
  CTCLM_STATUS_NULL_POINTER = 1,
  CTCLM_STATUS_INVALID_ARGUMENT = 2,
  CTCLM_STATUS_IO = 3,
  CTCLM_STATUS_PARSE = 4,
  CTCLM_STATUS_FORMAT = 5,
  CTCLM_STATUS_SHAPE = 6,
  CTCLM_STATUS_NOT_NORMALIZED = 7,
  CTCLM_STATUS_EMPTY = 8,
  CTCLM_STATUS_PANIC = 9,
} CtclmStatus;

/**
 * Word n-gram language model.
 */
typedef struct CtclmLm CtclmLm;

/**
 * Per-frame natural-log token probabilities.
 */
typedef struct CtclmPosteriors CtclmPosteriors;

/**
 * Character vocabulary.
 */
typedef struct CtclmVocab CtclmVocab;

typedef struct CtclmDecodeConfig {
  uint32_t beam_width;
  double lm_weight;
  double word_bonus;
  /**
   * Tokens below this frame probability are not expanded.
   */
  double token_floor;
} CtclmDecodeConfig;

typedef struct CtclmWer {
  uint64_t substitutions;
  uint64_t deletions;
  uint64_t insertions;
  uint64_t reference_words;
  double wer;
} CtclmWer;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread; empty after a success.
 * The pointer stays valid until the next call on the same thread.
 */
const char *ctclm_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *ctclm_version(void);

/**
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void ctclm_string_free(char *s);

/**
 * Normalizes `raw` into lowercase letters and single spaces.
 *
 * # Safety
 * `raw` must be a NUL-terminated string; `out` must be writable.
 */
enum CtclmStatus ctclm_normalize(const char *raw, char **out);

/**
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum CtclmStatus ctclm_vocab_load(const char *path, struct CtclmVocab **out);

/**
 * Builds a vocabulary from newline-separated transcripts.
 *
 * # Safety
 * `transcripts` must be a NUL-terminated string; `out` must be writable.
 */
enum CtclmStatus ctclm_vocab_build(const char *transcripts, struct CtclmVocab **out);

/**
 * # Safety
 * `vocab` must be a live handle; `path` a NUL-terminated string.
 */
enum CtclmStatus ctclm_vocab_save(const struct CtclmVocab *vocab, const char *path);

/**
 * Number of tokens, or 0 for a null handle.
 *
 * # Safety
 * `vocab` must be null or a live handle.
 */
size_t ctclm_vocab_len(const struct CtclmVocab *vocab);

/**
 * Id of the blank token, or `UINT32_MAX` for a null handle.
 *
 * # Safety
 * `vocab` must be null or a live handle.
 */
uint32_t ctclm_vocab_blank_id(const struct CtclmVocab *vocab);

/**
 * # Safety
 * `vocab` must be null or a handle that has not been freed.
 */
void ctclm_vocab_free(struct CtclmVocab *vocab);

/**
 * Loads an ARPA or binary model; the format is detected from the file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum CtclmStatus ctclm_lm_load(const char *path, struct CtclmLm **out);

/**
 * Estimates a model from newline-separated sentences. `smoothing` is
 * `CTCLM_SMOOTHING_MKN` or `CTCLM_SMOOTHING_ADD_K`; `k` is only read for
 * add-k.
 *
 * # Safety
 * `corpus` must be a NUL-terminated string; `out` must be writable.
 */
enum CtclmStatus ctclm_lm_train(const char *corpus,
                                uint32_t order,
                                uint32_t smoothing,
                                double k,
                                struct CtclmLm **out);

/**
 * Highest n-gram order, or 0 for a null handle.
 *
 * # Safety
 * `lm` must be null or a live handle.
 */
uint32_t ctclm_lm_order(const struct CtclmLm *lm);

/**
 * log10 probability of a sentence, including the end-of-sentence token.
 *
 * # Safety
 * `lm` must be a live handle, `sentence` a NUL-terminated string and
 * `out` writable.
 */
enum CtclmStatus ctclm_lm_score_sentence(const struct CtclmLm *lm,
                                         const char *sentence,
                                         double *out);

/**
 * # Safety
 * `lm` must be a live handle; `path` a NUL-terminated string.
 */
enum CtclmStatus ctclm_lm_write_arpa(const struct CtclmLm *lm, const char *path);

/**
 * # Safety
 * `lm` must be a live handle; `path` a NUL-terminated string.
 */
enum CtclmStatus ctclm_lm_write_binary(const struct CtclmLm *lm, const char *path);

/**
 * # Safety
 * `lm` must be null or a handle that has not been freed.
 */
void ctclm_lm_free(struct CtclmLm *lm);

/**
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum CtclmStatus ctclm_posteriors_load(const char *path, struct CtclmPosteriors **out);

/**
 * Copies `frames * vocab_size` row-major natural-log probabilities.
 *
 * # Safety
 * `values` must point to `frames * vocab_size` readable floats; `out`
 * must be writable.
 */
enum CtclmStatus ctclm_posteriors_new(const float *values,
                                      size_t frames,
                                      size_t vocab_size,
                                      struct CtclmPosteriors **out);

/**
 * # Safety
 * `post` must be null or a live handle.
 */
size_t ctclm_posteriors_frames(const struct CtclmPosteriors *post);

/**
 * # Safety
 * `post` must be null or a live handle.
 */
size_t ctclm_posteriors_vocab_size(const struct CtclmPosteriors *post);

/**
 * # Safety
 * `post` must be a live handle; `path` a NUL-terminated string.
 */
enum CtclmStatus ctclm_posteriors_save(const struct CtclmPosteriors *post, const char *path);

/**
 * # Safety
 * `post` must be null or a handle that has not been freed.
 */
void ctclm_posteriors_free(struct CtclmPosteriors *post);

struct CtclmDecodeConfig ctclm_decode_config_default(void);

/**
 * Best-path transcription.
 *
 * # Safety
 * Handles must be live; `out` must be writable.
 */
enum CtclmStatus ctclm_decode_greedy(const struct CtclmPosteriors *post,
                                     const struct CtclmVocab *vocab,
                                     char **out);

/**
 * Prefix beam search; `lm` may be null for decoding without fusion and
 * `config` may be null for the defaults.
 *
 * # Safety
 * Non-null pointers must be live handles or readable structs; `out` must
 * be writable.
 */
enum CtclmStatus ctclm_decode_beam(const struct CtclmPosteriors *post,
                                   const struct CtclmVocab *vocab,
                                   const struct CtclmLm *lm,
                                   const struct CtclmDecodeConfig *config,
                                   char **out);

/**
 * Pooled word error rate over `n` reference/hypothesis pairs.
 *
 * # Safety
 * `refs` and `hyps` must each point to `n` NUL-terminated strings; `out`
 * must be writable.
 */
enum CtclmStatus ctclm_wer(const char *const *refs,
                           const char *const *hyps,
                           size_t n,
                           struct CtclmWer *out);

/**
 * Encoder output frames for `samples` input samples at 16 kHz.
 *
 * # Safety
 * `out` must be writable.
 */
enum CtclmStatus ctclm_frame_count(size_t samples, size_t *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CTCLM_H */
