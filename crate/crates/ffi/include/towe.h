#ifndef TOWE_H
#define TOWE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Label indices used by the array functions: `O = 0`, `B = 1`, `I = 2`.
#define TOWE_LABEL_O 0

#define TOWE_LABEL_B 1

#define TOWE_LABEL_I 2

typedef enum ToweStatus {
  TOWE_STATUS_OK = 0,
  TOWE_STATUS_NULL_POINTER = 1,
  TOWE_STATUS_INVALID_UTF8 = 2,
  TOWE_STATUS_INVALID_ARGUMENT = 3,
  TOWE_STATUS_IO = 4,
  TOWE_STATUS_PARSE = 5,
  TOWE_STATUS_CHECKPOINT = 6,
  TOWE_STATUS_INFERENCE = 7,
  TOWE_STATUS_BUFFER_TOO_SMALL = 8,
  TOWE_STATUS_PANIC = 9,
} ToweStatus;

// A trained model loaded from a checkpoint.
typedef struct ToweModel ToweModel;

// Accumulates span counts over instances.
typedef struct ToweScorer ToweScorer;

// Half-open token span `[start, end)`.
typedef struct ToweSpan {
  size_t start;
  size_t end;
} ToweSpan;

// Span-level scores; precision, recall and F1 are fractions in `[0, 1]`.
typedef struct ToweReport {
  double precision;
  double recall;
  double f1;
  size_t num_pred_spans;
  size_t num_gold_spans;
  size_t num_correct;
} ToweReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. The pointer is
// valid until the next call into this library on the same thread.
const char *towe_last_error(void);

// Library version as a static string.
const char *towe_version(void);

// # Safety
// `s` must be null or a string returned by this library, not yet freed.
void towe_string_free(char *s);

// Loads a checkpoint written by `towe train`.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum ToweStatus towe_model_load(const char *path, struct ToweModel **out);

// # Safety
// `model` must be null or a handle from [`towe_model_load`], not yet freed.
void towe_model_free(struct ToweModel *model);

// Predicts labels for one instance given as a JSON object with `tokens`,
// `pos_tags`, `heads` (`-1` for the root) and `target_span`; `id` and
// `labels` are optional. On success `*out_labels` holds the labels as a
// space-separated `O`/`B`/`I` string.
//
// Models using contextual input need `contextual`: a row-major
// `num_tokens x contextual_dim` matrix. Pass null for word-vector models.
//
// # Safety
// `model` must be a live handle, `instance_json` a NUL-terminated string,
// `contextual` null or readable for `num_tokens * contextual_dim` values,
// and `out_labels` writable.
enum ToweStatus towe_model_predict(const struct ToweModel *model,
                                   const char *instance_json,
                                   const double *contextual,
                                   size_t contextual_dim,
                                   char **out_labels);

// Decodes `n` label indices into spans, repairing a dangling `I` as a span
// start. Writes at most `capacity` spans to `out_spans` and the total
// number to `*out_count`; returns `BufferTooSmall` when it exceeds
// `capacity`.
//
// # Safety
// `labels` must be readable for `n` bytes, `out_spans` writable for
// `capacity` spans (or null when `capacity` is 0), `out_count` writable.
enum ToweStatus towe_bio_decode(const uint8_t *labels,
                                size_t n,
                                struct ToweSpan *out_spans,
                                size_t capacity,
                                size_t *out_count);

// Signed distance of each of `n` tokens to the target span
// `[target_start, target_end)`: 0 inside, otherwise the offset to the
// nearest target token.
//
// # Safety
// `out` must be writable for `n` values.
enum ToweStatus towe_relative_distances(size_t n,
                                        size_t target_start,
                                        size_t target_end,
                                        int64_t *out);

struct ToweScorer *towe_scorer_new(void);

// # Safety
// `scorer` must be null or a handle from [`towe_scorer_new`], not yet freed.
void towe_scorer_free(struct ToweScorer *scorer);

// Adds one instance: `n` predicted and `n` gold label indices.
//
// # Safety
// `scorer` must be a live handle; `pred` and `gold` readable for `n` bytes.
enum ToweStatus towe_scorer_add(struct ToweScorer *scorer,
                                const uint8_t *pred,
                                const uint8_t *gold,
                                size_t n);

// Scores over everything added so far.
//
// # Safety
// `scorer` must be a live handle; `out` writable.
enum ToweStatus towe_scorer_report(const struct ToweScorer *scorer, struct ToweReport *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TOWE_H */
