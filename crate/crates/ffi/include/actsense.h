/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#ifndef ACTSENSE_H
#define ACTSENSE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum {
  ACTS_STATUS_OK = 0,
  ACTS_STATUS_NULL_ARGUMENT = 1,
  ACTS_STATUS_INVALID_UTF8 = 2,
  ACTS_STATUS_INVALID_ARGUMENT = 3,
  ACTS_STATUS_UNKNOWN_LABEL = 4,
  ACTS_STATUS_IO = 5,
  ACTS_STATUS_PARSE = 6,
  ACTS_STATUS_CHECKPOINT = 7,
  ACTS_STATUS_DIMENSION = 8,
  ACTS_STATUS_NOT_FOUND = 9,
  ACTS_STATUS_NO_POSITIVE_CLASS = 10,
  ACTS_STATUS_EMPTY_GENERATION = 11,
  ACTS_STATUS_PANIC = 12,
  ACTS_STATUS_INTERNAL = 13,
} ActsStatus;

typedef enum {
  ACTS_LABEL_KIND_ACTIVITY = 0,
  ACTS_LABEL_KIND_OBJECT = 1,
  ACTS_LABEL_KIND_INTERACTION = 2,
} ActsLabelKind;

typedef enum {
  ACTS_PROMPT_KIND_CURRENT_DESCRIPTION = 0,
  ACTS_PROMPT_KIND_SUBSEQUENT_ACTION = 1,
} ActsPromptKind;

/**
 * Trained classifier weights.
 */
typedef struct ActsClassifier ActsClassifier;

/**
 * Precomputed embedding vectors keyed by string.
 */
typedef struct ActsEmbeddingStore ActsEmbeddingStore;

/**
 * Activity, object and interaction label lists.
 */
typedef struct ActsVocabulary ActsVocabulary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread, or NULL. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *acts_last_error(void);

/**
 * # Safety
 * `s` must come from this library or be NULL.
 */
void acts_string_free(char *s);

/**
 * Loads three newline-separated label files.
 *
 * # Safety
 * Paths must be NUL-terminated; `out` must be writable.
 */
ActsStatus acts_vocabulary_load(const char *activities,
                                const char *objects,
                                const char *interactions,
                                ActsVocabulary **out);

/**
 * The bundled label lists (157 activities).
 *
 * # Safety
 * `out` must be writable.
 */
ActsStatus acts_vocabulary_canonical(ActsVocabulary **out);

/**
 * # Safety
 * `v` must come from this library or be NULL.
 */
void acts_vocabulary_free(ActsVocabulary *v);

/**
 * # Safety
 * `v` must be a live handle; `out` must be writable.
 */
ActsStatus acts_vocabulary_count(const ActsVocabulary *v, ActsLabelKind kind, size_t *out);

/**
 * Name of label `id`, written to `*out` as a new string.
 *
 * # Safety
 * `v` must be a live handle; `out` must be writable.
 */
ActsStatus acts_vocabulary_label(const ActsVocabulary *v,
                                 ActsLabelKind kind,
                                 size_t id,
                                 char **out);

/**
 * Id of the label called `name`.
 *
 * # Safety
 * `v` must be a live handle; `name` NUL-terminated; `out` writable.
 */
ActsStatus acts_vocabulary_id(const ActsVocabulary *v,
                              ActsLabelKind kind,
                              const char *name,
                              size_t *out);

/**
 * Renders the current-description prompt for a context of label ids.
 *
 * # Safety
 * Each id array must hold its stated number of elements; `out` writable.
 */
ActsStatus acts_render_description_prompt(const ActsVocabulary *v,
                                          const size_t *verbs,
                                          size_t n_verbs,
                                          const size_t *objects,
                                          size_t n_objects,
                                          const size_t *interactions,
                                          size_t n_interactions,
                                          char **out);

/**
 * Renders the subsequent-action prompt continuing `description`.
 *
 * # Safety
 * `description` NUL-terminated; `out` writable.
 */
ActsStatus acts_render_subsequent_prompt(const char *description, char **out);

/**
 * Cuts a raw completion down to the sentence the prompt asked for.
 *
 * # Safety
 * `raw` NUL-terminated; `out` writable.
 */
ActsStatus acts_parse_generation(const char *raw, ActsPromptKind kind, char **out);

/**
 * Average precision of one class. `labels[i]` is nonzero for positives.
 * `*defined` is set to 0 when there are no positives, leaving `*out` at 0.
 *
 * # Safety
 * `scores` and `labels` must hold `n` elements; outputs writable.
 */
ActsStatus acts_average_precision(const double *scores,
                                  const uint8_t *labels,
                                  size_t n,
                                  double *out,
                                  uint8_t *defined);

/**
 * Mean of the entries of `aps` whose `defined` flag is nonzero.
 *
 * # Safety
 * `aps` and `defined` must hold `n` elements; `out` writable.
 */
ActsStatus acts_mean_ap(const double *aps, const uint8_t *defined, size_t n, double *out);

/**
 * Fresh randomly initialised classifier with the default hidden widths.
 *
 * # Safety
 * `out` writable.
 */
ActsStatus acts_classifier_init(size_t input_width,
                                size_t num_classes,
                                uint64_t seed,
                                ActsClassifier **out);

/**
 * # Safety
 * `path` NUL-terminated; `out` writable.
 */
ActsStatus acts_classifier_load(const char *path, ActsClassifier **out);

/**
 * # Safety
 * `c` a live handle; `path` NUL-terminated.
 */
ActsStatus acts_classifier_save(const ActsClassifier *c, const char *path);

/**
 * # Safety
 * `c` must come from this library or be NULL.
 */
void acts_classifier_free(ActsClassifier *c);

/**
 * # Safety
 * `c` a live handle; outputs writable.
 */
ActsStatus acts_classifier_shape(const ActsClassifier *c, size_t *input_width, size_t *num_classes);

/**
 * Scores one fused input of `len` floats into `scores`, which must have
 * room for `num_classes` values.
 *
 * # Safety
 * `input` holds `len` floats; `scores` holds `scores_len` doubles.
 */
ActsStatus acts_classifier_predict(const ActsClassifier *c,
                                   const float *input,
                                   size_t len,
                                   double *scores,
                                   size_t scores_len);

/**
 * Opens a binary embedding record file of `dim`-wide vectors.
 *
 * # Safety
 * `path` NUL-terminated; `out` writable.
 */
ActsStatus acts_embedding_store_load(const char *path, size_t dim, ActsEmbeddingStore **out);

/**
 * # Safety
 * `s` must come from this library or be NULL.
 */
void acts_embedding_store_free(ActsEmbeddingStore *s);

/**
 * # Safety
 * `s` a live handle; `out` writable.
 */
ActsStatus acts_embedding_store_len(const ActsEmbeddingStore *s, size_t *out);

/**
 * Copies the vector stored under `key` into `buf`. `*written` receives
 * its length; a short buffer fails with `DIMENSION` but still reports it.
 *
 * # Safety
 * `s` a live handle; `key` NUL-terminated; `buf` holds `buf_len` floats.
 */
ActsStatus acts_embedding_store_get(const ActsEmbeddingStore *s,
                                    const char *key,
                                    float *buf,
                                    size_t buf_len,
                                    size_t *written);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ACTSENSE_H */
