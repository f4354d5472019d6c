#ifndef LINGSEL_H
#define LINGSEL_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes; 1-3 match the CLI exit codes.
 */
typedef enum LsStatus {
  LS_OK = 0,
  LS_USAGE = 1,
  LS_DATA = 2,
  LS_NUMERIC = 3,
  LS_NULL_POINTER = 4,
  LS_PANIC = 5,
} LsStatus;

/**
 * Loaded corpus (ids, durations, embeddings).
 */
typedef struct LsCorpus LsCorpus;

/**
 * Trained classifier.
 */
typedef struct LsModel LsModel;

/**
 * Selection result as indices into the pool corpus it was computed from.
 */
typedef struct LsSelection LsSelection;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. Valid until the
 * next failing call on the same thread.
 */
const char *lingsel_last_error(void);

/**
 * Library version as a static nul-terminated string.
 */
const char *lingsel_version(void);

/**
 * Load a JSONL manifest.
 *
 * # Safety
 * `path` is a nul-terminated string; `out` is a valid pointer.
 */
enum LsStatus lingsel_corpus_load(const char *path, struct LsCorpus **out);

/**
 * Load ids/durations from a manifest and embeddings from a LEMB blob.
 *
 * # Safety
 * Both paths are nul-terminated strings; `out` is a valid pointer.
 */
enum LsStatus lingsel_corpus_load_binary(const char *manifest,
                                         const char *blob,
                                         struct LsCorpus **out);

/**
 * Number of records; 0 for a null handle.
 *
 * # Safety
 * `corpus` is null or a live handle.
 */
size_t lingsel_corpus_len(const struct LsCorpus *corpus);

/**
 * Embedding dimension; 0 for a null handle or an empty corpus.
 *
 * # Safety
 * `corpus` is null or a live handle.
 */
size_t lingsel_corpus_dim(const struct LsCorpus *corpus);

/**
 * Duration of record `index` in seconds.
 *
 * # Safety
 * `corpus` is a live handle; `out` is a valid pointer.
 */
enum LsStatus lingsel_corpus_duration(const struct LsCorpus *corpus, size_t index, double *out);

/**
 * # Safety
 * `corpus` is null or a handle not yet freed.
 */
void lingsel_corpus_free(struct LsCorpus *corpus);

/**
 * Train a one-class SVM with the default RBF width.
 *
 * # Safety
 * `corpus` is a live handle; `out` is a valid pointer.
 */
enum LsStatus lingsel_train_ocsvm(const struct LsCorpus *corpus, double nu, struct LsModel **out);

/**
 * # Safety
 * `corpus` is a live handle; `out` is a valid pointer.
 */
enum LsStatus lingsel_train_iforest(const struct LsCorpus *corpus,
                                    size_t n_trees,
                                    size_t subsample,
                                    uint64_t seed,
                                    struct LsModel **out);

/**
 * Deep SVDD with default learning rates, batch size and latent width.
 *
 * # Safety
 * `corpus` is a live handle; `out` is a valid pointer.
 */
enum LsStatus lingsel_train_dsvdd(const struct LsCorpus *corpus,
                                  size_t ae_epochs,
                                  size_t enc_epochs,
                                  uint64_t seed,
                                  struct LsModel **out);

/**
 * Load a model JSON file written by the CLI or `lingsel_model_save`.
 *
 * # Safety
 * `path` is a nul-terminated string; `out` is a valid pointer.
 */
enum LsStatus lingsel_model_load(const char *path, struct LsModel **out);

/**
 * # Safety
 * `model` is a live handle; `path` is a nul-terminated string.
 */
enum LsStatus lingsel_model_save(const struct LsModel *model, const char *path);

/**
 * Input dimension; 0 for a null handle.
 *
 * # Safety
 * `model` is null or a live handle.
 */
size_t lingsel_model_dim(const struct LsModel *model);

/**
 * Decision scores for every corpus record, written to `out[0..len)`.
 * `len` must equal the corpus length.
 *
 * # Safety
 * Handles are live; `out` points to `len` writable doubles.
 */
enum LsStatus lingsel_model_score(const struct LsModel *model,
                                  const struct LsCorpus *corpus,
                                  double *out,
                                  size_t len);

/**
 * Inlier cutoff on the decision scale (0, or the negated training-distance
 * quantile for Deep SVDD).
 *
 * # Safety
 * `model` is a live handle; `out` is a valid pointer.
 */
enum LsStatus lingsel_model_threshold(const struct LsModel *model,
                                      double dsvdd_quantile,
                                      double *out);

/**
 * # Safety
 * `model` is null or a handle not yet freed.
 */
void lingsel_model_free(struct LsModel *model);

/**
 * Multi-list selection. Each score array is aligned with the pool records
 * and holds `lingsel_corpus_len(pool)` values; `scores1` drives the order.
 *
 * # Safety
 * `pool` is a live handle; score arrays are readable for the pool length.
 */
enum LsStatus lingsel_select_ensemble(const struct LsCorpus *pool,
                                      const double *scores1,
                                      const double *scores2,
                                      const double *scores3,
                                      double hours,
                                      size_t l0,
                                      bool tight_budget,
                                      struct LsSelection **out);

/**
 * Highest scores first until the budget is met.
 *
 * # Safety
 * `pool` is a live handle; `scores` is readable for the pool length.
 */
enum LsStatus lingsel_select_single(const struct LsCorpus *pool,
                                    const double *scores,
                                    double hours,
                                    struct LsSelection **out);

/**
 * Seeded random baseline.
 *
 * # Safety
 * `pool` is a live handle; `out` is a valid pointer.
 */
enum LsStatus lingsel_select_random(const struct LsCorpus *pool,
                                    double hours,
                                    uint64_t seed,
                                    struct LsSelection **out);

/**
 * Number of selected utterances; 0 for a null handle.
 *
 * # Safety
 * `sel` is null or a live handle.
 */
size_t lingsel_selection_len(const struct LsSelection *sel);

/**
 * Copy the selected pool indices, in selection order, into `out[0..len)`.
 *
 * # Safety
 * `sel` is a live handle; `out` points to `len` writable values.
 */
enum LsStatus lingsel_selection_indices(const struct LsSelection *sel, size_t *out, size_t len);

/**
 * # Safety
 * `sel` is null or a live handle.
 */
double lingsel_selection_total_sec(const struct LsSelection *sel);

/**
 * # Safety
 * `sel` is null or a live handle.
 */
bool lingsel_selection_exhausted(const struct LsSelection *sel);

/**
 * # Safety
 * `sel` is null or a live handle.
 */
size_t lingsel_selection_passes(const struct LsSelection *sel);

/**
 * # Safety
 * `sel` is null or a handle not yet freed.
 */
void lingsel_selection_free(struct LsSelection *sel);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LINGSEL_H */
