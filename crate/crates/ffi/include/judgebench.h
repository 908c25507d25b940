#ifndef JUDGEBENCH_H
#define JUDGEBENCH_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum JbStatus {
  JB_STATUS_OK = 0,
  JB_STATUS_NULL_POINTER = 1,
  JB_STATUS_INVALID_UTF8 = 2,
  JB_STATUS_INVALID_ARGUMENT = 3,
  JB_STATUS_PANIC = 4,
} JbStatus;

typedef enum JbRouge {
  JB_ROUGE_ROUGE1 = 0,
  JB_ROUGE_ROUGE2 = 1,
  JB_ROUGE_ROUGE_L = 2,
} JbRouge;

/**
 * Character n-gram authorship classifier.
 */
typedef struct JbAuthorshipModel JbAuthorshipModel;

/**
 * Exact cosine top-k index over caller-supplied vectors.
 */
typedef struct JbIndex JbIndex;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or NULL if the last call
 * succeeded. Free the result with [`jb_string_free`].
 */
char *jb_last_error_message(void);

/**
 * # Safety
 * `s` must come from this library and not have been freed. NULL is ignored.
 */
void jb_string_free(char *s);

/**
 * Sentence BLEU on the 0-100 scale.
 *
 * # Safety
 * Strings must be NUL-terminated; `out` must be writable.
 */
enum JbStatus jb_bleu(const char *candidate, const char *reference, double *out_score);

/**
 * ROUGE F1 for the given variant.
 *
 * # Safety
 * Strings must be NUL-terminated; `out` must be writable.
 */
enum JbStatus jb_rouge(const char *candidate,
                       const char *reference,
                       enum JbRouge variant,
                       double *out_score);

/**
 * Base-2 Jensen-Shannon divergence of two weight vectors of length `len`.
 *
 * # Safety
 * `p` and `q` must point to `len` doubles.
 */
enum JbStatus jb_jsd(const double *p, const double *q, size_t len, double *out_value);

/**
 * Greedy token matching over row-major token vectors of width `dim`.
 *
 * # Safety
 * `candidate` holds `n_candidate * dim` doubles and `reference` holds
 * `n_reference * dim`; the three out-pointers must be writable.
 */
enum JbStatus jb_greedy_match(const double *candidate,
                              size_t n_candidate,
                              const double *reference,
                              size_t n_reference,
                              size_t dim,
                              double *out_precision,
                              double *out_recall,
                              double *out_f);

/**
 * Centered gaps of a `judges x judges` row-major matrix where entry
 * `(k, j)` scores the model of judge `k` on judge `j`'s test set.
 *
 * # Safety
 * `values` holds `judges * judges` doubles; `out_gaps` has room for `judges`.
 */
enum JbStatus jb_centered_gaps(const double *values,
                               size_t judges,
                               bool higher_is_better,
                               double *out_gaps);

/**
 * Two-sided Wilcoxon signed-rank test; zero differences are dropped.
 *
 * # Safety
 * `deltas` holds `n` doubles; out-pointers must be writable.
 */
enum JbStatus jb_wilcoxon(const double *deltas,
                          size_t n,
                          double *out_statistic,
                          double *out_p_value);

/**
 * Paired item-level bootstrap of `matched - other`.
 *
 * # Safety
 * `matched` and `other` hold `n` doubles; out-pointers must be writable.
 */
enum JbStatus jb_paired_bootstrap(const double *matched,
                                  const double *other,
                                  size_t n,
                                  size_t resamples,
                                  uint64_t seed,
                                  double *out_mean_gap,
                                  double *out_p_value);

/**
 * Gwet's AC1 for two raters with binary labels.
 *
 * # Safety
 * `out_value` must be writable.
 */
enum JbStatus jb_gwet_ac1(uint64_t both_yes,
                          uint64_t both_no,
                          uint64_t yes_no,
                          uint64_t no_yes,
                          double *out_value);

/**
 * Byte offset where the next-token prefix of `text` ends: the text is cut
 * after whitespace token `ceil(fraction * N)`.
 *
 * # Safety
 * `text` must be NUL-terminated; `out_offset` must be writable.
 */
enum JbStatus jb_prefix_offset(const char *text_ptr, double fraction, size_t *out_offset);

/**
 * Builds an index over `n` row-major vectors of width `dim`. Queries report
 * positions in this input order.
 *
 * # Safety
 * `vectors` holds `n * dim` doubles; `out_index` must be writable. Free the
 * handle with [`jb_index_free`].
 */
enum JbStatus jb_index_new(const double *vectors, size_t n, size_t dim, struct JbIndex **out_index);

/**
 * # Safety
 * `index` must be a live handle from [`jb_index_new`].
 */
size_t jb_index_len(const struct JbIndex *index);

/**
 * Top-`k` entries by cosine similarity, best first; ties go to the earlier
 * position.
 *
 * # Safety
 * `query` holds `dim` doubles; `out_positions` and `out_scores` have room for
 * `k` values each.
 */
enum JbStatus jb_index_query(const struct JbIndex *index,
                             const double *query,
                             size_t dim,
                             size_t k,
                             size_t *out_positions,
                             double *out_scores);

/**
 * # Safety
 * `index` must come from [`jb_index_new`] and not have been freed. NULL is ignored.
 */
void jb_index_free(struct JbIndex *index);

/**
 * Trains the default character n-gram classifier: positives are the target
 * author's sentences, negatives everyone else's.
 *
 * # Safety
 * `positives` and `negatives` hold `n_positive` and `n_negative`
 * NUL-terminated strings; `out_model` must be writable. Free the handle with
 * [`jb_authorship_free`].
 */
enum JbStatus jb_authorship_train(const char *const *positives,
                                  size_t n_positive,
                                  const char *const *negatives,
                                  size_t n_negative,
                                  uint64_t seed,
                                  struct JbAuthorshipModel **out_model);

/**
 * Probability that `text` was written by the positive author.
 *
 * # Safety
 * `model` must be a live handle; `text` must be NUL-terminated.
 */
enum JbStatus jb_authorship_probability(const struct JbAuthorshipModel *model,
                                        const char *text_ptr,
                                        double *out_probability);

/**
 * # Safety
 * `model` must come from [`jb_authorship_train`] and not have been freed.
 * NULL is ignored.
 */
void jb_authorship_free(struct JbAuthorshipModel *model);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* JUDGEBENCH_H */
