#ifndef TOPICSCOPE_H
#define TOPICSCOPE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum TsStatus {
  TS_STATUS_OK = 0,
  TS_STATUS_NULL_POINTER = 1,
  TS_STATUS_USAGE = 2,
  TS_STATUS_VALIDATION = 3,
  TS_STATUS_INSUFFICIENT_TOPICS = 4,
  TS_STATUS_IO = 5,
  TS_STATUS_UNDEFINED = 6,
  TS_STATUS_PANIC = 7,
} TsStatus;

// Loaded corpus.
typedef struct TsCorpus TsCorpus;

// Loaded run.
typedef struct TsRun TsRun;

// Open run store.
typedef struct TsStore TsStore;

typedef struct TsMetricReport {
  size_t top_k;
  size_t ngrams_per_topic;
  double gini;
  double gini_lorenz;
  double nfs;
  double nuv;
  double puv;
  double coherence_npmi;
  double coverage_pct;
  size_t error_size;
  size_t topic_20_size;
} TsMetricReport;

typedef struct TsCorrelation {
  double rho;
  // Two-sided.
  double p_value;
  size_t n;
  // True when the p-value comes from full permutation enumeration.
  bool exact;
} TsCorrelation;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or NULL after a success.
// The pointer stays valid until the next call into this library on the same thread.
const char *ts_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *ts_version(void);

// # Safety
// `s` must be NULL or a string returned by this library and not yet freed.
void ts_string_free(char *s);

// Loads and validates a corpus file.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must point to writable storage.
enum TsStatus ts_corpus_load(const char *path, struct TsCorpus **out);

// # Safety
// `corpus` must be NULL or a handle from [`ts_corpus_load`] not yet freed.
void ts_corpus_free(struct TsCorpus *corpus);

// Number of sentences, or 0 for NULL.
//
// # Safety
// `corpus` must be NULL or a live handle.
size_t ts_corpus_len(const struct TsCorpus *corpus);

// Loads a run file, checking its internal consistency. Topics are put in
// size order if the file lists them otherwise.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must point to writable storage.
enum TsStatus ts_run_load(const char *path, struct TsRun **out);

// # Safety
// `run` must be NULL or a handle from [`ts_run_load`] not yet freed.
void ts_run_free(struct TsRun *run);

// Number of topics, or 0 for NULL.
//
// # Safety
// `run` must be NULL or a live handle.
size_t ts_run_topic_count(const struct TsRun *run);

// Number of outlier sentences, or 0 for NULL.
//
// # Safety
// `run` must be NULL or a live handle.
size_t ts_run_error_size(const struct TsRun *run);

// Checks `run` against `corpus`. Writes the number of violations to
// `violations` and returns `TS_STATUS_VALIDATION` when there are any; the
// last error message then lists them one per line.
//
// # Safety
// Handles must be live; `violations` must point to writable storage.
enum TsStatus ts_run_validate(const struct TsRun *run,
                              const struct TsCorpus *corpus,
                              size_t *violations);

// Full metric report for `run` with the default tokenizer.
//
// # Safety
// Handles must be live; `out` must point to writable storage.
enum TsStatus ts_metric_report(const struct TsRun *run,
                               const struct TsCorpus *corpus,
                               size_t top_k,
                               size_t ngrams_per_topic,
                               struct TsMetricReport *out);

// Gini score `1 - sum(p^2)` of `n` topic sizes.
//
// # Safety
// `sizes` must point to `n` readable values; `out` to writable storage.
enum TsStatus ts_gini_score(const size_t *sizes, size_t n, double *out);

// Word error rate of `hypothesis` against `reference`, both split on spaces.
//
// # Safety
// Both strings must be NUL-terminated; `out` must point to writable storage.
enum TsStatus ts_wer(const char *hypothesis, const char *reference, double *out);

// Spearman rank correlation of two length-`n` samples.
//
// # Safety
// `x` and `y` must point to `n` readable values; `out` to writable storage.
enum TsStatus ts_spearman(const double *x, const double *y, size_t n, struct TsCorrelation *out);

// Opens (creating if needed) a run store directory for writing.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must point to writable storage.
enum TsStatus ts_store_open(const char *path, struct TsStore **out);

// # Safety
// `store` must be NULL or a handle from [`ts_store_open`] not yet freed.
void ts_store_free(struct TsStore *store);

// Number of stored runs, or 0 for NULL.
//
// # Safety
// `store` must be NULL or a live handle.
size_t ts_store_len(const struct TsStore *store);

// Scores `run` against `corpus` and appends both to the store. When
// `run_id` is not NULL it receives a copy of the stored id, to be released
// with [`ts_string_free`].
//
// # Safety
// Handles must be live; `run_id` must be NULL or point to writable storage.
enum TsStatus ts_store_append(struct TsStore *store,
                              const struct TsRun *run,
                              const struct TsCorpus *corpus,
                              size_t top_k,
                              size_t ngrams_per_topic,
                              char **run_id);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TOPICSCOPE_H */
