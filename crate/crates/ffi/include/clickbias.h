#ifndef CLICKBIAS_H
#define CLICKBIAS_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every fallible call.
typedef enum CbStatus {
  CB_STATUS_OK = 0,
  CB_STATUS_NULL_POINTER = 1,
  CB_STATUS_INVALID_UTF8 = 2,
  // Bad argument or configuration.
  CB_STATUS_USAGE = 3,
  // Unreadable, malformed or inconsistent input.
  CB_STATUS_DATA = 4,
  CB_STATUS_NUMERIC = 5,
  // Output buffer too small; the required length is still reported.
  CB_STATUS_BUFFER_TOO_SMALL = 6,
  CB_STATUS_PANIC = 7,
} CbStatus;

// A fitted or loaded click model.
typedef struct CbModel CbModel;

// Sessions loaded from a JSONL file.
typedef struct CbSessions CbSessions;

// Fit options; start from [`cb_fit_options_default`].
typedef struct CbFitOptions {
  bool intent_aware;
  bool alternating;
  double tol;
  uint32_t max_iters;
  uint32_t max_positions;
  uint64_t seed;
} CbFitOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *cb_version(void);

// Message of the last failed call on this thread, or NULL.
//
// The pointer stays valid until the next call into this library on the same thread.
const char *cb_last_error_message(void);

// Releases a string returned by this library.
//
// # Safety
// `s` must come from this library and not be freed twice.
void cb_string_free(char *s);

// Loads sessions from a JSONL file.
//
// # Safety
// `path` must be a NUL-terminated string; `out_handle` must be writable.
enum CbStatus cb_sessions_load(const char *path, struct CbSessions **out_handle);

// Number of sessions in the handle; 0 for NULL.
//
// # Safety
// `sessions` must be NULL or a live handle.
size_t cb_sessions_len(const struct CbSessions *sessions);

// # Safety
// `sessions` must be NULL or a handle not yet freed.
void cb_sessions_free(struct CbSessions *sessions);

struct CbFitOptions cb_fit_options_default(void);

// Fits `model` ("pbm", "cascade", "ubm" or "dbn") to the sessions by EM.
//
// # Safety
// Pointers must be valid; `options` may be NULL for defaults.
enum CbStatus cb_fit(const struct CbSessions *sessions,
                     const char *model,
                     const struct CbFitOptions *options,
                     struct CbModel **out_model);

// # Safety
// `path` must be a NUL-terminated string; `out_model` must be writable.
enum CbStatus cb_model_load(const char *path, struct CbModel **out_model);

// # Safety
// `model` must be a live handle; `path` a NUL-terminated string.
enum CbStatus cb_model_save(const struct CbModel *model, const char *path);

// # Safety
// `model` must be NULL or a handle not yet freed.
void cb_model_free(struct CbModel *model);

// True when the model keeps separate tables per search intent.
//
// # Safety
// `model` must be NULL or a live handle.
bool cb_model_is_intent_aware(const struct CbModel *model);

// Relevance of `doc` for `query` under `intent` ("inf", "nav", "tra"; NULL
// for the intent-agnostic table).
//
// # Safety
// String arguments must be NUL-terminated; `out_value` must be writable.
enum CbStatus cb_model_relevance(const struct CbModel *model,
                                 const char *query,
                                 const char *doc,
                                 const char *intent,
                                 double *out_value);

// Marginal click probability at each position of session `index`.
//
// Writes up to `capacity` values and stores the session length in
// `out_len`; returns `BufferTooSmall` when `capacity` is short.
//
// # Safety
// `out_probs` must hold `capacity` doubles; `out_len` must be writable.
enum CbStatus cb_model_click_probs(const struct CbModel *model,
                                   const struct CbSessions *sessions,
                                   size_t index,
                                   double *out_probs,
                                   size_t capacity,
                                   size_t *out_len);

// Percentage improvement of perplexity `p1` over `p2`.
//
// # Safety
// `out_percent` must be writable.
enum CbStatus cb_perplexity_improvement(double p1, double p2, double *out_percent);

// NDCG@k of graded results in ranked order against the ideal ordering.
//
// `out_defined` is set false when every ideal grade is zero.
//
// # Safety
// `ranked` and `ideal` must hold `n_ranked` and `n_ideal` bytes.
enum CbStatus cb_ndcg_at_k(const uint8_t *ranked,
                           size_t n_ranked,
                           const uint8_t *ideal,
                           size_t n_ideal,
                           size_t k,
                           double *out_value,
                           bool *out_defined);

// Evaluates the model on the sessions and returns the report as JSON.
//
// `judgments` is an optional TSV path enabling NDCG. Free the result with
// [`cb_string_free`].
//
// # Safety
// Handles must be live; `out_json` must be writable.
enum CbStatus cb_eval(const struct CbModel *model,
                      const struct CbSessions *sessions,
                      const char *judgments,
                      double *out_overall,
                      char **out_json);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CLICKBIAS_H */
