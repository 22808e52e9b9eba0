#ifndef GRAPHTC_H
#define GRAPHTC_H

/* Generated by cbindgen from src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call.
 */
typedef enum GtcStatus {
  GTC_STATUS_OK = 0,
  GTC_STATUS_NULL_POINTER = 1,
  GTC_STATUS_INVALID_CONFIG = 2,
  GTC_STATUS_DATA_ERROR = 3,
  GTC_STATUS_NOT_CONVERGED = 4,
  GTC_STATUS_DIMENSION_MISMATCH = 5,
  GTC_STATUS_NUMERICAL = 6,
  GTC_STATUS_INVALID_UTF8 = 7,
  GTC_STATUS_IO = 8,
  GTC_STATUS_PANIC = 9,
} GtcStatus;

/**
 * Experiment and solver settings.
 */
typedef struct GtcConfig GtcConfig;

/**
 * A dynamic graph on a fixed vertex set.
 */
typedef struct GtcGraph GtcGraph;

/**
 * Observed entries of a partially known tensor.
 */
typedef struct GtcObserved GtcObserved;

/**
 * A dense real tensor.
 */
typedef struct GtcTensor GtcTensor;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *gtc_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *gtc_version(void);

/**
 * Default settings.
 *
 * # Safety
 * `out` must be a valid pointer to writable handle storage.
 */
enum GtcStatus gtc_config_new(struct GtcConfig **out);

/**
 * Parses `key = value` configuration text.
 *
 * # Safety
 * `text` must be NUL-terminated; `out` must be writable.
 */
enum GtcStatus gtc_config_parse(const char *text, struct GtcConfig **out);

/**
 * Assigns one configuration key.
 *
 * # Safety
 * `config` must come from this library; `key` and `value` must be NUL-terminated.
 */
enum GtcStatus gtc_config_set(struct GtcConfig *config, const char *key, const char *value);

/**
 * Writes the resolved configuration text into a new string that must be
 * released with [`gtc_string_free`].
 *
 * # Safety
 * `config` must come from this library; `out` must be writable.
 */
enum GtcStatus gtc_config_to_text(const struct GtcConfig *config, char **out);

/**
 * # Safety
 * `s` must come from this library or be null.
 */
void gtc_string_free(char *s);

/**
 * # Safety
 * `config` must come from this library or be null.
 */
void gtc_config_free(struct GtcConfig *config);

/**
 * Observed entries from `count` index triples (`3 * count` values, laid out
 * `i1 i2 i3` per entry) and `count` values.
 *
 * # Safety
 * `indices` must hold `3 * count` values and `values` `count` values.
 */
enum GtcStatus gtc_observed_new(size_t n1,
                                size_t n2,
                                size_t n3,
                                const size_t *indices,
                                const double *values,
                                size_t count,
                                struct GtcObserved **out);

/**
 * Observed entries from COO text (header `n1 n2 n3`, one-based lines).
 *
 * # Safety
 * `text` must be NUL-terminated; `out` must be writable.
 */
enum GtcStatus gtc_observed_from_coo(const char *text, struct GtcObserved **out);

/**
 * Dimensions and number of observed entries.
 *
 * # Safety
 * `observed` must come from this library; the outputs must be writable.
 */
enum GtcStatus gtc_observed_shape(const struct GtcObserved *observed,
                                  size_t *n1,
                                  size_t *n2,
                                  size_t *n3,
                                  size_t *count);

/**
 * # Safety
 * `observed` must come from this library or be null.
 */
void gtc_observed_free(struct GtcObserved *observed);

/**
 * Graph on `vertices` vertices over `periods` periods from `count` edge
 * events (`3 * count` values, laid out `i j t` per event).
 *
 * # Safety
 * `events` must hold `3 * count` values; `out` must be writable.
 */
enum GtcStatus gtc_graph_new(size_t vertices,
                             size_t periods,
                             const size_t *events,
                             size_t count,
                             struct GtcGraph **out);

/**
 * # Safety
 * `graph` must come from this library or be null.
 */
void gtc_graph_free(struct GtcGraph *graph);

/**
 * Completes `observed` with the solver settings of `config`. Either graph may
 * be null. `iterations` may be null.
 *
 * # Safety
 * Handles must come from this library; `out` must be writable.
 */
enum GtcStatus gtc_complete(const struct GtcConfig *config,
                            const struct GtcObserved *observed,
                            const struct GtcGraph *graph_w,
                            const struct GtcGraph *graph_h,
                            struct GtcTensor **out,
                            size_t *iterations);

/**
 * Dimensions of a dense tensor.
 *
 * # Safety
 * `tensor` must come from this library; the outputs must be writable.
 */
enum GtcStatus gtc_tensor_dims(const struct GtcTensor *tensor, size_t *n1, size_t *n2, size_t *n3);

/**
 * Copies the entries into `buffer`, which must hold `n1 * n2 * n3` values.
 *
 * # Safety
 * `buffer` must be writable for `len` values.
 */
enum GtcStatus gtc_tensor_copy(const struct GtcTensor *tensor, double *buffer, size_t len);

/**
 * # Safety
 * `tensor` must come from this library or be null.
 */
void gtc_tensor_free(struct GtcTensor *tensor);

/**
 * Runs an experiment command such as `"complete"` or `"theory-check"` and
 * writes its result files into `out_dir`.
 *
 * # Safety
 * Strings must be NUL-terminated; `config` must come from this library.
 */
enum GtcStatus gtc_run(const char *command, const struct GtcConfig *config, const char *out_dir);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GRAPHTC_H */
