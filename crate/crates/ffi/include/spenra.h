#ifndef SPENRA_H
#define SPENRA_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes.
 */
typedef enum SpenraStatus {
  SPENRA_STATUS_OK = 0,
  SPENRA_STATUS_NULL_POINTER = 1,
  SPENRA_STATUS_INVALID_INPUT = 2,
  SPENRA_STATUS_INSUFFICIENT_DATA = 3,
  /**
   * A numerical procedure failed (degenerate weights, quadrature or
   * optimiser failure, no template matches, isolated vectors, ...).
   */
  SPENRA_STATUS_COMPUTATION = 4,
  SPENRA_STATUS_IO = 5,
  SPENRA_STATUS_PARSE = 6,
  /**
   * The output buffer is too small; the required length was written.
   */
  SPENRA_STATUS_BUFFER_TOO_SMALL = 7,
  SPENRA_STATUS_PANIC = 8,
} SpenraStatus;

/**
 * Specific entropy rates of a series.
 */
typedef struct SpenraEntropySeries SpenraEntropySeries;

/**
 * Bandwidths and scores for every fitted order, plus the chosen order.
 */
typedef struct SpenraSelectionReport SpenraSelectionReport;

/**
 * A time series, optionally with event times.
 */
typedef struct SpenraSeries SpenraSeries;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread. Valid until the next
 * failing call on the same thread; empty when nothing has failed.
 */
const char *spenra_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *spenra_version(void);

/**
 * Creates a series from `len` values and optional event times (`times` may
 * be null).
 */
enum SpenraStatus spenra_series_new(const double *values,
                                    const double *times,
                                    size_t len,
                                    struct SpenraSeries **out);

/**
 * Reads a one-column (`value`) or two-column (`time,value`) CSV file.
 */
enum SpenraStatus spenra_series_from_csv(const char *path, struct SpenraSeries **out);

size_t spenra_series_len(const struct SpenraSeries *s);

/**
 * Whether the series carries event times.
 */
bool spenra_series_has_times(const struct SpenraSeries *s);

enum SpenraStatus spenra_series_values(const struct SpenraSeries *s,
                                       double *buf,
                                       size_t cap,
                                       size_t *len_out);

enum SpenraStatus spenra_series_times(const struct SpenraSeries *s,
                                      double *buf,
                                      size_t cap,
                                      size_t *len_out);

void spenra_series_free(struct SpenraSeries *s);

/**
 * Two-state-memory Markov benchmark with default parameters, started from
 * `(x_-1, x_0) = (1, 1)`.
 */
enum SpenraStatus spenra_generate_markov2(size_t n, uint64_t seed, struct SpenraSeries **out);

/**
 * Lorenz-driven interevent intervals (threshold 60).
 */
enum SpenraStatus spenra_generate_lorenz_iei(size_t n, uint64_t seed, struct SpenraSeries **out);

/**
 * Rössler-driven interevent intervals (threshold 125).
 */
enum SpenraStatus spenra_generate_rossler_iei(size_t n, uint64_t seed, struct SpenraSeries **out);

/**
 * Lorenz, Rössler, Lorenz segments of `n_each` intervals.
 */
enum SpenraStatus spenra_generate_concat(size_t n_each, uint64_t seed, struct SpenraSeries **out);

/**
 * Fits bandwidths at orders `1..=max_order` and chooses an order by block
 * cross-validation with half-width `l`.
 */
enum SpenraStatus spenra_select_order(const struct SpenraSeries *s,
                                      size_t max_order,
                                      size_t l,
                                      uint64_t seed,
                                      struct SpenraSelectionReport **out);

size_t spenra_report_chosen_order(const struct SpenraSelectionReport *r);

/**
 * Bandwidths fitted at order `p`, in table order (`p + 1` values).
 */
enum SpenraStatus spenra_report_bandwidths(const struct SpenraSelectionReport *r,
                                           size_t p,
                                           double *buf,
                                           size_t cap,
                                           size_t *len_out);

/**
 * Leave-one-out and block cross-validation scores at order `p`.
 */
enum SpenraStatus spenra_report_scores(const struct SpenraSelectionReport *r,
                                       size_t p,
                                       double *cv0,
                                       double *cvl);

void spenra_report_free(struct SpenraSelectionReport *r);

/**
 * Specific entropy rates with the given table-order bandwidths
 * (`order + 1` values); `abs_tol` is the quadrature tolerance.
 */
enum SpenraStatus spenra_estimate(const struct SpenraSeries *s,
                                  const double *bandwidths,
                                  size_t count,
                                  double abs_tol,
                                  struct SpenraEntropySeries **out);

/**
 * Specific entropy rates with the chosen order's bandwidths from `r`.
 */
enum SpenraStatus spenra_estimate_from_report(const struct SpenraSeries *s,
                                              const struct SpenraSelectionReport *r,
                                              double abs_tol,
                                              struct SpenraEntropySeries **out);

size_t spenra_entropy_len(const struct SpenraEntropySeries *e);

/**
 * Entropy rates for 1-based indices `order + 1 ..= T`.
 */
enum SpenraStatus spenra_entropy_values(const struct SpenraEntropySeries *e,
                                        double *buf,
                                        size_t cap,
                                        size_t *len_out);

enum SpenraStatus spenra_entropy_time_averaged(const struct SpenraEntropySeries *e, double *out);

void spenra_entropy_free(struct SpenraEntropySeries *e);

/**
 * Approximate Entropy at embedding `p`, tolerance `r`.
 */
enum SpenraStatus spenra_apen(const double *values, size_t len, size_t p, double r, double *out);

/**
 * Sample Entropy at embedding `p`, tolerance `r`.
 */
enum SpenraStatus spenra_sampen(const double *values, size_t len, size_t p, double r, double *out);

/**
 * Mean log of the normalised uniform-kernel density at each embedding vector.
 */
enum SpenraStatus spenra_phi_normalized(const double *values,
                                        size_t len,
                                        size_t p,
                                        double r,
                                        double *out);

/**
 * Leave-one-out uniform-kernel entropy rate at order `p`.
 */
enum SpenraStatus spenra_loo_rate(const double *values,
                                  size_t len,
                                  size_t p,
                                  double r,
                                  bool skip_isolated,
                                  double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SPENRA_H */
