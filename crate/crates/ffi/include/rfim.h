#ifndef RFIM_H
#define RFIM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum RfimStatus {
  RFIM_STATUS_OK = 0,
  RFIM_STATUS_NULL_POINTER = 1,
  RFIM_STATUS_INVALID_ARGUMENT = 2,
  RFIM_STATUS_CAPACITY = 3,
  RFIM_STATUS_CONFIG = 4,
  RFIM_STATUS_IO = 5,
  RFIM_STATUS_JSON = 6,
  RFIM_STATUS_NO_RECORDS = 7,
  RFIM_STATUS_INVALID_UTF8 = 8,
  RFIM_STATUS_BUFFER_TOO_SMALL = 9,
  RFIM_STATUS_PANIC = 10,
} RfimStatus;

/**
 * Which cells an experiment run executes.
 */
typedef enum RfimRunKind {
  /**
   * Observable sweeps and checks.
   */
  RFIM_RUN_KIND_RUN = 0,
  /**
   * Checks only.
   */
  RFIM_RUN_KIND_VERIFY = 1,
  /**
   * Observable sweeps only.
   */
  RFIM_RUN_KIND_SWEEP = 2,
} RfimRunKind;

/**
 * One disorder realization.
 */
typedef struct RfimDisorder RfimDisorder;

/**
 * A box `[1, n]^d` with free boundary.
 */
typedef struct RfimLattice RfimLattice;

/**
 * Gibbs expectations of one realization with the inputs that produced them.
 */
typedef struct RfimSummary RfimSummary;

/**
 * Overlap moments of one realization.
 */
typedef struct RfimOverlapMoments {
  double r12;
  double r12_sq;
  double r12_r13;
  double r23_r14;
  double gibbs_var;
} RfimOverlapMoments;

/**
 * Outcome counts of an experiment run.
 */
typedef struct RfimRunCounts {
  size_t passed;
  size_t failed;
  size_t warned;
  size_t errors;
  /**
   * 0 iff nothing failed or errored.
   */
  int32_t exit_code;
} RfimRunCounts;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message of this thread, NUL-terminated, into `buf`.
 * Returns the buffer size needed including the terminator; the message is
 * truncated when `capacity` is smaller.
 *
 * # Safety
 * `buf` must be null or valid for `capacity` bytes.
 */
size_t rfim_last_error(char *buf, size_t capacity);

/**
 * # Safety
 * `out` must be valid for a write.
 */
enum RfimStatus rfim_lattice_new(size_t d, size_t n, struct RfimLattice **out);

/**
 * Number of sites, 0 for a null handle.
 *
 * # Safety
 * `lattice` must be null or a live handle.
 */
size_t rfim_lattice_num_sites(const struct RfimLattice *lattice);

/**
 * Number of nearest-neighbour bonds, 0 for a null handle.
 *
 * # Safety
 * `lattice` must be null or a live handle.
 */
size_t rfim_lattice_num_bonds(const struct RfimLattice *lattice);

/**
 * # Safety
 * `lattice` must be null or a handle not yet freed.
 */
void rfim_lattice_free(struct RfimLattice *lattice);

/**
 * Standard Gaussian field keyed by `(seed, realization_id)`.
 *
 * # Safety
 * `lattice` must be a live handle and `out` valid for a write.
 */
enum RfimStatus rfim_disorder_sample(const struct RfimLattice *lattice,
                                     uint64_t seed,
                                     uint64_t realization_id,
                                     struct RfimDisorder **out);

/**
 * Disorder with caller-supplied values.
 *
 * # Safety
 * `values` must be valid for `len` reads and `out` valid for a write.
 */
enum RfimStatus rfim_disorder_from_values(const double *values,
                                          size_t len,
                                          struct RfimDisorder **out);

/**
 * # Safety
 * `disorder` must be a live handle; `buf` null or valid for `capacity`
 * writes; `needed` null or valid for a write.
 */
enum RfimStatus rfim_disorder_values(const struct RfimDisorder *disorder,
                                     double *buf,
                                     size_t capacity,
                                     size_t *needed);

/**
 * # Safety
 * `disorder` must be null or a handle not yet freed.
 */
void rfim_disorder_free(struct RfimDisorder *disorder);

/**
 * Exact Gibbs expectations (transfer recursion for chains, enumeration otherwise).
 *
 * # Safety
 * `lattice` and `disorder` must be live handles and `out` valid for a write.
 */
enum RfimStatus rfim_summary_exact(const struct RfimLattice *lattice,
                                   const struct RfimDisorder *disorder,
                                   double beta,
                                   double h,
                                   struct RfimSummary **out);

/**
 * Two-replica heat-bath estimate. The free energy is NaN.
 *
 * # Safety
 * `lattice` and `disorder` must be live handles and `out` valid for a write.
 */
enum RfimStatus rfim_summary_mcmc(const struct RfimLattice *lattice,
                                  const struct RfimDisorder *disorder,
                                  double beta,
                                  double h,
                                  size_t sweeps,
                                  size_t burn_in,
                                  uint64_t seed,
                                  struct RfimSummary **out);

/**
 * `F = log Z`.
 *
 * # Safety
 * `summary` must be a live handle and `out` valid for a write.
 */
enum RfimStatus rfim_summary_log_partition(const struct RfimSummary *summary, double *out);

/**
 * `<H_n> = (1/|V|) sum_x g_x m_x`.
 *
 * # Safety
 * `summary` must be a live handle and `out` valid for a write.
 */
enum RfimStatus rfim_summary_hn(const struct RfimSummary *summary, double *out);

/**
 * Magnetizations `m_x`, one per site.
 *
 * # Safety
 * `summary` must be a live handle; `buf` null or valid for `capacity`
 * writes; `needed` null or valid for a write.
 */
enum RfimStatus rfim_summary_magnetization(const struct RfimSummary *summary,
                                           double *buf,
                                           size_t capacity,
                                           size_t *needed);

/**
 * Dense row-major `C_{x,y} = <s_x s_y>`.
 *
 * # Safety
 * `summary` must be a live handle; `buf` null or valid for `capacity`
 * writes; `needed` null or valid for a write.
 */
enum RfimStatus rfim_summary_correlation(const struct RfimSummary *summary,
                                         double *buf,
                                         size_t capacity,
                                         size_t *needed);

/**
 * # Safety
 * `summary` must be a live handle and `out` valid for a write.
 */
enum RfimStatus rfim_summary_overlaps(const struct RfimSummary *summary,
                                      struct RfimOverlapMoments *out);

/**
 * The summary as a JSON object (`d, n, beta, h, seed, realization_id, F,
 * psi, m, C, source`), NUL-terminated. `needed` includes the terminator.
 *
 * # Safety
 * `summary` must be a live handle; `buf` null or valid for `capacity`
 * bytes; `needed` null or valid for a write.
 */
enum RfimStatus rfim_summary_to_json(const struct RfimSummary *summary,
                                     char *buf,
                                     size_t capacity,
                                     size_t *needed);

/**
 * # Safety
 * `summary` must be null or a handle not yet freed.
 */
void rfim_summary_free(struct RfimSummary *summary);

/**
 * Runs an experiment described by TOML text, writing records and the
 * summary under `out_dir` (the config's `output` key, or `results`, when
 * null).
 *
 * # Safety
 * `config_toml` must be a NUL-terminated string, `out_dir` null or one, and
 * `counts` null or valid for a write.
 */
enum RfimStatus rfim_run_experiment(const char *config_toml,
                                    const char *out_dir,
                                    enum RfimRunKind kind,
                                    size_t workers,
                                    bool resume,
                                    struct RfimRunCounts *counts);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RFIM_H */
