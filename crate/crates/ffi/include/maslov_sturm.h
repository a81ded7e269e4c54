#ifndef MASLOV_STURM_H
#define MASLOV_STURM_H

#pragma once

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes; the parse/admissibility/final-focal values match the CLI
 * exit codes.
 */
typedef enum MsStatus {
  MS_STATUS_OK = 0,
  /**
   * numerical failure (cluster, charting, symplecticity, …)
   */
  MS_STATUS_NUMERICAL = 1,
  MS_STATUS_PARSE = 2,
  MS_STATUS_ADMISSIBILITY = 3,
  MS_STATUS_FINAL_INSTANT_FOCAL = 4,
  MS_STATUS_NULL_POINTER = 5,
  MS_STATUS_INVALID_UTF8 = 6,
  MS_STATUS_OUT_OF_RANGE = 7,
  MS_STATUS_PANIC = 8,
} MsStatus;

/**
 * Result of `ms_analyze`.
 */
typedef struct MsAnalysis MsAnalysis;

/**
 * A validated problem (quadruple).
 */
typedef struct MsProblem MsProblem;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. Owned by the
 * library; valid until the next failing call on the same thread.
 */
const char *ms_last_error_message(void);

/**
 * Parse a problem file's JSON text.
 *
 * # Safety
 * `json` must be a nul-terminated string; `out_problem` a valid pointer.
 */
enum MsStatus ms_problem_from_json(const char *json, struct MsProblem **out_problem);

/**
 * A built-in problem: "harmonic", "counterexample", "evaporation" or
 * "evaporation-perturbed".
 *
 * # Safety
 * `name` must be a nul-terminated string; `out_problem` a valid pointer.
 */
enum MsStatus ms_problem_builtin(const char *name, struct MsProblem **out_problem);

/**
 * The problem serialized as problem-file JSON; free with `ms_string_free`.
 *
 * # Safety
 * `problem` must be a live handle; `out_json` a valid pointer.
 */
enum MsStatus ms_problem_to_json(const struct MsProblem *problem, char **out_json);

/**
 * Dimension n of the problem.
 *
 * # Safety
 * `problem` must be a live handle; `out_n` a valid pointer.
 */
enum MsStatus ms_problem_dim(const struct MsProblem *problem, size_t *out_n);

/**
 * # Safety
 * `problem` must be NULL or a handle not freed before.
 */
void ms_problem_free(struct MsProblem *problem);

/**
 * Focal instants and Maslov index (steps = 0 and tol <= 0 select the
 * defaults 4096 and 1e-9); `spectral` additionally runs the spectral check.
 *
 * # Safety
 * `problem` must be a live handle; `out_analysis` a valid pointer.
 */
enum MsStatus ms_analyze(const struct MsProblem *problem,
                         size_t steps,
                         double tol,
                         bool spectral,
                         struct MsAnalysis **out_analysis);

/**
 * Maslov index μ and focal index i_foc.
 *
 * # Safety
 * `analysis` must be a live handle; the outputs valid pointers.
 */
enum MsStatus ms_analysis_indices(const struct MsAnalysis *analysis,
                                  int64_t *out_mu,
                                  int64_t *out_i_foc);

/**
 * Number of focal records.
 *
 * # Safety
 * `analysis` must be a live handle; `out_count` a valid pointer.
 */
enum MsStatus ms_analysis_focal_count(const struct MsAnalysis *analysis, size_t *out_count);

/**
 * Focal record `index`: instant, multiplicity, signature, degenerate flag.
 *
 * # Safety
 * `analysis` must be a live handle; the outputs valid pointers.
 */
enum MsStatus ms_analysis_focal_record(const struct MsAnalysis *analysis,
                                       size_t index,
                                       double *out_t,
                                       size_t *out_multiplicity,
                                       int64_t *out_signature,
                                       bool *out_degenerate);

/**
 * Spectral index; `out_available` is false unless the analysis ran with
 * `spectral`.
 *
 * # Safety
 * `analysis` must be a live handle; the outputs valid pointers.
 */
enum MsStatus ms_analysis_spectral_index(const struct MsAnalysis *analysis,
                                         bool *out_available,
                                         int64_t *out_i_spec);

/**
 * The JSON report (sorted keys); free with `ms_string_free`.
 *
 * # Safety
 * `analysis` must be a live handle; `out_json` a valid pointer.
 */
enum MsStatus ms_analysis_report_json(const struct MsAnalysis *analysis, char **out_json);

/**
 * The t,det_A,n_plus_in_current_chart,segment_id trace; free with
 * `ms_string_free`.
 *
 * # Safety
 * `analysis` must be a live handle; `out_csv` a valid pointer.
 */
enum MsStatus ms_analysis_trace_csv(const struct MsAnalysis *analysis, char **out_csv);

/**
 * # Safety
 * `analysis` must be NULL or a handle not freed before.
 */
void ms_analysis_free(struct MsAnalysis *analysis);

/**
 * Perturbation sweep: number of admissible trials and of trials with μ
 * unchanged. Optionally the full sweep as JSON (pass NULL to skip).
 *
 * # Safety
 * `problem` must be a live handle; the counts valid pointers; `out_json`
 * NULL or valid.
 */
enum MsStatus ms_perturb(const struct MsProblem *problem,
                         double epsilon,
                         size_t trials,
                         uint64_t seed,
                         size_t *out_admissible,
                         size_t *out_mu_unchanged,
                         char **out_json);

/**
 * # Safety
 * `s` must be NULL or a string returned by this library, not freed before.
 */
void ms_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MASLOV_STURM_H */
