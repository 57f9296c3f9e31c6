#ifndef FKPARTICLE_H
#define FKPARTICLE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum {
  FKP_STATUS_OK = 0,
  FKP_STATUS_NULL_POINTER = 1,
  FKP_STATUS_INVALID_ARGUMENT = 2,
  FKP_STATUS_DIMENSION_MISMATCH = 3,
  FKP_STATUS_UNSUPPORTED = 4,
  FKP_STATUS_NUMERICAL = 5,
  FKP_STATUS_CONFIG = 6,
  FKP_STATUS_IO = 7,
  FKP_STATUS_PANIC = 8,
} FkpStatus;

/**
 * Oracle quadrature choice.
 */
typedef enum {
  FKP_ORACLE_METHOD_MONTE_CARLO = 0,
  FKP_ORACLE_METHOD_GAUSS_HERMITE = 1,
} FkpOracleMethod;

/**
 * A problem definition.
 */
typedef struct FkpProblem FkpProblem;

/**
 * A completed particle run with every intermediate estimate.
 */
typedef struct FkpScheme FkpScheme;

/**
 * Oracle parameters. `samples` and `seed` apply to Monte Carlo, `nodes` to Gauss-Hermite.
 */
typedef struct {
  FkpOracleMethod method;
  size_t samples;
  uint64_t seed;
  size_t nodes;
} FkpOracleOptions;

/**
 * Parameters of one experiment cell. `tree_tolerance <= 0` selects naive evaluation.
 */
typedef struct {
  size_t steps;
  size_t particles;
  double epsilon;
  size_t replicates;
  size_t eval_points;
  uint64_t seed;
  double tree_tolerance;
} FkpExperimentParams;

/**
 * Summary of an experiment cell.
 */
typedef struct {
  double l1_mean;
  double l1_std;
  uint64_t runtime_ms;
} FkpExperimentResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *fkp_version(void);

/**
 * Copies the calling thread's last error message into `buf` (NUL-terminated, truncated to `len`).
 *
 * Returns the full message length excluding the terminator, so a call with `len = 0` sizes the buffer.
 *
 * # Safety
 * `buf` must point to `len` writable bytes or be null with `len = 0`.
 */
size_t fkp_last_error_message(char *buf,
                              size_t len);

/**
 * Creates a built-in problem: `"fokker-planck"`, `"burgers"` or `"kpz"`.
 *
 * # Safety
 * `name` must be a NUL-terminated string; `out` must be writable.
 */
FkpStatus fkp_problem_new(const char *name, size_t dim, double nu, FkpProblem **out);

/**
 * Sets the final time `T`.
 *
 * # Safety
 * `problem` must come from [`fkp_problem_new`].
 */
FkpStatus fkp_problem_set_horizon(FkpProblem *problem, double horizon);

/**
 * Clips `|Λ|` at `cap`; a non-positive `cap` removes the clipping.
 *
 * # Safety
 * `problem` must come from [`fkp_problem_new`].
 */
FkpStatus fkp_problem_set_lambda_cap(FkpProblem *problem, double cap);

/**
 * Spatial dimension of `problem`, or 0 for a null handle.
 *
 * # Safety
 * `problem` must come from [`fkp_problem_new`] or be null.
 */
size_t fkp_problem_dim(const FkpProblem *problem);

/**
 * # Safety
 * `problem` must come from [`fkp_problem_new`] or be null, and is invalid afterwards.
 */
void fkp_problem_free(FkpProblem *problem);

/**
 * Runs the particle scheme with `steps` Euler steps and `particles` particles.
 *
 * `tree_tolerance <= 0` selects exact (naive) kernel sums.
 *
 * # Safety
 * `problem` must be a live handle; `out` must be writable.
 */
FkpStatus fkp_scheme_run(const FkpProblem *problem,
                         size_t steps,
                         size_t particles,
                         double epsilon,
                         uint64_t seed,
                         double tree_tolerance,
                         FkpScheme **out);

/**
 * Number of time steps `n`; estimates exist for steps `0..=n`. Returns 0 for a null handle.
 *
 * # Safety
 * `scheme` must be a live handle or null.
 */
size_t fkp_scheme_steps(const FkpScheme *scheme);

/**
 * Number of particles, or 0 for a null handle.
 *
 * # Safety
 * `scheme` must be a live handle or null.
 */
size_t fkp_scheme_particles(const FkpScheme *scheme);

/**
 * Spatial dimension, or 0 for a null handle.
 *
 * # Safety
 * `scheme` must be a live handle or null.
 */
size_t fkp_scheme_dim(const FkpScheme *scheme);

/**
 * Writes the `particles` weights `G_k` of step `step` into `weights`.
 *
 * # Safety
 * `scheme` must be a live handle; `weights` must hold `len` doubles.
 */
FkpStatus fkp_scheme_weights(const FkpScheme *scheme, size_t step, double *weights, size_t len);

/**
 * Evaluates `ū` at step `step` on `count` points stored row-major in `xs` (`count × dim`).
 *
 * `gradients` may be null; otherwise it receives `count × dim` doubles.
 *
 * # Safety
 * `scheme` must be a live handle and the buffers must have the stated sizes.
 */
FkpStatus fkp_scheme_evaluate(const FkpScheme *scheme,
                              size_t step,
                              const double *xs,
                              size_t count,
                              double *values,
                              double *gradients);

/**
 * `∫ ū_{t_k}`, the mean particle weight at step `step ≥ 1` (1 at step 0 for a probability `u0`).
 *
 * # Safety
 * `scheme` must be a live handle; `mass` must be writable.
 */
FkpStatus fkp_scheme_total_mass(const FkpScheme *scheme,
                                size_t step,
                                double *mass);

/**
 * # Safety
 * `scheme` must be a live handle or null, and is invalid afterwards.
 */
void fkp_scheme_free(FkpScheme *scheme);

/**
 * Reference solution of a built-in problem at `(t, x)`, `x` of length `dim`.
 *
 * `options` may be null for Monte Carlo with 10 000 draws. `std_error` may be null.
 *
 * # Safety
 * Pointers must be valid for the stated sizes.
 */
FkpStatus fkp_oracle_reference(const FkpProblem *problem,
                               double t,
                               const double *x,
                               size_t dim,
                               const FkpOracleOptions *options,
                               double *value,
                               double *std_error);

/**
 * Runs `replicates` independent schemes and scores them against the oracle.
 *
 * # Safety
 * Pointers must be valid; `options` may be null for the default oracle.
 */
FkpStatus fkp_experiment_run(const FkpProblem *problem,
                             const FkpExperimentParams *params,
                             const FkpOracleOptions *options,
                             FkpExperimentResult *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FKPARTICLE_H */
