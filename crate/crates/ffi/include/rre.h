/* C interface to the random Riccati equation toolkit. */

#ifndef RRE_H
#define RRE_H

/* Generated with cbindgen:0.26.0 */

/* Generated from the rre-ffi crate by cbindgen; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Scalar summary applied to a covariance matrix.
typedef enum RreFunctional {
  // Trace of the covariance.
  RRE_FUNCTIONAL_TRACE = 0,
  // Largest eigenvalue of the covariance.
  RRE_FUNCTIONAL_LAMBDA_MAX = 1,
} RreFunctional;

// Result code of every fallible call.
typedef enum RreStatus {
  // The call succeeded.
  RRE_STATUS_OK = 0,
  // A required pointer argument was null.
  RRE_STATUS_NULL_ARGUMENT = 1,
  // An argument was rejected (dimensions, ranges, parse errors,
  // structural assumptions such as detectability).
  RRE_STATUS_INVALID_ARGUMENT = 2,
  // A numerical computation failed (non-finite values, no convergence,
  // exhausted enumeration budget).
  RRE_STATUS_NUMERICAL = 3,
  // An output buffer is too small; the required size was written to the
  // count argument.
  RRE_STATUS_BUFFER_TOO_SMALL = 4,
  // An internal invariant was violated; the library state is still valid.
  RRE_STATUS_INTERNAL = 5,
} RreStatus;

// Opaque system handle: the matrices `(A, C, Q, R)` after validation.
typedef struct RreSystem RreSystem;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Returns the library version as a static nul-terminated string.
const char *rre_version(void);

// Returns the error message of the most recent failing call on this
// thread, or an empty string. The pointer stays valid until the next
// failing call on the same thread.
const char *rre_last_error_message(void);

// Builds a system from row-major arrays: `a` is `n*n`, `c` is `m*n`
// (`m` outputs of an `n`-dimensional state), `q` is `n*n` and `r` is
// `m*m`. Validates symmetry by construction, `Q >= 0` and `R > 0`, and
// writes the new handle to `out`.
//
// # Safety
//
// The array pointers must reference readable buffers of the stated sizes
// and `out` must be writable.
enum RreStatus rre_system_new(size_t n,
                              size_t m,
                              const double *a,
                              const double *c,
                              const double *q,
                              const double *r,
                              struct RreSystem **out);

// Builds a system from a nul-terminated JSON document with keys
// `"A"`, `"C"`, `"Q"`, `"R"`, each a nested array of rows.
//
// # Safety
//
// `json` must be a valid nul-terminated string and `out` writable.
enum RreStatus rre_system_from_json(const char *json, struct RreSystem **out);

// Builds the scalar benchmark system `A = sqrt(2)`, `C = Q = R = 1`.
//
// # Safety
//
// `out` must be writable.
enum RreStatus rre_system_example_scalar(struct RreSystem **out);

// Builds the seeded ten-state, five-output benchmark system with spectral
// radius 1.25.
//
// # Safety
//
// `out` must be writable.
enum RreStatus rre_system_example_ten_dim(uint64_t seed, struct RreSystem **out);

// Releases a handle. Passing null is a no-op.
//
// # Safety
//
// `system` must be null or a pointer returned by a constructor that has
// not been freed already.
void rre_system_free(struct RreSystem *system);

// Writes the state dimension `n` and output dimension `m`.
//
// # Safety
//
// `system` must be a live handle; non-null outputs must be writable.
enum RreStatus rre_system_dims(const struct RreSystem *system, size_t *out_n, size_t *out_m);

// Writes the spectral radius of `A`.
//
// # Safety
//
// `system` must be a live handle and `out` writable.
enum RreStatus rre_spectral_radius(const struct RreSystem *system, double *out);

// Writes whether `(A, C)` is detectable in the PBH sense.
//
// # Safety
//
// `system` must be a live handle and `out` writable.
enum RreStatus rre_is_detectable(const struct RreSystem *system, bool *out);

// Writes whether `(A, Q^{1/2})` is stabilizable in the PBH sense.
//
// # Safety
//
// `system` must be a live handle and `out` writable.
enum RreStatus rre_is_stabilizable(const struct RreSystem *system, bool *out);

// Applies the open-loop map `X -> A X A^T + Q` to the symmetric `n*n`
// input `x` and writes the `n*n` result to `out`.
//
// # Safety
//
// `system` must be a live handle; `x` and `out` must reference `n*n`
// doubles (they may alias).
enum RreStatus rre_lyapunov_map(const struct RreSystem *system, const double *x, double *out);

// Applies the update map
// `X -> A X A^T + Q - A X C^T (C X C^T + R)^{-1} C X A^T` to the
// symmetric `n*n` input `x` and writes the `n*n` result to `out`.
//
// # Safety
//
// `system` must be a live handle; `x` and `out` must reference `n*n`
// doubles (they may alias).
enum RreStatus rre_riccati_map(const struct RreSystem *system, const double *x, double *out);

// Solves the deterministic steady-state equation `f1(P) = P` by fixed-point
// iteration. Pass `tol <= 0` and `max_iter == 0` for the defaults
// (`1e-12`, `10000`). Non-null outputs receive: `out_p_star` the `n*n`
// fixed point, `out_gain` the `n*m` steady gain `K` (closed loop
// `A + K C`), `out_iterations` and `out_residual` the iteration count and
// final residual.
//
// # Safety
//
// `system` must be a live handle; non-null outputs must reference buffers
// of the stated sizes.
enum RreStatus rre_solve_dare(const struct RreSystem *system,
                              double tol,
                              size_t max_iter,
                              double *out_p_star,
                              double *out_gain,
                              size_t *out_iterations,
                              double *out_residual);

// Writes the closed-form lower bound `max(0, 1 - 1/alpha^2)` on the
// critical arrival probability, where `alpha` is the spectral radius
// of `A`.
//
// # Safety
//
// `system` must be a live handle and `out` writable.
enum RreStatus rre_critical_lower(const struct RreSystem *system, double *out);

// Computes the critical-probability bracket: the closed-form lower bound
// and the bisected fixed-gain upper bound. Pass `bisect_tol <= 0` for the
// default `1e-6`. Non-null outputs receive the bounds and the spectral
// radius of the averaged closed-loop operator at the upper bound.
// Requires detectability and stabilizability.
//
// # Safety
//
// `system` must be a live handle; non-null outputs must be writable.
enum RreStatus rre_critical_bounds(const struct RreSystem *system,
                                   double bisect_tol,
                                   double *out_lower,
                                   double *out_upper,
                                   double *out_radius_at_upper);

// Writes `0.0` when boundedness in probability holds for every positive
// arrival probability (detectable and stabilizable systems), and `-1.0`
// when no statement applies.
//
// # Safety
//
// `system` must be a live handle and `out` writable.
enum RreStatus rre_weak_critical(const struct RreSystem *system, double *out);

// Runs the covariance recursion for `horizon` steps with i.i.d. Bernoulli
// arrivals of probability `gamma_bar` on the stream derived from `seed`.
// `p0` is the symmetric `n*n` initial covariance, or null for `Q`.
// Non-null output arrays receive `horizon + 1` values (`t = 0` through
// `t = horizon` inclusive): `out_trace` the trace and `out_lambda_max`
// the largest eigenvalue of each covariance.
//
// # Safety
//
// `system` must be a live handle; `p0` must be null or reference `n*n`
// doubles; non-null outputs must reference `horizon + 1` doubles.
enum RreStatus rre_simulate(const struct RreSystem *system,
                            double gamma_bar,
                            uint64_t seed,
                            size_t horizon,
                            const double *p0,
                            double *out_trace,
                            double *out_lambda_max);

// Averages the chosen functional of the covariance over
// `t in (burn_in, horizon]` on one seeded arrival path. Writes the time
// average to `out_value`; a non-null `out_divergent` receives whether the
// path showed no sign of settling (in that case the average does not
// estimate a stationary quantity).
//
// # Safety
//
// `system` must be a live handle; `out_value` must be writable; a
// non-null `out_divergent` must be writable.
enum RreStatus rre_ergodic_average(const struct RreSystem *system,
                                   double gamma_bar,
                                   uint64_t seed,
                                   size_t burn_in,
                                   size_t horizon,
                                   enum RreFunctional functional,
                                   double *out_value,
                                   bool *out_divergent);

// Enumerates the reachable covariances up to word length `depth`, rooted
// at the steady-state fixed point, and reports their traces in the
// enumeration order (root first). Two-call convention: when `buffer` is
// null the node count is written to `out_count`; otherwise up to
// `capacity` traces are written and the total count goes to `out_count`
// (`RRE_STATUS_BUFFER_TOO_SMALL` when `capacity` is insufficient).
// Pass `dedupe_tol <= 0` or `max_nodes == 0` for the defaults.
//
// # Safety
//
// `system` must be a live handle; `out_count` must be writable; a
// non-null `buffer` must reference `capacity` doubles.
enum RreStatus rre_support_traces(const struct RreSystem *system,
                                  size_t depth,
                                  double dedupe_tol,
                                  size_t max_nodes,
                                  double *buffer,
                                  size_t capacity,
                                  size_t *out_count);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* RRE_H */
