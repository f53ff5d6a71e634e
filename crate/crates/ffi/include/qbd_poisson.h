#ifndef QBD_POISSON_H
#define QBD_POISSON_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// `y_perp` chosen with minimal norm.
#define QBD_Y_PERP_MINIMAL_NORM 0

// `y_perp = 0`; needs `pi^T g = 0` on recurrent chains.
#define QBD_Y_PERP_ZERO 1

// Result code of every fallible call.
typedef enum QbdStatus {
  QBD_STATUS_OK = 0,
  // Malformed document, wrong dimensions or a non-stochastic model.
  QBD_STATUS_VALIDATION = 1,
  // A numerical step failed (no convergence, singular matrix, residual check).
  QBD_STATUS_NUMERICAL = 2,
  // The requested boundary constraint cannot be met.
  QBD_STATUS_INFEASIBLE = 3,
  QBD_STATUS_NULL_POINTER = 10,
  QBD_STATUS_INVALID_ARGUMENT = 11,
  // An internal panic was caught at the boundary.
  QBD_STATUS_PANIC = 12,
} QbdStatus;

typedef enum QbdClass {
  QBD_CLASS_POSITIVE_RECURRENT = 0,
  QBD_CLASS_NULL_RECURRENT = 1,
  QBD_CLASS_TRANSIENT = 2,
} QbdClass;

// A validated model together with its forcing term.
typedef struct QbdProblem QbdProblem;

typedef struct QbdSolution QbdSolution;

// Options for [`qbd_solve`]. Start from [`qbd_solve_options_default`].
typedef struct QbdSolveOptions {
  // Highest level evaluated; 0 selects the default (support of g plus 10).
  size_t levels;
  // Additive constant of recurrent solutions.
  double alpha;
  // One of `QBD_Y_PERP_*`.
  int32_t y_perp;
  // Relative tolerance of the residual check.
  double residual_tol;
  // Zero threshold of the spectral split; non-positive selects the default.
  double eps_zero;
  // Nonzero: a failed residual check is reported as a numerical failure.
  int32_t strict;
} QbdSolveOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Parses a problem document (UTF-8 JSON) and validates the model.
//
// # Safety
// `json` must be a NUL-terminated string and `out` a valid pointer.
enum QbdStatus qbd_problem_from_json(const char *json, struct QbdProblem **out);

// Builds a problem from row-major `m x m` blocks and `g_blocks` forcing
// vectors of length `m` stored back to back in `g`.
//
// # Safety
// Each block pointer must reference `m * m` doubles, `g` must reference
// `g_blocks * m` doubles and `out` must be a valid pointer.
enum QbdStatus qbd_problem_from_blocks(size_t m,
                                       const double *b,
                                       const double *a_minus,
                                       const double *a0,
                                       const double *a1,
                                       const double *g,
                                       size_t g_blocks,
                                       struct QbdProblem **out);

// Releases a problem; null is ignored.
//
// # Safety
// `problem` must come from this library and not be used afterwards.
void qbd_problem_free(struct QbdProblem *problem);

// Number of phases `m`, 0 for null.
//
// # Safety
// `problem` must be null or a live handle.
size_t qbd_problem_phases(const struct QbdProblem *problem);

// Classifies the chain; `drift` may be null.
//
// # Safety
// `problem` must be a live handle, `class_out` a valid pointer.
enum QbdStatus qbd_classify(const struct QbdProblem *problem,
                            enum QbdClass *class_out,
                            double *drift);

struct QbdSolveOptions qbd_solve_options_default(void);

// Solves the Poisson equation. `options` may be null for the defaults.
//
// # Safety
// `problem` must be a live handle, `options` null or valid, `out` a valid pointer.
enum QbdStatus qbd_solve(const struct QbdProblem *problem,
                         const struct QbdSolveOptions *options,
                         struct QbdSolution **out);

// Releases a solution; null is ignored.
//
// # Safety
// `solution` must come from this library and not be used afterwards.
void qbd_solution_free(struct QbdSolution *solution);

// Number of levels `u_0 .. u_R` in the solution, 0 for null.
//
// # Safety
// `solution` must be null or a live handle.
size_t qbd_solution_levels(const struct QbdSolution *solution);

// # Safety
// `solution` must be null or a live handle.
size_t qbd_solution_phases(const struct QbdSolution *solution);

// # Safety
// `solution` must be a live handle, `class_out` a valid pointer.
enum QbdStatus qbd_solution_class(const struct QbdSolution *solution, enum QbdClass *class_out);

// Copies `u` level by level (`levels * phases` doubles) into `out`.
//
// # Safety
// `out` must reference at least `len` writable doubles.
enum QbdStatus qbd_solution_copy_u(const struct QbdSolution *solution, double *out, size_t len);

// Largest boundary or interior residual, NaN for null.
//
// # Safety
// `solution` must be null or a live handle.
double qbd_solution_max_residual(const struct QbdSolution *solution);

// Solution document as JSON; release with [`qbd_string_free`]. Null on failure.
//
// # Safety
// `solution` must be null or a live handle.
char *qbd_solution_to_json(const struct QbdSolution *solution);

// # Safety
// `s` must be null or a string returned by this library.
void qbd_string_free(char *s);

// Message of the last failed call on this thread, or null. Valid until the
// next call into the library from the same thread.
const char *qbd_last_error_message(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QBD_POISSON_H */
