#ifndef CDOPT_H
#define CDOPT_H

/* Generated from src/lib.rs by cbindgen. Do not edit. */

#include <stddef.h>
#include <stdint.h>

/**
 * Result of every fallible call.
 */
typedef enum CdoptStatus {
  CDOPT_STATUS_OK = 0,
  CDOPT_STATUS_NULL_POINTER = 1,
  CDOPT_STATUS_INVALID_ARGUMENT = 2,
  CDOPT_STATUS_SHAPE_MISMATCH = 3,
  CDOPT_STATUS_INFEASIBLE = 4,
  CDOPT_STATUS_DEGENERATE = 5,
  CDOPT_STATUS_NUMERICAL = 6,
  CDOPT_STATUS_CAPABILITY = 7,
  /**
   * The solver stagnated or feasibility restoration failed.
   */
  CDOPT_STATUS_NOT_CONVERGED = 8,
  CDOPT_STATUS_IO = 9,
  /**
   * A Rust panic was caught at the boundary.
   */
  CDOPT_STATUS_PANIC = 10,
} CdoptStatus;

typedef enum CdoptSolver {
  CDOPT_SOLVER_LBFGS = 0,
  CDOPT_SOLVER_CG = 1,
  CDOPT_SOLVER_TR_NEWTON_CG = 2,
  CDOPT_SOLVER_CRM = 3,
} CdoptSolver;

typedef enum CdoptTermination {
  CDOPT_TERMINATION_CONVERGED = 0,
  CDOPT_TERMINATION_MAX_ITERATIONS = 1,
  CDOPT_TERMINATION_MAX_TIME = 2,
  CDOPT_TERMINATION_STAGNATED = 3,
} CdoptTermination;

/**
 * Opaque constraint dissolving function handle.
 */
typedef struct CdoptCdf CdoptCdf;

/**
 * Opaque manifold handle.
 */
typedef struct CdoptManifold CdoptManifold;

/**
 * Opaque benchmark problem handle.
 */
typedef struct CdoptProblem CdoptProblem;

/**
 * Objective supplied by C code. `value` and `gradient` are required;
 * `hess_vec` may be null. `gradient` and `hess_vec` write `n` entries to
 * `out`. Returning NaN from `value` (or writing NaN) makes the solver stop
 * with a stagnation status. The callbacks may be invoked from any thread
 * that calls into the library with the owning handle.
 */
typedef struct CdoptObjectiveCallbacks {
  double (*value)(const double *x, size_t n, void *user);
  void (*gradient)(const double *x, size_t n, double *out, void *user);
  void (*hess_vec)(const double *x, const double *d, size_t n, double *out, void *user);
  void *user_data;
} CdoptObjectiveCallbacks;

/**
 * Stopping rules for [`cdopt_solve`]; start from [`cdopt_solve_options_default`].
 */
typedef struct CdoptSolveOptions {
  double grad_tol;
  size_t max_iter;
  double max_time_s;
} CdoptSolveOptions;

/**
 * Summary of a solve. `fval` and `grad_norm` refer to `h` at the solver's
 * final point; `feasibility` is `|c|` at that point before any restoration.
 */
typedef struct CdoptSolveReport {
  double fval;
  double grad_norm;
  double feasibility;
  size_t iterations;
  size_t nfev;
  size_t ngev;
  size_t nhev;
  double wall_time_s;
  int termination;
} CdoptSolveReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null if none. The
 * pointer stays valid until the next failing call on the same thread.
 */
const char *cdopt_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *cdopt_version(void);

enum CdoptStatus cdopt_manifold_sphere(size_t n, struct CdoptManifold **out);

enum CdoptStatus cdopt_manifold_oblique(size_t m, size_t s, struct CdoptManifold **out);

enum CdoptStatus cdopt_manifold_stiefel(size_t m, size_t s, struct CdoptManifold **out);

enum CdoptStatus cdopt_manifold_grassmann(size_t m, size_t s, struct CdoptManifold **out);

/**
 * `{X : X^T B X = I}` for symmetric positive definite `B` (`m x m`).
 *
 * # Safety
 * `b` must point to `m * m` doubles.
 */
enum CdoptStatus cdopt_manifold_generalized_stiefel(const double *b,
                                                    size_t m,
                                                    size_t s,
                                                    struct CdoptManifold **out);

/**
 * `{X : X^T B X = I}` for symmetric indefinite `B` (`m x m`).
 *
 * # Safety
 * `b` must point to `m * m` doubles.
 */
enum CdoptStatus cdopt_manifold_hyperbolic(const double *b,
                                           size_t m,
                                           size_t s,
                                           struct CdoptManifold **out);

/**
 * Symplectic Stiefel manifold of `2m x 2s` matrices.
 */
enum CdoptStatus cdopt_manifold_symplectic_stiefel(size_t m, size_t s, struct CdoptManifold **out);

/**
 * `{X : X^T R X = R}` with `R^T = sign * R`; `sign` is `1` or `-1`.
 *
 * # Safety
 * `r` must point to `m * m` doubles.
 */
enum CdoptStatus cdopt_manifold_quadratic_lie_group(const double *r,
                                                    size_t m,
                                                    int sign,
                                                    struct CdoptManifold **out);

/**
 * # Safety
 * `h` must be null or a handle from this library that has not been freed.
 */
void cdopt_manifold_free(struct CdoptManifold *h);

/**
 * Length of a point, or 0 for a null handle.
 *
 * # Safety
 * `h` must be null or a live handle.
 */
size_t cdopt_manifold_dim(const struct CdoptManifold *h);

/**
 * Number of constraints, or 0 for a null handle.
 *
 * # Safety
 * `h` must be null or a live handle.
 */
size_t cdopt_manifold_constraint_dim(const struct CdoptManifold *h);

/**
 * Writes `A(x)` to `out`.
 *
 * # Safety
 * `x` and `out` must point to `n` doubles; `h` must be a live handle.
 */
enum CdoptStatus cdopt_manifold_operator(const struct CdoptManifold *h,
                                         const double *x,
                                         double *out,
                                         size_t n);

/**
 * Writes `|c(x)|` to `out`.
 *
 * # Safety
 * `x` must point to `n` doubles; `h` must be a live handle.
 */
enum CdoptStatus cdopt_manifold_feasibility(const struct CdoptManifold *h,
                                            const double *x,
                                            size_t n,
                                            double *out);

/**
 * Writes a random feasible point drawn from `seed`.
 *
 * # Safety
 * `out` must point to `n` doubles; `h` must be a live handle.
 */
enum CdoptStatus cdopt_manifold_sample(const struct CdoptManifold *h,
                                       uint64_t seed,
                                       double *out,
                                       size_t n);

/**
 * Applies the operator until `|c| <= eps`, at most `k_max` times, and
 * writes the point to `out` and the number of applications to `iterations`
 * (which may be null).
 *
 * # Safety
 * `x` and `out` must point to `n` doubles; `h` must be a live handle.
 */
enum CdoptStatus cdopt_post_process(const struct CdoptManifold *h,
                                    const double *x,
                                    size_t n,
                                    double eps,
                                    size_t k_max,
                                    double *out,
                                    size_t *iterations);

/**
 * Nearest symplectic matrix problem on `2m x 2s` matrices.
 */
enum CdoptStatus cdopt_problem_nsm(size_t m, size_t s, uint64_t seed, struct CdoptProblem **out);

enum CdoptStatus cdopt_problem_geneig(size_t m,
                                      size_t s,
                                      double density,
                                      uint64_t seed,
                                      struct CdoptProblem **out);

enum CdoptStatus cdopt_problem_ncm(size_t m,
                                   size_t s,
                                   double theta,
                                   uint64_t seed,
                                   struct CdoptProblem **out);

enum CdoptStatus cdopt_problem_hyperbola2d(struct CdoptProblem **out);

/**
 * # Safety
 * `h` must be null or a live handle.
 */
void cdopt_problem_free(struct CdoptProblem *h);

/**
 * # Safety
 * `h` must be null or a live handle.
 */
size_t cdopt_problem_dim(const struct CdoptProblem *h);

/**
 * Copies the problem's manifold into a new handle.
 *
 * # Safety
 * `h` must be a live handle.
 */
enum CdoptStatus cdopt_problem_manifold(const struct CdoptProblem *h, struct CdoptManifold **out);

/**
 * Writes the seeded starting point.
 *
 * # Safety
 * `out` must point to `n` doubles; `h` must be a live handle.
 */
enum CdoptStatus cdopt_problem_initial_point(const struct CdoptProblem *h, double *out, size_t n);

/**
 * Writes `f(x)`.
 *
 * # Safety
 * `x` must point to `n` doubles; `h` must be a live handle.
 */
enum CdoptStatus cdopt_problem_value(const struct CdoptProblem *h,
                                     const double *x,
                                     size_t n,
                                     double *out);

/**
 * Writes the known optimal value to `out` and returns `Ok`, or returns
 * `Capability` when the problem has none.
 *
 * # Safety
 * `h` must be a live handle.
 */
enum CdoptStatus cdopt_problem_known_optimum(const struct CdoptProblem *h, double *out);

/**
 * `h` for a benchmark problem with penalty `beta`.
 *
 * # Safety
 * `problem` must be a live handle.
 */
enum CdoptStatus cdopt_cdf_from_problem(const struct CdoptProblem *problem,
                                        double beta,
                                        struct CdoptCdf **out);

/**
 * `h` for a user objective over `manifold` with penalty `beta`. The
 * manifold is copied, so its handle may be freed afterwards.
 *
 * # Safety
 * `manifold` must be a live handle and `callbacks` must stay valid for the
 * lifetime of the returned handle.
 */
enum CdoptStatus cdopt_cdf_from_callbacks(const struct CdoptManifold *manifold,
                                          struct CdoptObjectiveCallbacks callbacks,
                                          double beta,
                                          struct CdoptCdf **out);

/**
 * # Safety
 * `h` must be null or a live handle.
 */
void cdopt_cdf_free(struct CdoptCdf *h);

/**
 * # Safety
 * `h` must be null or a live handle.
 */
size_t cdopt_cdf_dim(const struct CdoptCdf *h);

/**
 * Writes `h(x)`.
 *
 * # Safety
 * `x` must point to `n` doubles; `h` must be a live handle.
 */
enum CdoptStatus cdopt_cdf_value(const struct CdoptCdf *h, const double *x, size_t n, double *out);

/**
 * Writes `grad h(x)`.
 *
 * # Safety
 * `x` and `out` must point to `n` doubles; `h` must be a live handle.
 */
enum CdoptStatus cdopt_cdf_gradient(const struct CdoptCdf *h,
                                    const double *x,
                                    double *out,
                                    size_t n);

/**
 * Writes the Hessian of `h` at `x` applied to `d`.
 *
 * # Safety
 * `x`, `d` and `out` must point to `n` doubles; `h` must be a live handle.
 */
enum CdoptStatus cdopt_cdf_hess_vec(const struct CdoptCdf *h,
                                    const double *x,
                                    const double *d,
                                    double *out,
                                    size_t n);

struct CdoptSolveOptions cdopt_solve_options_default(void);

/**
 * Minimizes `h` from `x0` with the method given by a [`CdoptSolver`] value
 * and writes the final point to `x_out`. A null
 * `options` uses the defaults; `report` may be null. When the solver
 * stagnates, the last point and the report are still written and
 * `NotConverged` is returned. Hitting the iteration or time limit returns
 * `Ok` with the termination recorded in the report.
 *
 * # Safety
 * `x0` and `x_out` must point to `n` doubles; `h` must be a live handle.
 */
enum CdoptStatus cdopt_solve(const struct CdoptCdf *h,
                             int solver,
                             const double *x0,
                             size_t n,
                             const struct CdoptSolveOptions *options,
                             double *x_out,
                             struct CdoptSolveReport *report);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CDOPT_H */
