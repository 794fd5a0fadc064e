#include <math.h>
#include <stdio.h>
#include "cdopt.h"

#define CHECK(call)                                                          \
    do {                                                                     \
        CdoptStatus st_ = (call);                                            \
        if (st_ != CDOPT_STATUS_OK) {                                        \
            fprintf(stderr, "%s failed (%d): %s\n", #call, (int)st_,         \
                    cdopt_last_error());                                     \
            return 1;                                                        \
        }                                                                    \
    } while (0)

static double value(const double *x, size_t n, void *user) {
    (void)user;
    double s = 0.0;
    for (size_t i = 0; i < n; i++) s += (double)(i + 1) * x[i] * x[i];
    return s;
}

static void gradient(const double *x, size_t n, double *out, void *user) {
    (void)user;
    for (size_t i = 0; i < n; i++) out[i] = 2.0 * (double)(i + 1) * x[i];
}

int main(void) {
    CdoptManifold *m = NULL;
    CdoptCdf *h = NULL;
    CdoptObjectiveCallbacks cb = {value, gradient, NULL, NULL};
    double x0[4] = {0.5, 0.5, 0.5, 0.5};
    double x[4], y[4];
    size_t k = 0;
    CdoptSolveReport rep;

    CHECK(cdopt_manifold_sphere(4, &m));
    CHECK(cdopt_cdf_from_callbacks(m, cb, 10.0, &h));
    CHECK(cdopt_solve(h, CDOPT_SOLVER_LBFGS, x0, 4, NULL, x, &rep));
    CHECK(cdopt_post_process(m, x, 4, 1e-12, 20, y, &k));
    if (rep.termination != CDOPT_TERMINATION_CONVERGED) return 2;
    /* The minimizer of sum i x_i^2 on the unit sphere is +-e_1. */
    if (fabs(fabs(y[0]) - 1.0) > 1e-6) {
        fprintf(stderr, "unexpected minimizer %g %g %g %g\n", y[0], y[1], y[2], y[3]);
        return 3;
    }
    if (cdopt_manifold_sphere(3, NULL) != CDOPT_STATUS_NULL_POINTER) return 4;
    cdopt_cdf_free(h);
    cdopt_manifold_free(m);
    printf("ok %s\n", cdopt_version());
    return 0;
}
