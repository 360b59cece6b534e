/* Minimal C consumer of the library.
 *
 * Build from the workspace root after `cargo build -p rre-ffi`:
 *
 *   cc -std=c99 -Wall -Wextra -Icrates/ffi/include \
 *      crates/ffi/examples/demo.c target/debug/librre_ffi.a -lm -o demo
 */
#include <assert.h>
#include <math.h>
#include <stdio.h>
#include "rre.h"

int main(void) {
    RreSystem *sys = NULL;
    if (rre_system_example_scalar(&sys) != RRE_STATUS_OK) {
        fprintf(stderr, "create: %s\n", rre_last_error_message());
        return 1;
    }
    double p_star = 0.0, gain = 0.0;
    size_t iterations = 0;
    double residual = 0.0;
    if (rre_solve_dare(sys, 0.0, 0, &p_star, &gain, &iterations, &residual) != RRE_STATUS_OK) {
        fprintf(stderr, "dare: %s\n", rre_last_error_message());
        return 1;
    }
    assert(fabs(p_star - 2.414213562373095) < 1e-9);
    assert(fabs(gain + 1.0) < 1e-9);

    double lo = 0.0, hi = 0.0, rho = 0.0;
    if (rre_critical_bounds(sys, 0.0, &lo, &hi, &rho) != RRE_STATUS_OK) {
        fprintf(stderr, "bounds: %s\n", rre_last_error_message());
        return 1;
    }
    assert(fabs(lo - 0.5) < 1e-12);
    assert(hi > lo && hi < 1.0);

    size_t count = 0;
    if (rre_support_traces(sys, 4, 0.0, 0, NULL, 0, &count) != RRE_STATUS_OK) return 1;
    assert(count == 16);

    RreStatus st = rre_system_dims(NULL, NULL, NULL);
    assert(st == RRE_STATUS_NULL_ARGUMENT);

    rre_system_free(sys);
    printf("p* = %.12f, bracket = [%.6f, %.6f], nodes = %zu (%s)\n",
           p_star, lo, hi, count, rre_version());
    return 0;
}
