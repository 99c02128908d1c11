#include <math.h>
#include <stdio.h>
#include "subslope.h"

int main(void) {
    double lambda[2] = {1.0, 1.0};
    double out = 0.0;
    SubslopeOperator *op = NULL;
    if (subslope_operator_dhym(2, SUBSLOPE_DHYM_BRANCH_SUPERCRITICAL, &op) != SUBSLOPE_STATUS_OK) return 1;
    if (subslope_f_infinity(op, lambda, 2, &out) != SUBSLOPE_STATUS_OK) return 2;
    if (fabs(out - 3.0 * atan(1.0)) > 1e-12) return 3; /* 3π/4 */

    double bad[2] = {-5.0, -5.0};
    if (subslope_f_eval(op, bad, 2, &out) != SUBSLOPE_STATUS_OUTSIDE_CONE) return 4;
    char msg[256];
    if (subslope_last_error_message(msg, sizeof msg) == 0) return 5;
    subslope_operator_free(op);

    size_t shape[2] = {8, 1};
    SubslopeGeometry *g = NULL;
    if (subslope_geometry_new(1, shape, 2, &g) != SUBSLOPE_STATUS_OK) return 6;
    if (subslope_geometry_len(g) != 8) return 7;
    subslope_geometry_free(g);
    printf("ok\n");
    return 0;
}
