#include <math.h>
#include <stdio.h>
#include "hpcalc.h"

int main(void) {
    double re[2] = {1.0, 2.0};
    HpOperator *op = NULL;
    HpFunction *f = NULL;
    HpMatrix *m = NULL;
    char msg[128];

    if (hp_operator_diagonal(re, NULL, 2, &op) != HP_STATUS_OK) return 1;
    if (hp_function_catalog("resolvent", &f) != HP_STATUS_OK) return 2;
    if (hp_apply_function(op, f, &m) != HP_STATUS_OK) return 3;
    double a, b;
    if (hp_matrix_get(m, 1, 1, &a, &b) != HP_STATUS_OK) return 4;
    if (fabs(a - 1.0 / 3.0) > 1e-9 || fabs(b) > 1e-9) return 5;
    hp_matrix_free(m);
    hp_function_free(f);
    hp_operator_free(op);

    if (hp_function_parse("rpow(", &f) != HP_STATUS_PARSE) return 6;
    if (hp_last_error(msg, sizeof msg) == 0) return 7;
    printf("%s ok\n", hp_version());
    return 0;
}
