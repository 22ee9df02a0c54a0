#include <stdio.h>
#include <stdlib.h>
#include "renewmed.h"

int main(int argc, char **argv) {
    RmStream *s = NULL;
    if (rm_stream_new(RM_MODEL_LINEAR, 1, 0, true, &s) != RM_STATUS_OK) return 1;
    double rows[3 * 200];
    unsigned seed = 7;
    for (int i = 0; i < 200; i++) {
        double x = (rand_r(&seed) / (double)RAND_MAX) - 0.5;
        double m = 0.5 * x + (rand_r(&seed) / (double)RAND_MAX) - 0.5;
        double y = 0.2 * x + 0.6 * m + (rand_r(&seed) / (double)RAND_MAX) - 0.5;
        rows[3 * i] = y;
        rows[3 * i + 1] = x;
        rows[3 * i + 2] = m;
    }
    RmStatus st = rm_stream_update(s, rows, 200);
    if (st != RM_STATUS_OK) {
        char msg[256];
        rm_last_error_message(msg, sizeof msg);
        fprintf(stderr, "update failed: %s\n", msg);
        return 1;
    }
    RmTestResult t;
    if (rm_stream_test(s, 0, 0.05, &t) != RM_STATUS_OK) return 1;
    printf("n=%llu product=%.4f p_sobel=%.3g p_ajs=%.3g\n",
           (unsigned long long)rm_stream_n_total(s), t.product_hat, t.p_sobel, t.p_ajs);
    if (argc > 1 && rm_stream_save(s, argv[1]) != RM_STATUS_OK) return 1;
    rm_stream_free(s);
    return 0;
}
