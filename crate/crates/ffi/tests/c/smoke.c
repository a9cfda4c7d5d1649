#include <stdio.h>
#include <string.h>

#include "nagsens.h"

int main(int argc, char **argv) {
    if (argc < 2) {
        return 100;
    }
    NagsConfig *cfg = NULL;
    if (nags_config_from_file(argv[1], &cfg) != NAGS_STATUS_OK) {
        fprintf(stderr, "%s\n", nags_last_error());
        return 101;
    }
    NagsReport *report = NULL;
    if (nags_run(cfg, "centrality", 0, &report) != NAGS_STATUS_OK) {
        fprintf(stderr, "%s\n", nags_last_error());
        return 102;
    }
    char *csv = NULL;
    if (nags_report_table_csv(report, 0, &csv) != NAGS_STATUS_OK) {
        return 103;
    }
    fputs(csv, stdout);
    nags_string_free(csv);
    nags_report_free(report);

    NagsReport *bad = NULL;
    NagsStatus status = nags_run(cfg, "routing-sweep", 0, &bad);
    nags_config_free(cfg);
    if (status != NAGS_STATUS_INVALID_INPUT || bad != NULL) {
        return 104;
    }
    double p[4] = {0.0, 1.0, 1.0, 0.0};
    double v[2], w[2];
    if (nags_centrality(p, 2, 0.5, v, w) != NAGS_STATUS_OK) {
        return 105;
    }
    printf("v %.3f %.3f w %.3f %.3f\n", v[0], v[1], w[0], w[1]);
    return 0;
}
