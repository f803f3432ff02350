#include <stdio.h>
#include <string.h>

#include "mechcheck.h"

int main(int argc, char **argv) {
    if (argc != 2) {
        fprintf(stderr, "usage: smoke <scenario.json>\n");
        return 2;
    }
    McScenario *sc = NULL;
    if (mc_scenario_from_path(argv[1], &sc) != MC_STATUS_OK) {
        fprintf(stderr, "load: %s\n", mc_last_error());
        return 1;
    }
    McOptions opts = mc_options_default();
    McReport *report = NULL;
    if (mc_check(sc, MC_PROPERTY_BIC, &opts, &report) != MC_STATUS_OK) {
        fprintf(stderr, "check: %s\n", mc_last_error());
        return 1;
    }
    char *json = mc_report_to_json(report);
    char *util = NULL;
    McStatus st = mc_my_util(sc, 1, "v2", "v2", opts.budget, &util);
    printf("verdict=%d violations=%llu util=%s json=%d\n", (int)mc_report_verdict(report),
           (unsigned long long)mc_report_violations(report), st == MC_STATUS_OK ? util : "?",
           json != NULL && strstr(json, "\"property\": \"bic\"") != NULL);
    mc_string_free(util);
    mc_string_free(json);
    mc_report_free(report);
    mc_scenario_free(sc);
    return 0;
}
