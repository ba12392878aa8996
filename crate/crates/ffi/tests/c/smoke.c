#include <stdio.h>
#include <string.h>
#include "sensorpen.h"

#define CHECK(cond) do { if (!(cond)) { fprintf(stderr, "failed: %s (line %d)\n", #cond, __LINE__); return 1; } } while (0)

int main(int argc, char **argv) {
    SpPeaks *peaks = NULL;
    CHECK(sp_rpeaks_parse("R-peaks: [1181, 1183, 1208, 1154, 1166, 1183].", &peaks) == SP_STATUS_OK);
    CHECK(sp_peaks_len(peaks) == 6);
    CHECK(!sp_peaks_hallucinated(peaks));
    double v[6];
    CHECK(sp_peaks_copy(peaks, v, 6) == 6 && v[2] == 1208.0);
    sp_peaks_free(peaks);
    CHECK(sp_heart_rate(6, 5.0) == 72.0);

    double score = -1;
    CHECK(sp_chrf("same", "same", &score) == SP_STATUS_OK && score == 1.0);
    CHECK(sp_chrf(NULL, "x", &score) == SP_STATUS_NULL_ARGUMENT);
    char msg[64];
    CHECK(sp_last_error_message(msg, sizeof msg) > 0 && strstr(msg, "hypothesis") != NULL);

    int64_t values[2] = {968, 977};
    char *prompt = NULL;
    CHECK(sp_render_ecg_prompt("ecg/description", values, 2, &prompt) == SP_STATUS_OK);
    CHECK(strstr(prompt, "[968, 977]") != NULL);
    sp_string_free(prompt);
    CHECK(sp_render_ecg_prompt("ecg/none", values, 2, &prompt) == SP_STATUS_PROMPT);

    if (argc > 1) {
        SpReplay *store = NULL;
        CHECK(sp_replay_open(argv[1], &store) == SP_STATUS_OK);
        CHECK(sp_replay_len(store) > 0);
        char *text = NULL;
        CHECK(sp_replay_lookup(store, "0000", &text) == SP_STATUS_NOT_FOUND);
        sp_replay_free(store);
    }
    printf("ok %s\n", sp_version());
    return 0;
}
