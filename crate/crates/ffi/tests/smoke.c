#include <stdio.h>
#include "dbcore.h"

int main(void) {
    double square[8] = {5, 5, 15, 5, 15, 15, 5, 15};
    size_t counts[1] = {4};
    DbcLabels *labels = NULL;
    DbcMap *prob = NULL;
    DbcDetections *dets = NULL;
    if (dbc_labels_generate(square, counts, 1, 20, 20, 0.4, 0.3, 0.7, &labels) != DBC_STATUS_OK) return 1;
    if (dbc_labels_map(labels, DBC_LABEL_MAP_PROB_TARGET, &prob) != DBC_STATUS_OK) return 2;
    if (dbc_form_boxes(prob, 0.2, 1.5, 0.5, 4, 1000, &dets) != DBC_STATUS_OK) return 3;
    double score = 0;
    size_t n = 0;
    double xy[16];
    if (dbc_detection_get(dets, 0, &score, &n, xy, 16) != DBC_STATUS_OK) return 4;
    printf("%zu %.4f %g %g\n", dbc_detections_len(dets), score, xy[0], xy[4]);
    if (dbc_map_new(2, 2, NULL, &prob) != DBC_STATUS_NULL_POINTER) return 5;
    char msg[64];
    dbc_last_error(msg, sizeof msg);
    printf("%s\n", msg);
    dbc_detections_free(dets);
    dbc_labels_free(labels);
    return 0;
}
