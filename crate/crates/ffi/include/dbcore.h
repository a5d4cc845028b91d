#ifndef DBCORE_H
#define DBCORE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum DbcStatus {
  DBC_STATUS_OK = 0,
  DBC_STATUS_NULL_POINTER = 1,
  DBC_STATUS_INVALID_ARGUMENT = 2,
  DBC_STATUS_INVALID_POLYGON = 3,
  DBC_STATUS_SHAPE_MISMATCH = 4,
  DBC_STATUS_DOMAIN = 5,
  DBC_STATUS_IO = 6,
  DBC_STATUS_PARSE = 7,
  DBC_STATUS_BUFFER_TOO_SMALL = 8,
  DBC_STATUS_PANIC = 9,
} DbcStatus;

// Which map of a label bundle to copy out.
typedef enum DbcLabelMap {
  DBC_LABEL_MAP_PROB_TARGET = 0,
  DBC_LABEL_MAP_PROB_MASK = 1,
  DBC_LABEL_MAP_THRESH_TARGET = 2,
  DBC_LABEL_MAP_THRESH_MASK = 3,
} DbcLabelMap;

typedef struct DbcDetections DbcDetections;

typedef struct DbcLabels DbcLabels;

// Row-major real-valued map.
typedef struct DbcMap DbcMap;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copies the last error message on this thread into `buf` (NUL
// terminated, truncated to `cap`) and returns its full length in bytes.
//
// # Safety
// `buf` must be null or point to `cap` writable bytes.
size_t dbc_last_error(char *buf, size_t cap);

// Creates a `height x width` map from `height * width` row-major values.
//
// # Safety
// `data` must point to `height * width` readable doubles; `out` must be
// writable.
enum DbcStatus dbc_map_new(size_t height, size_t width, const double *data, struct DbcMap **out);

// Loads a map from an F32MAP file.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum DbcStatus dbc_map_load(const char *path, struct DbcMap **out);

// # Safety
// `map` must be a live handle and `path` a NUL-terminated string.
enum DbcStatus dbc_map_save(const struct DbcMap *map, const char *path);

// # Safety
// `map` must be a live handle; the out-pointers must be writable.
enum DbcStatus dbc_map_shape(const struct DbcMap *map, size_t *height, size_t *width);

// Copies the values into `buf`, which must hold `height * width` doubles.
//
// # Safety
// `map` must be a live handle and `buf` must point to `cap` writable
// doubles.
enum DbcStatus dbc_map_read(const struct DbcMap *map, double *buf, size_t cap);

// # Safety
// `map` must be null or a handle from this library not yet freed.
void dbc_map_free(struct DbcMap *map);

// Approximate binary map `1 / (1 + exp(-k (P - T)))`.
//
// # Safety
// `prob` and `thresh` must be live handles; `out` must be writable.
enum DbcStatus dbc_db_forward(const struct DbcMap *prob,
                              const struct DbcMap *thresh,
                              double k,
                              struct DbcMap **out);

// Derivatives of the DB loss with respect to the binarization input `x`
// for positive and negative labels.
//
// # Safety
// `pos` and `neg` must be writable.
enum DbcStatus dbc_db_loss_grads(double x, double k, double *pos, double *neg);

// Shrink (`shrink = true`, ratio `r`) or unclip (ratio `r'`) offset
// distance for a polygon of `n_vertices` interleaved `x, y` pairs.
//
// # Safety
// `coords` must point to `2 * n_vertices` doubles; `out` must be writable.
enum DbcStatus dbc_offset_distance(const double *coords,
                                   size_t n_vertices,
                                   double ratio,
                                   bool shrink,
                                   double *out);

// Label maps for `n_polys` polygons. Polygon `i` has `counts[i]`
// vertices; all vertices are concatenated in `coords` as `x, y` pairs.
//
// # Safety
// `counts` must hold `n_polys` entries and `coords` twice their sum;
// `out` must be writable.
enum DbcStatus dbc_labels_generate(const double *coords,
                                   const size_t *counts,
                                   size_t n_polys,
                                   size_t height,
                                   size_t width,
                                   double shrink_ratio,
                                   double t_min,
                                   double t_max,
                                   struct DbcLabels **out);

// Copies one map of the bundle into a new map handle.
//
// # Safety
// `labels` must be a live handle; `out` must be writable.
enum DbcStatus dbc_labels_map(const struct DbcLabels *labels,
                              enum DbcLabelMap which,
                              struct DbcMap **out);

// # Safety
// `labels` must be null or a handle from this library not yet freed.
void dbc_labels_free(struct DbcLabels *labels);

// Forms text boxes from a probability map.
//
// # Safety
// `prob` must be a live handle; `out` must be writable.
enum DbcStatus dbc_form_boxes(const struct DbcMap *prob,
                              double bin_thresh,
                              double unclip_ratio,
                              double score_thresh,
                              size_t min_region_px,
                              size_t max_detections,
                              struct DbcDetections **out);

// # Safety
// `dets` must be a live handle.
size_t dbc_detections_len(const struct DbcDetections *dets);

// Score and vertex count of detection `index`; vertices are copied as
// `x, y` pairs into `buf` when it holds at least `2 * n_vertices` doubles.
// Pass a null `buf` to query the count alone.
//
// # Safety
// `dets` must be a live handle, `buf` null or `cap` writable doubles,
// and the remaining out-pointers writable.
enum DbcStatus dbc_detection_get(const struct DbcDetections *dets,
                                 size_t index,
                                 double *score,
                                 size_t *n_vertices,
                                 double *buf,
                                 size_t cap);

// # Safety
// `dets` must be null or a handle from this library not yet freed.
void dbc_detections_free(struct DbcDetections *dets);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DBCORE_H */
