#ifndef SOFTSAMPLE_H
#define SOFTSAMPLE_H

/* C API of the softsample shared library.
 *
 * A toolkit for object-detection training data with missing annotations:
 * controlled annotation dropping, RoI label assignment with overlap- and
 * score-based gradient re-weighting, VOC-style AP/mAP evaluation, and a
 * simulation lab comparing training strategies across drop rates.
 *
 * All functions return ss_status; on failure ss_last_error() holds a
 * human-readable message (thread-local, valid until the next ss_* call on
 * the same thread). Strings returned through char** out-parameters are
 * heap-allocated and must be released with ss_string_free(); handles with
 * their matching *_free function. Output char** / handle parameters may be
 * NULL when the caller does not need that output.
 *
 * File writes performed by this library are atomic (temp file + rename).
 */

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#define SOFTSAMPLE_VERSION "0.1.0"

typedef enum ss_status {
  SS_STATUS_OK = 0,
  SS_STATUS_USAGE_ERROR = 1,  /* bad arguments or configuration */
  SS_STATUS_DATA_ERROR = 2,   /* malformed or infeasible input data */
  SS_STATUS_NUMERIC_ERROR = 3 /* numerical failure, e.g. divergence */
} ss_status;

typedef struct ss_dataset ss_dataset;       /* opaque dataset handle */
typedef struct ss_detections ss_detections; /* opaque detections handle */

const char* ss_version(void);
const char* ss_last_error(void);
void ss_string_free(char* s);

/* ------------------------------------------------------------------ */
/* Datasets (JSON document; see README for the schema)                  */

ss_status ss_dataset_load(const char* path, ss_dataset** out);
ss_status ss_dataset_parse(const char* json_text, ss_dataset** out);
ss_status ss_dataset_save(const ss_dataset* ds, const char* path);
ss_status ss_dataset_to_json(const ss_dataset* ds, char** out_json);
void ss_dataset_free(ss_dataset* ds);

/* Converts a directory of PASCAL-VOC-style XML annotation files.
 * provenance may be NULL; pass "voc2007" to make evaluation default to the
 * 11-point AP interpolation. */
ss_status ss_dataset_from_voc_dir(const char* dir, const char* provenance,
                                  ss_dataset** out);

/* ------------------------------------------------------------------ */
/* Scalar helpers                                                      */

/* Intersection over union of two boxes; 0 when the union is empty. */
double ss_box_iou(double ax_min, double ay_min, double ax_max, double ay_max,
                  double bx_min, double by_min, double bx_max, double by_max);

/* floor_weight + (1 - floor_weight) * exp(-displacement * exp(-growth_rate * overlap)) */
double ss_gompertz_weight(double overlap, double floor_weight,
                          double displacement, double growth_rate);

/* ------------------------------------------------------------------ */
/* Curation                                                            */

/* Drops round(rate * n_c) annotations per class c, uniformly, never leaving
 * an image without a kept annotation. Deterministic given the seed. */
ss_status ss_curate(const ss_dataset* in, double rate, uint64_t seed,
                    ss_dataset** out_ds, char** out_drop_record_json);

/* CSV with columns bin_lo, bin_hi, probability, count: per kept-overlap bin,
 * the probability that a proposal overlaps a dropped annotation at
 * IoU >= fg_threshold. */
ss_status ss_overlap_risk_histogram_csv(const ss_dataset* ds, double bin_width,
                                        double fg_threshold, char** out_csv);

/* ------------------------------------------------------------------ */
/* RoI weighting                                                       */

typedef struct ss_weigh_options {
  /* "baseline", "hard-negative", "oss", "score-ss" or "upper-bound" */
  const char* strategy;
  double gompertz_floor_weight; /* a */
  double gompertz_displacement; /* b */
  double gompertz_growth_rate;  /* c */
  double fg_threshold;
  double hard_negative_min_overlap;
  /* Upper-bound masking threshold; pass a negative value to default to
   * fg_threshold. */
  double ignore_threshold;
} ss_weigh_options;

/* Fills opts with the library defaults (baseline strategy, a=0.25, b=50,
 * c=20, fg 0.5, hard-negative min overlap 0.1). */
void ss_weigh_options_init(ss_weigh_options* opts);

/* Per-proposal RoI table under the chosen strategy, as JSON and/or CSV.
 * scores_json_path is required for "score-ss" and ignored otherwise. */
ss_status ss_weigh_table(const ss_dataset* ds, const ss_weigh_options* opts,
                         const char* scores_json_path, char** out_json,
                         char** out_csv);

/* ------------------------------------------------------------------ */
/* Evaluation                                                          */

ss_status ss_detections_load(const char* path, ss_detections** out);
ss_status ss_detections_parse(const char* json_text, ss_detections** out);
void ss_detections_free(ss_detections* dets);

/* AP/mAP at each IoU threshold (ascending, in (0,1]). ap_mode is "auto"
 * (11-point for datasets with voc2007 provenance, all-points otherwise),
 * "eleven-point" or "all-points". include_dropped != 0 evaluates against
 * dropped annotations as well. Unknown detection class ids are an error. */
ss_status ss_evaluate(const ss_detections* dets, const ss_dataset* ds,
                      const double* iou_thresholds, size_t n_thresholds,
                      const char* ap_mode, int include_dropped,
                      char** out_json, char** out_csv);

/* Per class, the lowest score cutoff maximizing F1 at the given IoU. */
ss_status ss_operating_thresholds(const ss_detections* dets,
                                  const ss_dataset* ds, double iou_threshold,
                                  char** out_json);

/* ------------------------------------------------------------------ */
/* Simulation lab                                                      */

/* Expands config_json (NULL for the built-in defaults) to a fully resolved
 * configuration document; n_seeds_override > 0 replaces n_seeds. */
ss_status ss_simulation_config_resolve(const char* config_json,
                                       int n_seeds_override, char** out_json);

/* Runs the strategy-by-drop-rate grid and writes table.csv, results.json and
 * per-run logs under out_dir (created if missing). out_table_csv optionally
 * receives the table contents. */
ss_status ss_simulate(const char* config_json, int n_seeds_override,
                      const char* out_dir, char** out_table_csv);

/* ------------------------------------------------------------------ */
/* Utilities                                                           */

ss_status ss_write_text_file(const char* path, const char* text);

/* FNV-1a 64-bit digest of the file bytes, as 16 hex characters. */
ss_status ss_file_digest_hex(const char* path, char** out_hex);

#ifdef __cplusplus
}
#endif

#endif /* SOFTSAMPLE_H */
