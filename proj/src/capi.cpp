#include "softsample/softsample.h"

#include <cstring>
#include <new>
#include <string>
#include <vector>

#include "softsample/curation.hpp"
#include "softsample/dataset.hpp"
#include "softsample/error.hpp"
#include "softsample/eval.hpp"
#include "softsample/geometry.hpp"
#include "softsample/io.hpp"
#include "softsample/sampling.hpp"
#include "softsample/simlab.hpp"
#include "softsample/voc.hpp"
#include "softsample/weigh.hpp"

struct ss_dataset {
  softsample::Dataset value;
};

struct ss_detections {
  std::vector<softsample::Detection> value;
};

namespace {

thread_local std::string g_last_error;

char* dup_string(const std::string& s) {
  char* out = new char[s.size() + 1];
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void assign_out(char** out, const std::string& s) {
  if (out) *out = dup_string(s);
}

template <class F>
ss_status guard(F&& body) {
  try {
    body();
    g_last_error.clear();
    return SS_STATUS_OK;
  } catch (const softsample::Error& e) {
    g_last_error = e.what();
    return static_cast<ss_status>(static_cast<int>(e.kind()));
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return SS_STATUS_NUMERIC_ERROR;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return SS_STATUS_DATA_ERROR;
  }
}

ss_status require(bool condition, const char* message) {
  if (condition) return SS_STATUS_OK;
  g_last_error = message;
  return SS_STATUS_USAGE_ERROR;
}

}  // namespace

extern "C" {

const char* ss_version(void) { return SOFTSAMPLE_VERSION; }

const char* ss_last_error(void) { return g_last_error.c_str(); }

void ss_string_free(char* s) { delete[] s; }

/* ---------------- datasets ---------------- */

ss_status ss_dataset_load(const char* path, ss_dataset** out) {
  if (auto st = require(path && out, "ss_dataset_load: null argument")) return st;
  return guard([&] { *out = new ss_dataset{softsample::load_dataset(path)}; });
}

ss_status ss_dataset_parse(const char* json_text, ss_dataset** out) {
  if (auto st = require(json_text && out, "ss_dataset_parse: null argument"))
    return st;
  return guard([&] { *out = new ss_dataset{softsample::parse_dataset(json_text)}; });
}

ss_status ss_dataset_save(const ss_dataset* ds, const char* path) {
  if (auto st = require(ds && path, "ss_dataset_save: null argument")) return st;
  return guard([&] { softsample::save_dataset(ds->value, path); });
}

ss_status ss_dataset_to_json(const ss_dataset* ds, char** out_json) {
  if (auto st = require(ds && out_json, "ss_dataset_to_json: null argument"))
    return st;
  return guard([&] { assign_out(out_json, softsample::dataset_to_json(ds->value)); });
}

void ss_dataset_free(ss_dataset* ds) { delete ds; }

ss_status ss_dataset_from_voc_dir(const char* dir, const char* provenance,
                                  ss_dataset** out) {
  if (auto st = require(dir && out, "ss_dataset_from_voc_dir: null argument"))
    return st;
  return guard([&] {
    *out = new ss_dataset{softsample::convert_voc_annotations(
        dir, provenance ? provenance : "")};
  });
}

/* ---------------- scalar helpers ---------------- */

double ss_box_iou(double ax_min, double ay_min, double ax_max, double ay_max,
                  double bx_min, double by_min, double bx_max, double by_max) {
  return softsample::iou({ax_min, ay_min, ax_max, ay_max},
                         {bx_min, by_min, bx_max, by_max});
}

double ss_gompertz_weight(double overlap, double floor_weight,
                          double displacement, double growth_rate) {
  return softsample::gompertz_weight(overlap,
                                     {floor_weight, displacement, growth_rate});
}

/* ---------------- curation ---------------- */

ss_status ss_curate(const ss_dataset* in, double rate, uint64_t seed,
                    ss_dataset** out_ds, char** out_drop_record_json) {
  if (auto st = require(in != nullptr, "ss_curate: null dataset")) return st;
  return guard([&] {
    auto [ds, record] = softsample::drop_annotations(in->value, rate, seed);
    if (out_ds) *out_ds = new ss_dataset{std::move(ds)};
    assign_out(out_drop_record_json, softsample::drop_record_to_json(record));
  });
}

ss_status ss_overlap_risk_histogram_csv(const ss_dataset* ds, double bin_width,
                                        double fg_threshold, char** out_csv) {
  if (auto st = require(ds && out_csv,
                        "ss_overlap_risk_histogram_csv: null argument"))
    return st;
  return guard([&] {
    auto bins = softsample::overlap_risk_histogram(ds->value, bin_width,
                                                   fg_threshold);
    assign_out(out_csv, softsample::histogram_to_csv(bins));
  });
}

/* ---------------- weighting ---------------- */

void ss_weigh_options_init(ss_weigh_options* opts) {
  if (!opts) return;
  softsample::GompertzParams gompertz;
  softsample::AssignmentConfig assignment;
  opts->strategy = "baseline";
  opts->gompertz_floor_weight = gompertz.floor_weight;
  opts->gompertz_displacement = gompertz.displacement;
  opts->gompertz_growth_rate = gompertz.growth_rate;
  opts->fg_threshold = assignment.fg_threshold;
  opts->hard_negative_min_overlap = assignment.hard_negative_min_overlap;
  opts->ignore_threshold = -1.0;
}

ss_status ss_weigh_table(const ss_dataset* ds, const ss_weigh_options* opts,
                         const char* scores_json_path, char** out_json,
                         char** out_csv) {
  if (auto st = require(ds && opts && opts->strategy,
                        "ss_weigh_table: null argument"))
    return st;
  return guard([&] {
    softsample::WeighOptions wo;
    wo.strategy = softsample::parse_strategy(opts->strategy);
    wo.gompertz = {opts->gompertz_floor_weight, opts->gompertz_displacement,
                   opts->gompertz_growth_rate};
    wo.assignment.fg_threshold = opts->fg_threshold;
    wo.assignment.hard_negative_min_overlap = opts->hard_negative_min_overlap;
    if (opts->ignore_threshold >= 0.0)
      wo.ignore_threshold = opts->ignore_threshold;

    softsample::TrainingScores scores;
    const softsample::TrainingScores* scores_ptr = nullptr;
    if (wo.strategy == softsample::Strategy::score_soft) {
      if (!scores_json_path)
        throw softsample::UsageError(
            "score-ss weighting requires a scores file");
      scores = softsample::parse_training_scores(
          softsample::read_text_file(scores_json_path));
      scores_ptr = &scores;
    }
    auto rows = softsample::weigh_dataset(ds->value, wo, scores_ptr);
    assign_out(out_json, softsample::weigh_rows_to_json(rows));
    assign_out(out_csv, softsample::weigh_rows_to_csv(rows));
  });
}

/* ---------------- evaluation ---------------- */

ss_status ss_detections_load(const char* path, ss_detections** out) {
  if (auto st = require(path && out, "ss_detections_load: null argument"))
    return st;
  return guard([&] { *out = new ss_detections{softsample::load_detections(path)}; });
}

ss_status ss_detections_parse(const char* json_text, ss_detections** out) {
  if (auto st = require(json_text && out, "ss_detections_parse: null argument"))
    return st;
  return guard(
      [&] { *out = new ss_detections{softsample::parse_detections(json_text)}; });
}

void ss_detections_free(ss_detections* dets) { delete dets; }

ss_status ss_evaluate(const ss_detections* dets, const ss_dataset* ds,
                      const double* iou_thresholds, size_t n_thresholds,
                      const char* ap_mode, int include_dropped,
                      char** out_json, char** out_csv) {
  if (auto st = require(dets && ds && iou_thresholds && n_thresholds > 0,
                        "ss_evaluate: null argument"))
    return st;
  return guard([&] {
    softsample::ApMode mode;
    std::string mode_name = ap_mode ? ap_mode : "auto";
    if (mode_name == "auto")
      mode = ds->value.provenance == "voc2007" ? softsample::ApMode::eleven_point
                                               : softsample::ApMode::all_points;
    else if (mode_name == "eleven-point")
      mode = softsample::ApMode::eleven_point;
    else if (mode_name == "all-points")
      mode = softsample::ApMode::all_points;
    else
      throw softsample::UsageError(
          "ap_mode must be 'auto', 'eleven-point' or 'all-points'");

    softsample::validate_detection_classes(dets->value, ds->value);
    auto reports = softsample::threshold_sweep(
        dets->value, ds->value,
        std::span<const double>(iou_thresholds, n_thresholds), mode,
        include_dropped != 0);
    assign_out(out_json, softsample::reports_to_json(reports));
    assign_out(out_csv, softsample::reports_to_csv(reports, ds->value));
  });
}

ss_status ss_operating_thresholds(const ss_detections* dets,
                                  const ss_dataset* ds, double iou_threshold,
                                  char** out_json) {
  if (auto st = require(dets && ds && out_json,
                        "ss_operating_thresholds: null argument"))
    return st;
  return guard([&] {
    softsample::validate_detection_classes(dets->value, ds->value);
    auto ot = softsample::per_class_operating_threshold(dets->value, ds->value,
                                                        iou_threshold);
    assign_out(out_json, softsample::operating_thresholds_to_json(ot));
  });
}

/* ---------------- simulation lab ---------------- */

ss_status ss_simulation_config_resolve(const char* config_json,
                                       int n_seeds_override, char** out_json) {
  if (auto st = require(out_json != nullptr,
                        "ss_simulation_config_resolve: null output"))
    return st;
  return guard([&] {
    softsample::SimulationConfig cfg =
        config_json ? softsample::parse_simulation_config(config_json)
                    : softsample::default_simulation_config();
    if (n_seeds_override > 0) cfg.n_seeds = n_seeds_override;
    assign_out(out_json, softsample::simulation_config_to_json(cfg));
  });
}

ss_status ss_simulate(const char* config_json, int n_seeds_override,
                      const char* out_dir, char** out_table_csv) {
  if (auto st = require(out_dir != nullptr, "ss_simulate: null out_dir"))
    return st;
  return guard([&] {
    softsample::SimulationConfig cfg =
        config_json ? softsample::parse_simulation_config(config_json)
                    : softsample::default_simulation_config();
    if (n_seeds_override > 0) cfg.n_seeds = n_seeds_override;
    softsample::SimulationOutput out = softsample::run_strategy_comparison(cfg);
    softsample::write_simulation_outputs(out, out_dir);
    assign_out(out_table_csv, out.table_csv);
  });
}

/* ---------------- utilities ---------------- */

ss_status ss_write_text_file(const char* path, const char* text) {
  if (auto st = require(path && text, "ss_write_text_file: null argument"))
    return st;
  return guard([&] { softsample::write_text_file_atomic(path, text); });
}

ss_status ss_file_digest_hex(const char* path, char** out_hex) {
  if (auto st = require(path && out_hex, "ss_file_digest_hex: null argument"))
    return st;
  return guard([&] { assign_out(out_hex, softsample::file_digest_hex(path)); });
}

}  // extern "C"
