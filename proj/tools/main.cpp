// softsample command-line interface. All domain work goes through the
// shared library's C API; this file only parses flags, assembles run
// manifests and moves bytes to disk.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdint>
#include <cstdio>
#include <memory>
#include <string>
#include <vector>

#include "softsample/softsample.h"

namespace {

using nlohmann::ordered_json;

[[noreturn]] void fail(ss_status status) {
  std::fprintf(stderr, "error: %s\n", ss_last_error());
  std::exit(static_cast<int>(status));
}

void check(ss_status status) {
  if (status != SS_STATUS_OK) fail(status);
}

std::string take(char* s) {
  std::string out = s ? s : "";
  ss_string_free(s);
  return out;
}

struct DatasetHandle {
  ss_dataset* ptr = nullptr;
  ~DatasetHandle() { ss_dataset_free(ptr); }
};

struct DetectionsHandle {
  ss_detections* ptr = nullptr;
  ~DetectionsHandle() { ss_detections_free(ptr); }
};

std::string digest_of(const std::string& path) {
  char* hex = nullptr;
  check(ss_file_digest_hex(path.c_str(), &hex));
  return take(hex);
}

// The manifest is written before any output so a re-run can be compared
// against it first. It carries no timestamps: identical inputs and flags
// must produce identical bytes.
void write_manifest(const std::string& manifest_path, const std::string& command,
                    const ordered_json& config,
                    const std::vector<std::uint64_t>& seeds,
                    const std::vector<std::string>& input_paths) {
  ordered_json doc;
  doc["command"] = command;
  doc["version"] = ss_version();
  doc["config"] = config;
  doc["seeds"] = seeds;
  doc["inputs"] = ordered_json::array();
  for (const auto& path : input_paths)
    doc["inputs"].push_back({{"path", path}, {"digest", digest_of(path)}});
  std::string text = doc.dump(2) + "\n";
  check(ss_write_text_file(manifest_path.c_str(), text.c_str()));
}

std::string default_sibling(const std::string& out_path,
                            const std::string& suffix) {
  std::string stem = out_path;
  if (stem.size() > 5 && stem.ends_with(".json"))
    stem.resize(stem.size() - 5);
  else if (stem.size() > 4 && stem.ends_with(".csv"))
    stem.resize(stem.size() - 4);
  return stem + suffix;
}

bool ends_with_csv(const std::string& path) { return path.ends_with(".csv"); }

int run_curate(const std::string& in, const std::string& out,
               const std::string& record, double rate, std::uint64_t seed) {
  DatasetHandle ds;
  check(ss_dataset_load(in.c_str(), &ds.ptr));

  std::string record_path =
      record.empty() ? default_sibling(out, ".drop_record.json") : record;
  write_manifest(default_sibling(out, ".manifest.json"), "curate",
                 {{"in", in}, {"out", out}, {"record", record_path},
                  {"rate", rate}, {"seed", seed}},
                 {seed}, {in});

  ss_dataset* curated = nullptr;
  char* record_json = nullptr;
  check(ss_curate(ds.ptr, rate, seed, &curated, &record_json));
  DatasetHandle curated_guard{curated};
  check(ss_dataset_save(curated, out.c_str()));
  check(ss_write_text_file(record_path.c_str(), take(record_json).c_str()));
  return 0;
}

int run_weigh(const std::string& in, const std::string& out,
              const std::string& strategy, const std::string& scores,
              double a, double b, double c, double fg_thresh,
              double hn_min_overlap, double ignore_thresh) {
  if (strategy == "score-ss" && scores.empty()) {
    std::fprintf(stderr, "error: --strategy score-ss requires --scores\n");
    return 1;
  }
  DatasetHandle ds;
  check(ss_dataset_load(in.c_str(), &ds.ptr));

  ordered_json config{{"in", in},       {"out", out},
                      {"strategy", strategy}, {"a", a},
                      {"b", b},         {"c", c},
                      {"fg_thresh", fg_thresh},
                      {"hn_min_overlap", hn_min_overlap}};
  if (ignore_thresh >= 0) config["ignore_thresh"] = ignore_thresh;
  std::vector<std::string> inputs{in};
  if (!scores.empty()) {
    config["scores"] = scores;
    inputs.push_back(scores);
  }
  write_manifest(default_sibling(out, ".manifest.json"), "weigh", config, {},
                 inputs);

  ss_weigh_options opts;
  ss_weigh_options_init(&opts);
  opts.strategy = strategy.c_str();
  opts.gompertz_floor_weight = a;
  opts.gompertz_displacement = b;
  opts.gompertz_growth_rate = c;
  opts.fg_threshold = fg_thresh;
  opts.hard_negative_min_overlap = hn_min_overlap;
  opts.ignore_threshold = ignore_thresh;

  char* json_out = nullptr;
  char* csv_out = nullptr;
  check(ss_weigh_table(ds.ptr, &opts, scores.empty() ? nullptr : scores.c_str(),
                       &json_out, &csv_out));
  std::string json_text = take(json_out), csv_text = take(csv_out);
  check(ss_write_text_file(out.c_str(),
                           ends_with_csv(out) ? csv_text.c_str()
                                              : json_text.c_str()));
  return 0;
}

int run_eval(const std::string& dets_path, const std::string& dataset_path,
             const std::string& out_prefix, std::vector<double> ious,
             const std::string& ap_mode, bool include_dropped,
             const std::string& operating_out) {
  DetectionsHandle dets;
  check(ss_detections_load(dets_path.c_str(), &dets.ptr));
  DatasetHandle ds;
  check(ss_dataset_load(dataset_path.c_str(), &ds.ptr));

  if (ious.empty()) ious.push_back(0.5);
  write_manifest(out_prefix + ".manifest.json", "eval",
                 {{"dets", dets_path}, {"dataset", dataset_path},
                  {"out", out_prefix}, {"iou", ious}, {"ap_mode", ap_mode},
                  {"include_dropped", include_dropped}},
                 {}, {dets_path, dataset_path});

  char* json_out = nullptr;
  char* csv_out = nullptr;
  check(ss_evaluate(dets.ptr, ds.ptr, ious.data(), ious.size(),
                    ap_mode.c_str(), include_dropped ? 1 : 0, &json_out,
                    &csv_out));
  check(ss_write_text_file((out_prefix + ".json").c_str(),
                           take(json_out).c_str()));
  check(ss_write_text_file((out_prefix + ".csv").c_str(),
                           take(csv_out).c_str()));

  if (!operating_out.empty()) {
    char* op_json = nullptr;
    check(ss_operating_thresholds(dets.ptr, ds.ptr, ious.front(), &op_json));
    check(ss_write_text_file(operating_out.c_str(), take(op_json).c_str()));
  }
  return 0;
}

int run_hist(const std::string& in, const std::string& out, double bin_width,
             double fg_thresh) {
  DatasetHandle ds;
  check(ss_dataset_load(in.c_str(), &ds.ptr));
  write_manifest(default_sibling(out, ".manifest.json"), "hist",
                 {{"in", in}, {"out", out}, {"bin_width", bin_width},
                  {"fg_thresh", fg_thresh}},
                 {}, {in});
  char* csv_out = nullptr;
  check(ss_overlap_risk_histogram_csv(ds.ptr, bin_width, fg_thresh, &csv_out));
  check(ss_write_text_file(out.c_str(), take(csv_out).c_str()));
  return 0;
}

int run_simulate(const std::string& config_path, int seeds,
                 const std::string& out_dir) {
  std::string config_text;
  if (!config_path.empty()) {
    FILE* f = std::fopen(config_path.c_str(), "rb");
    if (!f) {
      std::fprintf(stderr, "error: cannot open config file: %s\n",
                   config_path.c_str());
      return 2;
    }
    char buf[4096];
    std::size_t n;
    while ((n = std::fread(buf, 1, sizeof(buf), f)) > 0)
      config_text.append(buf, n);
    std::fclose(f);
  }

  char* resolved = nullptr;
  check(ss_simulation_config_resolve(
      config_path.empty() ? nullptr : config_text.c_str(), seeds, &resolved));
  std::string resolved_text = take(resolved);

  ordered_json config = ordered_json::parse(resolved_text);
  std::vector<std::string> inputs;
  if (!config_path.empty()) inputs.push_back(config_path);
  write_manifest(out_dir + "/manifest.json", "simulate",
                 {{"config", config}, {"out_dir", out_dir}},
                 {config["base_seed"].get<std::uint64_t>()}, inputs);

  check(ss_simulate(resolved_text.c_str(), -1, out_dir.c_str(), nullptr));
  return 0;
}

int run_convert_voc(const std::string& annotations, const std::string& out,
                    const std::string& provenance) {
  DatasetHandle ds;
  check(ss_dataset_from_voc_dir(annotations.c_str(),
                                provenance.empty() ? nullptr : provenance.c_str(),
                                &ds.ptr));
  write_manifest(default_sibling(out, ".manifest.json"), "convert-voc",
                 {{"annotations", annotations}, {"out", out},
                  {"provenance", provenance}},
                 {}, {});
  check(ss_dataset_save(ds.ptr, out.c_str()));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"softsample: RoI soft-sampling toolkit for detection datasets "
               "with missing annotations"};
  app.require_subcommand(1);
  app.set_version_flag("--version", ss_version());

  // curate
  auto* curate = app.add_subcommand(
      "curate", "Drop a fraction of annotations per class, uniformly");
  std::string curate_in, curate_out, curate_record;
  double curate_rate = 0.0;
  std::uint64_t curate_seed = 0;
  curate->add_option("--in", curate_in, "input dataset JSON")->required();
  curate->add_option("--out", curate_out, "curated dataset JSON")->required();
  curate->add_option("--rate", curate_rate, "drop rate in [0,1)")->required();
  curate->add_option("--seed", curate_seed, "RNG seed")->required();
  curate->add_option("--record", curate_record,
                     "drop record path (default: <out>.drop_record.json)");

  // weigh
  auto* weigh = app.add_subcommand(
      "weigh", "Write the per-proposal RoI weight table under a strategy");
  std::string weigh_in, weigh_out, weigh_strategy = "baseline", weigh_scores;
  double weigh_a = 0.25, weigh_b = 50.0, weigh_c = 20.0;
  double weigh_fg = 0.5, weigh_hn = 0.1, weigh_ignore = -1.0;
  weigh->add_option("--in", weigh_in, "curated dataset JSON (with proposals)")
      ->required();
  weigh->add_option("--out", weigh_out,
                    "output table (.csv for CSV, else JSON)")
      ->required();
  weigh
      ->add_option("--strategy", weigh_strategy,
                   "baseline|hard-negative|oss|score-ss|upper-bound")
      ->check(CLI::IsMember(
          {"baseline", "hard-negative", "oss", "score-ss", "upper-bound"}));
  weigh->add_option("--scores", weigh_scores,
                    "training-scores JSON (required for score-ss)");
  weigh->add_option("--a", weigh_a, "Gompertz floor weight");
  weigh->add_option("--b", weigh_b, "Gompertz displacement");
  weigh->add_option("--c", weigh_c, "Gompertz growth rate");
  weigh->add_option("--fg-thresh", weigh_fg, "positive overlap threshold");
  weigh->add_option("--hn-min-overlap", weigh_hn,
                    "hard-negative minimum overlap");
  weigh->add_option("--ignore-thresh", weigh_ignore,
                    "upper-bound mask threshold (default: fg threshold)");

  // eval
  auto* eval = app.add_subcommand("eval",
                                  "VOC-style AP/mAP at one or more IoU "
                                  "thresholds");
  std::string eval_dets, eval_dataset, eval_out, eval_mode = "auto",
              eval_operating;
  std::vector<double> eval_ious;
  bool eval_include_dropped = false;
  eval->add_option("--dets", eval_dets, "detections JSON")->required();
  eval->add_option("--dataset", eval_dataset, "ground-truth dataset JSON")
      ->required();
  eval->add_option("--out", eval_out, "output prefix (.json and .csv)")
      ->required();
  eval->add_option("--iou", eval_ious,
                   "IoU threshold, repeatable for sweeps (default 0.5)");
  eval->add_option("--ap-mode", eval_mode, "auto|eleven-point|all-points")
      ->check(CLI::IsMember({"auto", "eleven-point", "all-points"}));
  eval->add_flag("--include-dropped", eval_include_dropped,
                 "match against dropped annotations too");
  eval->add_option("--operating-thresholds", eval_operating,
                   "also write per-class F1-optimal score cutoffs (JSON)");

  // hist
  auto* hist = app.add_subcommand(
      "hist", "Missing-label risk histogram over kept-overlap bins");
  std::string hist_in, hist_out;
  double hist_bin = 0.05, hist_fg = 0.5;
  hist->add_option("--in", hist_in, "curated dataset JSON (with proposals)")
      ->required();
  hist->add_option("--out", hist_out, "output CSV")->required();
  hist->add_option("--bin-width", hist_bin, "bin width over [0,1]");
  hist->add_option("--fg-thresh", hist_fg, "dropped-overlap threshold");

  // simulate
  auto* simulate = app.add_subcommand(
      "simulate", "Run the strategy-by-drop-rate comparison grid");
  std::string sim_config, sim_out_dir;
  int sim_seeds = -1;
  simulate->add_option("--config", sim_config,
                       "simulation config JSON (default: built-in)");
  simulate->add_option("--seeds", sim_seeds, "override n_seeds");
  simulate->add_option("--out-dir", sim_out_dir, "output directory")
      ->required();

  // convert-voc
  auto* convert = app.add_subcommand(
      "convert-voc", "Convert a directory of VOC XML annotations");
  std::string voc_dir, voc_out, voc_provenance;
  convert->add_option("--annotations", voc_dir, "directory of .xml files")
      ->required();
  convert->add_option("--out", voc_out, "output dataset JSON")->required();
  convert->add_option("--provenance", voc_provenance,
                      "provenance tag, e.g. voc2007");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;  // usage error
  }

  if (curate->parsed())
    return run_curate(curate_in, curate_out, curate_record, curate_rate,
                      curate_seed);
  if (weigh->parsed())
    return run_weigh(weigh_in, weigh_out, weigh_strategy, weigh_scores,
                     weigh_a, weigh_b, weigh_c, weigh_fg, weigh_hn,
                     weigh_ignore);
  if (eval->parsed())
    return run_eval(eval_dets, eval_dataset, eval_out, eval_ious, eval_mode,
                    eval_include_dropped, eval_operating);
  if (hist->parsed()) return run_hist(hist_in, hist_out, hist_bin, hist_fg);
  if (simulate->parsed()) return run_simulate(sim_config, sim_seeds, sim_out_dir);
  if (convert->parsed()) return run_convert_voc(voc_dir, voc_out, voc_provenance);
  return 1;
}
