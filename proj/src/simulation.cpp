#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <set>
#include <sstream>

#include "softsample/error.hpp"
#include "softsample/io.hpp"
#include "softsample/random.hpp"
#include "softsample/simlab.hpp"

namespace softsample {

using nlohmann::ordered_json;

SimulationConfig default_simulation_config() { return SimulationConfig{}; }

namespace {

void check_fields(const ordered_json& j, const std::string& where,
                  std::initializer_list<const char*> allowed) {
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* a : allowed)
      if (key == a) { ok = true; break; }
    if (!ok)
      throw DataError("simulate config: unknown field '" + key + "' in " + where);
  }
}

double get_number(const ordered_json& j, const char* key, double fallback,
                  const std::string& where) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_number())
    throw DataError("simulate config: " + where + "." + key + " must be a number");
  return j.at(key).get<double>();
}

int get_int(const ordered_json& j, const char* key, int fallback,
            const std::string& where) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_number_integer())
    throw DataError("simulate config: " + where + "." + key + " must be an integer");
  return j.at(key).get<int>();
}

std::uint64_t get_u64(const ordered_json& j, const char* key,
                      std::uint64_t fallback, const std::string& where) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_number_unsigned() && !j.at(key).is_number_integer())
    throw DataError("simulate config: " + where + "." + key +
                    " must be a non-negative integer");
  return j.at(key).get<std::uint64_t>();
}

}  // namespace

SimulationConfig parse_simulation_config(const std::string& json_text) {
  ordered_json doc;
  try {
    doc = ordered_json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(std::string("simulate config: invalid JSON: ") + e.what());
  }
  if (!doc.is_object())
    throw DataError("simulate config: top level must be an object");
  check_fields(doc, "top level",
               {"scene", "test_images", "gompertz", "assignment", "trainer",
                "strategies", "drop_rates", "n_seeds", "eval", "base_seed"});

  SimulationConfig cfg;
  if (doc.contains("scene")) {
    const auto& s = doc["scene"];
    if (!s.is_object())
      throw DataError("simulate config: 'scene' must be an object");
    check_fields(s, "scene",
                 {"n_images", "n_classes", "feature_dim",
                  "min_objects_per_image", "max_objects_per_image",
                  "image_size", "min_object_size", "max_object_size",
                  "class_mean_scale", "feature_noise_scale", "confuser_rate",
                  "confuser_attenuation", "proposal_jitter",
                  "proposals_per_object", "background_proposals_per_image",
                  "seed"});
    SceneConfig& sc = cfg.scene;
    sc.n_images = get_int(s, "n_images", sc.n_images, "scene");
    sc.n_classes = get_int(s, "n_classes", sc.n_classes, "scene");
    sc.feature_dim = get_int(s, "feature_dim", sc.feature_dim, "scene");
    sc.min_objects_per_image =
        get_int(s, "min_objects_per_image", sc.min_objects_per_image, "scene");
    sc.max_objects_per_image =
        get_int(s, "max_objects_per_image", sc.max_objects_per_image, "scene");
    sc.image_size = get_number(s, "image_size", sc.image_size, "scene");
    sc.min_object_size = get_number(s, "min_object_size", sc.min_object_size, "scene");
    sc.max_object_size = get_number(s, "max_object_size", sc.max_object_size, "scene");
    sc.class_mean_scale = get_number(s, "class_mean_scale", sc.class_mean_scale, "scene");
    sc.feature_noise_scale =
        get_number(s, "feature_noise_scale", sc.feature_noise_scale, "scene");
    sc.confuser_rate = get_number(s, "confuser_rate", sc.confuser_rate, "scene");
    sc.confuser_attenuation =
        get_number(s, "confuser_attenuation", sc.confuser_attenuation, "scene");
    sc.proposal_jitter = get_number(s, "proposal_jitter", sc.proposal_jitter, "scene");
    sc.proposals_per_object =
        get_int(s, "proposals_per_object", sc.proposals_per_object, "scene");
    sc.background_proposals_per_image =
        get_int(s, "background_proposals_per_image",
                sc.background_proposals_per_image, "scene");
    sc.seed = get_u64(s, "seed", sc.seed, "scene");
  }
  cfg.test_images = get_int(doc, "test_images", cfg.test_images, "top level");

  if (doc.contains("gompertz")) {
    const auto& g = doc["gompertz"];
    if (!g.is_object())
      throw DataError("simulate config: 'gompertz' must be an object");
    check_fields(g, "gompertz", {"a", "b", "c"});
    cfg.gompertz.floor_weight = get_number(g, "a", cfg.gompertz.floor_weight, "gompertz");
    cfg.gompertz.displacement = get_number(g, "b", cfg.gompertz.displacement, "gompertz");
    cfg.gompertz.growth_rate = get_number(g, "c", cfg.gompertz.growth_rate, "gompertz");
  }
  if (doc.contains("assignment")) {
    const auto& a = doc["assignment"];
    if (!a.is_object())
      throw DataError("simulate config: 'assignment' must be an object");
    check_fields(a, "assignment",
                 {"fg_threshold", "hard_negative_min_overlap", "minibatch_size",
                  "fg_fraction"});
    cfg.assignment.fg_threshold =
        get_number(a, "fg_threshold", cfg.assignment.fg_threshold, "assignment");
    cfg.assignment.hard_negative_min_overlap =
        get_number(a, "hard_negative_min_overlap",
                   cfg.assignment.hard_negative_min_overlap, "assignment");
    cfg.assignment.minibatch_size =
        get_int(a, "minibatch_size", cfg.assignment.minibatch_size, "assignment");
    cfg.assignment.fg_fraction =
        get_number(a, "fg_fraction", cfg.assignment.fg_fraction, "assignment");
  }
  if (doc.contains("trainer")) {
    const auto& t = doc["trainer"];
    if (!t.is_object())
      throw DataError("simulate config: 'trainer' must be an object");
    check_fields(t, "trainer", {"learning_rate", "epochs"});
    cfg.trainer.learning_rate =
        get_number(t, "learning_rate", cfg.trainer.learning_rate, "trainer");
    cfg.trainer.epochs = get_int(t, "epochs", cfg.trainer.epochs, "trainer");
  }
  if (doc.contains("strategies")) {
    if (!doc["strategies"].is_array())
      throw DataError("simulate config: 'strategies' must be an array");
    cfg.strategies.clear();
    for (const auto& s : doc["strategies"]) {
      if (!s.is_string())
        throw DataError("simulate config: strategies must be strings");
      try {
        cfg.strategies.push_back(parse_strategy(s.get<std::string>()));
      } catch (const UsageError& e) {
        throw DataError(std::string("simulate config: ") + e.what());
      }
    }
  }
  if (doc.contains("drop_rates")) {
    if (!doc["drop_rates"].is_array())
      throw DataError("simulate config: 'drop_rates' must be an array");
    cfg.drop_rates.clear();
    for (const auto& r : doc["drop_rates"]) {
      if (!r.is_number())
        throw DataError("simulate config: drop_rates must be numbers");
      cfg.drop_rates.push_back(r.get<double>());
    }
  }
  cfg.n_seeds = get_int(doc, "n_seeds", cfg.n_seeds, "top level");
  if (doc.contains("eval")) {
    const auto& e = doc["eval"];
    if (!e.is_object())
      throw DataError("simulate config: 'eval' must be an object");
    check_fields(e, "eval", {"iou_threshold", "ap_mode"});
    cfg.eval_iou = get_number(e, "iou_threshold", cfg.eval_iou, "eval");
    if (e.contains("ap_mode")) {
      if (!e["ap_mode"].is_string())
        throw DataError("simulate config: eval.ap_mode must be a string");
      std::string mode = e["ap_mode"].get<std::string>();
      if (mode == "eleven-point") cfg.ap_mode = ApMode::eleven_point;
      else if (mode == "all-points") cfg.ap_mode = ApMode::all_points;
      else
        throw DataError("simulate config: eval.ap_mode must be 'eleven-point' "
                        "or 'all-points'");
    }
  }
  cfg.base_seed = get_u64(doc, "base_seed", cfg.base_seed, "top level");

  cfg.scene.validate();
  cfg.gompertz.validate();
  cfg.assignment.validate();
  if (cfg.test_images <= 0)
    throw DataError("simulate config: test_images must be positive");
  if (cfg.n_seeds <= 0)
    throw DataError("simulate config: n_seeds must be positive");
  if (cfg.trainer.epochs <= 0 || !(cfg.trainer.learning_rate > 0))
    throw DataError("simulate config: trainer must have positive epochs and learning rate");
  if (cfg.strategies.empty())
    throw DataError("simulate config: strategies must not be empty");
  if (cfg.drop_rates.empty())
    throw DataError("simulate config: drop_rates must not be empty");
  for (double r : cfg.drop_rates)
    if (!(r >= 0.0 && r < 1.0))
      throw DataError("simulate config: drop rates must lie in [0, 1)");
  if (!(cfg.eval_iou > 0.0 && cfg.eval_iou <= 1.0))
    throw DataError("simulate config: eval.iou_threshold must lie in (0, 1]");
  return cfg;
}

std::string simulation_config_to_json(const SimulationConfig& cfg) {
  ordered_json doc;
  ordered_json scene;
  scene["n_images"] = cfg.scene.n_images;
  scene["n_classes"] = cfg.scene.n_classes;
  scene["feature_dim"] = cfg.scene.feature_dim;
  scene["min_objects_per_image"] = cfg.scene.min_objects_per_image;
  scene["max_objects_per_image"] = cfg.scene.max_objects_per_image;
  scene["image_size"] = cfg.scene.image_size;
  scene["min_object_size"] = cfg.scene.min_object_size;
  scene["max_object_size"] = cfg.scene.max_object_size;
  scene["class_mean_scale"] = cfg.scene.class_mean_scale;
  scene["feature_noise_scale"] = cfg.scene.feature_noise_scale;
  scene["confuser_rate"] = cfg.scene.confuser_rate;
  scene["confuser_attenuation"] = cfg.scene.confuser_attenuation;
  scene["proposal_jitter"] = cfg.scene.proposal_jitter;
  scene["proposals_per_object"] = cfg.scene.proposals_per_object;
  scene["background_proposals_per_image"] = cfg.scene.background_proposals_per_image;
  scene["seed"] = cfg.scene.seed;
  doc["scene"] = std::move(scene);
  doc["test_images"] = cfg.test_images;
  doc["gompertz"] = {{"a", cfg.gompertz.floor_weight},
                     {"b", cfg.gompertz.displacement},
                     {"c", cfg.gompertz.growth_rate}};
  doc["assignment"] = {
      {"fg_threshold", cfg.assignment.fg_threshold},
      {"hard_negative_min_overlap", cfg.assignment.hard_negative_min_overlap},
      {"minibatch_size", cfg.assignment.minibatch_size},
      {"fg_fraction", cfg.assignment.fg_fraction}};
  doc["trainer"] = {{"learning_rate", cfg.trainer.learning_rate},
                    {"epochs", cfg.trainer.epochs}};
  doc["strategies"] = ordered_json::array();
  for (Strategy s : cfg.strategies)
    doc["strategies"].push_back(std::string(strategy_name(s)));
  doc["drop_rates"] = cfg.drop_rates;
  doc["n_seeds"] = cfg.n_seeds;
  doc["eval"] = {{"iou_threshold", cfg.eval_iou},
                 {"ap_mode", std::string(ap_mode_name(cfg.ap_mode))}};
  doc["base_seed"] = cfg.base_seed;
  return doc.dump(2) + "\n";
}

namespace {

std::string digest_parameters(const ToyDetector& det) {
  std::string bytes;
  bytes.append(reinterpret_cast<const char*>(det.weights.data()),
               static_cast<std::size_t>(det.weights.size()) * sizeof(double));
  bytes.append(reinterpret_cast<const char*>(det.bias.data()),
               static_cast<std::size_t>(det.bias.size()) * sizeof(double));
  return to_hex(fnv1a64(bytes));
}

ordered_json report_to_json(const EvalReport& r) {
  ordered_json j;
  j["iou_threshold"] = r.iou_threshold;
  j["ap_mode"] = std::string(ap_mode_name(r.mode));
  j["per_class_ap"] = ordered_json::object();
  for (const auto& [class_id, ap] : r.per_class_ap)
    j["per_class_ap"][std::to_string(class_id)] = ap;
  j["map"] = r.map;
  return j;
}

}  // namespace

SimulationOutput run_strategy_comparison(const SimulationConfig& cfg) {
  cfg.scene.validate();
  SimulationOutput out;

  // mAP per (strategy, rate) cell, filled seed by seed.
  std::map<std::pair<std::size_t, std::size_t>, std::vector<double>> cells;

  for (int k = 0; k < cfg.n_seeds; ++k) {
    SceneConfig train_cfg = cfg.scene;
    train_cfg.seed = derive_seed(cfg.base_seed, "train-scene",
                                 static_cast<std::uint64_t>(k));
    SceneConfig test_cfg = cfg.scene;
    test_cfg.n_images = cfg.test_images;
    test_cfg.seed = derive_seed(cfg.base_seed, "test-scene",
                                static_cast<std::uint64_t>(k));
    // One scene family per seed: test means must match the train means, so
    // generate them once from the shared scene seed.
    Rng mean_rng(derive_seed(cfg.base_seed, "class-means",
                             static_cast<std::uint64_t>(k)));
    Eigen::MatrixXd means(cfg.scene.n_classes, cfg.scene.feature_dim);
    for (int r = 0; r < cfg.scene.n_classes; ++r) {
      Eigen::VectorXd v(cfg.scene.feature_dim);
      for (int c = 0; c < cfg.scene.feature_dim; ++c) v(c) = mean_rng.normal();
      means.row(r) = (cfg.scene.class_mean_scale / v.norm()) * v.transpose();
    }
    train_cfg.class_feature_means = means;
    test_cfg.class_feature_means = means;

    Scene train = generate_scenes(train_cfg);
    Scene test = generate_scenes(test_cfg);
    FeatureMap train_features = roi_features(train.dataset, train.state);
    FeatureMap test_features = roi_features(test.dataset, test.state);

    for (std::size_t ri = 0; ri < cfg.drop_rates.size(); ++ri) {
      double rate = cfg.drop_rates[ri];
      Dataset curated =
          drop_annotations(train.dataset, rate,
                           derive_seed(cfg.base_seed, "drop",
                                       static_cast<std::uint64_t>(k) * 1000 + ri))
              .first;
      std::uint64_t run_seed = derive_seed(
          cfg.base_seed, "sgd", static_cast<std::uint64_t>(k) * 1000 + ri);

      for (std::size_t si = 0; si < cfg.strategies.size(); ++si) {
        ExperimentSpec spec;
        spec.strategy = cfg.strategies[si];
        spec.drop_rate = rate;
        spec.gompertz = cfg.gompertz;
        spec.assignment = cfg.assignment;
        spec.trainer = cfg.trainer;
        spec.scene = cfg.scene;
        spec.n_seeds = cfg.n_seeds;

        RunLog log;
        log.strategy = spec.strategy;
        log.drop_rate = rate;
        log.seed_index = k;
        ToyDetector det = train_toy_detector(curated, train_features, spec,
                                             run_seed, &log.epoch_losses);
        log.params_digest = digest_parameters(det);
        std::vector<Detection> dets = detect(det, test.dataset, test_features);
        log.report = mean_ap(dets, test.dataset, cfg.eval_iou, cfg.ap_mode);
        cells[{si, ri}].push_back(log.report.map);
        out.runs.push_back(std::move(log));
      }
    }
  }

  for (std::size_t si = 0; si < cfg.strategies.size(); ++si)
    for (std::size_t ri = 0; ri < cfg.drop_rates.size(); ++ri) {
      ExperimentResult res;
      res.strategy = cfg.strategies[si];
      res.drop_rate = cfg.drop_rates[ri];
      res.per_seed_map = cells[{si, ri}];
      double n = static_cast<double>(res.per_seed_map.size());
      double mean = 0.0;
      for (double v : res.per_seed_map) mean += v;
      mean /= n;
      double var = 0.0;
      for (double v : res.per_seed_map) var += (v - mean) * (v - mean);
      res.mean_map = mean;
      res.sd_map = n > 1 ? std::sqrt(var / (n - 1.0)) : 0.0;
      out.results.push_back(std::move(res));
    }

  std::ostringstream table;
  table << "strategy";
  for (double rate : cfg.drop_rates) table << ",drop_" << format_g6(rate);
  table << '\n';
  for (std::size_t si = 0; si < cfg.strategies.size(); ++si) {
    table << strategy_name(cfg.strategies[si]);
    for (std::size_t ri = 0; ri < cfg.drop_rates.size(); ++ri)
      table << ',' << format_g6(out.results[si * cfg.drop_rates.size() + ri].mean_map);
    table << '\n';
  }
  out.table_csv = table.str();
  return out;
}

std::string results_to_json(const SimulationOutput& out) {
  ordered_json doc = ordered_json::array();
  for (const auto& r : out.results) {
    ordered_json j;
    j["strategy"] = std::string(strategy_name(r.strategy));
    j["drop_rate"] = r.drop_rate;
    j["mean_map"] = r.mean_map;
    j["sd_map"] = r.sd_map;
    j["per_seed_map"] = r.per_seed_map;
    doc.push_back(std::move(j));
  }
  return doc.dump(2) + "\n";
}

void write_simulation_outputs(const SimulationOutput& out,
                              const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::path dir(out_dir);
  std::error_code ec;
  fs::create_directories(dir / "runs", ec);
  if (ec)
    throw DataError("cannot create output directory " + out_dir + ": " +
                    ec.message());

  write_text_file_atomic((dir / "table.csv").string(), out.table_csv);
  write_text_file_atomic((dir / "results.json").string(), results_to_json(out));
  for (const auto& run : out.runs) {
    ordered_json j;
    j["strategy"] = std::string(strategy_name(run.strategy));
    j["drop_rate"] = run.drop_rate;
    j["seed_index"] = run.seed_index;
    j["epoch_losses"] = run.epoch_losses;
    j["params_digest"] = run.params_digest;
    j["eval"] = report_to_json(run.report);
    char name[128];
    std::snprintf(name, sizeof(name), "%s_drop%s_seed%03d.json",
                  std::string(strategy_name(run.strategy)).c_str(),
                  format_g6(run.drop_rate).c_str(), run.seed_index);
    write_text_file_atomic((dir / "runs" / name).string(), j.dump(2) + "\n");
  }
}

}  // namespace softsample
