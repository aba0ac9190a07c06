#include "softsample/weigh.hpp"

#include <json.hpp>

#include <sstream>

#include "softsample/error.hpp"
#include "softsample/io.hpp"

namespace softsample {

using nlohmann::ordered_json;

TrainingScores parse_training_scores(const std::string& json_text) {
  ordered_json doc;
  try {
    doc = ordered_json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(std::string("scores: invalid JSON: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("per_roi") || !doc["per_roi"].is_array())
    throw DataError("scores: expected an object with a 'per_roi' array");

  TrainingScores out;
  for (std::size_t i = 0; i < doc["per_roi"].size(); ++i) {
    const auto& j = doc["per_roi"][i];
    std::string where = "scores.per_roi[" + std::to_string(i) + "]";
    if (!j.is_object() || !j.contains("image_id") || !j.contains("scores") ||
        !j.contains("class_ids") || !j["image_id"].is_string() ||
        !j["scores"].is_array() || !j["class_ids"].is_array())
      throw DataError(where + ": expected {image_id, scores, class_ids}");
    if (j["scores"].size() != j["class_ids"].size())
      throw DataError(where + ": scores and class_ids differ in length");
    std::vector<RoIScore> scores;
    for (std::size_t k = 0; k < j["scores"].size(); ++k) {
      if (!j["scores"][k].is_number() || !j["class_ids"][k].is_number_integer())
        throw DataError(where + ": ill-typed score entry");
      scores.push_back({j["scores"][k].get<double>(), j["class_ids"][k].get<int>()});
    }
    out.per_roi[j["image_id"].get<std::string>()] = std::move(scores);
  }
  if (doc.contains("gt_scores")) {
    if (!doc["gt_scores"].is_array())
      throw DataError("scores.gt_scores: expected an array");
    for (std::size_t i = 0; i < doc["gt_scores"].size(); ++i) {
      const auto& j = doc["gt_scores"][i];
      std::string where = "scores.gt_scores[" + std::to_string(i) + "]";
      if (!j.is_object() || !j.contains("class_id") || !j.contains("scores") ||
          !j["class_id"].is_number_integer() || !j["scores"].is_array())
        throw DataError(where + ": expected {class_id, scores}");
      std::vector<double> values;
      for (const auto& v : j["scores"]) {
        if (!v.is_number()) throw DataError(where + ".scores: expected numbers");
        values.push_back(v.get<double>());
      }
      out.gt_scores[j["class_id"].get<int>()] = std::move(values);
    }
  }
  return out;
}

std::string training_scores_to_json(const TrainingScores& scores) {
  ordered_json doc;
  doc["per_roi"] = ordered_json::array();
  for (const auto& [image_id, rois] : scores.per_roi) {
    ordered_json j;
    j["image_id"] = image_id;
    j["scores"] = ordered_json::array();
    j["class_ids"] = ordered_json::array();
    for (const auto& r : rois) {
      j["scores"].push_back(r.score);
      j["class_ids"].push_back(r.class_id);
    }
    doc["per_roi"].push_back(std::move(j));
  }
  doc["gt_scores"] = ordered_json::array();
  for (const auto& [class_id, values] : scores.gt_scores)
    doc["gt_scores"].push_back({{"class_id", class_id}, {"scores", values}});
  return doc.dump(2) + "\n";
}

std::vector<WeighRow> weigh_dataset(const Dataset& ds,
                                    const WeighOptions& opts,
                                    const TrainingScores* scores) {
  opts.assignment.validate();
  opts.gompertz.validate();
  if (ds.total_proposals() == 0)
    throw DataError("weighting requires a dataset with proposals");
  if (opts.strategy == Strategy::score_soft && scores == nullptr)
    throw UsageError("score-ss weighting requires a scores file");

  ClassThresholds thresholds;
  if (opts.strategy == Strategy::score_soft)
    thresholds = per_class_thresholds(scores->gt_scores);

  std::vector<WeighRow> rows;
  for (const auto& img : ds.images) {
    if (!img.proposals) continue;
    std::vector<Box> boxes;
    boxes.reserve(img.proposals->size());
    for (const auto& p : *img.proposals) boxes.push_back(p.box);

    std::vector<LabeledBox> kept = img.kept_boxes();
    std::vector<RoISample> samples = assign_labels(boxes, kept, opts.assignment);
    std::vector<bool> included(samples.size(), true);

    switch (opts.strategy) {
      case Strategy::baseline:
        break;
      case Strategy::overlap_soft:
        samples = overlap_soft_weights(std::move(samples), opts.gompertz);
        break;
      case Strategy::hard_negative:
        for (std::size_t i = 0; i < samples.size(); ++i) {
          if (!samples[i].positive() &&
              samples[i].max_overlap < opts.assignment.hard_negative_min_overlap) {
            included[i] = false;
            samples[i].weight = 0.0;
          }
        }
        break;
      case Strategy::upper_bound: {
        std::vector<Box> dropped = img.dropped_boxes();
        double threshold =
            opts.ignore_threshold.value_or(opts.assignment.fg_threshold);
        std::vector<bool> mask = upper_bound_ignore_mask(boxes, dropped, threshold);
        for (std::size_t i = 0; i < samples.size(); ++i)
          if (mask[i]) {
            included[i] = false;
            samples[i].weight = 0.0;
          }
        break;
      }
      case Strategy::score_soft: {
        auto it = scores->per_roi.find(img.image_id);
        if (it == scores->per_roi.end())
          throw DataError("scores: no per_roi entry for image '" + img.image_id + "'");
        samples = score_soft_weights(std::move(samples), it->second, thresholds,
                                     opts.gompertz, opts.assignment);
        break;
      }
    }

    for (std::size_t i = 0; i < samples.size(); ++i)
      rows.push_back({img.image_id, i, samples[i], included[i]});
  }
  return rows;
}

std::string weigh_rows_to_json(const std::vector<WeighRow>& rows) {
  ordered_json doc = ordered_json::array();
  for (const auto& r : rows) {
    ordered_json j;
    j["image_id"] = r.image_id;
    j["proposal_index"] = r.proposal_index;
    j["box"] = {r.sample.box.x_min, r.sample.box.y_min, r.sample.box.x_max,
                r.sample.box.y_max};
    j["label"] = r.sample.class_id;
    j["max_overlap"] = r.sample.max_overlap;
    j["weight"] = r.sample.weight;
    if (r.sample.matched_gt)
      j["matched_gt"] = *r.sample.matched_gt;
    else
      j["matched_gt"] = nullptr;
    j["included"] = r.included;
    doc.push_back(std::move(j));
  }
  return doc.dump(2) + "\n";
}

std::string weigh_rows_to_csv(const std::vector<WeighRow>& rows) {
  std::ostringstream out;
  out << "image_id,proposal_index,x_min,y_min,x_max,y_max,label,max_overlap,"
         "weight,matched_gt,included\n";
  for (const auto& r : rows) {
    out << r.image_id << ',' << r.proposal_index << ','
        << format_g6(r.sample.box.x_min) << ',' << format_g6(r.sample.box.y_min)
        << ',' << format_g6(r.sample.box.x_max) << ','
        << format_g6(r.sample.box.y_max) << ',' << r.sample.class_id << ','
        << format_g6(r.sample.max_overlap) << ',' << format_g6(r.sample.weight)
        << ',';
    if (r.sample.matched_gt) out << *r.sample.matched_gt;
    out << ',' << (r.included ? 1 : 0) << '\n';
  }
  return out.str();
}

}  // namespace softsample
