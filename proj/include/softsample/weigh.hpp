#pragma once

#include <optional>
#include <string>
#include <vector>

#include "softsample/dataset.hpp"
#include "softsample/sampling.hpp"

namespace softsample {

struct WeighOptions {
  Strategy strategy = Strategy::baseline;
  GompertzParams gompertz;
  AssignmentConfig assignment;
  // Upper-bound masking threshold; defaults to assignment.fg_threshold when
  // unset.
  std::optional<double> ignore_threshold;
};

// One table row per proposal. Excluded rows (filtered hard negatives, masked
// upper-bound proposals) stay in the table with weight 0 and included=false.
struct WeighRow {
  std::string image_id;
  std::size_t proposal_index = 0;
  RoISample sample;
  bool included = true;
};

// Prior-detector scores over a training set: the max non-background class
// score per RoI, plus the per-class scores observed at annotated ground-truth
// boxes (the input to per_class_thresholds). File layout:
//   {"per_roi": [{"image_id": "...", "scores": [...], "class_ids": [...]}],
//    "gt_scores": [{"class_id": 0, "scores": [...]}]}
struct TrainingScores {
  std::map<std::string, std::vector<RoIScore>> per_roi;
  std::map<int, std::vector<double>> gt_scores;
};

TrainingScores parse_training_scores(const std::string& json_text);
std::string training_scores_to_json(const TrainingScores& scores);

// Labels every proposal against the kept annotations and applies the
// strategy's weighting. scores must be present for Strategy::score_soft.
std::vector<WeighRow> weigh_dataset(const Dataset& ds,
                                    const WeighOptions& opts,
                                    const TrainingScores* scores);

std::string weigh_rows_to_json(const std::vector<WeighRow>& rows);
std::string weigh_rows_to_csv(const std::vector<WeighRow>& rows);

}  // namespace softsample
