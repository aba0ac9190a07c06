#pragma once

#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "softsample/dataset.hpp"

namespace softsample {

struct Detection {
  std::string image_id;
  Box box;
  int class_id = 0;
  double score = 0.0;
};

enum class MatchFlag { tp, fp, ignored };

struct MatchedDetection {
  Detection detection;
  MatchFlag flag = MatchFlag::fp;
};

enum class ApMode { eleven_point, all_points };

std::string_view ap_mode_name(ApMode mode);

struct EvalOptions {
  double iou_threshold = 0.5;
  // When false (the default) annotations flagged dropped are excluded from
  // matching; set to true to evaluate against the full annotation.
  bool include_dropped = false;
};

// Greedy matching in descending score order (ties: image_id, then input
// order). A detection is a TP iff its best-IoU unmatched non-difficult ground
// truth in its image reaches the threshold; detections whose only match at
// the threshold is a difficult ground truth are ignored (neither TP nor FP).
std::vector<MatchedDetection> match_detections(std::span<const Detection> dets,
                                               const Dataset& gts,
                                               int class_id,
                                               const EvalOptions& opts);

// n_gt = number of matchable (kept, non-difficult) ground truths; must be
// >= 1. eleven_point is the VOC2007 interpolation, all_points the exact area
// under the monotonized PR curve.
double average_precision(std::span<const MatchedDetection> matches,
                         std::size_t n_gt, ApMode mode);

struct PRPoint {
  double recall = 0.0;
  double precision = 0.0;
};

struct PRCurve {
  std::vector<PRPoint> points;  // in match order
  int class_id = 0;
  double iou_threshold = 0.0;
};

PRCurve pr_curve(std::span<const MatchedDetection> matches, std::size_t n_gt,
                 int class_id, double iou_threshold);

struct EvalReport {
  std::map<int, double> per_class_ap;
  double map = 0.0;
  double iou_threshold = 0.0;
  ApMode mode = ApMode::all_points;
};

// Per-class matching + AP over every class with at least one matchable
// ground truth; mAP is their mean. Throws DataError when no class has any.
EvalReport mean_ap(std::span<const Detection> dets, const Dataset& gts,
                   double iou_threshold, ApMode mode,
                   bool include_dropped = false);

// One report per threshold; thresholds must be ascending and within (0, 1].
std::vector<EvalReport> threshold_sweep(std::span<const Detection> dets,
                                        const Dataset& gts,
                                        std::span<const double> thresholds,
                                        ApMode mode,
                                        bool include_dropped = false);

struct OperatingThresholds {
  std::map<int, double> cutoff;
  std::vector<int> classes_without_detections;
};

// Per class, the lowest score cutoff maximizing F1 against the ground truth.
// When every cutoff gives F1 = 0 (e.g. all detections are FP) the highest
// detection score is returned, which suppresses everything at that level.
OperatingThresholds per_class_operating_threshold(
    std::span<const Detection> dets, const Dataset& gts, double iou_threshold);

// Detections file: JSON array of {"image_id", "class_id", "box", "score"}.
std::vector<Detection> parse_detections(const std::string& json_text);
std::vector<Detection> load_detections(const std::string& path);
std::string detections_to_json(std::span<const Detection> dets);

// Throws DataError listing class ids that do not exist in the dataset.
void validate_detection_classes(std::span<const Detection> dets,
                                const Dataset& ds);

std::string reports_to_json(std::span<const EvalReport> reports);
// Columns: class_id, class_name, one AP column per threshold, plus a final
// mAP row.
std::string reports_to_csv(std::span<const EvalReport> reports,
                           const Dataset& ds);
std::string operating_thresholds_to_json(const OperatingThresholds& ot);

}  // namespace softsample
