#include "softsample/eval.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include "softsample/error.hpp"
#include "softsample/io.hpp"

namespace softsample {

using nlohmann::ordered_json;

std::string_view ap_mode_name(ApMode mode) {
  return mode == ApMode::eleven_point ? "eleven-point" : "all-points";
}

namespace {

struct GtEntry {
  Box box;
  bool difficult = false;
  bool matched = false;
};

// Per-image matchable ground truth of one class.
std::map<std::string, std::vector<GtEntry>> collect_gts(const Dataset& ds,
                                                        int class_id,
                                                        bool include_dropped) {
  std::map<std::string, std::vector<GtEntry>> by_image;
  for (const auto& img : ds.images)
    for (const auto& a : img.annotations) {
      if (a.class_id != class_id) continue;
      if (a.dropped && !include_dropped) continue;
      by_image[img.image_id].push_back({a.box, a.difficult, false});
    }
  return by_image;
}

std::size_t count_matchable(
    const std::map<std::string, std::vector<GtEntry>>& gts) {
  std::size_t n = 0;
  for (const auto& [id, entries] : gts)
    for (const auto& e : entries)
      if (!e.difficult) ++n;
  return n;
}

std::vector<std::size_t> score_order(std::span<const Detection> dets) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (dets[a].score != dets[b].score) return dets[a].score > dets[b].score;
    if (dets[a].image_id != dets[b].image_id)
      return dets[a].image_id < dets[b].image_id;
    return a < b;
  });
  return order;
}

}  // namespace

std::vector<MatchedDetection> match_detections(std::span<const Detection> dets,
                                               const Dataset& gts,
                                               int class_id,
                                               const EvalOptions& opts) {
  for (const auto& d : dets)
    if (d.class_id != class_id)
      throw UsageError("match_detections: detection of class " +
                       std::to_string(d.class_id) + " passed for class " +
                       std::to_string(class_id));

  auto gt_index = collect_gts(gts, class_id, opts.include_dropped);
  std::vector<MatchedDetection> out;
  out.reserve(dets.size());
  for (std::size_t idx : score_order(dets)) {
    const Detection& det = dets[idx];
    MatchFlag flag = MatchFlag::fp;
    auto it = gt_index.find(det.image_id);
    if (it != gt_index.end()) {
      auto& entries = it->second;
      // Best unmatched, non-difficult ground truth.
      double best = 0.0;
      std::size_t best_j = entries.size();
      for (std::size_t j = 0; j < entries.size(); ++j) {
        if (entries[j].difficult || entries[j].matched) continue;
        double o = iou(det.box, entries[j].box);
        if (best_j == entries.size() || o > best) {
          best = o;
          best_j = j;
        }
      }
      if (best_j != entries.size() && best >= opts.iou_threshold) {
        entries[best_j].matched = true;
        flag = MatchFlag::tp;
      } else {
        // Matched only by a difficult ground truth -> ignored.
        for (const auto& e : entries)
          if (e.difficult && iou(det.box, e.box) >= opts.iou_threshold) {
            flag = MatchFlag::ignored;
            break;
          }
      }
    }
    out.push_back({det, flag});
  }
  return out;
}

double average_precision(std::span<const MatchedDetection> matches,
                         std::size_t n_gt, ApMode mode) {
  if (n_gt == 0)
    throw DataError("average precision undefined for a class with no ground truth");

  std::vector<double> recall, precision;
  std::size_t tp = 0, fp = 0;
  for (const auto& m : matches) {
    if (m.flag == MatchFlag::ignored) continue;
    if (m.flag == MatchFlag::tp) ++tp; else ++fp;
    recall.push_back(static_cast<double>(tp) / static_cast<double>(n_gt));
    precision.push_back(static_cast<double>(tp) /
                        static_cast<double>(tp + fp));
  }
  if (recall.empty()) return 0.0;

  if (mode == ApMode::eleven_point) {
    double sum = 0.0;
    for (int k = 0; k <= 10; ++k) {
      double r = static_cast<double>(k) / 10.0;
      double best = 0.0;
      for (std::size_t i = 0; i < recall.size(); ++i)
        if (recall[i] >= r) best = std::max(best, precision[i]);
      sum += best;
    }
    return sum / 11.0;
  }

  // Exact area under the monotonized PR curve.
  std::vector<double> envelope(precision);
  for (std::size_t i = envelope.size() - 1; i-- > 0;)
    envelope[i] = std::max(envelope[i], envelope[i + 1]);
  double ap = 0.0;
  double prev_recall = 0.0;
  for (std::size_t i = 0; i < recall.size(); ++i) {
    ap += (recall[i] - prev_recall) * envelope[i];
    prev_recall = recall[i];
  }
  return ap;
}

PRCurve pr_curve(std::span<const MatchedDetection> matches, std::size_t n_gt,
                 int class_id, double iou_threshold) {
  if (n_gt == 0)
    throw DataError("PR curve undefined for a class with no ground truth");
  PRCurve curve;
  curve.class_id = class_id;
  curve.iou_threshold = iou_threshold;
  std::size_t tp = 0, fp = 0;
  for (const auto& m : matches) {
    if (m.flag == MatchFlag::ignored) continue;
    if (m.flag == MatchFlag::tp) ++tp; else ++fp;
    curve.points.push_back({static_cast<double>(tp) / static_cast<double>(n_gt),
                            static_cast<double>(tp) / static_cast<double>(tp + fp)});
  }
  return curve;
}

EvalReport mean_ap(std::span<const Detection> dets, const Dataset& gts,
                   double iou_threshold, ApMode mode, bool include_dropped) {
  EvalOptions opts{iou_threshold, include_dropped};

  std::map<int, std::vector<Detection>> dets_by_class;
  for (const auto& d : dets) dets_by_class[d.class_id].push_back(d);

  EvalReport report;
  report.iou_threshold = iou_threshold;
  report.mode = mode;
  double sum = 0.0;
  std::size_t n_classes = 0;
  for (const auto& [class_id, name] : gts.class_names) {
    auto gt_index = collect_gts(gts, class_id, include_dropped);
    std::size_t n_gt = count_matchable(gt_index);
    if (n_gt == 0) continue;
    double ap = 0.0;
    auto it = dets_by_class.find(class_id);
    if (it != dets_by_class.end() && !it->second.empty()) {
      auto matches = match_detections(it->second, gts, class_id, opts);
      ap = average_precision(matches, n_gt, mode);
    }
    report.per_class_ap[class_id] = ap;
    sum += ap;
    ++n_classes;
  }
  if (n_classes == 0)
    throw DataError("evaluation requires a dataset with at least one annotation");
  report.map = sum / static_cast<double>(n_classes);
  return report;
}

std::vector<EvalReport> threshold_sweep(std::span<const Detection> dets,
                                        const Dataset& gts,
                                        std::span<const double> thresholds,
                                        ApMode mode, bool include_dropped) {
  for (std::size_t i = 0; i < thresholds.size(); ++i) {
    if (!(thresholds[i] > 0.0 && thresholds[i] <= 1.0))
      throw UsageError("IoU thresholds must lie in (0, 1]");
    if (i > 0 && thresholds[i] <= thresholds[i - 1])
      throw UsageError("IoU thresholds must be strictly ascending");
  }
  std::vector<EvalReport> out;
  for (double t : thresholds)
    out.push_back(mean_ap(dets, gts, t, mode, include_dropped));
  return out;
}

OperatingThresholds per_class_operating_threshold(
    std::span<const Detection> dets, const Dataset& gts,
    double iou_threshold) {
  EvalOptions opts{iou_threshold, false};
  std::map<int, std::vector<Detection>> dets_by_class;
  for (const auto& d : dets) dets_by_class[d.class_id].push_back(d);

  OperatingThresholds out;
  for (const auto& [class_id, name] : gts.class_names) {
    auto gt_index = collect_gts(gts, class_id, false);
    std::size_t n_gt = count_matchable(gt_index);
    auto it = dets_by_class.find(class_id);
    if (it == dets_by_class.end() || it->second.empty()) {
      if (n_gt > 0) out.classes_without_detections.push_back(class_id);
      continue;
    }
    auto matches = match_detections(it->second, gts, class_id, opts);

    // Candidate cutoffs are the detection scores themselves. matches are in
    // descending score order, so a cutoff at matches[k] keeps entries 0..k.
    std::size_t tp = 0, fp = 0;
    double best_f1 = -1.0;
    double best_cutoff = 0.0;
    for (std::size_t k = 0; k < matches.size(); ++k) {
      if (matches[k].flag == MatchFlag::tp) ++tp;
      else if (matches[k].flag == MatchFlag::fp) ++fp;
      if (k + 1 < matches.size() &&
          matches[k + 1].detection.score == matches[k].detection.score)
        continue;  // cutoff at a tied score keeps the whole tie group
      std::size_t fn = n_gt - tp;
      double denom = static_cast<double>(2 * tp + fp + fn);
      double f1 = denom == 0.0 ? 0.0 : 2.0 * static_cast<double>(tp) / denom;
      double cutoff = matches[k].detection.score;
      // Strictly-better keeps the lowest cutoff among ties, since cutoffs
      // descend as k grows.
      if (f1 > best_f1 || (f1 == best_f1 && cutoff < best_cutoff)) {
        best_f1 = f1;
        best_cutoff = cutoff;
      }
    }
    if (best_f1 <= 0.0) {
      // No cutoff achieves a positive F1: suppress everything by returning
      // the highest score.
      best_cutoff = matches.front().detection.score;
    }
    out.cutoff[class_id] = best_cutoff;
  }
  return out;
}

std::vector<Detection> parse_detections(const std::string& json_text) {
  ordered_json doc;
  try {
    doc = ordered_json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(std::string("detections: invalid JSON: ") + e.what());
  }
  if (!doc.is_array()) throw DataError("detections: top level must be an array");
  std::vector<Detection> out;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const auto& j = doc[i];
    std::string where = "detections[" + std::to_string(i) + "]";
    if (!j.is_object() || !j.contains("image_id") || !j.contains("class_id") ||
        !j.contains("box") || !j.contains("score"))
      throw DataError(where + ": expected {image_id, class_id, box, score}");
    if (!j["image_id"].is_string() || !j["class_id"].is_number_integer() ||
        !j["score"].is_number() || !j["box"].is_array() || j["box"].size() != 4)
      throw DataError(where + ": ill-typed field");
    Detection d;
    d.image_id = j["image_id"].get<std::string>();
    d.class_id = j["class_id"].get<int>();
    d.score = j["score"].get<double>();
    if (!std::isfinite(d.score))
      throw DataError(where + ": score must be finite");
    for (const auto& v : j["box"])
      if (!v.is_number()) throw DataError(where + ".box: expected numbers");
    d.box = Box{j["box"][0].get<double>(), j["box"][1].get<double>(),
                j["box"][2].get<double>(), j["box"][3].get<double>()};
    if (!d.box.valid())
      throw DataError(where + ".box: x_min > x_max or y_min > y_max");
    out.push_back(std::move(d));
  }
  return out;
}

std::vector<Detection> load_detections(const std::string& path) {
  try {
    return parse_detections(read_text_file(path));
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  }
}

std::string detections_to_json(std::span<const Detection> dets) {
  ordered_json doc = ordered_json::array();
  for (const auto& d : dets)
    doc.push_back({{"image_id", d.image_id},
                   {"class_id", d.class_id},
                   {"box", {d.box.x_min, d.box.y_min, d.box.x_max, d.box.y_max}},
                   {"score", d.score}});
  return doc.dump(2) + "\n";
}

void validate_detection_classes(std::span<const Detection> dets,
                                const Dataset& ds) {
  std::set<int> unknown;
  for (const auto& d : dets)
    if (!ds.class_names.count(d.class_id)) unknown.insert(d.class_id);
  if (!unknown.empty()) {
    std::ostringstream msg;
    msg << "detections reference unknown class ids:";
    for (int c : unknown) msg << ' ' << c;
    throw DataError(msg.str());
  }
}

std::string reports_to_json(std::span<const EvalReport> reports) {
  ordered_json doc = ordered_json::array();
  for (const auto& r : reports) {
    ordered_json j;
    j["iou_threshold"] = r.iou_threshold;
    j["ap_mode"] = std::string(ap_mode_name(r.mode));
    j["per_class_ap"] = ordered_json::object();
    for (const auto& [class_id, ap] : r.per_class_ap)
      j["per_class_ap"][std::to_string(class_id)] = ap;
    j["map"] = r.map;
    doc.push_back(std::move(j));
  }
  return doc.dump(2) + "\n";
}

std::string reports_to_csv(std::span<const EvalReport> reports,
                           const Dataset& ds) {
  std::ostringstream out;
  out << "class_id,class_name";
  for (const auto& r : reports) out << ",AP@" << format_g6(r.iou_threshold);
  out << '\n';

  std::set<int> classes;
  for (const auto& r : reports)
    for (const auto& [class_id, ap] : r.per_class_ap) classes.insert(class_id);
  for (int c : classes) {
    auto name_it = ds.class_names.find(c);
    out << c << ',' << (name_it == ds.class_names.end() ? "" : name_it->second);
    for (const auto& r : reports) {
      auto it = r.per_class_ap.find(c);
      out << ',' << (it == r.per_class_ap.end() ? "" : format_g6(it->second));
    }
    out << '\n';
  }
  out << "mAP,";
  for (const auto& r : reports) out << ',' << format_g6(r.map);
  out << '\n';
  return out.str();
}

std::string operating_thresholds_to_json(const OperatingThresholds& ot) {
  ordered_json doc;
  doc["cutoffs"] = ordered_json::object();
  for (const auto& [class_id, cutoff] : ot.cutoff)
    doc["cutoffs"][std::to_string(class_id)] = cutoff;
  doc["classes_without_detections"] = ot.classes_without_detections;
  return doc.dump(2) + "\n";
}

}  // namespace softsample
