#include "softsample/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "softsample/error.hpp"
#include "softsample/random.hpp"

namespace softsample {

void GompertzParams::validate() const {
  if (!(floor_weight >= 0.0 && floor_weight <= 1.0))
    throw UsageError("gompertz floor weight (a) must be in [0,1]");
  if (!(displacement > 0.0))
    throw UsageError("gompertz displacement (b) must be > 0");
  if (!(growth_rate > 0.0))
    throw UsageError("gompertz growth rate (c) must be > 0");
}

void AssignmentConfig::validate() const {
  if (!(hard_negative_min_overlap > 0.0 &&
        hard_negative_min_overlap < fg_threshold && fg_threshold <= 1.0))
    throw UsageError(
        "assignment requires 0 < hard_negative_min_overlap < fg_threshold <= 1");
  if (!(fg_fraction > 0.0 && fg_fraction <= 1.0))
    throw UsageError("fg_fraction must be in (0,1]");
  if (minibatch_size <= 0) throw UsageError("minibatch_size must be positive");
}

double gompertz_kernel(double x, const GompertzParams& p) {
  return p.floor_weight +
         (1.0 - p.floor_weight) *
             std::exp(-p.displacement * std::exp(-p.growth_rate * x));
}

double gompertz_weight(double overlap, const GompertzParams& p) {
  return gompertz_kernel(overlap, p);
}

std::vector<RoISample> assign_labels(std::span<const Box> proposals,
                                     std::span<const LabeledBox> kept_gts,
                                     const AssignmentConfig& cfg) {
  cfg.validate();
  std::vector<Box> gt_boxes;
  gt_boxes.reserve(kept_gts.size());
  for (const auto& g : kept_gts) gt_boxes.push_back(g.box);

  std::vector<RoISample> out;
  out.reserve(proposals.size());
  for (const Box& p : proposals) {
    RoISample s;
    s.box = p;
    MaxOverlap mo = max_overlap(p, gt_boxes);
    s.max_overlap = mo.overlap;
    s.matched_gt = mo.index;
    if (mo.index && mo.overlap >= cfg.fg_threshold)
      s.class_id = kept_gts[*mo.index].class_id;
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<RoISample> overlap_soft_weights(std::vector<RoISample> samples,
                                            const GompertzParams& p) {
  p.validate();
  for (RoISample& s : samples)
    s.weight = s.positive() ? 1.0 : gompertz_weight(s.max_overlap, p);
  return samples;
}

ClassThresholds per_class_thresholds(
    const std::map<int, std::vector<double>>& gt_scores) {
  ClassThresholds out;
  for (const auto& [class_id, scores] : gt_scores) {
    if (scores.empty())
      throw DataError("per-class thresholds: class " + std::to_string(class_id) +
                      " has no ground-truth scores");
    std::vector<double> sorted(scores);
    std::sort(sorted.begin(), sorted.end());
    std::size_t n = sorted.size();
    double median = (n % 2 == 1)
                        ? sorted[n / 2]
                        : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
    out[class_id] = median;
  }
  return out;
}

std::vector<RoISample> score_soft_weights(std::vector<RoISample> samples,
                                          std::span<const RoIScore> roi_scores,
                                          const ClassThresholds& thresholds,
                                          const GompertzParams& p,
                                          const AssignmentConfig& cfg) {
  p.validate();
  cfg.validate();
  if (roi_scores.size() != samples.size())
    throw DataError("score weighting: got " + std::to_string(roi_scores.size()) +
                    " scores for " + std::to_string(samples.size()) + " samples");
  for (std::size_t i = 0; i < samples.size(); ++i) {
    RoISample& s = samples[i];
    if (s.positive() || s.max_overlap >= cfg.hard_negative_min_overlap) {
      s.weight = 1.0;
      continue;
    }
    auto it = thresholds.find(roi_scores[i].class_id);
    if (it == thresholds.end())
      throw DataError("score weighting: no threshold for class " +
                      std::to_string(roi_scores[i].class_id));
    s.weight = gompertz_kernel(it->second - roi_scores[i].score, p);
  }
  return samples;
}

std::vector<RoISample> hard_negative_filter(std::span<const RoISample> samples,
                                            const AssignmentConfig& cfg) {
  cfg.validate();
  std::vector<RoISample> out;
  for (const RoISample& s : samples) {
    if (s.positive() || s.max_overlap >= cfg.hard_negative_min_overlap) {
      out.push_back(s);
      out.back().weight = 1.0;
    }
  }
  return out;
}

std::vector<Box> top_k_overlap_selection(std::span<const ScoredBox> proposals,
                                         std::span<const Box> kept_gts,
                                         const AssignmentConfig& cfg,
                                         std::size_t pool_size, std::size_t k) {
  cfg.validate();
  if (pool_size < k)
    throw UsageError("top-k selection: pool_size must be >= k");
  std::vector<std::size_t> order(proposals.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return proposals[a].score > proposals[b].score;
  });
  if (order.size() > pool_size) order.resize(pool_size);

  std::vector<Box> out;
  for (std::size_t idx : order) {
    if (out.size() == k) break;
    if (max_overlap(proposals[idx].box, kept_gts).overlap >=
        cfg.hard_negative_min_overlap)
      out.push_back(proposals[idx].box);
  }
  return out;
}

std::vector<bool> upper_bound_ignore_mask(std::span<const Box> proposals,
                                          std::span<const Box> dropped_gts,
                                          double ignore_threshold) {
  std::vector<bool> mask(proposals.size(), false);
  for (std::size_t i = 0; i < proposals.size(); ++i)
    mask[i] =
        max_overlap(proposals[i], dropped_gts).overlap >= ignore_threshold;
  return mask;
}

std::vector<std::size_t> sample_minibatch_indices(
    std::span<const RoISample> samples, const AssignmentConfig& cfg,
    std::uint64_t seed) {
  cfg.validate();
  std::vector<std::size_t> positives, negatives;
  for (std::size_t i = 0; i < samples.size(); ++i)
    (samples[i].positive() ? positives : negatives).push_back(i);

  std::size_t fg_cap = static_cast<std::size_t>(
      std::llround(cfg.fg_fraction * cfg.minibatch_size));
  std::size_t n_fg = std::min(positives.size(), fg_cap);
  std::size_t n_bg = std::min(negatives.size(),
                              static_cast<std::size_t>(cfg.minibatch_size) - n_fg);

  Rng rng(seed);
  std::vector<std::size_t> out;
  out.reserve(n_fg + n_bg);
  for (std::size_t i : rng.sample_without_replacement(positives.size(), n_fg))
    out.push_back(positives[i]);
  for (std::size_t i : rng.sample_without_replacement(negatives.size(), n_bg))
    out.push_back(negatives[i]);
  return out;
}

std::vector<RoISample> sample_minibatch(std::span<const RoISample> samples,
                                        const AssignmentConfig& cfg,
                                        std::uint64_t seed) {
  std::vector<RoISample> out;
  for (std::size_t i : sample_minibatch_indices(samples, cfg, seed))
    out.push_back(samples[i]);
  return out;
}

std::string_view strategy_name(Strategy s) {
  switch (s) {
    case Strategy::baseline: return "baseline";
    case Strategy::hard_negative: return "hard-negative";
    case Strategy::overlap_soft: return "oss";
    case Strategy::score_soft: return "score-ss";
    case Strategy::upper_bound: return "upper-bound";
  }
  throw UsageError("unknown strategy value");
}

Strategy parse_strategy(std::string_view name) {
  if (name == "baseline") return Strategy::baseline;
  if (name == "hard-negative") return Strategy::hard_negative;
  if (name == "oss") return Strategy::overlap_soft;
  if (name == "score-ss") return Strategy::score_soft;
  if (name == "upper-bound") return Strategy::upper_bound;
  throw UsageError("unknown strategy '" + std::string(name) +
                   "' (expected baseline, hard-negative, oss, score-ss or upper-bound)");
}

}  // namespace softsample
