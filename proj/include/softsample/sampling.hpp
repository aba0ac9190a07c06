#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "softsample/geometry.hpp"

namespace softsample {

// Parameters of the weighting curve
//   G(x) = floor_weight + (1 - floor_weight) * exp(-displacement * exp(-growth_rate * x)).
// floor_weight is approximately the weight at x = 0, displacement shifts the
// curve along x, growth_rate controls how fast it rises.
struct GompertzParams {
  double floor_weight = 0.25;
  double displacement = 50.0;
  double growth_rate = 20.0;

  void validate() const;  // throws UsageError
};

// The curve evaluated at an arbitrary real argument. Both weighting variants
// share this kernel: overlap weighting uses x = overlap, score weighting uses
// x = threshold - score.
double gompertz_kernel(double x, const GompertzParams& p);

// Overlap weighting; expects overlap in [0, 1].
double gompertz_weight(double overlap, const GompertzParams& p);

struct AssignmentConfig {
  double fg_threshold = 0.5;
  double hard_negative_min_overlap = 0.1;
  int minibatch_size = 128;
  double fg_fraction = 0.25;

  void validate() const;  // throws UsageError
};

// Label value for negatives (background).
inline constexpr int kBackground = -1;

struct RoISample {
  Box box;
  int class_id = kBackground;  // kBackground means negative
  double max_overlap = 0.0;    // max IoU with kept ground truth
  double weight = 1.0;
  std::optional<std::size_t> matched_gt;  // argmax ground-truth index

  bool positive() const { return class_id != kBackground; }
};

struct LabeledBox {
  Box box;
  int class_id = 0;
};

struct ScoredBox {
  Box box;
  double score = 0.0;
};

// A proposal is positive iff its max overlap with the kept ground truth is
// >= cfg.fg_threshold; its class comes from the argmax ground truth. All
// weights start at 1.
std::vector<RoISample> assign_labels(std::span<const Box> proposals,
                                     std::span<const LabeledBox> kept_gts,
                                     const AssignmentConfig& cfg);

// Overlap-based soft sampling: negatives get gompertz_weight(max_overlap),
// positives keep weight 1.
std::vector<RoISample> overlap_soft_weights(std::vector<RoISample> samples,
                                            const GompertzParams& p);

// class id -> detection-score threshold.
using ClassThresholds = std::map<int, double>;

// Per-class median of the scores observed at annotated ground-truth boxes.
// Even counts use the mean of the two middle values. A class with an empty
// score list is an error: the detector never fired on any of its annotations.
ClassThresholds per_class_thresholds(
    const std::map<int, std::vector<double>>& gt_scores);

// Prior detector output at one RoI: its maximum non-background class score
// and the class achieving it.
struct RoIScore {
  double score = 0.0;
  int class_id = 0;
};

// Score-based soft sampling: only RoIs that are neither positive nor hard
// negative (max_overlap < cfg.hard_negative_min_overlap) are re-weighted to
// gompertz_kernel(T - score) with T the threshold of the RoI's scoring class.
std::vector<RoISample> score_soft_weights(std::vector<RoISample> samples,
                                          std::span<const RoIScore> roi_scores,
                                          const ClassThresholds& thresholds,
                                          const GompertzParams& p,
                                          const AssignmentConfig& cfg);

// Keeps every positive and the negatives with max_overlap >=
// cfg.hard_negative_min_overlap; retained weights are reset to 1.
std::vector<RoISample> hard_negative_filter(std::span<const RoISample> samples,
                                            const AssignmentConfig& cfg);

// From the top pool_size proposals by score, the k highest-scoring whose max
// overlap with the kept ground truth is >= cfg.hard_negative_min_overlap.
// Returns fewer than k when the pool is exhausted.
std::vector<Box> top_k_overlap_selection(std::span<const ScoredBox> proposals,
                                         std::span<const Box> kept_gts,
                                         const AssignmentConfig& cfg,
                                         std::size_t pool_size, std::size_t k);

// mask[i] is true iff proposals[i] has IoU >= ignore_threshold with some
// dropped ground-truth box; masked proposals are excluded from the loss
// entirely.
std::vector<bool> upper_bound_ignore_mask(std::span<const Box> proposals,
                                          std::span<const Box> dropped_gts,
                                          double ignore_threshold);

// Up to cfg.minibatch_size samples: positives capped at
// round(fg_fraction * minibatch_size), remainder filled with uniform random
// negatives, both drawn without replacement. Deterministic given the seed.
std::vector<std::size_t> sample_minibatch_indices(
    std::span<const RoISample> samples, const AssignmentConfig& cfg,
    std::uint64_t seed);
std::vector<RoISample> sample_minibatch(std::span<const RoISample> samples,
                                        const AssignmentConfig& cfg,
                                        std::uint64_t seed);

enum class Strategy {
  baseline,
  hard_negative,
  overlap_soft,
  score_soft,
  upper_bound,
};

// Wire names: "baseline", "hard-negative", "oss", "score-ss", "upper-bound".
std::string_view strategy_name(Strategy s);
Strategy parse_strategy(std::string_view name);  // throws UsageError

}  // namespace softsample
