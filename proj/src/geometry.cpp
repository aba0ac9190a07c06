#include "softsample/geometry.hpp"

#include <algorithm>

namespace softsample {

double intersection_area(const Box& a, const Box& b) {
  double w = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
  double h = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
  if (w <= 0.0 || h <= 0.0) return 0.0;
  return w * h;
}

double iou(const Box& a, const Box& b) {
  double inter = intersection_area(a, b);
  double uni = a.area() + b.area() - inter;
  if (uni <= 0.0) return 0.0;
  return inter / uni;
}

std::vector<std::vector<double>> iou_matrix(std::span<const Box> proposals,
                                            std::span<const Box> gts) {
  std::vector<std::vector<double>> m(proposals.size(),
                                     std::vector<double>(gts.size(), 0.0));
  for (std::size_t i = 0; i < proposals.size(); ++i)
    for (std::size_t j = 0; j < gts.size(); ++j)
      m[i][j] = iou(proposals[i], gts[j]);
  return m;
}

MaxOverlap max_overlap(const Box& proposal, std::span<const Box> gts) {
  MaxOverlap best;
  for (std::size_t j = 0; j < gts.size(); ++j) {
    double o = iou(proposal, gts[j]);
    if (!best.index || o > best.overlap) {
      best.overlap = o;
      best.index = j;
    }
  }
  if (!best.index) best.overlap = 0.0;
  return best;
}

}  // namespace softsample
