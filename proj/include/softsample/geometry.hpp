#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace softsample {

// Axis-aligned box in continuous pixel coordinates (no +1 pixel convention).
// Degenerate boxes (zero width or height) are legal and have IoU 0 with
// everything.
struct Box {
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 0.0;
  double y_max = 0.0;

  double width() const { return x_max - x_min; }
  double height() const { return y_max - y_min; }
  double area() const { return width() * height(); }
  bool valid() const { return x_min <= x_max && y_min <= y_max; }

  friend bool operator==(const Box&, const Box&) = default;
};

double intersection_area(const Box& a, const Box& b);

// Intersection over union. Returns 0 when the union has zero area.
double iou(const Box& a, const Box& b);

// Entry (i, j) = iou(proposals[i], gts[j]). Empty inputs give an empty matrix.
std::vector<std::vector<double>> iou_matrix(std::span<const Box> proposals,
                                            std::span<const Box> gts);

struct MaxOverlap {
  double overlap = 0.0;
  std::optional<std::size_t> index;  // argmax; ties resolved to lowest index
};

// Max IoU of `proposal` over `gts`; (0, nullopt) when gts is empty.
MaxOverlap max_overlap(const Box& proposal, std::span<const Box> gts);

}  // namespace softsample
