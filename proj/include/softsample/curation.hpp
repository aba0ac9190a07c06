#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "softsample/dataset.hpp"

namespace softsample {

struct DropRecord {
  double rate = 0.0;
  std::uint64_t seed = 0;
  std::map<int, std::size_t> per_class_dropped;
  std::vector<std::pair<std::string, std::size_t>> dropped_refs;  // (image, annotation index)
};

std::string drop_record_to_json(const DropRecord& rec);

// Marks round(rate * n_c) annotations of every class c as dropped, drawn
// uniformly from the annotations whose image still has at least two kept
// ones, so no image ever reaches zero kept annotations. Rounding is
// half-up. Classes are processed in ascending id order; throws DataError when
// a class's eligible pool runs out before its target count is met. The input
// dataset is not modified.
std::pair<Dataset, DropRecord> drop_annotations(const Dataset& ds, double rate,
                                                std::uint64_t seed);

struct HistogramBin {
  double lo = 0.0;
  double hi = 0.0;
  double probability = 0.0;   // P(max IoU with dropped >= fg_threshold | bin)
  std::size_t count = 0;      // proposals whose kept-overlap falls in the bin
};

// Bins every proposal by its max IoU with kept annotations and reports, per
// bin, the probability that the proposal overlaps a dropped annotation at
// IoU >= fg_threshold. Empty bins report probability 0. Throws DataError when
// the dataset has no proposals at all.
std::vector<HistogramBin> overlap_risk_histogram(const Dataset& ds,
                                                 double bin_width,
                                                 double fg_threshold);

std::string histogram_to_csv(const std::vector<HistogramBin>& bins);

struct SubsetSelection {
  std::set<int> classes;  // strictly more than both minimums
  std::map<int, double> test_instances_per_image;  // over images containing the class
};

// Classes whose instance counts strictly exceed min_train in the train split
// and min_test in the test split. test_instances_per_image is reported for
// every class present in the test split, for sorting by crowdedness.
SubsetSelection select_subset_by_instance_counts(const Dataset& train,
                                                 const Dataset& test,
                                                 std::size_t min_train,
                                                 std::size_t min_test);

}  // namespace softsample
