#include "softsample/curation.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "softsample/error.hpp"
#include "softsample/io.hpp"
#include "softsample/random.hpp"

namespace softsample {

using nlohmann::ordered_json;

std::string drop_record_to_json(const DropRecord& rec) {
  ordered_json doc;
  doc["rate"] = rec.rate;
  doc["seed"] = rec.seed;
  doc["per_class_dropped"] = ordered_json::object();
  for (const auto& [class_id, count] : rec.per_class_dropped)
    doc["per_class_dropped"][std::to_string(class_id)] = count;
  doc["dropped_refs"] = ordered_json::array();
  for (const auto& [image_id, index] : rec.dropped_refs)
    doc["dropped_refs"].push_back(
        {{"image_id", image_id}, {"annotation_index", index}});
  return doc.dump(2) + "\n";
}

std::pair<Dataset, DropRecord> drop_annotations(const Dataset& ds, double rate,
                                                std::uint64_t seed) {
  if (!(rate >= 0.0 && rate < 1.0))
    throw UsageError("drop rate must be in [0, 1)");

  Dataset out = ds;
  DropRecord rec;
  rec.rate = rate;
  rec.seed = seed;

  std::map<int, std::size_t> totals = ds.annotation_counts();
  for (const auto& [class_id, n] : totals) rec.per_class_dropped[class_id] = 0;

  // Kept-annotation count per image, updated as drops are applied.
  std::vector<std::size_t> kept(out.images.size());
  for (std::size_t i = 0; i < out.images.size(); ++i)
    kept[i] = out.images[i].kept_count();

  Rng rng(seed);
  for (const auto& [class_id, total] : totals) {
    std::size_t target =
        static_cast<std::size_t>(std::floor(rate * static_cast<double>(total) + 0.5));
    for (std::size_t done = 0; done < target; ++done) {
      // Eligible pool: kept annotations of this class whose image still has
      // at least two kept annotations, so no image is ever emptied.
      std::vector<std::pair<std::size_t, std::size_t>> eligible;
      for (std::size_t i = 0; i < out.images.size(); ++i) {
        if (kept[i] < 2) continue;
        const auto& anns = out.images[i].annotations;
        for (std::size_t k = 0; k < anns.size(); ++k)
          if (!anns[k].dropped && anns[k].class_id == class_id)
            eligible.emplace_back(i, k);
      }
      if (eligible.empty())
        throw DataError(
            "drop rate " + format_g6(rate) + " infeasible for class " +
            std::to_string(class_id) + ": eligible pool exhausted after " +
            std::to_string(done) + " of " + std::to_string(target) + " drops");
      auto [img_idx, ann_idx] = eligible[rng.below(eligible.size())];
      out.images[img_idx].annotations[ann_idx].dropped = true;
      --kept[img_idx];
      ++rec.per_class_dropped[class_id];
      rec.dropped_refs.emplace_back(out.images[img_idx].image_id, ann_idx);
    }
  }
  return {std::move(out), std::move(rec)};
}

std::vector<HistogramBin> overlap_risk_histogram(const Dataset& ds,
                                                 double bin_width,
                                                 double fg_threshold) {
  if (!(bin_width > 0.0 && bin_width <= 1.0))
    throw UsageError("bin width must be in (0, 1]");
  if (ds.total_proposals() == 0)
    throw DataError("overlap histogram requires a dataset with proposals");

  std::size_t n_bins = static_cast<std::size_t>(std::ceil(1.0 / bin_width));
  std::vector<HistogramBin> bins(n_bins);
  std::vector<std::size_t> risky(n_bins, 0);
  for (std::size_t b = 0; b < n_bins; ++b) {
    bins[b].lo = static_cast<double>(b) * bin_width;
    bins[b].hi = std::min(1.0, bins[b].lo + bin_width);
  }

  for (const auto& img : ds.images) {
    if (!img.proposals) continue;
    std::vector<Box> kept_boxes;
    for (const auto& a : img.annotations)
      if (!a.dropped) kept_boxes.push_back(a.box);
    std::vector<Box> dropped = img.dropped_boxes();
    for (const auto& p : *img.proposals) {
      double o_kept = max_overlap(p.box, kept_boxes).overlap;
      std::size_t b = std::min(
          n_bins - 1, static_cast<std::size_t>(std::floor(o_kept / bin_width)));
      bins[b].count += 1;
      if (max_overlap(p.box, dropped).overlap >= fg_threshold) risky[b] += 1;
    }
  }

  for (std::size_t b = 0; b < n_bins; ++b)
    bins[b].probability =
        bins[b].count == 0
            ? 0.0
            : static_cast<double>(risky[b]) / static_cast<double>(bins[b].count);
  return bins;
}

std::string histogram_to_csv(const std::vector<HistogramBin>& bins) {
  std::ostringstream out;
  out << "bin_lo,bin_hi,probability,count\n";
  for (const auto& b : bins)
    out << format_g6(b.lo) << ',' << format_g6(b.hi) << ','
        << format_g6(b.probability) << ',' << b.count << '\n';
  return out.str();
}

SubsetSelection select_subset_by_instance_counts(const Dataset& train,
                                                 const Dataset& test,
                                                 std::size_t min_train,
                                                 std::size_t min_test) {
  SubsetSelection out;
  std::map<int, std::size_t> train_counts = train.annotation_counts();
  std::map<int, std::size_t> test_counts = test.annotation_counts();

  std::map<int, std::size_t> test_images_with_class;
  for (const auto& img : test.images) {
    std::set<int> present;
    for (const auto& a : img.annotations) present.insert(a.class_id);
    for (int c : present) ++test_images_with_class[c];
  }
  for (const auto& [class_id, count] : test_counts)
    out.test_instances_per_image[class_id] =
        static_cast<double>(count) /
        static_cast<double>(test_images_with_class[class_id]);

  for (const auto& [class_id, n_train] : train_counts) {
    auto it = test_counts.find(class_id);
    if (it == test_counts.end()) continue;
    if (n_train > min_train && it->second > min_test)
      out.classes.insert(class_id);
  }
  return out;
}

}  // namespace softsample
