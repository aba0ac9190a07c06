#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <string>

#include "softsample/curation.hpp"
#include "softsample/error.hpp"
#include "softsample/random.hpp"

using namespace softsample;

namespace {

const std::string kDataDir = SOFTSAMPLE_DATA_DIR;

Dataset sample_dataset() {
  return load_dataset(kDataDir + "/sample_dataset.json");
}

// n_images images, each with the given number of annotations of one class.
Dataset uniform_dataset(int n_images, int per_image, int class_id = 0) {
  Dataset ds;
  ds.class_names[class_id] = "c" + std::to_string(class_id);
  for (int i = 0; i < n_images; ++i) {
    ImageRecord img;
    img.image_id = "img" + std::to_string(i);
    img.width = img.height = 100.0;
    for (int k = 0; k < per_image; ++k)
      img.annotations.push_back(
          {Box{5.0 * k, 0, 5.0 * k + 4, 10}, class_id, false, false});
    ds.images.push_back(std::move(img));
  }
  return ds;
}

Dataset random_dataset(Rng& rng, int n_classes = 3) {
  Dataset ds;
  for (int c = 0; c < n_classes; ++c) ds.class_names[c] = "c" + std::to_string(c);
  int n_images = 3 + static_cast<int>(rng.below(8));
  for (int i = 0; i < n_images; ++i) {
    ImageRecord img;
    img.image_id = "r" + std::to_string(i);
    img.width = img.height = 100.0;
    int n_anns = 1 + static_cast<int>(rng.below(5));
    for (int k = 0; k < n_anns; ++k) {
      double x = rng.uniform(0, 80), y = rng.uniform(0, 80);
      img.annotations.push_back({Box{x, y, x + 15, y + 15},
                                 static_cast<int>(rng.below(n_classes)), false,
                                 false});
    }
    ds.images.push_back(std::move(img));
  }
  return ds;
}

}  // namespace

TEST_CASE("drop rate 0 leaves the dataset unchanged") {
  Dataset ds = sample_dataset();
  auto [curated, record] = drop_annotations(ds, 0.0, 99);
  CHECK(dataset_to_json(curated) == dataset_to_json(ds));
  CHECK(record.dropped_refs.empty());
  for (const auto& [class_id, n] : record.per_class_dropped) CHECK(n == 0);
}

TEST_CASE("per-class drop counts follow round-half-up") {
  Dataset ds = uniform_dataset(5, 2);  // class 0: 10 boxes
  auto [curated, record] = drop_annotations(ds, 0.3, 7);
  CHECK(record.per_class_dropped.at(0) == 3);

  Dataset sample = sample_dataset();
  auto counts = sample.annotation_counts();
  REQUIRE(counts.at(0) == 21);
  REQUIRE(counts.at(1) == 14);
  REQUIRE(counts.at(2) == 9);
  // 21 * 0.5 = 10.5 rounds up to 11.
  auto [c2, r2] = drop_annotations(sample, 0.5, 3);
  CHECK(r2.per_class_dropped.at(0) == 11);
  CHECK(r2.per_class_dropped.at(1) == 7);
  CHECK(r2.per_class_dropped.at(2) == 5);
}

TEST_CASE("single-annotation images are never emptied") {
  Rng rng(2024);
  for (int trial = 0; trial < 60; ++trial) {
    Dataset ds = random_dataset(rng);
    double rate = rng.uniform(0.0, 0.5);
    std::uint64_t seed = rng.next_u64();
    Dataset curated;
    try {
      curated = drop_annotations(ds, rate, seed).first;
    } catch (const DataError&) {
      continue;  // infeasible draw for this dataset; the error path is its own test
    }
    for (const auto& img : curated.images) CHECK(img.kept_count() >= 1);
    for (std::size_t i = 0; i < curated.images.size(); ++i)
      if (ds.images[i].annotations.size() == 1)
        CHECK(!curated.images[i].annotations[0].dropped);
  }
}

TEST_CASE("drop record is byte-identical across repeated runs") {
  Dataset ds = sample_dataset();
  auto [c1, r1] = drop_annotations(ds, 0.4, 17);
  auto [c2, r2] = drop_annotations(ds, 0.4, 17);
  CHECK(drop_record_to_json(r1) == drop_record_to_json(r2));
  CHECK(dataset_to_json(c1) == dataset_to_json(c2));
  auto [c3, r3] = drop_annotations(ds, 0.4, 18);
  CHECK(drop_record_to_json(r1) != drop_record_to_json(r3));
}

TEST_CASE("per-class counts equal the tally of dropped refs") {
  Dataset ds = sample_dataset();
  auto [curated, record] = drop_annotations(ds, 0.4, 5);
  std::map<int, std::size_t> tally;
  for (const auto& [image_id, ann_idx] : record.dropped_refs) {
    for (const auto& img : curated.images)
      if (img.image_id == image_id) {
        CHECK(img.annotations[ann_idx].dropped);
        ++tally[img.annotations[ann_idx].class_id];
      }
  }
  CHECK(tally == record.per_class_dropped);
}

TEST_CASE("clearing dropped flags recovers the original dataset") {
  Dataset ds = sample_dataset();
  auto [curated, record] = drop_annotations(ds, 0.5, 21);
  for (auto& img : curated.images)
    for (auto& a : img.annotations) a.dropped = false;
  CHECK(dataset_to_json(curated) == dataset_to_json(ds));
}

TEST_CASE("overall dropped fraction stays within rounding slack") {
  Dataset ds = sample_dataset();
  auto counts = ds.annotation_counts();
  std::size_t total = 0, min_class = SIZE_MAX;
  for (const auto& [c, n] : counts) {
    total += n;
    min_class = std::min(min_class, n);
  }
  for (double rate : {0.3, 0.4, 0.5}) {
    auto [curated, record] = drop_annotations(ds, rate, 9);
    std::size_t dropped = record.dropped_refs.size();
    double fraction = static_cast<double>(dropped) / static_cast<double>(total);
    double slack = 1.0 / static_cast<double>(min_class);
    CHECK(fraction >= rate - slack);
    CHECK(fraction <= rate + slack);
  }
}

TEST_CASE("infeasible rates fail naming the class") {
  // Ten single-annotation images: nothing is ever eligible.
  Dataset ds = uniform_dataset(10, 1, 4);
  CHECK_THROWS_WITH_AS(drop_annotations(ds, 0.5, 1),
                       doctest::Contains("class 4"), DataError);
}

TEST_CASE("drop rate validation") {
  Dataset ds = uniform_dataset(2, 2);
  CHECK_THROWS_AS(drop_annotations(ds, 1.0, 1), UsageError);
  CHECK_THROWS_AS(drop_annotations(ds, -0.1, 1), UsageError);
}

TEST_CASE("overlap risk histogram") {
  SUBCASE("no dropped annotations: all probabilities 0") {
    Dataset ds = sample_dataset();
    auto bins = overlap_risk_histogram(ds, 0.05, 0.5);
    REQUIRE(bins.size() == 20);
    for (const auto& b : bins) CHECK(b.probability == 0.0);
  }

  SUBCASE("proposal on a dropped box lands in the lowest bin") {
    Dataset ds;
    ds.class_names[0] = "c0";
    ImageRecord img;
    img.image_id = "h0";
    img.width = img.height = 100.0;
    img.annotations.push_back({Box{0, 0, 10, 10}, 0, true, false});   // dropped
    img.annotations.push_back({Box{60, 60, 80, 80}, 0, false, false});  // kept
    img.proposals = std::vector<Proposal>{{Box{0, 0, 10, 10}, 0.9}};
    ds.images.push_back(img);

    auto bins = overlap_risk_histogram(ds, 0.05, 0.5);
    CHECK(bins[0].count == 1);
    CHECK(bins[0].probability == 1.0);
    for (std::size_t b = 1; b < bins.size(); ++b) {
      CHECK(bins[b].count == 0);
      CHECK(bins[b].probability == 0.0);
    }
  }

  SUBCASE("kept overlap of exactly 1 falls into the last bin") {
    Dataset ds;
    ds.class_names[0] = "c0";
    ImageRecord img;
    img.image_id = "h1";
    img.width = img.height = 100.0;
    img.annotations.push_back({Box{0, 0, 10, 10}, 0, false, false});
    img.proposals = std::vector<Proposal>{{Box{0, 0, 10, 10}, 0.9}};
    ds.images.push_back(img);
    auto bins = overlap_risk_histogram(ds, 0.05, 0.5);
    CHECK(bins.back().count == 1);
  }

  SUBCASE("dataset without proposals is an error") {
    Dataset ds = uniform_dataset(3, 2);
    CHECK_THROWS_AS(overlap_risk_histogram(ds, 0.05, 0.5), DataError);
  }
}

TEST_CASE("histogram csv shape") {
  Dataset ds = sample_dataset();
  std::string csv = histogram_to_csv(overlap_risk_histogram(ds, 0.25, 0.5));
  CHECK(csv.substr(0, csv.find('\n')) == "bin_lo,bin_hi,probability,count");
  std::size_t lines = 0;
  for (char ch : csv) lines += ch == '\n' ? 1 : 0;
  CHECK(lines == 5);  // header + 4 bins
}

TEST_CASE("subset selection by instance counts") {
  Rng rng(31);

  SUBCASE("zero thresholds admit every class present in both splits") {
    Dataset train = uniform_dataset(2, 3, 0);
    Dataset test = uniform_dataset(1, 2, 0);
    auto sel = select_subset_by_instance_counts(train, test, 0, 0);
    CHECK(sel.classes == std::set<int>{0});
  }

  SUBCASE("thresholds are strict") {
    Dataset train = uniform_dataset(100, 2, 0);  // exactly 200 instances
    Dataset test = uniform_dataset(60, 2, 0);    // 120 instances
    auto sel = select_subset_by_instance_counts(train, test, 200, 100);
    CHECK(sel.classes.empty());
    auto sel2 = select_subset_by_instance_counts(train, test, 199, 100);
    CHECK(sel2.classes == std::set<int>{0});
  }

  SUBCASE("matches a brute-force counting oracle") {
    for (int trial = 0; trial < 50; ++trial) {
      Dataset train = random_dataset(rng);
      Dataset test = random_dataset(rng);
      std::size_t min_train = rng.below(6), min_test = rng.below(6);
      auto sel = select_subset_by_instance_counts(train, test, min_train, min_test);

      for (int c = 0; c < 3; ++c) {
        std::size_t n_train = 0, n_test = 0;
        for (const auto& img : train.images)
          for (const auto& a : img.annotations) n_train += a.class_id == c;
        for (const auto& img : test.images)
          for (const auto& a : img.annotations) n_test += a.class_id == c;
        bool expect = n_train > min_train && n_test > min_test;
        CHECK(sel.classes.count(c) == (expect ? 1u : 0u));
      }
    }
  }

  SUBCASE("instances per image averages over images containing the class") {
    Dataset train = uniform_dataset(1, 1, 0);
    Dataset test = uniform_dataset(4, 3, 0);  // 12 instances over 4 images
    auto sel = select_subset_by_instance_counts(train, test, 0, 0);
    CHECK(sel.test_instances_per_image.at(0) == doctest::Approx(3.0));
  }
}
