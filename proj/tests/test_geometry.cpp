#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "softsample/geometry.hpp"
#include "softsample/random.hpp"

using namespace softsample;

namespace {

Box random_box(Rng& rng, double extent) {
  double x0 = rng.uniform(0.0, extent);
  double y0 = rng.uniform(0.0, extent);
  double w = rng.uniform(0.0, extent / 2);
  double h = rng.uniform(0.0, extent / 2);
  return {x0, y0, x0 + w, y0 + h};
}

}  // namespace

TEST_CASE("iou identity and disjoint cases") {
  Box b{2, 3, 10, 8};
  CHECK(iou(b, b) == doctest::Approx(1.0));
  CHECK(iou({0, 0, 1, 1}, {5, 5, 6, 6}) == 0.0);
}

TEST_CASE("iou hand-computed overlap") {
  // intersection 5x5 = 25, union 100 + 100 - 25 = 175
  CHECK(iou({0, 0, 10, 10}, {5, 5, 15, 15}) ==
        doctest::Approx(25.0 / 175.0).epsilon(1e-12));
}

TEST_CASE("degenerate boxes have IoU 0 with everything") {
  Box point{4, 4, 4, 4};
  Box line{0, 0, 10, 0};
  Box normal{0, 0, 10, 10};
  CHECK(iou(point, normal) == 0.0);
  CHECK(iou(line, normal) == 0.0);
  CHECK(iou(point, point) == 0.0);  // zero union
}

TEST_CASE("iou symmetry and bounds on random boxes") {
  Rng rng(42);
  for (int i = 0; i < 2000; ++i) {
    Box a = random_box(rng, 50.0);
    Box b = random_box(rng, 50.0);
    double ab = iou(a, b);
    CHECK(ab == iou(b, a));
    CHECK(ab >= 0.0);
    CHECK(ab <= 1.0);
    if (a.area() > 0.0) CHECK(iou(a, a) == doctest::Approx(1.0));
  }
}

TEST_CASE("iou is 1 only for equal non-degenerate boxes") {
  Rng rng(7);
  for (int i = 0; i < 500; ++i) {
    Box a = random_box(rng, 50.0);
    Box b = random_box(rng, 50.0);
    if (iou(a, b) == 1.0) CHECK(a == b);
  }
}

TEST_CASE("containment monotonicity: b in a in c implies iou(a,b) >= iou(c,b)") {
  Rng rng(11);
  for (int i = 0; i < 1000; ++i) {
    Box b = random_box(rng, 30.0);
    double g1 = rng.uniform(0.0, 5.0), g2 = rng.uniform(0.0, 5.0);
    Box a{b.x_min - g1, b.y_min - g1, b.x_max + g1, b.y_max + g1};
    Box c{a.x_min - g2, a.y_min - g2, a.x_max + g2, a.y_max + g2};
    CHECK(iou(a, b) >= iou(c, b) - 1e-12);
  }
}

TEST_CASE("iou_matrix shapes and composition") {
  Box b{0, 0, 10, 10};
  Box shifted{5, 5, 15, 15};
  Box far{100, 100, 110, 110};

  auto empty = iou_matrix(std::vector<Box>{b}, {});
  REQUIRE(empty.size() == 1);
  CHECK(empty[0].empty());

  auto identity = iou_matrix(std::vector<Box>{b}, std::vector<Box>{b});
  CHECK(identity[0][0] == doctest::Approx(1.0));

  auto m = iou_matrix(std::vector<Box>{b, far}, std::vector<Box>{shifted, far});
  CHECK(m[0][0] == doctest::Approx(25.0 / 175.0));
  CHECK(m[0][1] == 0.0);
  CHECK(m[1][0] == 0.0);
  CHECK(m[1][1] == doctest::Approx(1.0));
}

TEST_CASE("iou_matrix agrees entrywise with pairwise iou") {
  Rng rng(99);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<Box> props, gts;
    for (std::size_t i = 0; i < rng.below(6); ++i) props.push_back(random_box(rng, 40.0));
    for (std::size_t j = 0; j < rng.below(5); ++j) gts.push_back(random_box(rng, 40.0));
    auto m = iou_matrix(props, gts);
    REQUIRE(m.size() == props.size());
    for (std::size_t i = 0; i < props.size(); ++i) {
      REQUIRE(m[i].size() == gts.size());
      for (std::size_t j = 0; j < gts.size(); ++j)
        CHECK(m[i][j] == iou(props[i], gts[j]));
    }
  }
}

TEST_CASE("max_overlap basics") {
  Box b{0, 0, 10, 10};
  auto none = max_overlap(b, {});
  CHECK(none.overlap == 0.0);
  CHECK(!none.index);

  auto self = max_overlap(b, std::vector<Box>{b});
  CHECK(self.overlap == doctest::Approx(1.0));
  CHECK(self.index == 0);
}

TEST_CASE("max_overlap picks the argmax among constructed overlaps") {
  // Translating a w x h box by d along x gives IoU (w-d)/(w+d); solve for
  // targets {0.1, 0.6, 0.3}.
  Box p{0, 0, 10, 10};
  auto shifted = [&](double target) {
    double d = 10.0 * (1.0 - target) / (1.0 + target);
    return Box{d, 0, 10 + d, 10};
  };
  std::vector<Box> gts{shifted(0.1), shifted(0.6), shifted(0.3)};
  CHECK(iou(p, gts[0]) == doctest::Approx(0.1));
  CHECK(iou(p, gts[1]) == doctest::Approx(0.6));
  CHECK(iou(p, gts[2]) == doctest::Approx(0.3));

  auto best = max_overlap(p, gts);
  CHECK(best.overlap == doctest::Approx(0.6));
  CHECK(best.index == 1);
}
