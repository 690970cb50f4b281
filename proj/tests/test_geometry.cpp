#include <doctest.h>

#include <random>

#include "aerialmpt/error.hpp"
#include "aerialmpt/geometry.hpp"

using namespace aerialmpt;

TEST_CASE("iou of identical, disjoint and nested boxes") {
  const PixelBox a{0, 0, 10, 10};
  CHECK(iou(a, a) == doctest::Approx(1.0));
  CHECK(iou(a, PixelBox{20, 20, 30, 30}) == 0.0);
  CHECK(iou(a, PixelBox{0, 0, 5, 10}) == doctest::Approx(0.5));
  // Touching edges share no area.
  CHECK(iou(a, PixelBox{10, 0, 20, 10}) == 0.0);
  CHECK(iou(PixelBox{1, 1, 1, 1}, PixelBox{1, 1, 1, 1}) == 0.0);
}

TEST_CASE("iou is symmetric and bounded") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0, 50), s(0.5, 20);
  for (int i = 0; i < 2000; ++i) {
    const auto a = PixelBox::centered(u(rng), u(rng), s(rng), s(rng));
    const auto b = PixelBox::centered(u(rng), u(rng), s(rng), s(rng));
    const double ab = iou(a, b);
    CHECK(ab == doctest::Approx(iou(b, a)));
    CHECK(ab >= 0.0);
    CHECK(ab <= 1.0);
  }
}

TEST_CASE("point_to_box side follows extent / gsd with a floor") {
  // 0.4 m at 0.1 m/px is 4 px; at 0.05 m/px 8 px.
  auto b = point_to_box(50, 60, 0.1);
  CHECK(b.width() == doctest::Approx(4.0));
  CHECK(b.center_x() == doctest::Approx(50.0));
  CHECK(b.center_y() == doctest::Approx(60.0));
  CHECK(point_to_box(0, 0, 0.05).width() == doctest::Approx(8.0));
  // Coarse GSD would give 1 px; floor applies.
  CHECK(point_to_box(0, 0, 0.4).width() == doctest::Approx(kDefaultMinBoxSide));
  CHECK_THROWS_AS(point_to_box(0, 0, 0.0), ConfigError);
  CHECK_THROWS_AS(point_to_box(0, 0, 0.1, -1.0), ConfigError);
}

TEST_CASE("crop transform round trip") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-100, 100), s(0.1, 5);
  for (int i = 0; i < 500; ++i) {
    const CropTransform t{u(rng), u(rng), s(rng), s(rng)};
    const PixelBox crop{u(rng), u(rng), 0, 0};
    const PixelBox box{crop.x1, crop.y1, crop.x1 + s(rng) * 10, crop.y1 + s(rng) * 10};
    const PixelBox back = apply_transform(apply_transform(box, t), invert(t));
    CHECK(back.x1 == doctest::Approx(box.x1).epsilon(1e-12));
    CHECK(std::abs(back.x1 - box.x1) < 1e-9);
    CHECK(std::abs(back.y2 - box.y2) < 1e-9);
    const Point2 p{u(rng), u(rng)};
    const Point2 q = t.to_crop(t.to_image(p));
    CHECK(std::abs(q.x - p.x) < 1e-9);
    CHECK(std::abs(q.y - p.y) < 1e-9);
  }
}
