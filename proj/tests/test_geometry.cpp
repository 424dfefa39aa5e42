#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "scarcenet/errors.hpp"
#include "scarcenet/geometry.hpp"
#include "scarcenet/rng.hpp"

using namespace scarcenet;

namespace {

void check_point(Point got, Point want, double tol = 1e-9) {
  CHECK(std::abs(got.x - want.x) <= tol);
  CHECK(std::abs(got.y - want.y) <= tol);
}

ImageTensor ramp(int c, int h, int w) {
  ImageTensor img(c, h, w);
  for (int k = 0; k < c; ++k)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) img.at(k, y, x) = 0.01f * static_cast<float>(x + 3 * y + 7 * k);
  return img;
}

}  // namespace

TEST_CASE("make_affine identity and fixed points") {
  const auto id = make_affine(0.0, 1.0, false, {13.0, -2.0});
  CHECK(id.matrix == AffineTransform::identity().matrix);
  CHECK_FALSE(id.flip);

  const auto rot = make_affine(90.0, 1.0, false, {0.0, 0.0});
  check_point(transform_point(rot, {1.0, 0.0}), {0.0, 1.0});

  const auto sc = make_affine(0.0, 2.0, false, {8.0, 8.0});
  check_point(transform_point(sc, {8.0, 8.0}), {8.0, 8.0});
  check_point(transform_point(sc, {9.0, 8.0}), {10.0, 8.0});
}

TEST_CASE("make_affine rejects non-positive scale") {
  CHECK_THROWS_AS(make_affine(0.0, 0.0, false, {}), std::invalid_argument);
  CHECK_THROWS_AS(make_affine(10.0, -1.0, false, {}), std::invalid_argument);
  CHECK_THROWS_AS(make_affine(0.0, 1.0, true, {}, {}, 0.0), std::invalid_argument);
}

TEST_CASE("transform_point examples") {
  check_point(transform_point(AffineTransform::identity(), {3.5, 7.25}), {3.5, 7.25});
  check_point(transform_point(make_affine(0.0, 0.5, false, {0.0, 0.0}), {10.0, 4.0}), {5.0, 2.0});
  const auto flip = make_affine(0.0, 1.0, true, {7.5, 7.5}, {}, 16.0);
  check_point(transform_point(flip, {2.0, 5.0}), {13.0, 5.0});
}

TEST_CASE("invert examples") {
  const auto id = invert(AffineTransform::identity());
  CHECK(id.matrix == AffineTransform::identity().matrix);

  const auto r30 = invert(make_affine(30.0, 1.0, false, {4.0, 6.0}));
  const auto rm30 = make_affine(-30.0, 1.0, false, {4.0, 6.0});
  for (int k = 0; k < 6; ++k) CHECK(std::abs(r30.matrix[k] - rm30.matrix[k]) < 1e-12);

  const auto s2 = invert(make_affine(0.0, 2.0, false, {8.0, 8.0}));
  const auto s05 = make_affine(0.0, 0.5, false, {8.0, 8.0});
  for (int k = 0; k < 6; ++k) CHECK(std::abs(s2.matrix[k] - s05.matrix[k]) < 1e-12);
}

TEST_CASE("invert of a singular matrix is a degenerate transform") {
  AffineTransform a;
  a.matrix = {1, 2, 0, 2, 4, 0};
  CHECK_THROWS_AS(invert(a), DegenerateTransform);
}

TEST_CASE("compose with inverse is the identity on random transforms") {
  Rng rng(5);
  for (int i = 0; i < 200; ++i) {
    const bool flip = rng.bernoulli(0.5);
    const auto a = make_affine(rng.uniform(-180, 180), rng.uniform(0.3, 3.0), flip,
                               {rng.uniform(0, 64), rng.uniform(0, 64)}, {{0, 1}}, 64.0);
    const auto round = compose(a, invert(a));
    const auto round2 = compose(invert(a), a);
    for (int k = 0; k < 5; ++k) {
      const Point p{rng.uniform(-10, 70), rng.uniform(-10, 70)};
      check_point(transform_point(round, p), p);
      check_point(transform_point(round2, p), p);
    }
    const Point p{rng.uniform(0, 64), rng.uniform(0, 64)};
    const auto b = make_affine(rng.uniform(-30, 30), rng.uniform(0.8, 1.2), false, {32, 32});
    check_point(transform_point(compose(a, b), p), transform_point(a, transform_point(b, p)));
  }
}

TEST_CASE("rescale agrees with conjugation by the resolution ratio") {
  Rng rng(9);
  for (int i = 0; i < 50; ++i) {
    const auto a = make_affine(rng.uniform(-30, 30), rng.uniform(0.75, 1.25), rng.bernoulli(0.5),
                               {31.5, 31.5}, {}, 64.0);
    const auto g = rescale(a, 4.0);
    const Point q{rng.uniform(0, 15), rng.uniform(0, 15)};
    const Point img = transform_point(a, {4.0 * q.x, 4.0 * q.y});
    check_point(transform_point(g, q), {img.x / 4.0, img.y / 4.0}, 1e-9);
  }
}

TEST_CASE("transform_keypoints swaps flip pairs and hides out-of-bounds joints") {
  Keypoints kp(3);
  kp.coords = {{10, 20}, {30, 20}, {60, 60}};
  kp.visible = {true, true, true};
  const auto flip = make_affine(0.0, 1.0, true, {31.5, 31.5}, {{0, 1}}, 64.0);
  const auto out = transform_keypoints(flip, kp, 64, 64);
  check_point(out.coords[0], {33.0, 20.0});
  check_point(out.coords[1], {53.0, 20.0});
  check_point(out.coords[2], {3.0, 60.0});
  CHECK(out.visible == std::vector<bool>{true, true, true});

  const auto grow = make_affine(0.0, 2.0, false, {31.5, 31.5});
  const auto big = transform_keypoints(grow, kp, 64, 64);
  CHECK_FALSE(big.visible[2]);
  CHECK(big.visible[1]);

  Keypoints hidden(1);
  hidden.coords = {{5, 5}};
  CHECK_FALSE(transform_keypoints(AffineTransform::identity(), hidden, 64, 64).visible[0]);
}

TEST_CASE("warp_image identity is bitwise equal") {
  const auto img = ramp(3, 16, 20);
  CHECK(warp_image(AffineTransform::identity(), img, 20, 16) == img);
}

TEST_CASE("warp_image 180 degree rotation twice restores the image") {
  const auto img = ramp(2, 16, 16);
  const auto r = make_affine(180.0, 1.0, false, {7.5, 7.5});
  const auto twice = warp_image(r, warp_image(r, img, 16, 16), 16, 16);
  for (std::size_t i = 0; i < img.values().size(); ++i)
    CHECK(std::abs(twice.values()[i] - img.values()[i]) <= 1e-5f);
}

TEST_CASE("warp_image keeps constant interiors constant") {
  const ImageTensor img(1, 32, 32, 0.375f);
  const auto r = make_affine(23.0, 0.9, false, {15.5, 15.5});
  const auto out = warp_image(r, img, 32, 32);
  for (int y = 12; y < 20; ++y)
    for (int x = 12; x < 20; ++x) CHECK(std::abs(out.at(0, y, x) - 0.375f) <= 1e-6f);
}

TEST_CASE("warp_image flip mirrors columns and fills the background with zero") {
  const auto img = ramp(1, 8, 8);
  const auto flip = make_affine(0.0, 1.0, true, {3.5, 3.5}, {}, 8.0);
  const auto out = warp_image(flip, img, 8, 8);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) CHECK(std::abs(out.at(0, y, x) - img.at(0, y, 7 - x)) < 1e-6f);

  const auto shrink = make_affine(0.0, 0.5, false, {3.5, 3.5});
  const auto small = warp_image(shrink, ImageTensor(1, 8, 8, 1.0f), 8, 8);
  CHECK(small.at(0, 0, 0) == 0.0f);
  CHECK(small.at(0, 4, 4) == doctest::Approx(1.0f));
}

TEST_CASE("warp_image rejects zero-sized output") {
  const auto img = ramp(1, 4, 4);
  CHECK_THROWS_AS(warp_image(AffineTransform::identity(), img, 0, 4), std::invalid_argument);
  CHECK_THROWS_AS(warp_image(AffineTransform::identity(), img, 4, 0), std::invalid_argument);
}
