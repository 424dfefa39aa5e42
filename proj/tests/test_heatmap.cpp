#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "scarcenet/heatmap.hpp"
#include "scarcenet/rng.hpp"

using namespace scarcenet;

namespace {

Keypoints single(double x, double y, bool visible = true) {
  Keypoints kp(1);
  kp.coords[0] = {x, y};
  kp.visible[0] = visible;
  return kp;
}

}  // namespace

TEST_CASE("encode puts a unit peak at the nearest grid point") {
  const auto h = encode(single(32.0, 32.0), 2.0, 16, 16);
  CHECK(h.joints() == 1);
  CHECK(h.height() == 16);
  CHECK(h.width() == 16);
  CHECK(h.at(0, 8, 8) == 1.0f);
  CHECK(h.at(0, 8, 10) == doctest::Approx(std::exp(-0.5)).epsilon(1e-6));
  const auto d = decode(h);
  CHECK(d.keypoints.coords[0] == Point{32.0, 32.0});
  CHECK(d.scores[0] == 1.0f);

  const auto off = encode(single(33.9, 30.3), 2.0, 16, 16);
  CHECK(off.at(0, 8, 8) == 1.0f);
}

TEST_CASE("encode values lie in [0, 1] and small tails are zeroed") {
  const auto h = encode(single(4.0, 60.0), 1.0, 16, 16);
  for (const float v : h.values()) {
    CHECK(v >= 0.0f);
    CHECK(v <= 1.0f);
    CHECK((v == 0.0f || v >= 1e-4f));
  }
  CHECK(h.at(0, 0, 15) == 0.0f);
}

TEST_CASE("invisible joints give all-zero channels and decode as invisible") {
  const auto h = encode(single(32.0, 32.0, false), 2.0, 16, 16);
  for (const float v : h.values()) CHECK(v == 0.0f);
  const auto d = decode(h);
  CHECK_FALSE(d.keypoints.visible[0]);
  CHECK(d.scores[0] == 0.0f);
}

TEST_CASE("encode rejects non-positive sigma") {
  CHECK_THROWS_AS(encode(single(1, 1), 0.0, 16, 16), std::invalid_argument);
  CHECK_THROWS_AS(encode(single(1, 1), -2.0, 16, 16), std::invalid_argument);
}

TEST_CASE("decode one-hot channel and tie breaking") {
  HeatmapStack h(2, 16, 16, 4);
  h.at(0, 5, 3) = 1.0f;
  h.at(1, 2, 9) = 0.5f;
  h.at(1, 7, 1) = 0.5f;
  const auto d = decode(h);
  CHECK(d.keypoints.coords[0] == Point{12.0, 20.0});
  CHECK(d.scores[0] == 1.0f);
  CHECK(d.keypoints.visible[0]);
  CHECK(d.keypoints.coords[1] == Point{36.0, 8.0});
}

TEST_CASE("encode then decode roundtrips every grid cell") {
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x) {
      const auto d = decode(encode(single(4.0 * x, 4.0 * y), 2.0, 16, 16));
      CHECK(d.keypoints.coords[0] == Point{4.0 * x, 4.0 * y});
      CHECK(d.keypoints.visible[0]);
    }
}

TEST_CASE("warp_heatmaps identity keeps the stack") {
  Keypoints kp(2);
  kp.coords = {{20, 24}, {44, 8}};
  kp.visible = {true, true};
  const auto h = encode(kp, 2.0, 16, 16);
  CHECK(warp_heatmaps(AffineTransform::identity(), h) == h);
}

TEST_CASE("warp_heatmaps flip moves channel L to R mirrored") {
  HeatmapStack h(3, 16, 16, 4);
  h.at(1, 6, 2) = 1.0f;
  const auto flip = make_affine(0.0, 1.0, true, {31.5, 31.5}, {{1, 2}}, 64.0);
  const auto out = warp_heatmaps(flip, h);
  for (const float v : out.channel(0)) CHECK(v == 0.0f);
  for (const float v : out.channel(1)) CHECK(v == 0.0f);
  // image x -> 63 - x is grid x -> 15.75 - x
  CHECK(out.at(2, 6, 13) == doctest::Approx(0.25f));
  CHECK(out.at(2, 6, 14) == doctest::Approx(0.75f));
  float sum = 0.0f;
  for (const float v : out.channel(2)) sum += v;
  CHECK(sum == doctest::Approx(1.0f));
}

TEST_CASE("decode after warp follows transform_point") {
  Rng rng(17);
  int checked = 0;
  while (checked < 200) {
    const auto a = make_affine(rng.uniform(-20, 20), rng.uniform(0.9, 1.1), false, {31.5, 31.5});
    const Point p{4.0 * static_cast<int>(rng.below(16)), 4.0 * static_cast<int>(rng.below(16))};
    const Point q = transform_point(a, p);
    if (q.x < 16 || q.y < 16 || q.x > 44 || q.y > 44) continue;
    const auto d = decode(warp_heatmaps(a, encode(single(p.x, p.y), 2.0, 16, 16)));
    const double err = std::hypot(d.keypoints.coords[0].x - q.x, d.keypoints.coords[0].y - q.y) / 4.0;
    CHECK(err <= 0.7);
    ++checked;
  }
}
