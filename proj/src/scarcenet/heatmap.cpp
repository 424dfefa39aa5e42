#include "scarcenet/heatmap.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace scarcenet {

HeatmapStack::HeatmapStack(int joints, int height, int width, int resolution_ratio)
    : joints_(joints), height_(height), width_(width), ratio_(resolution_ratio) {
  if (joints <= 0 || height <= 0 || width <= 0 || resolution_ratio <= 0)
    throw std::invalid_argument("HeatmapStack: dimensions must be positive");
  data_.assign(static_cast<std::size_t>(joints) * height * width, 0.0f);
}

HeatmapStack encode(const Keypoints& kp, double sigma, int width, int height,
                    int resolution_ratio) {
  if (!(sigma > 0.0)) throw std::invalid_argument("encode: sigma must be positive");
  if (kp.coords.size() != kp.visible.size())
    throw std::invalid_argument("encode: coords/visibility length mismatch");
  HeatmapStack out(static_cast<int>(kp.size()), height, width, resolution_ratio);
  const double denom = 2.0 * sigma * sigma;
  for (int j = 0; j < out.joints(); ++j) {
    if (!kp.visible[j]) continue;
    const double cx = std::round(kp.coords[j].x / resolution_ratio);
    const double cy = std::round(kp.coords[j].y / resolution_ratio);
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x) {
        const double dx = x - cx;
        const double dy = y - cy;
        const double v = std::exp(-(dx * dx + dy * dy) / denom);
        out.at(j, y, x) = v < 1e-4 ? 0.0f : static_cast<float>(v);
      }
  }
  return out;
}

Decoded decode(const HeatmapStack& h) {
  Decoded out{Keypoints(static_cast<std::size_t>(h.joints())),
              std::vector<float>(static_cast<std::size_t>(h.joints()), 0.0f)};
  const double r = h.resolution_ratio();
  for (int j = 0; j < h.joints(); ++j) {
    const auto ch = h.channel(j);
    const auto best = std::max_element(ch.begin(), ch.end());  // first maximum
    const auto idx = static_cast<int>(best - ch.begin());
    out.keypoints.coords[j] = {r * (idx % h.width()), r * (idx / h.width())};
    out.scores[j] = *best;
    out.keypoints.visible[j] = *best > 0.0f;
  }
  return out;
}

HeatmapStack warp_heatmaps(const AffineTransform& a, const HeatmapStack& h) {
  const AffineTransform grid = rescale(a, h.resolution_ratio());
  const AffineTransform inv = invert(grid);
  HeatmapStack out(h.joints(), h.height(), h.width(), h.resolution_ratio());

  std::vector<int> source(static_cast<std::size_t>(h.joints()));
  for (int j = 0; j < h.joints(); ++j) source[j] = j;
  if (a.flip)
    for (const auto& [l, r] : a.flip_pairs) std::swap(source[l], source[r]);

  std::vector<Point> src(h.plane_size());
  for (int y = 0; y < h.height(); ++y)
    for (int x = 0; x < h.width(); ++x)
      src[static_cast<std::size_t>(y) * h.width() + x] =
          transform_point(inv, {static_cast<double>(x), static_cast<double>(y)});

  for (int j = 0; j < h.joints(); ++j) {
    const auto in = h.channel(source[j]);
    auto dst = out.channel(j);
    for (std::size_t i = 0; i < src.size(); ++i)
      dst[i] = sample_bilinear(in, h.width(), h.height(), src[i].x, src[i].y);
  }
  return out;
}

}  // namespace scarcenet
