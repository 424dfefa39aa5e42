#include "scarcenet/augment.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace scarcenet {
namespace {

Point image_center(const ImageTensor& img) {
  return {(img.width() - 1) / 2.0, (img.height() - 1) / 2.0};
}

void gaussian_blur(ImageTensor& img, double sigma) {
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> kernel(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    kernel[i + radius] = std::exp(-(i * i) / (2.0 * sigma * sigma));
    sum += kernel[i + radius];
  }
  for (auto& k : kernel) k /= sum;

  const int w = img.width();
  const int h = img.height();
  std::vector<float> tmp(static_cast<std::size_t>(w) * h);
  for (int c = 0; c < img.channels(); ++c) {
    auto p = img.plane(c);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        double acc = 0.0;
        for (int i = -radius; i <= radius; ++i) {
          const int xx = std::clamp(x + i, 0, w - 1);
          acc += kernel[i + radius] * p[static_cast<std::size_t>(y) * w + xx];
        }
        tmp[static_cast<std::size_t>(y) * w + x] = static_cast<float>(acc);
      }
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        double acc = 0.0;
        for (int i = -radius; i <= radius; ++i) {
          const int yy = std::clamp(y + i, 0, h - 1);
          acc += kernel[i + radius] * tmp[static_cast<std::size_t>(yy) * w + x];
        }
        p[static_cast<std::size_t>(y) * w + x] = static_cast<float>(acc);
      }
  }
}

void clamp_unit(ImageTensor& img) {
  for (auto& v : img.values()) v = std::clamp(v, 0.0f, 1.0f);
}

PhotometricOp draw_op(const std::string& name, const ImageTensor& img, Rng& rng) {
  if (name == "gaussian-noise") return {name, {rng.uniform(0.0, 0.1)}};
  if (name == "cutout") {
    const double area = rng.uniform(0.05, 0.25) * img.width() * img.height();
    const double aspect = rng.uniform(0.5, 2.0);
    int cw = std::clamp(static_cast<int>(std::sqrt(area * aspect)), 1, img.width());
    int ch = std::clamp(static_cast<int>(area / cw), 1, img.height());
    while (static_cast<double>(cw) * ch > 0.25 * img.width() * img.height()) --ch;
    const int x0 = static_cast<int>(rng.below(static_cast<std::uint64_t>(img.width() - cw + 1)));
    const int y0 = static_cast<int>(rng.below(static_cast<std::uint64_t>(img.height() - ch + 1)));
    return {name, {double(x0), double(y0), double(cw), double(ch)}};
  }
  if (name == "gaussian-blur") return {name, {rng.uniform(0.3, 1.5)}};
  if (name == "brightness") return {name, {rng.uniform(-0.3, 0.3)}};
  if (name == "contrast") return {name, {rng.uniform(0.7, 1.3)}};
  throw std::invalid_argument("unknown photometric op: " + name);
}

}  // namespace

const std::vector<std::string>& photometric_op_names() {
  static const std::vector<std::string> names{"gaussian-noise", "cutout", "gaussian-blur",
                                              "brightness", "contrast"};
  return names;
}

void apply_photometric(ImageTensor& img, const PhotometricOp& op, Rng& rng) {
  const auto& p = op.params;
  if (op.name == "gaussian-noise") {
    for (auto& v : img.values()) v += static_cast<float>(p[0] * rng.normal());
  } else if (op.name == "cutout") {
    const int x0 = static_cast<int>(p[0]), y0 = static_cast<int>(p[1]);
    const int cw = static_cast<int>(p[2]), ch = static_cast<int>(p[3]);
    for (int c = 0; c < img.channels(); ++c)
      for (int y = y0; y < y0 + ch; ++y)
        for (int x = x0; x < x0 + cw; ++x) img.at(c, y, x) = 0.0f;
  } else if (op.name == "gaussian-blur") {
    gaussian_blur(img, p[0]);
  } else if (op.name == "brightness") {
    for (auto& v : img.values()) v += static_cast<float>(p[0]);
  } else if (op.name == "contrast") {
    for (int c = 0; c < img.channels(); ++c) {
      auto plane = img.plane(c);
      double mean = 0.0;
      for (float v : plane) mean += v;
      mean /= static_cast<double>(plane.size());
      for (auto& v : plane) v = static_cast<float>(mean + p[0] * (v - mean));
    }
  } else {
    throw std::invalid_argument("unknown photometric op: " + op.name);
  }
  clamp_unit(img);
}

AugmentedSample weak_augment(const ImageTensor& img, Rng& rng, const AugmentRanges& ranges) {
  const double rot = rng.uniform(-ranges.weak_rotation_deg, ranges.weak_rotation_deg);
  const double scale = rng.uniform(ranges.weak_scale_min, ranges.weak_scale_max);
  AugmentedSample out;
  out.geo = make_affine(rot, scale, false, image_center(img));
  out.image = warp_image(out.geo, img, img.width(), img.height());
  return out;
}

AugmentedSample strong_augment(const ImageTensor& img, Rng& rng, const FlipPairs& flip_pairs,
                               const AugmentRanges& ranges) {
  const double rot = rng.uniform(-ranges.strong_rotation_deg, ranges.strong_rotation_deg);
  const double scale = rng.uniform(ranges.strong_scale_min, ranges.strong_scale_max);
  const bool flip = rng.bernoulli(ranges.strong_flip_prob);
  AugmentedSample out;
  out.geo = make_affine(rot, scale, flip, image_center(img), flip_pairs, img.width());
  out.image = warp_image(out.geo, img, img.width(), img.height());

  std::vector<std::string> pool = photometric_op_names();
  const int k = std::clamp(ranges.photometric_ops, 0, static_cast<int>(pool.size()));
  std::vector<std::string> chosen;
  for (int i = 0; i < k; ++i) {
    const auto idx = rng.below(pool.size());
    chosen.push_back(pool[idx]);
    pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(idx));
  }
  std::stable_partition(chosen.begin(), chosen.end(),
                        [](const std::string& n) { return n != "cutout"; });
  for (const auto& name : chosen) {
    out.ops_log.push_back(draw_op(name, out.image, rng));
    apply_photometric(out.image, out.ops_log.back(), rng);
  }
  return out;
}

}  // namespace scarcenet
