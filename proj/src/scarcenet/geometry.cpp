#include "scarcenet/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "scarcenet/errors.hpp"

namespace scarcenet {
namespace {

using Mat3 = std::array<double, 9>;

Mat3 mul(const Mat3& a, const Mat3& b) {
  Mat3 r{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      double s = 0.0;
      for (int k = 0; k < 3; ++k) s += a[i * 3 + k] * b[k * 3 + j];
      r[i * 3 + j] = s;
    }
  return r;
}

Mat3 flip_matrix(double width) { return {-1, 0, width - 1.0, 0, 1, 0, 0, 0, 1}; }

Mat3 lift(const std::array<double, 6>& m) { return {m[0], m[1], m[2], m[3], m[4], m[5], 0, 0, 1}; }

Mat3 full_matrix(const AffineTransform& a) {
  Mat3 m = lift(a.matrix);
  return a.flip ? mul(m, flip_matrix(a.flip_width)) : m;
}

// Splits a full 3x3 map back into (matrix, flip); F is an involution so
// full = M F  <=>  M = full F.
AffineTransform from_full(const Mat3& full, bool flip, double width, FlipPairs pairs) {
  AffineTransform out;
  const Mat3 m = flip ? mul(full, flip_matrix(width)) : full;
  out.matrix = {m[0], m[1], m[2], m[3], m[4], m[5]};
  out.flip = flip;
  out.flip_width = flip ? width : 0.0;
  out.flip_pairs = std::move(pairs);
  return out;
}

bool exact_identity(const AffineTransform& a) {
  return !a.flip && a.matrix == std::array<double, 6>{1, 0, 0, 0, 1, 0};
}

}  // namespace

AffineTransform make_affine(double rotation_deg, double scale, bool flip, Point center,
                            FlipPairs flip_pairs, double width) {
  if (!(scale > 0.0)) throw std::invalid_argument("make_affine: scale must be positive");
  if (flip && !(width > 0.0)) throw std::invalid_argument("make_affine: flip needs an image width");
  const double rad = rotation_deg * std::numbers::pi / 180.0;
  const double c = std::cos(rad) * scale;
  const double s = std::sin(rad) * scale;
  AffineTransform a;
  // x' = c (x - cx) - s (y - cy) + cx ; y' = s (x - cx) + c (y - cy) + cy
  a.matrix = {c, -s, center.x - c * center.x + s * center.y,
              s, c,  center.y - s * center.x - c * center.y};
  if (rotation_deg == 0.0 && scale == 1.0) a.matrix = {1, 0, 0, 0, 1, 0};
  a.flip = flip;
  a.flip_width = flip ? width : 0.0;
  a.flip_pairs = std::move(flip_pairs);
  return a;
}

AffineTransform rescale(const AffineTransform& a, double ratio) {
  // grid = S^-1 image, S = diag(ratio, ratio)
  const Mat3 s{ratio, 0, 0, 0, ratio, 0, 0, 0, 1};
  const Mat3 s_inv{1.0 / ratio, 0, 0, 0, 1.0 / ratio, 0, 0, 0, 1};
  const Mat3 full = mul(s_inv, mul(full_matrix(a), s));
  return from_full(full, a.flip, a.flip ? (a.flip_width - 1.0) / ratio + 1.0 : 0.0, a.flip_pairs);
}

Point transform_point(const AffineTransform& a, Point p) {
  if (a.flip) p.x = a.flip_width - 1.0 - p.x;
  const auto& m = a.matrix;
  return {m[0] * p.x + m[1] * p.y + m[2], m[3] * p.x + m[4] * p.y + m[5]};
}

AffineTransform compose(const AffineTransform& a, const AffineTransform& b) {
  if (a.flip && b.flip && a.flip_width != b.flip_width)
    throw std::invalid_argument("compose: flips about different widths");
  const bool flip = a.flip != b.flip;
  const double width = a.flip ? a.flip_width : b.flip_width;
  FlipPairs pairs = a.flip_pairs.empty() ? b.flip_pairs : a.flip_pairs;
  return from_full(mul(full_matrix(a), full_matrix(b)), flip, width, std::move(pairs));
}

AffineTransform invert(const AffineTransform& a) {
  const double det = a.determinant();
  if (!std::isfinite(det) || std::abs(det) < 1e-12)
    throw DegenerateTransform("invert: singular linear part");
  if (exact_identity(a)) return a;
  const Mat3 f = full_matrix(a);
  const double fdet = f[0] * f[4] - f[1] * f[3];
  Mat3 inv{f[4] / fdet, -f[1] / fdet, 0, -f[3] / fdet, f[0] / fdet, 0, 0, 0, 1};
  inv[2] = -(inv[0] * f[2] + inv[1] * f[5]);
  inv[5] = -(inv[3] * f[2] + inv[4] * f[5]);
  return from_full(inv, a.flip, a.flip_width, a.flip_pairs);
}

Keypoints transform_keypoints(const AffineTransform& a, const Keypoints& kp, int width,
                              int height) {
  Keypoints out(kp.size());
  for (std::size_t j = 0; j < kp.size(); ++j) {
    out.coords[j] = transform_point(a, kp.coords[j]);
    out.visible[j] = kp.visible[j];
  }
  if (a.flip) {
    for (const auto& [l, r] : a.flip_pairs) {
      std::swap(out.coords[l], out.coords[r]);
      // vector<bool> elements are proxies
      const bool vl = out.visible[l];
      out.visible[l] = out.visible[r];
      out.visible[r] = vl;
    }
  }
  for (std::size_t j = 0; j < out.size(); ++j) {
    const Point p = out.coords[j];
    if (p.x < 0.0 || p.y < 0.0 || p.x > width - 1.0 || p.y > height - 1.0) out.visible[j] = false;
  }
  return out;
}

float sample_bilinear(std::span<const float> plane, int width, int height, double x, double y,
                      float fill) {
  constexpr double kSlack = 1e-9;
  if (x < -kSlack || y < -kSlack || x > width - 1.0 + kSlack || y > height - 1.0 + kSlack)
    return fill;
  x = std::clamp(x, 0.0, width - 1.0);
  y = std::clamp(y, 0.0, height - 1.0);
  const int x0 = std::min(static_cast<int>(x), width - 1);
  const int y0 = std::min(static_cast<int>(y), height - 1);
  const int x1 = std::min(x0 + 1, width - 1);
  const int y1 = std::min(y0 + 1, height - 1);
  const double fx = x - x0;
  const double fy = y - y0;
  const auto at = [&](int yy, int xx) {
    return static_cast<double>(plane[static_cast<std::size_t>(yy) * width + xx]);
  };
  const double top = at(y0, x0) + fx * (at(y0, x1) - at(y0, x0));
  const double bottom = at(y1, x0) + fx * (at(y1, x1) - at(y1, x0));
  return static_cast<float>(top + fy * (bottom - top));
}

ImageTensor warp_image(const AffineTransform& a, const ImageTensor& img, int out_width,
                       int out_height) {
  if (img.empty()) throw std::invalid_argument("warp_image: empty image");
  if (out_width <= 0 || out_height <= 0)
    throw std::invalid_argument("warp_image: zero-sized output");
  if (exact_identity(a) && out_width == img.width() && out_height == img.height()) return img;

  const AffineTransform inv = invert(a);
  ImageTensor out(img.channels(), out_height, out_width);
  for (int y = 0; y < out_height; ++y)
    for (int x = 0; x < out_width; ++x) {
      const Point src = transform_point(inv, {static_cast<double>(x), static_cast<double>(y)});
      for (int c = 0; c < img.channels(); ++c)
        out.at(c, y, x) = sample_bilinear(img.plane(c), img.width(), img.height(), src.x, src.y);
    }
  return out;
}

}  // namespace scarcenet
