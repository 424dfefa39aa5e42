#pragma once

#include <array>
#include <utility>
#include <vector>

#include "scarcenet/image.hpp"

namespace scarcenet {

struct Point {
  double x = 0.0;
  double y = 0.0;

  bool operator==(const Point&) const = default;
};

using FlipPairs = std::vector<std::pair<int, int>>;

/// Invertible 2D similarity/affine map with an optional horizontal flip.
///
/// A point p is mapped as  matrix * (flip(p), 1)  where flip mirrors about the
/// vertical center line of a `flip_width`-wide image (x -> flip_width-1-x).
/// The flip is kept separate from `matrix` so that joint channels can be
/// permuted through `flip_pairs` whenever it is set.
///
/// Coordinates are continuous pixel coordinates; integer (x, y) is the
/// center of pixel (x, y); y points down.
struct AffineTransform {
  std::array<double, 6> matrix{1, 0, 0, 0, 1, 0};  // row-major 2x3
  bool flip = false;
  double flip_width = 0.0;
  FlipPairs flip_pairs;

  static AffineTransform identity() { return {}; }

  double determinant() const { return matrix[0] * matrix[4] - matrix[1] * matrix[3]; }

  bool operator==(const AffineTransform&) const = default;
};

struct Keypoints {
  std::vector<Point> coords;
  std::vector<bool> visible;

  Keypoints() = default;
  explicit Keypoints(std::size_t joints) : coords(joints), visible(joints, false) {}

  std::size_t size() const { return coords.size(); }
  bool operator==(const Keypoints&) const = default;
};

/// Flip (if requested) about the vertical line x = (width-1)/2, then rotate by
/// `rotation_deg` and scale by `scale` about `center`. Positive angles rotate
/// clockwise on screen, i.e. (1,0) -> (0,1) for 90 degrees with y down.
/// Throws std::invalid_argument for non-positive scale.
AffineTransform make_affine(double rotation_deg, double scale, bool flip, Point center,
                            FlipPairs flip_pairs = {}, double width = 0.0);

/// Rescales a transform expressed in image pixels to a grid `ratio` times
/// coarser (image = ratio * grid).
AffineTransform rescale(const AffineTransform& a, double ratio);

Point transform_point(const AffineTransform& a, Point p);

/// compose(a, b) applies b first, then a. Flip pairs are taken from whichever
/// operand carries them.
AffineTransform compose(const AffineTransform& a, const AffineTransform& b);

/// Throws DegenerateTransform when the linear part is singular.
AffineTransform invert(const AffineTransform& a);

/// Maps every coordinate, swaps joints listed in flip_pairs when the
/// transform flips, and marks joints landing outside [0,w-1]x[0,h-1] invisible.
Keypoints transform_keypoints(const AffineTransform& a, const Keypoints& kp, int width,
                              int height);

/// Bilinear sample of one plane; positions outside the pixel-center hull
/// return `fill`.
float sample_bilinear(std::span<const float> plane, int width, int height, double x, double y,
                      float fill = 0.0f);

/// Inverse-mapped bilinear resampling of every channel; out-of-source pixels
/// are 0. The identity transform copies the image exactly.
ImageTensor warp_image(const AffineTransform& a, const ImageTensor& img, int out_width,
                       int out_height);

}  // namespace scarcenet
