#pragma once

#include <span>
#include <vector>

#include "scarcenet/geometry.hpp"

namespace scarcenet {

inline constexpr int kDefaultResolutionRatio = 4;
inline constexpr double kDefaultSigma = 2.0;

/// J single-channel score maps on a grid `resolution_ratio` times coarser than
/// the input image; grid coordinate g corresponds to image coordinate
/// ratio * g.
class HeatmapStack {
 public:
  HeatmapStack() = default;
  HeatmapStack(int joints, int height, int width, int resolution_ratio = kDefaultResolutionRatio);

  int joints() const { return joints_; }
  int height() const { return height_; }
  int width() const { return width_; }
  int resolution_ratio() const { return ratio_; }
  std::size_t plane_size() const { return static_cast<std::size_t>(height_) * width_; }

  std::span<float> channel(int j) { return {data_.data() + j * plane_size(), plane_size()}; }
  std::span<const float> channel(int j) const {
    return {data_.data() + j * plane_size(), plane_size()};
  }
  float& at(int j, int y, int x) { return data_[j * plane_size() + static_cast<std::size_t>(y) * width_ + x]; }
  float at(int j, int y, int x) const {
    return data_[j * plane_size() + static_cast<std::size_t>(y) * width_ + x];
  }

  std::span<float> values() { return data_; }
  std::span<const float> values() const { return data_; }

  bool same_shape(const HeatmapStack& o) const {
    return joints_ == o.joints_ && height_ == o.height_ && width_ == o.width_;
  }
  bool operator==(const HeatmapStack&) const = default;

 private:
  int joints_ = 0;
  int height_ = 0;
  int width_ = 0;
  int ratio_ = kDefaultResolutionRatio;
  std::vector<float> data_;
};

/// Gaussian targets centred on the grid point nearest to each visible joint
/// (keypoints given in image pixels). Values below 1e-4 are zeroed; invisible
/// joints yield all-zero channels. Throws std::invalid_argument for sigma <= 0.
HeatmapStack encode(const Keypoints& kp, double sigma, int width, int height,
                    int resolution_ratio = kDefaultResolutionRatio);

struct Decoded {
  Keypoints keypoints;        // image pixels
  std::vector<float> scores;  // channel maxima
};

/// Per-channel argmax (first hit in row-major order), scaled back to image
/// pixels. Channels whose maximum is <= 0 are reported invisible.
Decoded decode(const HeatmapStack& h);

/// Warps every channel by `a` (given in image pixels) and permutes flip
/// pairs when `a` flips.
HeatmapStack warp_heatmaps(const AffineTransform& a, const HeatmapStack& h);

}  // namespace scarcenet
