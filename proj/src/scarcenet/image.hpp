#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace scarcenet {

/// Planar float image, channel-major (C x H x W), values nominally in [0, 1].
class ImageTensor {
 public:
  ImageTensor() = default;
  ImageTensor(int channels, int height, int width, float fill = 0.0f);

  int channels() const { return channels_; }
  int height() const { return height_; }
  int width() const { return width_; }
  bool empty() const { return data_.empty(); }

  float& at(int c, int y, int x) { return data_[index(c, y, x)]; }
  float at(int c, int y, int x) const { return data_[index(c, y, x)]; }

  std::span<float> plane(int c) {
    return {data_.data() + static_cast<std::size_t>(c) * height_ * width_,
            static_cast<std::size_t>(height_) * width_};
  }
  std::span<const float> plane(int c) const {
    return {data_.data() + static_cast<std::size_t>(c) * height_ * width_,
            static_cast<std::size_t>(height_) * width_};
  }

  std::span<float> values() { return data_; }
  std::span<const float> values() const { return data_; }

  bool operator==(const ImageTensor&) const = default;

 private:
  std::size_t index(int c, int y, int x) const {
    return (static_cast<std::size_t>(c) * height_ + y) * width_ + x;
  }

  int channels_ = 0;
  int height_ = 0;
  int width_ = 0;
  std::vector<float> data_;
};

/// Interleaved 8-bit RGB image, the on-disk representation.
struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // row-major, 3 bytes per pixel

  bool operator==(const RgbImage&) const = default;
};

RgbImage quantize(const ImageTensor& img);
ImageTensor to_tensor(const RgbImage& img);

void write_png(const std::filesystem::path& path, const RgbImage& img);
RgbImage read_png(const std::filesystem::path& path);

}  // namespace scarcenet
