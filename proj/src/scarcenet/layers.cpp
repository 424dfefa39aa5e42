#include "scarcenet/layers.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <stdexcept>

namespace scarcenet::layers {
namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapMat = Eigen::Map<RowMat<T>>;
template <typename T>
using CMapMat = Eigen::Map<const RowMat<T>>;
template <typename T>
using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;

int out_dim(int n, int stride) { return (n - 1) / stride + 1; }

template <typename T>
void im2col(const T* x, int channels, int h, int w, int stride, T* col) {
  const int ho = out_dim(h, stride);
  const int wo = out_dim(w, stride);
  for (int c = 0; c < channels; ++c)
    for (int ky = 0; ky < 3; ++ky)
      for (int kx = 0; kx < 3; ++kx) {
        T* row = col + (static_cast<std::size_t>(c) * 9 + ky * 3 + kx) * ho * wo;
        for (int oy = 0; oy < ho; ++oy) {
          const int iy = oy * stride + ky - 1;
          T* dst = row + static_cast<std::size_t>(oy) * wo;
          if (iy < 0 || iy >= h) {
            std::fill(dst, dst + wo, T(0));
            continue;
          }
          const T* src = x + (static_cast<std::size_t>(c) * h + iy) * w;
          for (int ox = 0; ox < wo; ++ox) {
            const int ix = ox * stride + kx - 1;
            dst[ox] = (ix < 0 || ix >= w) ? T(0) : src[ix];
          }
        }
      }
}

template <typename T>
void col2im(const T* col, int channels, int h, int w, int stride, T* dx) {
  const int ho = out_dim(h, stride);
  const int wo = out_dim(w, stride);
  std::fill(dx, dx + static_cast<std::size_t>(channels) * h * w, T(0));
  for (int c = 0; c < channels; ++c)
    for (int ky = 0; ky < 3; ++ky)
      for (int kx = 0; kx < 3; ++kx) {
        const T* row = col + (static_cast<std::size_t>(c) * 9 + ky * 3 + kx) * ho * wo;
        for (int oy = 0; oy < ho; ++oy) {
          const int iy = oy * stride + ky - 1;
          if (iy < 0 || iy >= h) continue;
          T* dst = dx + (static_cast<std::size_t>(c) * h + iy) * w;
          const T* src = row + static_cast<std::size_t>(oy) * wo;
          for (int ox = 0; ox < wo; ++ox) {
            const int ix = ox * stride + kx - 1;
            if (ix >= 0 && ix < w) dst[ix] += src[ox];
          }
        }
      }
}

// Eigen's vectorized reductions pick their summation order from the pointer
// alignment, which would make gradients differ from run to run.
template <typename T>
void add_row_sums(const T* m, int rows, int cols, T* out) {
  for (int r = 0; r < rows; ++r) {
    const T* row = m + static_cast<std::size_t>(r) * cols;
    T acc = 0;
    for (int c = 0; c < cols; ++c) acc += row[c];
    out[r] += acc;
  }
}

void check(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(what);
}

}  // namespace

template <typename T>
std::vector<T> conv3x3(std::span<const T> x, int in_c, int h, int w, int stride,
                       std::span<const T> weight, std::span<const T> bias, int out_c) {
  check(x.size() == static_cast<std::size_t>(in_c) * h * w, "conv3x3: input size mismatch");
  check(weight.size() == static_cast<std::size_t>(out_c) * in_c * 9, "conv3x3: weight size mismatch");
  check(bias.size() == static_cast<std::size_t>(out_c), "conv3x3: bias size mismatch");
  const int pixels = out_dim(h, stride) * out_dim(w, stride);
  const int k = in_c * 9;
  std::vector<T> col(static_cast<std::size_t>(k) * pixels);
  im2col(x.data(), in_c, h, w, stride, col.data());
  std::vector<T> y(static_cast<std::size_t>(out_c) * pixels);
  MapMat<T> ym(y.data(), out_c, pixels);
  ym.noalias() = CMapMat<T>(weight.data(), out_c, k) * CMapMat<T>(col.data(), k, pixels);
  ym.colwise() += Eigen::Map<const Vec<T>>(bias.data(), out_c);
  return y;
}

template <typename T>
std::vector<T> conv3x3_backward(std::span<const T> x, int in_c, int h, int w, int stride,
                                std::span<const T> weight, int out_c, std::span<const T> dy,
                                std::span<T> d_weight, std::span<T> d_bias, bool need_dx) {
  const int pixels = out_dim(h, stride) * out_dim(w, stride);
  const int k = in_c * 9;
  check(dy.size() == static_cast<std::size_t>(out_c) * pixels, "conv3x3_backward: dy size mismatch");
  check(d_weight.size() == static_cast<std::size_t>(out_c) * k, "conv3x3_backward: weight size mismatch");
  std::vector<T> col(static_cast<std::size_t>(k) * pixels);
  im2col(x.data(), in_c, h, w, stride, col.data());
  CMapMat<T> dym(dy.data(), out_c, pixels);
  MapMat<T>(d_weight.data(), out_c, k).noalias() += dym * CMapMat<T>(col.data(), k, pixels).transpose();
  add_row_sums(dy.data(), out_c, pixels, d_bias.data());
  if (!need_dx) return {};
  MapMat<T>(col.data(), k, pixels).noalias() = CMapMat<T>(weight.data(), out_c, k).transpose() * dym;
  std::vector<T> dx(static_cast<std::size_t>(in_c) * h * w);
  col2im(col.data(), in_c, h, w, stride, dx.data());
  return dx;
}

template <typename T>
std::vector<T> conv1x1(std::span<const T> x, int in_c, int pixels, std::span<const T> weight,
                       std::span<const T> bias, int out_c) {
  check(x.size() == static_cast<std::size_t>(in_c) * pixels, "conv1x1: input size mismatch");
  check(weight.size() == static_cast<std::size_t>(out_c) * in_c, "conv1x1: weight size mismatch");
  check(bias.size() == static_cast<std::size_t>(out_c), "conv1x1: bias size mismatch");
  std::vector<T> y(static_cast<std::size_t>(out_c) * pixels);
  MapMat<T> ym(y.data(), out_c, pixels);
  ym.noalias() = CMapMat<T>(weight.data(), out_c, in_c) * CMapMat<T>(x.data(), in_c, pixels);
  ym.colwise() += Eigen::Map<const Vec<T>>(bias.data(), out_c);
  return y;
}

template <typename T>
std::vector<T> conv1x1_backward(std::span<const T> x, int in_c, int pixels,
                                std::span<const T> weight, int out_c, std::span<const T> dy,
                                std::span<T> d_weight, std::span<T> d_bias, bool need_dx) {
  check(dy.size() == static_cast<std::size_t>(out_c) * pixels, "conv1x1_backward: dy size mismatch");
  CMapMat<T> dym(dy.data(), out_c, pixels);
  MapMat<T>(d_weight.data(), out_c, in_c).noalias() += dym * CMapMat<T>(x.data(), in_c, pixels).transpose();
  add_row_sums(dy.data(), out_c, pixels, d_bias.data());
  if (!need_dx) return {};
  std::vector<T> dx(static_cast<std::size_t>(in_c) * pixels);
  MapMat<T>(dx.data(), in_c, pixels).noalias() = CMapMat<T>(weight.data(), out_c, in_c).transpose() * dym;
  return dx;
}

template <typename T>
void relu(std::span<T> x) {
  for (auto& v : x) v = v > T(0) ? v : T(0);
}

template <typename T>
void relu_backward(std::span<const T> y, std::span<T> dy) {
  check(y.size() == dy.size(), "relu_backward: size mismatch");
  for (std::size_t i = 0; i < y.size(); ++i)
    if (!(y[i] > T(0))) dy[i] = T(0);
}

template <typename T>
T mse(std::span<const T> pred, std::span<const T> target) {
  check(pred.size() == target.size() && !pred.empty(), "mse: size mismatch");
  T acc = T(0);
  for (std::size_t i = 0; i < pred.size(); ++i) acc += (pred[i] - target[i]) * (pred[i] - target[i]);
  return acc / static_cast<T>(pred.size());
}

template <typename T>
std::vector<T> mse_backward(std::span<const T> pred, std::span<const T> target, T scale) {
  check(pred.size() == target.size() && !pred.empty(), "mse_backward: size mismatch");
  std::vector<T> g(pred.size());
  const T k = T(2) * scale / static_cast<T>(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) g[i] = k * (pred[i] - target[i]);
  return g;
}

#define SCARCENET_INSTANTIATE(T)                                                                   \
  template std::vector<T> conv3x3(std::span<const T>, int, int, int, int, std::span<const T>,      \
                                  std::span<const T>, int);                                        \
  template std::vector<T> conv3x3_backward(std::span<const T>, int, int, int, int,                 \
                                           std::span<const T>, int, std::span<const T>,            \
                                           std::span<T>, std::span<T>, bool);                      \
  template std::vector<T> conv1x1(std::span<const T>, int, int, std::span<const T>,                \
                                  std::span<const T>, int);                                        \
  template std::vector<T> conv1x1_backward(std::span<const T>, int, int, std::span<const T>, int,  \
                                           std::span<const T>, std::span<T>, std::span<T>, bool);  \
  template void relu(std::span<T>);                                                                \
  template void relu_backward(std::span<const T>, std::span<T>);                                   \
  template T mse(std::span<const T>, std::span<const T>);                                          \
  template std::vector<T> mse_backward(std::span<const T>, std::span<const T>, T);

SCARCENET_INSTANTIATE(float)
SCARCENET_INSTANTIATE(double)

#undef SCARCENET_INSTANTIATE

}  // namespace scarcenet::layers
