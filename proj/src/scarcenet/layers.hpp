#pragma once

#include <span>
#include <vector>

// Differentiable primitives of the heatmap network. Tensors are flat,
// channel-major buffers; every backward returns d(loss)/d(input) and
// accumulates parameter gradients into the given spans.

namespace scarcenet::layers {

/// 3x3 convolution, zero padding 1. Output is out_c x ceil(h/stride) x ceil(w/stride).
template <typename T>
std::vector<T> conv3x3(std::span<const T> x, int in_c, int h, int w, int stride,
                       std::span<const T> weight, std::span<const T> bias, int out_c);

template <typename T>
std::vector<T> conv3x3_backward(std::span<const T> x, int in_c, int h, int w, int stride,
                                std::span<const T> weight, int out_c, std::span<const T> dy,
                                std::span<T> d_weight, std::span<T> d_bias, bool need_dx = true);

/// Pointwise (1x1) convolution over `pixels` positions.
template <typename T>
std::vector<T> conv1x1(std::span<const T> x, int in_c, int pixels, std::span<const T> weight,
                       std::span<const T> bias, int out_c);

template <typename T>
std::vector<T> conv1x1_backward(std::span<const T> x, int in_c, int pixels,
                                std::span<const T> weight, int out_c, std::span<const T> dy,
                                std::span<T> d_weight, std::span<T> d_bias, bool need_dx = true);

template <typename T>
void relu(std::span<T> x);

/// Zeroes dy wherever the ReLU output y was not positive.
template <typename T>
void relu_backward(std::span<const T> y, std::span<T> dy);

/// Mean of squared differences.
template <typename T>
T mse(std::span<const T> pred, std::span<const T> target);

template <typename T>
std::vector<T> mse_backward(std::span<const T> pred, std::span<const T> target, T scale = T(1));

}  // namespace scarcenet::layers
