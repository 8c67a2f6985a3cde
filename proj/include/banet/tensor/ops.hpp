#pragma once

#include <cstdint>
#include <span>

#include "banet/tensor/tensor.hpp"

// Differentiable operators on NCHW tensors. Every op records a gradient rule
// when grad mode is on and at least one input requires grad.
namespace banet::ops {

struct Conv2dOptions {
  int stride = 1;
  int padding = 0;  // zero padding, same on all sides
  int groups = 1;
};

// input (B, C, H, W), weight (O, C/groups, K, K), bias (O) or undefined.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weight,
                 const Tensor<T>& bias, Conv2dOptions options = {});

// Depth-to-space: channel c*r*r + dy*r + dx at (y, x) moves to channel c at
// (r*y + dy, r*x + dx).
template <typename T>
Tensor<T> pixel_shuffle(const Tensor<T>& input, int block);

// Space-to-depth, the exact inverse of pixel_shuffle.
template <typename T>
Tensor<T> pixel_unshuffle(const Tensor<T>& input, int block);

// Softmax over axis 1 at every (b, h, w), max-subtracted.
template <typename T>
Tensor<T> softmax_channels(const Tensor<T>& input);

// Bilinear interpolation with aligned corners.
template <typename T>
Tensor<T> bilinear_resize(const Tensor<T>& input, int out_h, int out_w);

struct Pool2dOptions {
  int kernel_h = 2;
  int kernel_w = 2;
  int stride_h = 2;
  int stride_w = 2;
  int padding = 0;  // zeros count toward the mean
};

template <typename T>
Tensor<T> avg_pool2d(const Tensor<T>& input, Pool2dOptions options);

template <typename T>
Tensor<T> relu(const Tensor<T>& input);

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& input);

struct BatchNormOptions {
  bool training = true;
  double momentum = 0.1;
  double eps = 1e-5;
};

// Per-channel normalisation over (B, H, W). In training mode the batch
// moments are used (and differentiated through) and the running buffers are
// updated in place; in eval mode the running buffers are used. gamma/beta may
// be undefined for a non-affine normalisation.
template <typename T>
Tensor<T> batchnorm2d(const Tensor<T>& input, const Tensor<T>& gamma,
                      const Tensor<T>& beta, Tensor<T>& running_mean,
                      Tensor<T>& running_var, BatchNormOptions options);

// Affine map over axis 1 applied independently at every trailing position:
// input (B, I, ...), weight (O, I), bias (O) or undefined -> (B, O, ...).
template <typename T>
Tensor<T> dense(const Tensor<T>& input, const Tensor<T>& weight,
                const Tensor<T>& bias);

template <typename T>
Tensor<T> concat_channels(std::span<const Tensor<T>> inputs);

template <typename T>
Tensor<T> hadamard(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> scale(const Tensor<T>& input, T factor);

// (B, C, ...) -> (B, 1, ...)
template <typename T>
Tensor<T> sum_channels(const Tensor<T>& input);

// Full reduction to a scalar (shape {}).
template <typename T>
Tensor<T> sum(const Tensor<T>& input);

template <typename T>
Tensor<T> mean(const Tensor<T>& input);

// Spatial window [top, top + height) x [left, left + width) of a 4-D tensor.
template <typename T>
Tensor<T> crop2d(const Tensor<T>& input, int top, int left, int height,
                 int width);

}  // namespace banet::ops
