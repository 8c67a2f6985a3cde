#pragma once

#include "banet/tensor/tensor.hpp"

namespace banet {

// Geometry of the half-sampled, zero-padded model input.
struct PadRecord {
  int content_height = 0;  // half-sampled extent before padding
  int content_width = 0;
  int pad_bottom = 0;
  int pad_right = 0;
};

// Half-sampled extent rounds up; padding reaches the next multiple of 32.
PadRecord plan_input(int height, int width);

template <typename T>
struct PreparedInput {
  Tensor<T> image;
  PadRecord pad;
};

// (B, C, H, W) -> bilinear half-sample, zero pad at the bottom and right.
// Not differentiable; the result is a fresh leaf.
template <typename T>
PreparedInput<T> preprocess(const Tensor<T>& images);

// Crops the padding and bilinearly resizes to (gt_height, gt_width).
// Differentiable.
template <typename T>
Tensor<T> postprocess(const Tensor<T>& prediction, const PadRecord& pad, int gt_height,
                      int gt_width);

}  // namespace banet
