#pragma once

#include <cstdint>
#include <span>

#include "banet/tensor/tensor.hpp"

namespace banet {

// A pixel contributes to losses and metrics when its mask byte is nonzero
// and its ground truth lies in (0, d_max].
inline bool is_valid_depth(std::uint8_t mask, double gt, double d_max) {
  return mask != 0 && gt > 0.0 && gt <= d_max;
}

struct SilogOptions {
  double lambda = 0.85;
  double alpha = 10.0;
  double pred_floor = 1e-3;  // meters; clamped pixels get no gradient
  double d_max = 80.0;
};

// alpha * sqrt(mean(d^2) - lambda * mean(d)^2), d = ln(pred) - ln(gt) over
// valid pixels. Differentiable in `pred`; the gradient is zero where the
// radicand is not positive. `mask` has one byte per element of `gt`.
// Throws EmptyMaskError when nothing is valid.
template <typename T>
Tensor<T> silog_loss(const Tensor<T>& pred, const Tensor<T>& gt,
                     std::span<const std::uint8_t> mask, const SilogOptions& options = {});

// Mean |pred - gt| over valid pixels.
template <typename T>
Tensor<T> l1_loss(const Tensor<T>& pred, const Tensor<T>& gt,
                  std::span<const std::uint8_t> mask, double d_max = 80.0);

// Linear map of a normalized prediction in (0, 1) to meters.
template <typename T>
Tensor<T> denormalize(const Tensor<T>& normalized, double d_max);

}  // namespace banet
