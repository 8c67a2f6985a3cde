#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "banet/tensor/tensor.hpp"

namespace banet {

struct AdamOptions {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
};

template <typename T>
struct AdamState {
  AdamOptions options;
  std::int64_t step = 0;
  std::vector<std::vector<T>> first_moment;
  std::vector<std::vector<T>> second_moment;

  AdamState() = default;
  // Zero moments shaped like `params`.
  AdamState(std::span<const Tensor<T>> params, AdamOptions opts);
};

// One bias-corrected Adam update using each parameter's gradient slot (a
// missing gradient counts as zero). Throws UsageError if the moment buffers
// do not match the parameters.
template <typename T>
void adam_step(std::span<Tensor<T>> params, AdamState<T>& state);

}  // namespace banet
