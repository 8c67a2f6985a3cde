#pragma once

#include <cstdint>
#include <random>

#include "banet/tensor/tensor.hpp"

namespace banet {

using Rng = std::mt19937_64;

template <typename T>
Tensor<T> uniform_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<T> data(static_cast<std::size_t>(shape_numel(shape)));
  for (auto& v : data) v = static_cast<T>(dist(rng));
  return Tensor<T>(std::move(shape), std::move(data));
}

template <typename T>
Tensor<T> normal_tensor(Shape shape, Rng& rng, double stddev = 1.0) {
  std::normal_distribution<double> dist(0.0, stddev);
  std::vector<T> data(static_cast<std::size_t>(shape_numel(shape)));
  for (auto& v : data) v = static_cast<T>(dist(rng));
  return Tensor<T>(std::move(shape), std::move(data));
}

}  // namespace banet
