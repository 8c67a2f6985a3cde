#pragma once

#include <string>

#include "banet/tensor/ops.hpp"
#include "banet/tensor/parameters.hpp"
#include "banet/tensor/random.hpp"

namespace banet {

// Parameterised building blocks. Each registers its tensors in a
// ParameterStore under `name` and keeps shared handles to them.

template <typename T>
class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(ParameterStore<T>& store, const std::string& name, int in_channels,
         int out_channels, int kernel, ops::Conv2dOptions options, bool bias,
         Rng& rng);

  Tensor<T> operator()(const Tensor<T>& input) const;

  const Tensor<T>& weight() const { return weight_; }
  const Tensor<T>& bias() const { return bias_; }
  int in_channels() const { return static_cast<int>(weight_.size(1)) * options_.groups; }

 private:
  Tensor<T> weight_;
  Tensor<T> bias_;
  ops::Conv2dOptions options_;
};

template <typename T>
class BatchNorm2d {
 public:
  BatchNorm2d() = default;
  BatchNorm2d(ParameterStore<T>& store, const std::string& name, int channels);

  Tensor<T> operator()(const Tensor<T>& input, bool training) const;

 private:
  Tensor<T> gamma_;
  Tensor<T> beta_;
  Tensor<T> running_mean_;
  Tensor<T> running_var_;
};

// Fully connected layer over axis 1, applied at every spatial cell.
template <typename T>
class Dense {
 public:
  Dense() = default;
  Dense(ParameterStore<T>& store, const std::string& name, int in_features,
        int out_features, Rng& rng);

  Tensor<T> operator()(const Tensor<T>& input) const;

  const Tensor<T>& weight() const { return weight_; }
  const Tensor<T>& bias() const { return bias_; }

 private:
  Tensor<T> weight_;
  Tensor<T> bias_;
};

extern template class Conv2d<float>;
extern template class Conv2d<double>;
extern template class BatchNorm2d<float>;
extern template class BatchNorm2d<double>;
extern template class Dense<float>;
extern template class Dense<double>;

}  // namespace banet
