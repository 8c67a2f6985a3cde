#include "banet/model/layers.hpp"

#include <cmath>

namespace banet {

namespace {

// Kaiming normal, fan-in mode with the ReLU gain.
template <typename T>
Tensor<T> kaiming(Shape shape, std::int64_t fan_in, Rng& rng) {
  return normal_tensor<T>(std::move(shape), rng, std::sqrt(2.0 / static_cast<double>(fan_in)));
}

}  // namespace

template <typename T>
Conv2d<T>::Conv2d(ParameterStore<T>& store, const std::string& name, int in_channels,
                  int out_channels, int kernel, ops::Conv2dOptions options, bool bias,
                  Rng& rng)
    : options_(options) {
  const int per_group = in_channels / options.groups;
  weight_ = store.add_parameter(
      name + ".weight",
      kaiming<T>({out_channels, per_group, kernel, kernel},
                 static_cast<std::int64_t>(per_group) * kernel * kernel, rng));
  if (bias) bias_ = store.add_parameter(name + ".bias", Tensor<T>({out_channels}, T(0)));
}

template <typename T>
Tensor<T> Conv2d<T>::operator()(const Tensor<T>& input) const {
  return ops::conv2d(input, weight_, bias_, options_);
}

template <typename T>
BatchNorm2d<T>::BatchNorm2d(ParameterStore<T>& store, const std::string& name, int channels) {
  gamma_ = store.add_parameter(name + ".gamma", Tensor<T>({channels}, T(1)));
  beta_ = store.add_parameter(name + ".beta", Tensor<T>({channels}, T(0)));
  running_mean_ = store.add_buffer(name + ".running_mean", Tensor<T>({channels}, T(0)));
  running_var_ = store.add_buffer(name + ".running_var", Tensor<T>({channels}, T(1)));
}

template <typename T>
Tensor<T> BatchNorm2d<T>::operator()(const Tensor<T>& input, bool training) const {
  // Handles share storage with the registered buffers.
  Tensor<T> mean = running_mean_;
  Tensor<T> var = running_var_;
  return ops::batchnorm2d(input, gamma_, beta_, mean, var, {.training = training});
}

template <typename T>
Dense<T>::Dense(ParameterStore<T>& store, const std::string& name, int in_features,
                int out_features, Rng& rng) {
  weight_ = store.add_parameter(name + ".weight",
                                kaiming<T>({out_features, in_features}, in_features, rng));
  bias_ = store.add_parameter(name + ".bias", Tensor<T>({out_features}, T(0)));
}

template <typename T>
Tensor<T> Dense<T>::operator()(const Tensor<T>& input) const {
  return ops::dense(input, weight_, bias_);
}

template class Conv2d<float>;
template class Conv2d<double>;
template class BatchNorm2d<float>;
template class BatchNorm2d<double>;
template class Dense<float>;
template class Dense<double>;

}  // namespace banet
