#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "banet/tensor/tensor.hpp"

namespace banet {

template <typename T>
struct NamedTensor {
  std::string name;
  Tensor<T> tensor;
};

// Registry of a model's trainable parameters and non-trainable buffers
// (batchnorm running statistics), keyed by unique dotted paths such as
// "backbone.stage3.block0.conv.weight". Registration order is preserved and
// is the serialization order.
template <typename T>
class ParameterStore {
 public:
  Tensor<T> add_parameter(const std::string& name, Tensor<T> value);
  Tensor<T> add_buffer(const std::string& name, Tensor<T> value);

  const std::vector<NamedTensor<T>>& parameters() const { return parameters_; }
  const std::vector<NamedTensor<T>>& buffers() const { return buffers_; }
  std::vector<Tensor<T>> parameter_tensors() const;

  std::optional<Tensor<T>> find_parameter(const std::string& name) const;
  std::optional<Tensor<T>> find_buffer(const std::string& name) const;

  std::int64_t parameter_count() const;
  void zero_grad();

 private:
  void check_unique(const std::string& name) const;

  std::vector<NamedTensor<T>> parameters_;
  std::vector<NamedTensor<T>> buffers_;
};

extern template class ParameterStore<float>;
extern template class ParameterStore<double>;

}  // namespace banet
