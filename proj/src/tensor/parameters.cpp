#include "banet/tensor/parameters.hpp"

#include "banet/errors.hpp"

namespace banet {

template <typename T>
void ParameterStore<T>::check_unique(const std::string& name) const {
  if (name.empty()) throw UsageError("parameter names must be non-empty");
  if (find_parameter(name) || find_buffer(name)) {
    throw UsageError("duplicate parameter name '" + name + "'");
  }
}

template <typename T>
Tensor<T> ParameterStore<T>::add_parameter(const std::string& name, Tensor<T> value) {
  check_unique(name);
  value.set_requires_grad(true);
  parameters_.push_back({name, value});
  return value;
}

template <typename T>
Tensor<T> ParameterStore<T>::add_buffer(const std::string& name, Tensor<T> value) {
  check_unique(name);
  buffers_.push_back({name, value});
  return value;
}

template <typename T>
std::vector<Tensor<T>> ParameterStore<T>::parameter_tensors() const {
  std::vector<Tensor<T>> out;
  out.reserve(parameters_.size());
  for (const auto& p : parameters_) out.push_back(p.tensor);
  return out;
}

template <typename T>
std::optional<Tensor<T>> ParameterStore<T>::find_parameter(const std::string& name) const {
  for (const auto& p : parameters_) {
    if (p.name == name) return p.tensor;
  }
  return std::nullopt;
}

template <typename T>
std::optional<Tensor<T>> ParameterStore<T>::find_buffer(const std::string& name) const {
  for (const auto& b : buffers_) {
    if (b.name == name) return b.tensor;
  }
  return std::nullopt;
}

template <typename T>
std::int64_t ParameterStore<T>::parameter_count() const {
  std::int64_t total = 0;
  for (const auto& p : parameters_) total += p.tensor.numel();
  return total;
}

template <typename T>
void ParameterStore<T>::zero_grad() {
  for (auto& p : parameters_) p.tensor.zero_grad();
}

template class ParameterStore<float>;
template class ParameterStore<double>;

}  // namespace banet
