#include "banet/tensor/optim.hpp"

#include <cmath>
#include <string>

#include "banet/errors.hpp"

namespace banet {

template <typename T>
AdamState<T>::AdamState(std::span<const Tensor<T>> params, AdamOptions opts)
    : options(opts) {
  for (const auto& p : params) {
    first_moment.emplace_back(static_cast<std::size_t>(p.numel()), T(0));
    second_moment.emplace_back(static_cast<std::size_t>(p.numel()), T(0));
  }
}

template <typename T>
void adam_step(std::span<Tensor<T>> params, AdamState<T>& state) {
  if (state.first_moment.size() != params.size() ||
      state.second_moment.size() != params.size()) {
    throw UsageError("adam_step: state tracks " +
                     std::to_string(state.first_moment.size()) +
                     " parameters, got " + std::to_string(params.size()));
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    const auto n = static_cast<std::size_t>(params[k].numel());
    if (state.first_moment[k].size() != n || state.second_moment[k].size() != n) {
      throw UsageError("adam_step: moment size mismatch for parameter " +
                       std::to_string(k) + " of shape " +
                       shape_string(params[k].shape()));
    }
  }

  const auto& o = state.options;
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(o.beta1, t);
  const double correction2 = 1.0 - std::pow(o.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& p = params[k];
    const auto grad = p.grad();
    auto values = p.mutable_data();
    auto& m = state.first_moment[k];
    auto& v = state.second_moment[k];
    for (std::size_t i = 0; i < values.size(); ++i) {
      double g = grad.empty() ? 0.0 : static_cast<double>(grad[i]);
      if (o.weight_decay != 0.0) g += o.weight_decay * static_cast<double>(values[i]);
      const double mi = o.beta1 * static_cast<double>(m[i]) + (1.0 - o.beta1) * g;
      const double vi = o.beta2 * static_cast<double>(v[i]) + (1.0 - o.beta2) * g * g;
      m[i] = static_cast<T>(mi);
      v[i] = static_cast<T>(vi);
      const double m_hat = mi / correction1;
      const double v_hat = vi / correction2;
      values[i] = static_cast<T>(static_cast<double>(values[i]) -
                                 o.lr * m_hat / (std::sqrt(v_hat) + o.eps));
    }
  }
}

template struct AdamState<float>;
template struct AdamState<double>;
template void adam_step<float>(std::span<Tensor<float>>, AdamState<float>&);
template void adam_step<double>(std::span<Tensor<double>>, AdamState<double>&);

}  // namespace banet
