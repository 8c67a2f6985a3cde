#include "banet/tensor/tensor.hpp"

#include <numeric>
#include <sstream>
#include <unordered_set>

#include "banet/errors.hpp"

namespace banet {

namespace {
thread_local bool g_grad_enabled = true;
}  // namespace

std::int64_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::int64_t{1},
                         std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ')';
  return os.str();
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

template <typename T>
Tensor<T>::Tensor(Shape shape, T fill) {
  for (auto extent : shape) {
    if (extent <= 0) {
      throw ConfigError("tensor extents must be positive, got " +
                        shape_string(shape));
    }
  }
  impl_ = std::make_shared<detail::TensorImpl<T>>();
  impl_->data.assign(static_cast<std::size_t>(shape_numel(shape)), fill);
  impl_->shape = std::move(shape);
}

template <typename T>
Tensor<T>::Tensor(Shape shape, std::vector<T> data) {
  for (auto extent : shape) {
    if (extent <= 0) {
      throw ConfigError("tensor extents must be positive, got " +
                        shape_string(shape));
    }
  }
  if (static_cast<std::int64_t>(data.size()) != shape_numel(shape)) {
    throw ConfigError("data length " + std::to_string(data.size()) +
                      " does not match shape " + shape_string(shape));
  }
  impl_ = std::make_shared<detail::TensorImpl<T>>();
  impl_->shape = std::move(shape);
  impl_->data = std::move(data);
}

template <typename T>
std::int64_t Tensor<T>::size(int axis) const {
  if (axis < 0) axis += dim();
  if (axis < 0 || axis >= dim()) {
    throw UsageError("axis out of range for shape " + shape_string(shape()));
  }
  return impl_->shape[static_cast<std::size_t>(axis)];
}

template <typename T>
T Tensor<T>::item() const {
  if (numel() != 1) {
    throw UsageError("item() on tensor of shape " + shape_string(shape()));
  }
  return impl_->data[0];
}

template <typename T>
Tensor<T>& Tensor<T>::set_requires_grad(bool value) {
  if (!is_leaf()) {
    throw UsageError("requires_grad can only be changed on leaf tensors");
  }
  impl_->requires_grad = value;
  return *this;
}

template <typename T>
std::span<T> Tensor<T>::mutable_grad() {
  if (impl_->grad.empty()) impl_->grad.assign(impl_->data.size(), T(0));
  return impl_->grad;
}

template <typename T>
const char* Tensor<T>::op_name() const {
  return impl_->grad_fn ? impl_->grad_fn->name : "leaf";
}

template <typename T>
Tensor<T> Tensor<T>::detach() const {
  return Tensor<T>(impl_->shape, impl_->data);
}

template <typename T>
void Tensor<T>::backward() const {
  if (numel() != 1) {
    throw UsageError("backward() needs a scalar loss, got shape " +
                     shape_string(shape()));
  }
  if (!impl_->requires_grad) {
    throw UsageError("backward() on a tensor that does not require grad");
  }

  // Iterative post-order DFS: inputs land before the ops that consume them.
  std::vector<detail::TensorImpl<T>*> order;
  std::unordered_set<const detail::TensorImpl<T>*> visited;
  std::vector<std::pair<detail::TensorImpl<T>*, std::size_t>> stack;
  stack.emplace_back(impl_.get(), 0);
  visited.insert(impl_.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    const auto& fn = node->grad_fn;
    if (fn && next < fn->inputs.size()) {
      auto* child = fn->inputs[next++].impl_.get();
      if (child->requires_grad && visited.insert(child).second) {
        stack.emplace_back(child, 0);
      }
      continue;
    }
    order.push_back(node);
    stack.pop_back();
  }

  if (impl_->grad.empty()) impl_->grad.assign(1, T(0));
  impl_->grad[0] += T(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    auto* node = *it;
    if (node->grad_fn && !node->grad.empty()) node->grad_fn->apply(*node);
  }
}

namespace autograd {

template <typename T>
void accumulate(const Tensor<T>& t, std::span<const T> g) {
  auto* impl = const_cast<detail::TensorImpl<T>*>(t.impl());
  if (!impl->requires_grad) return;
  if (impl->grad.empty()) {
    impl->grad.assign(g.begin(), g.end());
    return;
  }
  for (std::size_t i = 0; i < g.size(); ++i) impl->grad[i] += g[i];
}

template <typename T>
std::span<T> grad_slot(const Tensor<T>& t) {
  auto* impl = const_cast<detail::TensorImpl<T>*>(t.impl());
  if (!impl->requires_grad) return {};
  if (impl->grad.empty()) impl->grad.assign(impl->data.size(), T(0));
  return impl->grad;
}

template <typename T>
Tensor<T> make_result_with_output(
    Shape shape, std::vector<T> data, std::vector<Tensor<T>> inputs,
    const char* name,
    std::function<void(std::span<const T> out, std::span<const T> grad_out)>
        backward) {
  Tensor<T> out(std::move(shape), std::move(data));
  bool needs_grad = false;
  if (grad_enabled()) {
    for (const auto& in : inputs) needs_grad = needs_grad || in.requires_grad();
  }
  if (!needs_grad) return out;
  auto node = std::make_shared<detail::GradNode<T>>();
  node->name = name;
  node->inputs = std::move(inputs);
  node->apply = [fn = std::move(backward)](const detail::TensorImpl<T>& o) {
    fn(std::span<const T>(o.data), std::span<const T>(o.grad));
  };
  out.impl()->requires_grad = true;
  out.impl()->grad_fn = std::move(node);
  return out;
}

template <typename T>
Tensor<T> make_result(Shape shape, std::vector<T> data,
                      std::vector<Tensor<T>> inputs, const char* name,
                      std::function<void(std::span<const T> grad_out)> backward) {
  return make_result_with_output<T>(
      std::move(shape), std::move(data), std::move(inputs), name,
      [fn = std::move(backward)](std::span<const T>, std::span<const T> g) {
        fn(g);
      });
}

#define BANET_INSTANTIATE(T)                                                  \
  template void accumulate<T>(const Tensor<T>&, std::span<const T>);          \
  template std::span<T> grad_slot<T>(const Tensor<T>&);                       \
  template Tensor<T> make_result<T>(                                          \
      Shape, std::vector<T>, std::vector<Tensor<T>>, const char*,             \
      std::function<void(std::span<const T>)>);                               \
  template Tensor<T> make_result_with_output<T>(                              \
      Shape, std::vector<T>, std::vector<Tensor<T>>, const char*,             \
      std::function<void(std::span<const T>, std::span<const T>)>);
BANET_INSTANTIATE(float)
BANET_INSTANTIATE(double)
#undef BANET_INSTANTIATE

}  // namespace autograd

template class Tensor<float>;
template class Tensor<double>;

}  // namespace banet
