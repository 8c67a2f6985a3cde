#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace banet {

using Shape = std::vector<std::int64_t>;

std::int64_t shape_numel(const Shape& shape);
std::string shape_string(const Shape& shape);

template <typename T>
class Tensor;

namespace detail {

template <typename T>
struct TensorImpl;

// One recorded operation. `apply` receives the op's output (data + grad) and
// accumulates into the grads of `inputs`.
template <typename T>
struct GradNode {
  const char* name = "";
  std::vector<Tensor<T>> inputs;
  std::function<void(const TensorImpl<T>& out)> apply;
};

template <typename T>
struct TensorImpl {
  Shape shape;
  std::vector<T> data;
  std::vector<T> grad;  // empty means "no gradient yet"
  bool requires_grad = false;
  std::shared_ptr<GradNode<T>> grad_fn;
};

}  // namespace detail

// Global switch for graph recording. Ops run with recording disabled produce
// plain values even when their inputs require grad.
bool grad_enabled();

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

// Dense row-major array with an optional gradient slot. Copies are shallow:
// two Tensor objects may refer to the same storage, which is how parameters
// are shared between a layer and the parameter registry.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T(0));
  Tensor(Shape shape, std::vector<T> data);

  bool defined() const { return impl_ != nullptr; }

  const Shape& shape() const { return impl_->shape; }
  int dim() const { return static_cast<int>(impl_->shape.size()); }
  std::int64_t size(int axis) const;
  std::int64_t numel() const { return static_cast<std::int64_t>(impl_->data.size()); }

  std::span<const T> data() const { return impl_->data; }
  // Mutation is for leaves (parameters, buffers, inputs under gradcheck).
  std::span<T> mutable_data() { return impl_->data; }
  T item() const;

  bool requires_grad() const { return impl_->requires_grad; }
  Tensor& set_requires_grad(bool value);

  bool has_grad() const { return !impl_->grad.empty(); }
  // Empty span when no gradient reached this tensor.
  std::span<const T> grad() const { return impl_->grad; }
  std::span<T> mutable_grad();
  void zero_grad() { impl_->grad.clear(); }

  bool is_leaf() const { return impl_->grad_fn == nullptr; }
  const char* op_name() const;

  // Same values, new storage, no history.
  Tensor detach() const;
  Tensor clone() const { return detach(); }

  // Reverse-mode sweep from a scalar. Gradients accumulate into every
  // requires_grad tensor reachable through the recorded graph.
  void backward() const;

  const detail::TensorImpl<T>* impl() const { return impl_.get(); }
  detail::TensorImpl<T>* impl() { return impl_.get(); }

 private:
  std::shared_ptr<detail::TensorImpl<T>> impl_;
};

namespace autograd {

// Adds `g` into `t`'s gradient slot, allocating it on first use. No-op when
// `t` does not require grad.
template <typename T>
void accumulate(const Tensor<T>& t, std::span<const T> g);

// Same, but lets the caller write directly into the (zero-initialised)
// slot. Returns an empty span when `t` does not require grad.
template <typename T>
std::span<T> grad_slot(const Tensor<T>& t);

// Builds the output of a custom op. When recording is on and any input
// requires grad, the result carries a node that calls `backward` with the
// output's gradient during the reverse sweep.
template <typename T>
Tensor<T> make_result(Shape shape, std::vector<T> data,
                      std::vector<Tensor<T>> inputs, const char* name,
                      std::function<void(std::span<const T> grad_out)> backward);

// Variant whose backward also needs the forward output values.
template <typename T>
Tensor<T> make_result_with_output(
    Shape shape, std::vector<T> data, std::vector<Tensor<T>> inputs,
    const char* name,
    std::function<void(std::span<const T> out, std::span<const T> grad_out)>
        backward);

}  // namespace autograd

extern template class Tensor<float>;
extern template class Tensor<double>;

}  // namespace banet
