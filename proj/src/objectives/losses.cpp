#include "banet/objectives/losses.hpp"

#include <cmath>
#include <string>

#include "banet/errors.hpp"
#include "banet/tensor/ops.hpp"

namespace banet {

namespace {

template <typename T>
void check_pair(const Tensor<T>& pred, const Tensor<T>& gt, std::span<const std::uint8_t> mask,
                const char* what) {
  if (pred.shape() != gt.shape()) {
    throw ConfigError(std::string(what) + ": prediction " + shape_string(pred.shape()) +
                      " vs ground truth " + shape_string(gt.shape()));
  }
  if (mask.size() != static_cast<std::size_t>(gt.numel())) {
    throw ConfigError(std::string(what) + ": mask has " + std::to_string(mask.size()) +
                      " entries for " + std::to_string(gt.numel()) + " pixels");
  }
}

}  // namespace

template <typename T>
Tensor<T> silog_loss(const Tensor<T>& pred, const Tensor<T>& gt,
                     std::span<const std::uint8_t> mask, const SilogOptions& opt) {
  check_pair(pred, gt, mask, "silog_loss");
  const auto p = pred.data();
  const auto g = gt.data();
  std::vector<std::size_t> valid;
  std::vector<double> d;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!is_valid_depth(mask[i], g[i], opt.d_max)) continue;
    valid.push_back(i);
    d.push_back(std::log(std::max<double>(p[i], opt.pred_floor)) - std::log(double(g[i])));
  }
  if (valid.empty()) throw EmptyMaskError();
  const double n = static_cast<double>(valid.size());
  double m1 = 0.0, m2 = 0.0;
  for (double v : d) {
    m1 += v;
    m2 += v * v;
  }
  m1 /= n;
  m2 /= n;
  const double inner = m2 - opt.lambda * m1 * m1;
  const double loss = inner <= 0.0 ? 0.0 : opt.alpha * std::sqrt(inner);  // NaN propagates

  return autograd::make_result<T>(
      {}, {static_cast<T>(loss)}, {pred}, "silog_loss",
      [pred, valid = std::move(valid), d = std::move(d), inner, m1, n, opt](std::span<const T> go) {
        if (!(inner > 0.0)) return;
        auto dp = autograd::grad_slot(pred);
        const auto p = pred.data();
        const double coef = double(go[0]) * opt.alpha / (2.0 * std::sqrt(inner));
        for (std::size_t k = 0; k < valid.size(); ++k) {
          const auto i = valid[k];
          if (double(p[i]) < opt.pred_floor) continue;
          const double dd = coef * (2.0 * d[k] - 2.0 * opt.lambda * m1) / n;
          dp[i] += static_cast<T>(dd / double(p[i]));
        }
      });
}

template <typename T>
Tensor<T> l1_loss(const Tensor<T>& pred, const Tensor<T>& gt,
                  std::span<const std::uint8_t> mask, double d_max) {
  check_pair(pred, gt, mask, "l1_loss");
  const auto p = pred.data();
  const auto g = gt.data();
  std::vector<std::size_t> valid;
  double total = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!is_valid_depth(mask[i], g[i], d_max)) continue;
    valid.push_back(i);
    total += std::abs(double(p[i]) - double(g[i]));
  }
  if (valid.empty()) throw EmptyMaskError();
  const double n = static_cast<double>(valid.size());
  return autograd::make_result<T>(
      {}, {static_cast<T>(total / n)}, {pred}, "l1_loss",
      [pred, gt, valid = std::move(valid), n](std::span<const T> go) {
        auto dp = autograd::grad_slot(pred);
        const auto p = pred.data();
        const auto g = gt.data();
        const T step = static_cast<T>(double(go[0]) / n);
        for (auto i : valid) {
          if (p[i] > g[i]) dp[i] += step;
          else if (p[i] < g[i]) dp[i] -= step;
        }
      });
}

template <typename T>
Tensor<T> denormalize(const Tensor<T>& normalized, double d_max) {
  if (!(d_max > 0.0)) throw ConfigError("denormalize: d_max must be positive");
  return ops::scale(normalized, static_cast<T>(d_max));
}

#define BANET_INSTANTIATE_LOSSES(T)                                                       \
  template Tensor<T> silog_loss<T>(const Tensor<T>&, const Tensor<T>&,                   \
                                   std::span<const std::uint8_t>, const SilogOptions&);  \
  template Tensor<T> l1_loss<T>(const Tensor<T>&, const Tensor<T>&,                      \
                                std::span<const std::uint8_t>, double);                  \
  template Tensor<T> denormalize<T>(const Tensor<T>&, double);
BANET_INSTANTIATE_LOSSES(float)
BANET_INSTANTIATE_LOSSES(double)
#undef BANET_INSTANTIATE_LOSSES

}  // namespace banet
