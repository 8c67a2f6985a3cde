#include "banet/model/modules.hpp"

#include <algorithm>

#include "banet/errors.hpp"

namespace banet {

template <typename T>
Backbone<T>::Backbone(ParameterStore<T>& store, const std::string& prefix,
                      const BackboneConfig& config, Rng& rng)
    : config_(config) {
  config.validate();
  int in = config.input_channels;
  for (int s = 0; s < kNumStages; ++s) {
    const int out = config.stage_channels[s];
    for (int b = 0; b < config.blocks_per_stage; ++b) {
      const std::string name =
          prefix + ".stage" + std::to_string(s + 1) + ".block" + std::to_string(b);
      const bool entry = b == 0;
      Block block{
          Conv2d<T>(store, name + ".conv", entry ? in : out, out, entry ? 4 : 3,
                    {.stride = entry ? 2 : 1, .padding = 1}, false, rng),
          BatchNorm2d<T>(store, name + ".bn", out)};
      stages_[s].push_back(std::move(block));
    }
    in = out;
  }
}

template <typename T>
StageFeatureSet<T> Backbone<T>::operator()(const Tensor<T>& image, bool training) const {
  if (image.dim() != 4 || image.size(1) != config_.input_channels) {
    throw ConfigError("backbone expects (B, " + std::to_string(config_.input_channels) +
                      ", H, W), got " + shape_string(image.shape()));
  }
  const auto h = image.size(2), w = image.size(3);
  if (h % 32 != 0 || w % 32 != 0) {
    throw UsageError("input " + std::to_string(h) + "x" + std::to_string(w) +
                     " is not divisible by 32; pad the image to " +
                     std::to_string((h + 31) / 32 * 32) + "x" +
                     std::to_string((w + 31) / 32 * 32) + " first");
  }
  StageFeatureSet<T> out;
  out.height = static_cast<int>(h);
  out.width = static_cast<int>(w);
  Tensor<T> x = image;
  for (int s = 0; s < kNumStages; ++s) {
    for (const auto& block : stages_[s]) x = ops::relu(block.bn(block.conv(x), training));
    out.features[s] = x;
  }
  return out;
}

template <typename T>
GlobalContext<T>::GlobalContext(ParameterStore<T>& store, const std::string& prefix,
                                int channels, const GlobalContextConfig& config, Rng& rng)
    : config_(config),
      fc1_(store, prefix + ".fc1", channels, config.hidden, rng),
      fc2_(store, prefix + ".fc2", config.hidden, channels, rng) {
  config.validate();
}

template <typename T>
Tensor<T> GlobalContext<T>::operator()(const Tensor<T>& input) const {
  const int h = static_cast<int>(input.size(2)), w = static_cast<int>(input.size(3));
  const int kh = std::min(config_.pool_kernel, h), kw = std::min(config_.pool_kernel, w);
  auto pooled = ops::avg_pool2d(input, {.kernel_h = kh,
                                        .kernel_w = kw,
                                        .stride_h = config_.pool_stride,
                                        .stride_w = config_.pool_stride});
  auto context = fc2_(ops::relu(fc1_(pooled)));
  return ops::add(input, ops::bilinear_resize(context, h, w));
}

template <typename T>
D2S<T>::D2S(ParameterStore<T>& store, const std::string& prefix, int in_channels,
            int stride, ContextKind context, const GlobalContextConfig& gc,
            bool attention_branch, Rng& rng)
    : in_channels_(in_channels), stride_(stride) {
  if (stride < 1 || in_channels < 1) {
    throw ConfigError("D2S " + prefix + ": stride and channel count must be positive");
  }
  const int cells = stride * stride;
  conv_ = Conv2d<T>(store, prefix + ".conv", in_channels, cells, 1, {}, true, rng);
  if (context == ContextKind::Global) {
    global_.emplace(store, prefix + ".context", cells, gc, rng);
  } else if (context == ContextKind::Local) {
    local_.emplace(store, prefix + ".local", cells, cells, 9,
                   ops::Conv2dOptions{.stride = 1, .padding = 4, .groups = cells}, true, rng);
  }
  if (attention_branch) bn_.emplace(store, prefix + ".bn", 1);
}

template <typename T>
Tensor<T> D2S<T>::operator()(const Tensor<T>& stage_features, bool training) const {
  if (stage_features.dim() != 4 || stage_features.size(1) != in_channels_) {
    throw ConfigError("D2S expects " + std::to_string(in_channels_) + " input channels, got " +
                      shape_string(stage_features.shape()));
  }
  auto x = conv_(stage_features);
  if (global_) x = (*global_)(x);
  if (local_) x = ops::add(x, (*local_)(x));
  x = ops::pixel_shuffle(x, stride_);
  if (bn_) x = ops::relu((*bn_)(x, training));
  return x;
}

template <typename T>
DepthOutput<T> predict_depth(const Tensor<T>& attention, const Tensor<T>& features) {
  if (attention.shape() != features.shape()) {
    throw ConfigError("predict_depth: attention " + shape_string(attention.shape()) +
                      " vs features " + shape_string(features.shape()));
  }
  DepthOutput<T> out;
  out.unnormalized = ops::sum_channels(ops::hadamard(attention, features));
  out.depth = ops::sigmoid(out.unnormalized);
  return out;
}

template class Backbone<float>;
template class Backbone<double>;
template class GlobalContext<float>;
template class GlobalContext<double>;
template class D2S<float>;
template class D2S<double>;
template DepthOutput<float> predict_depth(const Tensor<float>&, const Tensor<float>&);
template DepthOutput<double> predict_depth(const Tensor<double>&, const Tensor<double>&);

}  // namespace banet
