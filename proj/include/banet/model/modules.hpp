#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "banet/model/config.hpp"
#include "banet/model/layers.hpp"

namespace banet {

// Backbone outputs s_1..s_5 at strides 2..32 of an (height, width) image.
template <typename T>
struct StageFeatureSet {
  std::array<Tensor<T>, kNumStages> features;
  int height = 0;
  int width = 0;
};

// Five conv/BN/ReLU stages. The first block of each stage is a 4x4 stride-2
// conv (pad 1, which halves even extents exactly); the rest are 3x3 pad 1.
template <typename T>
class Backbone {
 public:
  Backbone() = default;
  Backbone(ParameterStore<T>& store, const std::string& prefix,
           const BackboneConfig& config, Rng& rng);

  // Throws UsageError unless H and W are multiples of 32.
  StageFeatureSet<T> operator()(const Tensor<T>& image, bool training) const;

 private:
  struct Block {
    Conv2d<T> conv;
    BatchNorm2d<T> bn;
  };
  BackboneConfig config_;
  std::array<std::vector<Block>, kNumStages> stages_;
};

// Pooled scene summary added back onto the r^2-channel pre-shuffle map:
// x + resize(fc2(relu(fc1(avg_pool(x))))). The pool kernel clamps to the
// input extent.
template <typename T>
class GlobalContext {
 public:
  GlobalContext() = default;
  GlobalContext(ParameterStore<T>& store, const std::string& prefix, int channels,
                const GlobalContextConfig& config, Rng& rng);

  Tensor<T> operator()(const Tensor<T>& input) const;

  const Dense<T>& fc1() const { return fc1_; }
  const Dense<T>& fc2() const { return fc2_; }

 private:
  GlobalContextConfig config_;
  Dense<T> fc1_;
  Dense<T> fc2_;
};

enum class ContextKind { None, Global, Local };

// Depth-to-space head for one stage: 1x1 conv to r^2 channels, optional
// context refinement, pixel shuffle to one full-resolution channel, then
// BN+ReLU on attention branches only.
template <typename T>
class D2S {
 public:
  D2S() = default;
  D2S(ParameterStore<T>& store, const std::string& prefix, int in_channels, int stride,
      ContextKind context, const GlobalContextConfig& gc, bool attention_branch, Rng& rng);

  Tensor<T> operator()(const Tensor<T>& stage_features, bool training) const;

  int stride() const { return stride_; }
  const Conv2d<T>& projection() const { return conv_; }
  const std::optional<GlobalContext<T>>& global_context() const { return global_; }

 private:
  int in_channels_ = 0;
  int stride_ = 1;
  Conv2d<T> conv_;
  std::optional<GlobalContext<T>> global_;
  std::optional<Conv2d<T>> local_;  // depthwise 9x9, residual
  std::optional<BatchNorm2d<T>> bn_;
};

// Convex blend of stage maps: D_u = sum_j A_j * F_j, D = sigmoid(D_u).
// `attention` and `features` are both (B, 5, H, W).
template <typename T>
struct DepthOutput {
  Tensor<T> unnormalized;
  Tensor<T> depth;
};

template <typename T>
DepthOutput<T> predict_depth(const Tensor<T>& attention, const Tensor<T>& features);

extern template class Backbone<float>;
extern template class Backbone<double>;
extern template class GlobalContext<float>;
extern template class GlobalContext<double>;
extern template class D2S<float>;
extern template class D2S<double>;

}  // namespace banet
