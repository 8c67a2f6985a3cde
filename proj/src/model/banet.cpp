#include "banet/model/banet.hpp"

#include "banet/errors.hpp"

namespace banet {

namespace {

std::string stage_name(const char* family, int stage) {
  return std::string(family) + ".stage" + std::to_string(stage + 1);
}

}  // namespace

template <typename T>
BANet<T>::BANet(const ModelConfig& config, std::uint64_t seed) : config_(config) {
  config.backbone.validate();
  config.global_context.validate();
  Rng rng(seed);
  backbone_ = Backbone<T>(store_, "backbone", config.backbone, rng);
  const auto& channels = config.backbone.stage_channels;
  const auto& gc = config.global_context;

  if (config.variant == Variant::Vanilla) {
    const int r = kStageStrides.back();
    vanilla_head_ = Conv2d<T>(store_, "head.conv", channels.back(), r * r, 1, {}, true, rng);
    return;
  }

  const ContextKind context =
      config.variant == Variant::Local ? ContextKind::Local : ContextKind::Global;
  for (int s = 0; s < kNumStages; ++s) {
    if (has_forward_attention()) {
      forward_d2s_[s] = D2S<T>(store_, stage_name("d2s_forward", s), channels[s],
                               kStageStrides[s], context, gc, true, rng);
    }
    if (has_backward_attention()) {
      backward_d2s_[s] = D2S<T>(store_, stage_name("d2s_backward", s), channels[s],
                                kStageStrides[s], context, gc, true, rng);
    }
    feature_d2s_[s] = D2S<T>(store_, stage_name("d2s_feature", s), channels[s],
                             kStageStrides[s], context, gc, false, rng);
  }
  // Markov keeps the Full-width attention convs; only the adjacent stage's
  // slot is fed, the others see zeros.
  const ops::Conv2dOptions attn{.stride = 1, .padding = 4};
  for (int s = 0; s < kNumStages; ++s) {
    if (has_forward_attention()) {
      forward_attention_[s] =
          Conv2d<T>(store_, stage_name("attention_forward", s), s + 1, 1, 9, attn, true, rng);
    }
    if (has_backward_attention()) {
      backward_attention_[s] = Conv2d<T>(store_, stage_name("attention_backward", s),
                                         kNumStages - s, 1, 9, attn, true, rng);
    }
  }
  const int fusion_in =
      (has_forward_attention() ? kNumStages : 0) + (has_backward_attention() ? kNumStages : 0);
  fusion_ = Conv2d<T>(store_, "fusion.conv", fusion_in, kNumStages, 3, {.padding = 1}, true, rng);
}

template <typename T>
bool BANet<T>::has_forward_attention() const {
  return config_.variant != Variant::Vanilla && config_.variant != Variant::Backward;
}

template <typename T>
bool BANet<T>::has_backward_attention() const {
  return config_.variant != Variant::Vanilla && config_.variant != Variant::Forward;
}

template <typename T>
StageFeatureSet<T> BANet<T>::stage_features(const Tensor<T>& image) const {
  return backbone_(image, training_);
}

template <typename T>
Tensor<T> BANet<T>::attention_map(const Conv2d<T>& conv,
                                  const std::array<Tensor<T>, kNumStages>& maps, int first,
                                  int count, int source) const {
  std::vector<Tensor<T>> inputs;
  inputs.reserve(static_cast<std::size_t>(count));
  for (int j = first; j < first + count; ++j) {
    if (source < 0 || j == source) {
      if (!maps[j].defined()) {
        throw UsageError("attention input for stage " + std::to_string(j + 1) + " is missing");
      }
      inputs.push_back(maps[j]);
    } else {
      inputs.emplace_back(maps[source].shape(), T(0));
    }
  }
  return conv(ops::concat_channels<T>(inputs));
}

template <typename T>
AttentionStack<T> BANet<T>::attend(const std::array<Tensor<T>, kNumStages>& forward_maps,
                                   const std::array<Tensor<T>, kNumStages>& backward_maps) const {
  if (config_.variant == Variant::Vanilla) {
    throw UnsupportedVariantError("the Vanilla variant has no attention path");
  }
  const bool markov = config_.variant == Variant::Markov;
  AttentionStack<T> stack;
  std::vector<Tensor<T>> fused;
  if (has_forward_attention()) {
    for (int i = 0; i < kNumStages; ++i) {
      const int source = markov ? (i == 0 ? 0 : i - 1) : -1;
      stack.forward[i] = attention_map(forward_attention_[i], forward_maps, 0, i + 1, source);
      fused.push_back(stack.forward[i]);
    }
  }
  if (has_backward_attention()) {
    for (int i = 0; i < kNumStages; ++i) {
      const int source = markov ? (i == kNumStages - 1 ? i : i + 1) : -1;
      stack.backward[i] =
          attention_map(backward_attention_[i], backward_maps, i, kNumStages - i, source);
      fused.push_back(stack.backward[i]);
    }
  }
  stack.logits = fusion_(ops::concat_channels<T>(fused));
  stack.weights = ops::softmax_channels(stack.logits);
  return stack;
}

template <typename T>
Prediction<T> BANet<T>::forward(const Tensor<T>& image, bool keep_attention) const {
  const auto stages = stage_features(image);
  Prediction<T> out;
  if (config_.variant == Variant::Vanilla) {
    const int r = kStageStrides.back();
    out.unnormalized = ops::pixel_shuffle(vanilla_head_(stages.features.back()), r);
    out.depth = ops::sigmoid(out.unnormalized);
    return out;
  }
  std::array<Tensor<T>, kNumStages> forward_maps, backward_maps, feature_maps;
  for (int s = 0; s < kNumStages; ++s) {
    const auto& x = stages.features[s];
    if (has_forward_attention()) forward_maps[s] = forward_d2s_[s](x, training_);
    if (has_backward_attention()) backward_maps[s] = backward_d2s_[s](x, training_);
    feature_maps[s] = feature_d2s_[s](x, training_);
  }
  auto stack = attend(forward_maps, backward_maps);
  auto blended = predict_depth(stack.weights, ops::concat_channels<T>(feature_maps));
  out.unnormalized = blended.unnormalized;
  out.depth = blended.depth;
  if (keep_attention) out.attention = std::move(stack);
  return out;
}

template <typename T>
Tensor<T> BANet<T>::export_stage_attention(const Tensor<T>& image) const {
  if (config_.variant == Variant::Vanilla) {
    throw UnsupportedVariantError("the Vanilla variant has no stage attention to export");
  }
  return forward(image, true).attention->weights;
}

template class BANet<float>;
template class BANet<double>;

}  // namespace banet
