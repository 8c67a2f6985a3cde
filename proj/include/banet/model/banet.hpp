#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "banet/model/config.hpp"
#include "banet/model/modules.hpp"

namespace banet {

// Fusion result. `weights` is (B, 5, H, W) with a per-pixel simplex over
// stages; the per-stage attention maps and the pre-softmax logits are kept
// for inspection. Missing families stay undefined.
template <typename T>
struct AttentionStack {
  Tensor<T> weights;
  Tensor<T> logits;
  std::array<Tensor<T>, kNumStages> forward;
  std::array<Tensor<T>, kNumStages> backward;
};

template <typename T>
struct Prediction {
  Tensor<T> depth;         // (B, 1, H, W) in (0, 1)
  Tensor<T> unnormalized;  // pre-sigmoid
  std::optional<AttentionStack<T>> attention;
};

template <typename T>
class BANet {
 public:
  BANet(const ModelConfig& config, std::uint64_t seed);

  BANet(const BANet&) = delete;
  BANet& operator=(const BANet&) = delete;
  BANet(BANet&&) = default;
  BANet& operator=(BANet&&) = default;

  // image (B, C, H, W) with H, W multiples of 32.
  Prediction<T> forward(const Tensor<T>& image, bool keep_attention = false) const;

  StageFeatureSet<T> stage_features(const Tensor<T>& image) const;

  // Runs the attention convolutions and the fusion on per-stage
  // full-resolution maps. Families the variant lacks may be left undefined.
  AttentionStack<T> attend(const std::array<Tensor<T>, kNumStages>& forward_maps,
                           const std::array<Tensor<T>, kNumStages>& backward_maps) const;

  // The (B, 5, H, W) stage weights. Throws UnsupportedVariantError for Vanilla.
  Tensor<T> export_stage_attention(const Tensor<T>& image) const;

  std::int64_t count_params() const { return store_.parameter_count(); }

  bool has_forward_attention() const;
  bool has_backward_attention() const;

  bool training() const { return training_; }
  void set_training(bool training) { training_ = training; }

  const ModelConfig& config() const { return config_; }
  ParameterStore<T>& store() { return store_; }
  const ParameterStore<T>& store() const { return store_; }

 private:
  Tensor<T> attention_map(const Conv2d<T>& conv, const std::array<Tensor<T>, kNumStages>& maps,
                          int first, int count, int source) const;

  ModelConfig config_;
  ParameterStore<T> store_;
  bool training_ = true;
  Backbone<T> backbone_;
  std::array<D2S<T>, kNumStages> forward_d2s_;
  std::array<D2S<T>, kNumStages> backward_d2s_;
  std::array<D2S<T>, kNumStages> feature_d2s_;
  std::array<Conv2d<T>, kNumStages> forward_attention_;
  std::array<Conv2d<T>, kNumStages> backward_attention_;
  Conv2d<T> fusion_;
  Conv2d<T> vanilla_head_;
};

extern template class BANet<float>;
extern template class BANet<double>;

}  // namespace banet
