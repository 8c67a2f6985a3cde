#pragma once

#include <array>
#include <string>
#include <string_view>

namespace banet {

inline constexpr int kNumStages = 5;
inline constexpr std::array<int, kNumStages> kStageStrides{2, 4, 8, 16, 32};

enum class Variant { Full, Vanilla, Forward, Backward, Markov, Local };

inline constexpr std::array<Variant, 6> kAllVariants{
    Variant::Full,    Variant::Vanilla, Variant::Forward,
    Variant::Backward, Variant::Markov, Variant::Local};

std::string_view variant_name(Variant v);
// Case-insensitive; throws UsageError listing the accepted names.
Variant parse_variant(std::string_view name);

struct BackboneConfig {
  std::array<int, kNumStages> stage_channels{16, 32, 64, 128, 256};
  int blocks_per_stage = 2;
  int input_channels = 3;

  // Throws ConfigError on non-positive widths or block counts.
  void validate() const;
};

struct GlobalContextConfig {
  int pool_kernel = 8;
  int pool_stride = 8;
  int hidden = 42;

  void validate() const;
};

struct ModelConfig {
  Variant variant = Variant::Full;
  BackboneConfig backbone;
  GlobalContextConfig global_context;
};

// Small backbone used for quick training runs and tests (about 0.95M
// parameters for the Full variant).
BackboneConfig micro_backbone();

}  // namespace banet
