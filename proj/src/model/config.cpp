#include "banet/model/config.hpp"

#include <algorithm>
#include <cctype>

#include "banet/errors.hpp"

namespace banet {

std::string_view variant_name(Variant v) {
  switch (v) {
    case Variant::Full: return "full";
    case Variant::Vanilla: return "vanilla";
    case Variant::Forward: return "forward";
    case Variant::Backward: return "backward";
    case Variant::Markov: return "markov";
    case Variant::Local: return "local";
  }
  return "unknown";
}

Variant parse_variant(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  for (Variant v : kAllVariants) {
    if (variant_name(v) == lower) return v;
  }
  throw UsageError("unknown variant '" + std::string(name) +
                   "' (expected full, vanilla, forward, backward, markov or local)");
}

void BackboneConfig::validate() const {
  for (int c : stage_channels) {
    if (c < 1) throw ConfigError("backbone stage widths must be positive");
  }
  if (blocks_per_stage < 1) throw ConfigError("backbone needs at least one block per stage");
  if (input_channels < 1) throw ConfigError("backbone input_channels must be positive");
}

void GlobalContextConfig::validate() const {
  if (pool_kernel < 1 || pool_stride < 1 || hidden < 1) {
    throw ConfigError("global context pool kernel, stride and hidden width must be positive");
  }
}

BackboneConfig micro_backbone() {
  BackboneConfig c;
  c.stage_channels = {8, 16, 32, 64, 96};
  c.blocks_per_stage = 1;
  return c;
}

}  // namespace banet
