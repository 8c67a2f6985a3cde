#pragma once

#include "banet/data/sample.hpp"
#include "banet/tensor/random.hpp"

namespace banet {

struct AugmentFlags {
  bool flip = true;
  bool color_jitter = true;
  bool crop = true;
  int crop_height = 64;
  int crop_width = 192;
  double jitter_low = 0.8;
  double jitter_high = 1.25;
};

// Mirrors image, depth and mask together: (y, x) <-> (y, W - 1 - x).
DepthSample hflip(const DepthSample& sample);

// Joint window [top, top + h) x [left, left + w). Throws UsageError if the
// window leaves the sample.
DepthSample crop_sample(const DepthSample& sample, int top, int left, int height, int width);

// Brightness, contrast and saturation factors applied in that order, then
// clamped to [0, 1]. Touches only the image.
void color_jitter(Image& image, double brightness, double contrast, double saturation);

// Random crop, then a fair-coin flip, then jitter with factors uniform in
// [jitter_low, jitter_high]. Throws UsageError if the crop exceeds the
// sample and ConfigError if the crop size is not a multiple of 32.
DepthSample augment(const DepthSample& sample, Rng& rng, const AugmentFlags& flags);

}  // namespace banet
