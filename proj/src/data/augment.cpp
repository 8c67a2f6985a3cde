#include "banet/data/augment.hpp"

#include <algorithm>
#include <string>

#include "banet/errors.hpp"

namespace banet {

DepthSample hflip(const DepthSample& s) {
  DepthSample out = s;
  const int H = s.height(), W = s.width();
  const std::size_t plane = static_cast<std::size_t>(H) * W;
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      const std::size_t dst = static_cast<std::size_t>(y) * W + x;
      const std::size_t src = static_cast<std::size_t>(y) * W + (W - 1 - x);
      for (int c = 0; c < 3; ++c) out.image.rgb[c * plane + dst] = s.image.rgb[c * plane + src];
      out.depth.depth[dst] = s.depth.depth[src];
      out.depth.mask[dst] = s.depth.mask[src];
    }
  }
  return out;
}

DepthSample crop_sample(const DepthSample& s, int top, int left, int height, int width) {
  if (top < 0 || left < 0 || height < 1 || width < 1 || top + height > s.height() ||
      left + width > s.width()) {
    throw UsageError("crop " + std::to_string(height) + "x" + std::to_string(width) + " at (" +
                     std::to_string(top) + ", " + std::to_string(left) + ") does not fit a " +
                     std::to_string(s.height()) + "x" + std::to_string(s.width()) + " sample");
  }
  DepthSample out;
  out.id = s.id;
  out.dataset = s.dataset;
  out.d_max = s.d_max;
  const std::size_t n = static_cast<std::size_t>(height) * width;
  out.image = {height, width, std::vector<float>(3 * n)};
  out.depth = {height, width, std::vector<float>(n), std::vector<std::uint8_t>(n)};
  const std::size_t in_plane = static_cast<std::size_t>(s.height()) * s.width();
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const std::size_t dst = static_cast<std::size_t>(y) * width + x;
      const std::size_t src = static_cast<std::size_t>(y + top) * s.width() + (x + left);
      for (int c = 0; c < 3; ++c) out.image.rgb[c * n + dst] = s.image.rgb[c * in_plane + src];
      out.depth.depth[dst] = s.depth.depth[src];
      out.depth.mask[dst] = s.depth.mask[src];
    }
  }
  return out;
}

void color_jitter(Image& image, double brightness, double contrast, double saturation) {
  const std::size_t plane = static_cast<std::size_t>(image.height) * image.width;
  auto& v = image.rgb;
  for (auto& x : v) x = static_cast<float>(x * brightness);

  auto luma = [&](std::size_t i) {
    return 0.299 * v[i] + 0.587 * v[plane + i] + 0.114 * v[2 * plane + i];
  };
  double mean = 0.0;
  for (std::size_t i = 0; i < plane; ++i) mean += luma(i);
  mean /= static_cast<double>(plane);
  for (auto& x : v) x = static_cast<float>((x - mean) * contrast + mean);

  for (std::size_t i = 0; i < plane; ++i) {
    const double gray = luma(i);
    for (int c = 0; c < 3; ++c) {
      auto& x = v[c * plane + i];
      x = static_cast<float>(gray + (x - gray) * saturation);
    }
  }
  for (auto& x : v) x = std::clamp(x, 0.0f, 1.0f);
}

DepthSample augment(const DepthSample& sample, Rng& rng, const AugmentFlags& flags) {
  DepthSample out = sample;
  if (flags.crop) {
    if (flags.crop_height % 32 != 0 || flags.crop_width % 32 != 0) {
      throw ConfigError("crop size " + std::to_string(flags.crop_height) + "x" +
                        std::to_string(flags.crop_width) + " must be a multiple of 32");
    }
    if (flags.crop_height > sample.height() || flags.crop_width > sample.width()) {
      throw UsageError("crop " + std::to_string(flags.crop_height) + "x" +
                       std::to_string(flags.crop_width) + " is larger than the " +
                       std::to_string(sample.height()) + "x" + std::to_string(sample.width()) +
                       " sample");
    }
    std::uniform_int_distribution<int> top(0, sample.height() - flags.crop_height);
    std::uniform_int_distribution<int> left(0, sample.width() - flags.crop_width);
    const int t = top(rng), l = left(rng);
    out = crop_sample(sample, t, l, flags.crop_height, flags.crop_width);
  }
  if (flags.flip && std::bernoulli_distribution(0.5)(rng)) out = hflip(out);
  if (flags.color_jitter) {
    std::uniform_real_distribution<double> factor(flags.jitter_low, flags.jitter_high);
    const double b = factor(rng), c = factor(rng), s = factor(rng);
    color_jitter(out.image, b, c, s);
  }
  return out;
}

}  // namespace banet
