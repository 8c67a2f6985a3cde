#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace banet {

// Depth in meters with a validity byte per pixel, row-major H x W.
struct DepthMap {
  int height = 0;
  int width = 0;
  std::vector<float> depth;
  std::vector<std::uint8_t> mask;
};

// RGB in [0, 1], planar (3, H, W).
struct Image {
  int height = 0;
  int width = 0;
  std::vector<float> rgb;
};

struct DepthSample {
  std::string id;
  std::string dataset = "synthetic";
  double d_max = 80.0;
  Image image;
  DepthMap depth;

  int height() const { return image.height; }
  int width() const { return image.width; }
  // Throws ConfigError unless image and depth agree in size and depth > 0
  // wherever the mask is set.
  void validate() const;
};

}  // namespace banet
