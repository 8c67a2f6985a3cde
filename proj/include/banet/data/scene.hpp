#pragma once

#include <cstdint>
#include <vector>

#include "banet/data/sample.hpp"

namespace banet {

// Pinhole camera at the origin looking down +z, y pointing down, with a flat
// ground plane `camera_height` below it. Boxes and spheres rest on the
// ground; anything not hit before `d_far` is backdrop at d_far.
struct SceneGenConfig {
  int height = 64;
  int width = 64;
  int min_objects = 2;
  int max_objects = 6;
  double d_near = 1.0;
  double d_far = 60.0;
  double d_max = 80.0;
  double camera_height = 1.6;
  double focal_scale = 0.58;    // focal length in pixels = focal_scale * width
  double horizon_row = 0.4;     // principal point row as a fraction of height
  double haze_distance = 90.0;  // meters for the colour to fade by 1/e
  std::uint64_t seed = 0;

  // Throws ConfigError on sizes not divisible by 32 or inconsistent ranges.
  void validate() const;
  double focal() const { return focal_scale * width; }
  double cy() const { return horizon_row * height; }
};

enum class Surface : std::uint8_t { Backdrop = 0, Ground = 1, Box = 2, Sphere = 3 };

// Deterministic in the config (including the seed). The mask is all true.
// `surfaces`, when given, receives the label of every pixel.
DepthSample generate_synthetic_scene(const SceneGenConfig& config,
                                     std::vector<Surface>* surfaces = nullptr);

// Depth the renderer assigns to a ground pixel in `row` (every column
// agrees), before the [d_near, d_far] clamp. Infinite at or above the
// horizon.
double ground_plane_depth(const SceneGenConfig& config, int row);

}  // namespace banet
