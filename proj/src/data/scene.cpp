#include "banet/data/scene.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <random>

#include "banet/errors.hpp"

namespace banet {

namespace {

using Vec3 = std::array<double, 3>;

double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }

Vec3 normalized(Vec3 v) {
  const double n = std::sqrt(dot(v, v));
  return {v[0] / n, v[1] / n, v[2] / n};
}

struct Box {
  Vec3 lo, hi;
  Vec3 color;
};

struct Sphere {
  Vec3 center;
  double radius;
  Vec3 color;
};

struct Hit {
  double t = std::numeric_limits<double>::infinity();
  Surface surface = Surface::Backdrop;
  Vec3 normal{0, 0, 0};
  Vec3 color{0, 0, 0};
};

void hit_box(const Box& b, const Vec3& dir, Hit& best) {
  double t0 = 0.0, t1 = std::numeric_limits<double>::infinity();
  int axis = -1;
  double sign = 0.0;
  for (int a = 0; a < 3; ++a) {
    if (std::abs(dir[a]) < 1e-12) {
      if (0.0 < b.lo[a] || 0.0 > b.hi[a]) return;
      continue;
    }
    double near = b.lo[a] / dir[a], far = b.hi[a] / dir[a];
    double s = -1.0;
    if (near > far) {
      std::swap(near, far);
      s = 1.0;
    }
    if (near > t0) {
      t0 = near;
      axis = a;
      sign = s;
    }
    t1 = std::min(t1, far);
    if (t0 > t1) return;
  }
  if (axis < 0 || t0 >= best.t) return;
  best.t = t0;
  best.surface = Surface::Box;
  best.normal = {0, 0, 0};
  best.normal[axis] = sign;
  best.color = b.color;
}

void hit_sphere(const Sphere& s, const Vec3& dir, Hit& best) {
  const double a = dot(dir, dir);
  const double b = -2.0 * dot(dir, s.center);
  const double c = dot(s.center, s.center) - s.radius * s.radius;
  const double disc = b * b - 4 * a * c;
  if (disc < 0) return;
  const double t = (-b - std::sqrt(disc)) / (2 * a);
  if (t <= 0 || t >= best.t) return;
  best.t = t;
  best.surface = Surface::Sphere;
  best.normal = normalized({t * dir[0] - s.center[0], t * dir[1] - s.center[1],
                            t * dir[2] - s.center[2]});
  best.color = s.color;
}

}  // namespace

void SceneGenConfig::validate() const {
  if (height < 32 || width < 32 || height % 32 != 0 || width % 32 != 0) {
    throw ConfigError("scene size " + std::to_string(height) + "x" + std::to_string(width) +
                      " must be positive multiples of 32");
  }
  if (min_objects < 0 || max_objects < min_objects) {
    throw ConfigError("scene object count range is empty");
  }
  if (!(d_near > 0 && d_near < d_far && d_far <= d_max)) {
    throw ConfigError("scene depth range needs 0 < d_near < d_far <= d_max");
  }
  if (!(camera_height > 0 && focal_scale > 0 && horizon_row > 0 && horizon_row < 1)) {
    throw ConfigError("scene camera parameters out of range");
  }
}

double ground_plane_depth(const SceneGenConfig& c, int row) {
  const double dy = (row + 0.5 - c.cy()) / c.focal();
  if (dy <= 0) return std::numeric_limits<double>::infinity();
  return c.camera_height / dy;
}

DepthSample generate_synthetic_scene(const SceneGenConfig& cfg, std::vector<Surface>* surfaces) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * u01(rng); };
  const double h = cfg.camera_height;
  const double far_z = std::min(cfg.d_far * 0.6, 40.0);

  auto random_color = [&] {
    return Vec3{uniform(0.15, 0.95), uniform(0.15, 0.95), uniform(0.15, 0.95)};
  };
  std::vector<Box> boxes;
  std::vector<Sphere> spheres;
  const int count = cfg.min_objects + static_cast<int>(u01(rng) * (cfg.max_objects - cfg.min_objects + 1));
  for (int k = 0; k < std::min(count, cfg.max_objects); ++k) {
    const double z = uniform(cfg.d_near + 3.0, far_z);
    const double x = uniform(-0.45, 0.45) * z * cfg.width / cfg.focal();
    if (u01(rng) < 0.5) {
      const double sx = uniform(0.6, 3.0), sy = uniform(0.8, 4.0), sz = uniform(0.6, 3.0);
      boxes.push_back({{x - sx / 2, h - sy, z}, {x + sx / 2, h, z + sz}, random_color()});
    } else {
      const double r = uniform(0.4, 1.6);
      spheres.push_back({{x, h - r, z + r}, r, random_color()});
    }
  }
  const Vec3 light = normalized({-0.4, -1.0, -0.3});
  const Vec3 ground_a{0.42, 0.40, 0.36}, ground_b{0.30, 0.29, 0.27};
  const Vec3 sky_top{0.35, 0.55, 0.85}, haze{0.75, 0.80, 0.85};

  DepthSample s;
  s.id = "scene_" + std::to_string(cfg.seed);
  s.d_max = cfg.d_max;
  const int H = cfg.height, W = cfg.width;
  s.image = {H, W, std::vector<float>(static_cast<std::size_t>(3 * H * W))};
  s.depth = {H, W, std::vector<float>(static_cast<std::size_t>(H * W)),
             std::vector<std::uint8_t>(static_cast<std::size_t>(H * W), 1)};
  if (surfaces) surfaces->assign(static_cast<std::size_t>(H * W), Surface::Backdrop);

  const double f = cfg.focal(), cx = W / 2.0, cy = cfg.cy();
  for (int v = 0; v < H; ++v) {
    for (int px = 0; px < W; ++px) {
      const Vec3 dir{(px + 0.5 - cx) / f, (v + 0.5 - cy) / f, 1.0};
      Hit hit;
      if (dir[1] > 0) {
        hit.t = h / dir[1];
        hit.surface = Surface::Ground;
        hit.normal = {0, -1, 0};
        const double gx = hit.t * dir[0], gz = hit.t;
        const bool odd = (static_cast<long>(std::floor(gx / 2.0)) +
                          static_cast<long>(std::floor(gz / 2.0))) & 1;
        hit.color = odd ? ground_a : ground_b;
      }
      for (const auto& b : boxes) hit_box(b, dir, hit);
      for (const auto& sp : spheres) hit_sphere(sp, dir, hit);
      if (hit.t >= cfg.d_far) hit = Hit{cfg.d_far, Surface::Backdrop, {0, 0, -1}, {}};

      Vec3 color;
      if (hit.surface == Surface::Backdrop) {
        const double mix = std::clamp(v / std::max(cy, 1.0), 0.0, 1.0);
        for (int c = 0; c < 3; ++c) color[c] = sky_top[c] * (1 - mix) + haze[c] * mix;
      } else {
        const double shade = 0.35 + 0.65 * std::max(0.0, dot(hit.normal, light));
        const double fade = std::exp(-hit.t / cfg.haze_distance);
        for (int c = 0; c < 3; ++c) color[c] = hit.color[c] * shade * fade + haze[c] * (1 - fade);
      }
      const auto i = static_cast<std::size_t>(v * W + px);
      for (int c = 0; c < 3; ++c) {
        s.image.rgb[static_cast<std::size_t>(c) * H * W + i] =
            static_cast<float>(std::clamp(color[c], 0.0, 1.0));
      }
      s.depth.depth[i] = static_cast<float>(std::clamp(hit.t, cfg.d_near, cfg.d_far));
      if (surfaces) (*surfaces)[i] = hit.surface;
    }
  }
  return s;
}

}  // namespace banet
