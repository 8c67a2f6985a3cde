#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>

#include "banet/data/augment.hpp"
#include "banet/data/dataset.hpp"
#include "banet/data/io.hpp"
#include "banet/data/resolution.hpp"
#include "banet/data/scene.hpp"
#include "banet/errors.hpp"
#include "banet/tensor/ops.hpp"
#include "doctest.h"

using namespace banet;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("banet_test_data_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

bool same_sample(const DepthSample& a, const DepthSample& b) {
  return a.image.rgb == b.image.rgb && a.depth.depth == b.depth.depth &&
         a.depth.mask == b.depth.mask;
}

}  // namespace

TEST_CASE("synthetic scenes") {
  SceneGenConfig cfg;
  cfg.seed = 42;
  auto a = generate_synthetic_scene(cfg);
  auto b = generate_synthetic_scene(cfg);
  CHECK(same_sample(a, b));
  cfg.seed = 43;
  CHECK_FALSE(same_sample(a, generate_synthetic_scene(cfg)));

  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    cfg.seed = seed;
    cfg.width = seed % 2 ? 192 : 64;
    std::vector<Surface> labels;
    auto s = generate_synthetic_scene(cfg, &labels);
    s.validate();
    for (auto m : s.depth.mask) REQUIRE(m == 1);
    for (float d : s.depth.depth) {
      REQUIRE(d >= cfg.d_near);
      REQUIRE(d <= cfg.d_far);
    }
    for (float v : s.image.rgb) {
      REQUIRE(v >= 0.0f);
      REQUIRE(v <= 1.0f);
    }
    // ground pixels: analytic plane depth, decreasing toward the bottom edge
    const int W = cfg.width;
    for (int x = 0; x < W; ++x) {
      double previous = std::numeric_limits<double>::infinity();
      for (int y = 0; y < cfg.height; ++y) {
        const auto i = static_cast<std::size_t>(y * W + x);
        if (labels[i] != Surface::Ground) continue;
        const double expected =
            std::clamp(ground_plane_depth(cfg, y), cfg.d_near, cfg.d_far);
        CHECK(s.depth.depth[i] == doctest::Approx(expected).epsilon(1e-6));
        CHECK(s.depth.depth[i] <= previous);
        previous = s.depth.depth[i];
      }
    }
  }
  // the analytic plane depth itself is strictly decreasing below the horizon
  for (int y = int(cfg.cy()) + 1; y + 1 < cfg.height; ++y) {
    CHECK(ground_plane_depth(cfg, y + 1) < ground_plane_depth(cfg, y));
  }
  cfg.height = 48;
  CHECK_THROWS_AS(generate_synthetic_scene(cfg), ConfigError);
}

TEST_CASE("16-bit depth PNG") {
  const auto dir = scratch("png16");
  DepthMap d{2, 3, {100.0f, 0.0f, 1.5f, 33.3f, 80.0f, 0.01f}, {1, 0, 1, 1, 1, 1}};
  save_depth_png16(dir / "d.png", d);
  auto back = load_depth_png16(dir / "d.png");
  REQUIRE(back.height == 2);
  REQUIRE(back.width == 3);
  CHECK(back.depth[0] == 100.0f);  // raw 25600
  CHECK(back.mask[1] == 0);
  for (int i : {0, 2, 3, 4, 5}) {
    CHECK(back.mask[i] == 1);
    CHECK(std::abs(back.depth[i] - d.depth[i]) <= 1.0f / 256.0f);
  }

  SUBCASE("random round trip within 1/256 m") {
    Rng rng(1);
    std::uniform_real_distribution<float> u(0.01f, 250.0f);
    DepthMap r{16, 24, std::vector<float>(16 * 24), std::vector<std::uint8_t>(16 * 24, 1)};
    for (auto& v : r.depth) v = u(rng);
    save_depth_png16(dir / "r.png", r);
    auto rb = load_depth_png16(dir / "r.png");
    for (std::size_t i = 0; i < r.depth.size(); ++i) {
      CHECK(std::abs(rb.depth[i] - r.depth[i]) <= 1.0f / 256.0f);
    }
  }
  SUBCASE("wrong bit depth is a format error naming the file") {
    save_gray_png8(dir / "g.png", 2, 2, {1, 2, 3, 4});
    try {
      load_depth_png16(dir / "g.png");
      FAIL("expected FormatError");
    } catch (const FormatError& e) {
      CHECK(std::string(e.what()).find("g.png") != std::string::npos);
    }
    Image rgb{2, 2, std::vector<float>(12, 0.5f)};
    save_image_png(dir / "rgb.png", rgb);
    CHECK_THROWS_AS(load_depth_png16(dir / "rgb.png"), FormatError);
    CHECK_THROWS_AS(load_depth_png16(dir / "missing.png"), FileError);
    std::ofstream(dir / "junk.png") << "not a png";
    CHECK_THROWS_AS(load_depth_png16(dir / "junk.png"), FormatError);
  }
}

TEST_CASE("image PNG") {
  const auto dir = scratch("img");
  Image img{2, 2, {0.0f, 1.0f, 0.5f, 0.25f, 0.1f, 0.2f, 0.3f, 0.4f, 1.0f, 0.0f, 0.0f, 1.0f}};
  save_image_png(dir / "i.png", img);
  auto back = load_image_png(dir / "i.png");
  REQUIRE(back.rgb.size() == 12);
  for (std::size_t i = 0; i < 12; ++i) CHECK(std::abs(back.rgb[i] - img.rgb[i]) <= 0.5f / 255.0f + 1e-6f);
  // grayscale files load as three equal planes
  save_gray_png8(dir / "g.png", 1, 2, {0, 255});
  auto g = load_image_png(dir / "g.png");
  CHECK(g.rgb == std::vector<float>{0, 1, 0, 1, 0, 1});
}

TEST_CASE("depth array record") {
  const auto dir = scratch("bda");
  DepthMap d{2, 2, {1.25f, 7.0f, 3.5f, 9.0f}, {1, 1, 1, 1}};
  save_depth_array(dir / "a.bda", d);
  auto back = load_depth_array(dir / "a.bda");
  CHECK(back.depth == d.depth);
  CHECK(back.mask == d.mask);

  Rng rng(2);
  std::normal_distribution<float> n(10.0f, 5.0f);
  DepthMap r{7, 5, std::vector<float>(35), std::vector<std::uint8_t>(35)};
  for (std::size_t i = 0; i < 35; ++i) {
    r.depth[i] = std::abs(n(rng)) + 0.1f;
    r.mask[i] = i % 3 != 0;
  }
  save_depth_array(dir / "r.bda", r);
  auto rb = load_depth_array(dir / "r.bda");
  CHECK(std::memcmp(rb.depth.data(), r.depth.data(), 35 * sizeof(float)) == 0);
  CHECK(rb.mask == r.mask);

  DepthMap bad{1, 3, {std::nanf(""), -1.0f, 2.0f}, {1, 1, 1}};
  save_depth_array(dir / "nan.bda", bad);
  CHECK(load_depth_array(dir / "nan.bda").mask == std::vector<std::uint8_t>{0, 0, 1});

  // a truncated mask no longer matches the header shape
  std::string bytes;
  {
    std::ifstream f(dir / "a.bda", std::ios::binary);
    bytes.assign(std::istreambuf_iterator<char>(f), {});
  }
  std::ofstream(dir / "short.bda", std::ios::binary) << bytes.substr(0, bytes.size() - 1);
  CHECK_THROWS_AS(load_depth_array(dir / "short.bda"), FormatError);
  CHECK_THROWS_AS(save_depth_array(dir / "x.bda", DepthMap{2, 2, {1, 2, 3, 4}, {1, 1}}),
                  ConfigError);
}

TEST_CASE("augmentation") {
  SceneGenConfig cfg;
  cfg.width = 224;
  cfg.seed = 5;
  auto s = generate_synthetic_scene(cfg);
  s.depth.mask[7] = 0;
  s.depth.mask[100] = 0;

  CHECK(same_sample(hflip(hflip(s)), s));
  auto f = hflip(s);
  const int W = s.width();
  for (int y : {0, 17, 63}) {
    for (int x : {0, 5, W - 1}) {
      const auto a = static_cast<std::size_t>(y * W + x), b = static_cast<std::size_t>(y * W + W - 1 - x);
      CHECK(f.depth.depth[a] == s.depth.depth[b]);
      CHECK(f.depth.mask[a] == s.depth.mask[b]);
      CHECK(f.image.rgb[a] == s.image.rgb[b]);
    }
  }

  Rng rng(3);
  AugmentFlags flags;
  for (int trial = 0; trial < 10; ++trial) {
    auto a = augment(s, rng, flags);
    CHECK(a.height() == 64);
    CHECK(a.width() == 192);
    CHECK(a.height() % 32 == 0);
    CHECK(a.width() % 32 == 0);
    a.validate();
  }

  SUBCASE("jitter leaves geometry alone") {
    auto j = s;
    color_jitter(j.image, 1.2, 0.8, 1.25);
    CHECK(j.depth.depth == s.depth.depth);
    CHECK(j.depth.mask == s.depth.mask);
    CHECK(j.image.rgb != s.image.rgb);
    for (float v : j.image.rgb) {
      CHECK(v >= 0.0f);
      CHECK(v <= 1.0f);
    }
    AugmentFlags only_jitter;
    only_jitter.flip = false;
    only_jitter.crop = false;
    auto aj = augment(s, rng, only_jitter);
    CHECK(aj.depth.depth == s.depth.depth);
  }
  SUBCASE("mask measure is preserved") {
    auto count = [](const DepthSample& x) {
      return std::count(x.depth.mask.begin(), x.depth.mask.end(), 1);
    };
    CHECK(count(hflip(s)) == count(s));
    auto c = crop_sample(s, 0, 0, 32, 64);
    long expected = 0;
    for (int y = 0; y < 32; ++y)
      for (int x = 0; x < 64; ++x) expected += s.depth.mask[y * W + x];
    CHECK(count(c) == expected);
  }
  SUBCASE("bad crops") {
    AugmentFlags big;
    big.crop_height = 128;
    CHECK_THROWS_AS(augment(s, rng, big), UsageError);
    AugmentFlags odd;
    odd.crop_width = 100;
    CHECK_THROWS_AS(augment(s, rng, odd), ConfigError);
  }
}

TEST_CASE("preprocess and postprocess") {
  auto p = plan_input(352, 1216);
  CHECK(p.content_height == 176);
  CHECK(p.content_width == 608);
  // 176 is not a multiple of 32, 608 is
  CHECK(p.pad_bottom == 16);
  CHECK(p.pad_right == 0);
  p = plan_input(384, 1216);
  CHECK(p.pad_bottom == 0);
  p = plan_input(100, 100);
  CHECK(p.content_height == 50);
  CHECK(p.pad_bottom == 14);
  CHECK(p.pad_right == 14);

  Rng rng(4);
  auto images = uniform_tensor<float>({2, 3, 100, 100}, rng, 0.0, 1.0);
  auto prepared = preprocess(images);
  CHECK(prepared.image.shape() == Shape{2, 3, 64, 64});
  for (float v : prepared.image.data()) {
    CHECK(v >= 0.0f);
    CHECK(v <= 1.0f);
  }
  // padding is zero
  CHECK(prepared.image.data()[63 * 64 + 63] == 0.0f);

  Tensor<float> constant({1, 1, 64, 64}, 0.375f);
  auto up = postprocess(constant, prepared.pad, 100, 100);
  CHECK(up.shape() == Shape{1, 1, 100, 100});
  for (float v : up.data()) CHECK(v == doctest::Approx(0.375f));

  auto pow2 = preprocess(uniform_tensor<float>({1, 3, 64, 64}, rng));
  CHECK(pow2.pad.pad_bottom == 0);
  CHECK(postprocess(Tensor<float>({1, 1, 32, 32}), pow2.pad, 64, 64).shape() ==
        Shape{1, 1, 64, 64});

  // identity model: take channel 0 of the prepared input
  std::uniform_int_distribution<int> extent(20, 300);
  for (int trial = 0; trial < 20; ++trial) {
    const int h = extent(rng), w = extent(rng);
    auto in = preprocess(Tensor<float>({1, 3, h, w}, 0.5f));
    REQUIRE(in.image.size(2) % 32 == 0);
    REQUIRE(in.image.size(3) % 32 == 0);
    auto model_out = ops::crop2d(in.image, 0, 0, int(in.image.size(2)), int(in.image.size(3)));
    auto single = ops::sum_channels(ops::scale(model_out, 1.0f / 3.0f));
    auto restored = postprocess(single, in.pad, h, w);
    CHECK(restored.shape() == Shape{1, 1, h, w});
    CHECK(restored.data()[0] == doctest::Approx(0.5f));
  }
}

TEST_CASE("dataset layout and loader") {
  const auto root = scratch("dataset");
  SceneGenConfig cfg;
  generate_dataset(root, cfg, 6, 2, 11);
  auto ids = read_manifest(root, "train");
  CHECK(ids.size() == 6);
  CHECK(read_manifest(root, "val").size() == 2);
  for (const auto& id : ids) {
    CHECK(fs::exists(root / "train" / "image" / (id + ".png")));
    CHECK(fs::exists(root / "train" / "depth" / (id + ".png")));
  }
  auto train = load_split(root, "train");
  const auto regenerated = generate_samples(cfg, 6, 11, 0, "");
  for (std::size_t k = 0; k < train.size(); ++k) {
    train[k].validate();
    for (std::size_t i = 0; i < train[k].depth.depth.size(); ++i) {
      REQUIRE(std::abs(train[k].depth.depth[i] - regenerated[k].depth.depth[i]) <= 1.0f / 256.0f);
    }
  }
  CHECK_THROWS_AS(read_manifest(root, "test"), FileError);

  // same seed, same bytes
  const auto again = scratch("dataset_again");
  generate_dataset(again, cfg, 6, 2, 11);
  auto slurp = [](const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(f), {});
  };
  CHECK(slurp(root / "train" / "depth" / (ids[3] + ".png")) ==
        slurp(again / "train" / "depth" / (ids[3] + ".png")));

  AugmentFlags flags;
  flags.crop_width = 32;
  flags.crop_height = 32;
  BatchLoader loader(train, 4, true, flags, 9);
  CHECK(loader.batches_per_epoch() == 2);
  auto e0 = loader.epoch(0), e0b = loader.epoch(0), e1 = loader.epoch(1);
  REQUIRE(e0.size() == 2);
  CHECK(e0[0].image.shape() == Shape{4, 3, 32, 32});
  CHECK(e0[1].image.shape() == Shape{2, 3, 32, 32});
  CHECK(e0[0].ids == e0b[0].ids);
  CHECK(std::equal(e0[0].image.data().begin(), e0[0].image.data().end(),
                   e0b[0].image.data().begin()));
  bool differs = e0[0].ids != e1[0].ids ||
                 !std::equal(e0[0].image.data().begin(), e0[0].image.data().end(),
                             e1[0].image.data().begin());
  CHECK(differs);
  CHECK(e0[0].mask.size() == 4u * 32 * 32);
}
