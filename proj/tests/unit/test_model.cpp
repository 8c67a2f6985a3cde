#include <algorithm>
#include <cmath>
#include <map>
#include <cstring>

#include "banet/errors.hpp"
#include "banet/model/banet.hpp"
#include "banet/tensor/gradcheck.hpp"
#include "doctest.h"

using namespace banet;
using F = Tensor<float>;
using D = Tensor<double>;

namespace {

ModelConfig toy(Variant v) {
  ModelConfig c;
  c.variant = v;
  c.backbone.stage_channels = {4, 4, 8, 8, 8};
  c.backbone.blocks_per_stage = 1;
  c.global_context.hidden = 8;
  return c;
}

bool all_zero_or_absent(const D& t) {
  if (!t.has_grad()) return true;
  for (double g : t.grad())
    if (g != 0.0) return false;
  return true;
}

std::array<D, kNumStages> stub_maps(Rng& rng, int h, int w) {
  std::array<D, kNumStages> maps;
  for (auto& m : maps) {
    m = uniform_tensor<double>({1, 1, h, w}, rng);
    m.set_requires_grad(true);
  }
  return maps;
}

}  // namespace

TEST_CASE("variant names round trip") {
  for (Variant v : kAllVariants) CHECK(parse_variant(variant_name(v)) == v);
  CHECK(parse_variant("Markov") == Variant::Markov);
  CHECK_THROWS_AS(parse_variant("lstm"), UsageError);
}

TEST_CASE("backbone stride contract") {
  ParameterStore<float> store;
  Rng rng(1);
  Backbone<float> backbone(store, "b", BackboneConfig{}, rng);
  Rng data(2);
  auto image = uniform_tensor<float>({1, 3, 64, 64}, data);
  auto stages = backbone(image, false);
  REQUIRE(stages.features.size() == 5);
  for (int s = 0; s < 5; ++s) {
    CHECK(stages.features[s].size(2) == 64 / kStageStrides[s]);
    CHECK(stages.features[s].size(3) == 64 / kStageStrides[s]);
    CHECK(stages.features[s].size(1) == BackboneConfig{}.stage_channels[s]);
  }
  auto again = backbone(image, false);
  const auto& a = stages.features[4];
  const auto& b = again.features[4];
  CHECK(std::memcmp(a.data().data(), b.data().data(), a.numel() * sizeof(float)) == 0);
  CHECK_THROWS_AS(backbone(F({1, 3, 48, 64}), false), UsageError);
}

TEST_CASE("global context") {
  ParameterStore<double> store;
  Rng rng(3);
  GlobalContextConfig cfg;
  cfg.hidden = 6;
  GlobalContext<double> gc(store, "gc", 4, cfg, rng);

  auto x = uniform_tensor<double>({2, 4, 16, 24}, rng);
  CHECK(gc(x).shape() == x.shape());

  auto c = D({1, 4, 8, 8}, 0.3);
  auto out = gc(c);
  for (int ch = 0; ch < 4; ++ch) {
    const double ref = out.data()[ch * 64];
    for (int i = 0; i < 64; ++i) CHECK(out.data()[ch * 64 + i] == doctest::Approx(ref));
  }

  // zeroed dense layers make the residual an identity
  for (auto t : {gc.fc1().weight(), gc.fc1().bias(), gc.fc2().weight(), gc.fc2().bias()}) {
    for (auto& v : t.mutable_data()) v = 0.0;
  }
  auto ident = gc(x);
  CHECK(std::equal(ident.data().begin(), ident.data().end(), x.data().begin()));

  // kernel larger than the grid clamps to a global pool
  CHECK(gc(uniform_tensor<double>({1, 4, 2, 4}, rng)).shape() == Shape{1, 4, 2, 4});
}

TEST_CASE("D2S module") {
  ParameterStore<double> store;
  Rng rng(4);
  GlobalContextConfig gc;
  D2S<double> attn(store, "a", 6, 8, ContextKind::Global, gc, true, rng);
  D2S<double> feat(store, "f", 6, 8, ContextKind::Global, gc, false, rng);
  D2S<double> plain(store, "p", 6, 8, ContextKind::None, gc, true, rng);
  auto s3 = uniform_tensor<double>({2, 6, 4, 5}, rng);

  auto a = attn(s3, true);
  CHECK(a.shape() == Shape{2, 1, 32, 40});
  for (double v : a.data()) CHECK(v >= 0.0);
  auto f = feat(s3, true);
  CHECK(f.shape() == Shape{2, 1, 32, 40});
  CHECK(*std::min_element(f.data().begin(), f.data().end()) < 0.0);

  // without context: relu(bn(shuffle(conv(x))))
  D rm({1}, 0.0), rv({1}, 1.0);
  auto ref = ops::relu(ops::batchnorm2d(
      ops::pixel_shuffle(ops::conv2d(s3, plain.projection().weight(), plain.projection().bias()), 8),
      *store.find_parameter("p.bn.gamma"), *store.find_parameter("p.bn.beta"), rm, rv,
      {.training = true}));
  auto got = plain(s3, true);
  CHECK(std::equal(got.data().begin(), got.data().end(), ref.data().begin()));

  CHECK_THROWS_AS(attn(uniform_tensor<double>({1, 5, 4, 4}, rng), true), ConfigError);
}

TEST_CASE("fusion and depth head") {
  BANet<double> model(toy(Variant::Full), 5);
  Rng rng(6);
  auto sf = stub_maps(rng, 8, 8), sb = stub_maps(rng, 8, 8);
  auto stack = model.attend(sf, sb);
  REQUIRE(stack.weights.shape() == Shape{1, 5, 8, 8});
  for (int p = 0; p < 64; ++p) {
    double total = 0.0;
    for (int c = 0; c < 5; ++c) total += stack.weights.data()[c * 64 + p];
    CHECK(std::abs(total - 1.0) < 1e-6);
  }

  for (auto t : {*model.store().find_parameter("fusion.conv.weight"),
                 *model.store().find_parameter("fusion.conv.bias")}) {
    for (auto& v : t.mutable_data()) v = 0.0;
  }
  const auto zeroed = model.attend(sf, sb);
  for (double v : zeroed.weights.data()) CHECK(v == doctest::Approx(0.2));

  SUBCASE("predict_depth") {
    D uniform({1, 5, 2, 2}, 0.2), feats({1, 5, 2, 2}, 1.7);
    auto out = predict_depth(uniform, feats);
    for (double v : out.unnormalized.data()) CHECK(v == doctest::Approx(1.7));
    for (double v : out.depth.data()) CHECK(v == doctest::Approx(1.0 / (1.0 + std::exp(-1.7))));

    auto f = uniform_tensor<double>({1, 5, 2, 2}, rng, -3, 3);
    for (int j = 0; j < 5; ++j) {
      D onehot({1, 5, 2, 2}, 0.0);
      for (int p = 0; p < 4; ++p) onehot.mutable_data()[j * 4 + p] = 1.0;
      auto sel = predict_depth(onehot, f);
      for (int p = 0; p < 4; ++p) {
        CHECK(sel.depth.data()[p] ==
              doctest::Approx(1.0 / (1.0 + std::exp(-f.data()[j * 4 + p]))));
        CHECK(sel.depth.data()[p] > 0.0);
        CHECK(sel.depth.data()[p] < 1.0);
      }
    }
  }
}

TEST_CASE("attention input counts") {
  BANet<double> model(toy(Variant::Full), 7);
  for (int i = 0; i < 5; ++i) {
    CHECK(model.store().find_parameter("attention_forward.stage" + std::to_string(i + 1) +
                                       ".weight")->size(1) == i + 1);
    CHECK(model.store().find_parameter("attention_backward.stage" + std::to_string(i + 1) +
                                       ".weight")->size(1) == 5 - i);
  }
  Rng rng(8);
  auto sf = stub_maps(rng, 8, 8), sb = stub_maps(rng, 8, 8);
  auto stack = model.attend(sf, sb);
  for (int i = 0; i < 5; ++i) {
    CHECK(stack.forward[i].shape() == Shape{1, 1, 8, 8});
    CHECK(stack.backward[i].shape() == Shape{1, 1, 8, 8});
  }
  sf[2] = D{};
  CHECK_THROWS_AS(model.attend(sf, sb), UsageError);
}

TEST_CASE("dependency structure with stubbed stage inputs") {
  for (Variant v : {Variant::Full, Variant::Markov}) {
    BANet<double> model(toy(v), 9);
    for (int i = 0; i < 5; ++i) {
      for (bool fwd : {true, false}) {
        Rng rng(100 + i);
        auto sf = stub_maps(rng, 8, 8), sb = stub_maps(rng, 8, 8);
        auto stack = model.attend(sf, sb);
        ops::sum(fwd ? stack.forward[i] : stack.backward[i]).backward();
        const auto& maps = fwd ? sf : sb;
        for (int j = 0; j < 5; ++j) {
          bool expect_dependency = fwd ? j <= i : j >= i;
          if (v == Variant::Markov) {
            const int source = fwd ? (i == 0 ? 0 : i - 1) : (i == 4 ? 4 : i + 1);
            expect_dependency = j == source;
          }
          INFO(variant_name(v) << (fwd ? " forward" : " backward") << " a_" << i + 1
                               << " wrt s_" << j + 1);
          CHECK(all_zero_or_absent(maps[j]) == !expect_dependency);
        }
        // the other family is untouched
        for (const auto& m : fwd ? sb : sf) CHECK(all_zero_or_absent(m));
      }
    }
  }
}

TEST_CASE("variant parameter ordering") {
  ModelConfig base;
  base.backbone = micro_backbone();
  std::map<Variant, std::int64_t> n;
  for (Variant v : kAllVariants) {
    base.variant = v;
    n[v] = BANet<float>(base, 1).count_params();
  }
  CHECK(n[Variant::Vanilla] < n[Variant::Forward]);
  CHECK(n[Variant::Forward] == n[Variant::Backward]);
  CHECK(n[Variant::Backward] < n[Variant::Full]);
  CHECK(n[Variant::Full] == n[Variant::Markov]);
  CHECK(std::abs(double(n[Variant::Local] - n[Variant::Full])) / double(n[Variant::Full]) < 0.05);
  CHECK(n[Variant::Full] < 1'000'000);

  base.backbone = BackboneConfig{};
  base.variant = Variant::Full;
  const auto full = BANet<float>(base, 1).count_params();
  base.variant = Variant::Local;
  const auto local = BANet<float>(base, 1).count_params();
  CHECK(local < full);
  CHECK(double(full - local) / double(full) < 0.05);
}

TEST_CASE("count_params") {
  ParameterStore<float> store;
  Rng rng(1);
  Conv2d<float> conv(store, "c", 3, 4, 1, {}, true, rng);
  CHECK(store.parameter_count() == 16);

  BANet<float> model(toy(Variant::Full), 2);
  const auto before = model.count_params();
  Rng data(3);
  model.forward(uniform_tensor<float>({1, 3, 32, 32}, data));
  CHECK(model.count_params() == before);
}

TEST_CASE("resolution contract and finite gradients for every variant") {
  for (Variant v : kAllVariants) {
    BANet<float> model(toy(v), 11);
    Rng rng(12);
    auto image = uniform_tensor<float>({2, 3, 64, 96}, rng);
    auto pred = model.forward(image);
    INFO(variant_name(v));
    REQUIRE(pred.depth.shape() == Shape{2, 1, 64, 96});
    for (float d : pred.depth.data()) {
      CHECK(d > 0.0f);
      CHECK(d < 1.0f);
    }
    ops::mean(pred.depth).backward();
    for (const auto& p : model.store().parameters()) {
      INFO(p.name);
      // No Markov attention map reads the last forward or first backward stage.
      const bool unreachable =
          v == Variant::Markov && (p.name.starts_with("d2s_forward.stage5.") ||
                                   p.name.starts_with("d2s_backward.stage1."));
      REQUIRE(p.tensor.has_grad() != unreachable);
      for (float g : p.tensor.grad()) REQUIRE(std::isfinite(g));
    }
  }
}

TEST_CASE("stage attention export") {
  BANet<float> model(toy(Variant::Full), 13);
  model.set_training(false);
  Rng rng(14);
  auto image = uniform_tensor<float>({1, 3, 32, 64}, rng);
  auto a = model.export_stage_attention(image);
  REQUIRE(a.shape() == Shape{1, 5, 32, 64});
  for (int p = 0; p < 32 * 64; ++p) {
    double total = 0.0;
    for (int c = 0; c < 5; ++c) total += a.data()[c * 32 * 64 + p];
    CHECK(std::abs(total - 1.0) < 1e-6);
  }
  auto b = model.export_stage_attention(image);
  CHECK(std::memcmp(a.data().data(), b.data().data(), a.numel() * sizeof(float)) == 0);

  BANet<float> vanilla(toy(Variant::Vanilla), 13);
  CHECK_THROWS_AS(vanilla.export_stage_attention(image), UnsupportedVariantError);
  auto vp = vanilla.forward(uniform_tensor<float>({1, 3, 64, 64}, rng));
  CHECK(vp.depth.shape() == Shape{1, 1, 64, 64});
}

TEST_CASE("end-to-end gradcheck of a micro Full model") {
  ModelConfig cfg = toy(Variant::Full);
  cfg.backbone.stage_channels = {2, 2, 2, 2, 2};
  cfg.global_context.hidden = 3;
  BANet<double> model(cfg, 21);
  Rng rng(22);
  auto image = uniform_tensor<double>({2, 3, 32, 32}, rng);
  auto proj = uniform_tensor<double>({2, 1, 32, 32}, rng);
  std::vector<GradcheckInput> inputs;
  for (const auto& p : model.store().parameters()) inputs.push_back({p.name, p.tensor});
  GradcheckOptions opts;
  opts.tol = 1e-3;
  opts.max_checks_per_input = 4;
  auto report = gradcheck(
      [&] { return ops::sum(ops::hadamard(model.forward(image).depth, proj)); }, inputs, opts);
  INFO("max rel " << report.max_rel_error());
  CHECK(report.passed());
}
