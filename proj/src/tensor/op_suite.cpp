#include "banet/tensor/op_suite.hpp"

#include <array>

#include "banet/tensor/ops.hpp"
#include "banet/tensor/random.hpp"

namespace banet {

namespace {

using D = Tensor<double>;
using Forward = std::function<D(const std::vector<D>&)>;

// Projects `f(inputs)` onto a fixed random tensor and gradchecks the result.
GradcheckReport check(const std::vector<std::pair<std::string, Shape>>& specs,
                      const Forward& f, std::uint64_t seed,
                      const GradcheckOptions& options, double lo = -1.0,
                      double hi = 1.0) {
  Rng rng(seed);
  std::vector<D> inputs;
  std::vector<GradcheckInput> named;
  for (const auto& [name, shape] : specs) {
    inputs.push_back(uniform_tensor<double>(shape, rng, lo, hi));
    named.push_back({name, inputs.back()});
  }
  const D probe = f(inputs);
  const D projection = uniform_tensor<double>(probe.shape(), rng);
  auto loss = [&] { return ops::sum(ops::hadamard(f(inputs), projection)); };
  GradcheckOptions opts = options;
  opts.seed = seed;
  return gradcheck(loss, named, opts);
}

}  // namespace

std::vector<OpCheckCase> op_gradcheck_cases() {
  std::vector<OpCheckCase> cases;
  auto add = [&](std::string name,
                 std::vector<std::pair<std::string, Shape>> specs, Forward f,
                 double lo = -1.0, double hi = 1.0) {
    cases.push_back({name, [specs = std::move(specs), f = std::move(f), lo, hi](
                               std::uint64_t seed, const GradcheckOptions& o) {
                       return check(specs, f, seed, o, lo, hi);
                     }});
  };

  add("conv2d 3x3 pad1",
      {{"input", {2, 3, 8, 8}}, {"weight", {4, 3, 3, 3}}, {"bias", {4}}},
      [](const std::vector<D>& in) {
        return ops::conv2d(in[0], in[1], in[2], {.stride = 1, .padding = 1});
      });
  add("conv2d 4x4 stride2",
      {{"input", {1, 2, 8, 8}}, {"weight", {3, 2, 4, 4}}},
      [](const std::vector<D>& in) {
        return ops::conv2d(in[0], in[1], D{}, {.stride = 2, .padding = 1});
      });
  add("conv2d 9x9 pad4",
      {{"input", {1, 2, 10, 10}}, {"weight", {1, 2, 9, 9}}, {"bias", {1}}},
      [](const std::vector<D>& in) {
        return ops::conv2d(in[0], in[1], in[2], {.stride = 1, .padding = 4});
      });
  add("conv2d depthwise",
      {{"input", {2, 3, 6, 6}}, {"weight", {3, 1, 3, 3}}, {"bias", {3}}},
      [](const std::vector<D>& in) {
        return ops::conv2d(in[0], in[1], in[2], {.stride = 1, .padding = 1, .groups = 3});
      });
  add("conv2d 1x1",
      {{"input", {2, 5, 3, 4}}, {"weight", {16, 5, 1, 1}}, {"bias", {16}}},
      [](const std::vector<D>& in) { return ops::conv2d(in[0], in[1], in[2]); });
  add("pixel_shuffle", {{"input", {2, 8, 3, 2}}},
      [](const std::vector<D>& in) { return ops::pixel_shuffle(in[0], 2); });
  add("pixel_unshuffle", {{"input", {1, 2, 6, 4}}},
      [](const std::vector<D>& in) { return ops::pixel_unshuffle(in[0], 2); });
  add("softmax_channels", {{"input", {2, 5, 3, 3}}},
      [](const std::vector<D>& in) { return ops::softmax_channels(in[0]); }, -3.0, 3.0);
  add("bilinear_resize up", {{"input", {1, 2, 3, 4}}},
      [](const std::vector<D>& in) { return ops::bilinear_resize(in[0], 7, 5); });
  add("bilinear_resize down", {{"input", {2, 1, 8, 8}}},
      [](const std::vector<D>& in) { return ops::bilinear_resize(in[0], 3, 5); });
  add("avg_pool2d", {{"input", {1, 2, 8, 8}}}, [](const std::vector<D>& in) {
    return ops::avg_pool2d(in[0], {.kernel_h = 4, .kernel_w = 4, .stride_h = 4, .stride_w = 4});
  });
  add("avg_pool2d padded", {{"input", {1, 2, 5, 6}}}, [](const std::vector<D>& in) {
    return ops::avg_pool2d(
        in[0], {.kernel_h = 3, .kernel_w = 3, .stride_h = 2, .stride_w = 2, .padding = 1});
  });
  add("relu", {{"input", {2, 3, 4, 4}}},
      [](const std::vector<D>& in) { return ops::relu(in[0]); });
  add("sigmoid", {{"input", {2, 3, 4, 4}}},
      [](const std::vector<D>& in) { return ops::sigmoid(in[0]); }, -4.0, 4.0);
  add("batchnorm2d train",
      {{"input", {3, 2, 4, 4}}, {"gamma", {2}}, {"beta", {2}}},
      [](const std::vector<D>& in) {
        D rm({in[0].size(1)}, 0.0), rv({in[0].size(1)}, 1.0);
        return ops::batchnorm2d(in[0], in[1], in[2], rm, rv, {.training = true});
      });
  add("batchnorm2d eval",
      {{"input", {2, 2, 3, 3}}, {"gamma", {2}}, {"beta", {2}}},
      [](const std::vector<D>& in) {
        D rm({2}, std::vector<double>{0.1, -0.2}), rv({2}, std::vector<double>{0.5, 2.0});
        return ops::batchnorm2d(in[0], in[1], in[2], rm, rv, {.training = false});
      });
  add("dense", {{"input", {2, 6, 3, 3}}, {"weight", {4, 6}}, {"bias", {4}}},
      [](const std::vector<D>& in) { return ops::dense(in[0], in[1], in[2]); });
  add("concat_channels",
      {{"a", {2, 1, 4, 4}}, {"b", {2, 3, 4, 4}}, {"c", {2, 2, 4, 4}}},
      [](const std::vector<D>& in) {
        return ops::concat_channels<double>(std::span<const D>(in));
      });
  add("hadamard", {{"a", {2, 3, 4, 4}}, {"b", {2, 3, 4, 4}}},
      [](const std::vector<D>& in) { return ops::hadamard(in[0], in[1]); });
  add("add", {{"a", {2, 3, 4, 4}}, {"b", {2, 3, 4, 4}}},
      [](const std::vector<D>& in) { return ops::add(in[0], in[1]); });
  add("scale", {{"input", {2, 3, 2, 2}}},
      [](const std::vector<D>& in) { return ops::scale(in[0], 80.0); });
  add("sum_channels", {{"input", {2, 5, 3, 3}}},
      [](const std::vector<D>& in) { return ops::sum_channels(in[0]); });
  add("mean", {{"input", {2, 3, 4, 4}}},
      [](const std::vector<D>& in) { return ops::mean(in[0]); });
  add("crop2d", {{"input", {1, 2, 6, 7}}},
      [](const std::vector<D>& in) { return ops::crop2d(in[0], 1, 2, 4, 3); });
  return cases;
}

}  // namespace banet
