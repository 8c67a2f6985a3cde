#include "banet/data/resolution.hpp"

#include "banet/errors.hpp"
#include "banet/tensor/ops.hpp"

namespace banet {

PadRecord plan_input(int height, int width) {
  if (height < 1 || width < 1) throw ConfigError("plan_input: empty image");
  PadRecord p;
  p.content_height = (height + 1) / 2;
  p.content_width = (width + 1) / 2;
  p.pad_bottom = (32 - p.content_height % 32) % 32;
  p.pad_right = (32 - p.content_width % 32) % 32;
  return p;
}

template <typename T>
PreparedInput<T> preprocess(const Tensor<T>& images) {
  if (images.dim() != 4) {
    throw ConfigError("preprocess expects (B, C, H, W), got " + shape_string(images.shape()));
  }
  NoGradGuard no_grad;
  const auto B = images.size(0), C = images.size(1);
  PreparedInput<T> out;
  out.pad = plan_input(static_cast<int>(images.size(2)), static_cast<int>(images.size(3)));
  const auto& p = out.pad;
  const auto half = ops::bilinear_resize(images.detach(), p.content_height, p.content_width);
  const std::int64_t H = p.content_height + p.pad_bottom, W = p.content_width + p.pad_right;
  std::vector<T> data(static_cast<std::size_t>(B * C * H * W), T(0));
  const auto src = half.data();
  for (std::int64_t plane = 0; plane < B * C; ++plane) {
    for (int y = 0; y < p.content_height; ++y) {
      for (int x = 0; x < p.content_width; ++x) {
        data[static_cast<std::size_t>((plane * H + y) * W + x)] =
            src[static_cast<std::size_t>((plane * p.content_height + y) * p.content_width + x)];
      }
    }
  }
  out.image = Tensor<T>({B, C, H, W}, std::move(data));
  return out;
}

template <typename T>
Tensor<T> postprocess(const Tensor<T>& prediction, const PadRecord& pad, int gt_height,
                      int gt_width) {
  auto content = ops::crop2d(prediction, 0, 0, pad.content_height, pad.content_width);
  if (gt_height == pad.content_height && gt_width == pad.content_width) return content;
  return ops::bilinear_resize(content, gt_height, gt_width);
}

template PreparedInput<float> preprocess(const Tensor<float>&);
template PreparedInput<double> preprocess(const Tensor<double>&);
template Tensor<float> postprocess(const Tensor<float>&, const PadRecord&, int, int);
template Tensor<double> postprocess(const Tensor<double>&, const PadRecord&, int, int);

}  // namespace banet
