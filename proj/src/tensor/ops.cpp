#include "banet/tensor/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "banet/errors.hpp"

namespace banet::ops {

namespace {

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMatrix<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMatrix<T>>;

template <typename T>
void require_dim(const Tensor<T>& t, int dim, const char* op) {
  if (!t.defined() || t.dim() != dim) {
    throw ConfigError(std::string(op) + ": expected a " + std::to_string(dim) +
                      "-D tensor, got " +
                      (t.defined() ? shape_string(t.shape()) : "undefined"));
  }
}

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ConfigError(std::string(op) + ": shape mismatch " +
                      shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  }
}

struct ConvGeometry {
  std::int64_t batch, channels, height, width;
  std::int64_t out_channels, kernel, out_h, out_w;
  std::int64_t stride, padding, groups;
  std::int64_t group_in, group_out;

  std::int64_t col_rows() const { return group_in * kernel * kernel; }
  std::int64_t col_cols() const { return out_h * out_w; }
  bool is_pointwise() const {
    return kernel == 1 && stride == 1 && padding == 0;
  }
};

template <typename T>
void im2col(const T* x, const ConvGeometry& g, T* cols) {
  const auto hw_out = g.col_cols();
  for (std::int64_t c = 0; c < g.group_in; ++c) {
    const T* plane = x + c * g.height * g.width;
    for (std::int64_t ky = 0; ky < g.kernel; ++ky) {
      for (std::int64_t kx = 0; kx < g.kernel; ++kx) {
        T* row = cols + ((c * g.kernel + ky) * g.kernel + kx) * hw_out;
        for (std::int64_t oy = 0; oy < g.out_h; ++oy) {
          const std::int64_t iy = oy * g.stride - g.padding + ky;
          T* dst = row + oy * g.out_w;
          if (iy < 0 || iy >= g.height) {
            std::fill(dst, dst + g.out_w, T(0));
            continue;
          }
          const T* src = plane + iy * g.width;
          for (std::int64_t ox = 0; ox < g.out_w; ++ox) {
            const std::int64_t ix = ox * g.stride - g.padding + kx;
            dst[ox] = (ix >= 0 && ix < g.width) ? src[ix] : T(0);
          }
        }
      }
    }
  }
}

template <typename T>
void col2im(const T* cols, const ConvGeometry& g, T* dx) {
  const auto hw_out = g.col_cols();
  for (std::int64_t c = 0; c < g.group_in; ++c) {
    T* plane = dx + c * g.height * g.width;
    for (std::int64_t ky = 0; ky < g.kernel; ++ky) {
      for (std::int64_t kx = 0; kx < g.kernel; ++kx) {
        const T* row = cols + ((c * g.kernel + ky) * g.kernel + kx) * hw_out;
        for (std::int64_t oy = 0; oy < g.out_h; ++oy) {
          const std::int64_t iy = oy * g.stride - g.padding + ky;
          if (iy < 0 || iy >= g.height) continue;
          const T* src = row + oy * g.out_w;
          T* dst = plane + iy * g.width;
          for (std::int64_t ox = 0; ox < g.out_w; ++ox) {
            const std::int64_t ix = ox * g.stride - g.padding + kx;
            if (ix >= 0 && ix < g.width) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

template <typename T>
ConvGeometry conv_geometry(const Tensor<T>& input, const Tensor<T>& weight,
                           const Tensor<T>& bias, const Conv2dOptions& opt) {
  require_dim(input, 4, "conv2d input");
  require_dim(weight, 4, "conv2d weight");
  auto mismatch = [&](const std::string& why) {
    return ConfigError("conv2d: " + why + " (input " +
                       shape_string(input.shape()) + ", weight " +
                       shape_string(weight.shape()) + ")");
  };
  if (opt.stride < 1 || opt.padding < 0 || opt.groups < 1) {
    throw mismatch("stride must be >= 1, padding >= 0, groups >= 1");
  }
  ConvGeometry g{};
  g.batch = input.size(0);
  g.channels = input.size(1);
  g.height = input.size(2);
  g.width = input.size(3);
  g.out_channels = weight.size(0);
  g.kernel = weight.size(2);
  g.stride = opt.stride;
  g.padding = opt.padding;
  g.groups = opt.groups;
  if (weight.size(3) != g.kernel) throw mismatch("kernel must be square");
  if (g.channels % g.groups != 0 || g.out_channels % g.groups != 0) {
    throw mismatch("channels not divisible by groups");
  }
  g.group_in = g.channels / g.groups;
  g.group_out = g.out_channels / g.groups;
  if (weight.size(1) != g.group_in) throw mismatch("input channel mismatch");
  if (bias.defined() && (bias.dim() != 1 || bias.size(0) != g.out_channels)) {
    throw mismatch("bias must have shape (" + std::to_string(g.out_channels) +
                   "), got " + shape_string(bias.shape()));
  }
  const auto span_h = g.height + 2 * g.padding - g.kernel;
  const auto span_w = g.width + 2 * g.padding - g.kernel;
  if (span_h < 0 || span_w < 0) throw mismatch("kernel larger than padded input");
  if (span_h % g.stride != 0 || span_w % g.stride != 0) {
    throw mismatch("output size is not an exact integer for stride " +
                   std::to_string(g.stride) + ", padding " +
                   std::to_string(g.padding));
  }
  g.out_h = span_h / g.stride + 1;
  g.out_w = span_w / g.stride + 1;
  return g;
}

}  // namespace

template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weight,
                 const Tensor<T>& bias, Conv2dOptions options) {
  const ConvGeometry g = conv_geometry(input, weight, bias, options);
  const auto rows = g.col_rows();
  const auto cols_n = g.col_cols();
  const auto in_plane = g.group_in * g.height * g.width;
  const auto out_plane = g.group_out * cols_n;

  std::vector<T> out(static_cast<std::size_t>(g.batch * g.out_channels * cols_n));
  std::vector<T> cols(g.is_pointwise() ? 0 : static_cast<std::size_t>(rows * cols_n));
  const T* x = input.data().data();
  const T* w = weight.data().data();
  for (std::int64_t b = 0; b < g.batch; ++b) {
    for (std::int64_t grp = 0; grp < g.groups; ++grp) {
      const T* xg = x + (b * g.groups + grp) * in_plane;
      const T* col_ptr = xg;
      if (!g.is_pointwise()) {
        im2col(xg, g, cols.data());
        col_ptr = cols.data();
      }
      ConstMatMap<T> wm(w + grp * g.group_out * rows, g.group_out, rows);
      ConstMatMap<T> cm(col_ptr, rows, cols_n);
      MatMap<T> om(out.data() + (b * g.groups + grp) * out_plane, g.group_out, cols_n);
      om.noalias() = wm * cm;
    }
    if (bias.defined()) {
      const T* bv = bias.data().data();
      for (std::int64_t o = 0; o < g.out_channels; ++o) {
        T* plane = out.data() + (b * g.out_channels + o) * cols_n;
        for (std::int64_t i = 0; i < cols_n; ++i) plane[i] += bv[o];
      }
    }
  }

  std::vector<Tensor<T>> inputs{input, weight};
  if (bias.defined()) inputs.push_back(bias);
  return autograd::make_result<T>(
      {g.batch, g.out_channels, g.out_h, g.out_w}, std::move(out),
      std::move(inputs), "conv2d",
      [input, weight, bias, g](std::span<const T> gout) {
        const auto rows = g.col_rows();
        const auto cols_n = g.col_cols();
        const auto in_plane = g.group_in * g.height * g.width;
        const auto out_plane = g.group_out * cols_n;
        auto dx = autograd::grad_slot(input);
        auto dw = autograd::grad_slot(weight);
        std::span<T> db;
        if (bias.defined()) db = autograd::grad_slot(bias);
        std::vector<T> cols(g.is_pointwise() ? 0 : static_cast<std::size_t>(rows * cols_n));
        RowMatrix<T> dcols;
        const T* x = input.data().data();
        const T* w = weight.data().data();
        for (std::int64_t b = 0; b < g.batch; ++b) {
          for (std::int64_t grp = 0; grp < g.groups; ++grp) {
            ConstMatMap<T> gm(gout.data() + (b * g.groups + grp) * out_plane,
                              g.group_out, cols_n);
            if (!dw.empty()) {
              const T* xg = x + (b * g.groups + grp) * in_plane;
              const T* col_ptr = xg;
              if (!g.is_pointwise()) {
                im2col(xg, g, cols.data());
                col_ptr = cols.data();
              }
              ConstMatMap<T> cm(col_ptr, rows, cols_n);
              MatMap<T> dwm(dw.data() + grp * g.group_out * rows, g.group_out, rows);
              dwm.noalias() += gm * cm.transpose();
            }
            if (!dx.empty()) {
              ConstMatMap<T> wm(w + grp * g.group_out * rows, g.group_out, rows);
              T* dxg = dx.data() + (b * g.groups + grp) * in_plane;
              if (g.is_pointwise()) {
                MatMap<T> dxm(dxg, rows, cols_n);
                dxm.noalias() += wm.transpose() * gm;
              } else {
                dcols.noalias() = wm.transpose() * gm;
                col2im(dcols.data(), g, dxg);
              }
            }
          }
          if (!db.empty()) {
            for (std::int64_t o = 0; o < g.out_channels; ++o) {
              const T* plane = gout.data() + (b * g.out_channels + o) * cols_n;
              T acc = T(0);
              for (std::int64_t i = 0; i < cols_n; ++i) acc += plane[i];
              db[o] += acc;
            }
          }
        }
      });
}

namespace {

// Shared index map for pixel_shuffle / pixel_unshuffle. Calls f(low, high)
// with the flat index into the (B, C*r*r, H, W) and (B, C, r*H, r*W) layouts.
template <typename F>
void for_each_shuffle_pair(std::int64_t batch, std::int64_t channels,
                           std::int64_t height, std::int64_t width,
                           std::int64_t r, F&& f) {
  const auto out_h = height * r;
  const auto out_w = width * r;
  for (std::int64_t b = 0; b < batch; ++b) {
    for (std::int64_t c = 0; c < channels; ++c) {
      for (std::int64_t dy = 0; dy < r; ++dy) {
        for (std::int64_t dx = 0; dx < r; ++dx) {
          const auto in_c = c * r * r + dy * r + dx;
          const auto low_base = ((b * channels * r * r) + in_c) * height * width;
          const auto high_base = (b * channels + c) * out_h * out_w;
          for (std::int64_t y = 0; y < height; ++y) {
            for (std::int64_t x = 0; x < width; ++x) {
              f(low_base + y * width + x,
                high_base + (y * r + dy) * out_w + (x * r + dx));
            }
          }
        }
      }
    }
  }
}

}  // namespace

template <typename T>
Tensor<T> pixel_shuffle(const Tensor<T>& input, int block) {
  require_dim(input, 4, "pixel_shuffle");
  const std::int64_t r = block;
  if (r < 1 || input.size(1) % (r * r) != 0) {
    throw ConfigError("pixel_shuffle: channel extent " +
                      std::to_string(input.size(1)) + " not divisible by r^2 = " +
                      std::to_string(r * r));
  }
  const auto B = input.size(0), C = input.size(1) / (r * r), H = input.size(2),
             W = input.size(3);
  std::vector<T> out(static_cast<std::size_t>(input.numel()));
  const T* x = input.data().data();
  for_each_shuffle_pair(B, C, H, W, r,
                        [&](std::int64_t lo, std::int64_t hi) { out[hi] = x[lo]; });
  return autograd::make_result<T>(
      {B, C, H * r, W * r}, std::move(out), {input}, "pixel_shuffle",
      [input, B, C, H, W, r](std::span<const T> g) {
        auto dx = autograd::grad_slot(input);
        for_each_shuffle_pair(B, C, H, W, r, [&](std::int64_t lo, std::int64_t hi) {
          dx[lo] += g[hi];
        });
      });
}

template <typename T>
Tensor<T> pixel_unshuffle(const Tensor<T>& input, int block) {
  require_dim(input, 4, "pixel_unshuffle");
  const std::int64_t r = block;
  if (r < 1 || input.size(2) % r != 0 || input.size(3) % r != 0) {
    throw ConfigError("pixel_unshuffle: spatial extent of " +
                      shape_string(input.shape()) + " not divisible by " +
                      std::to_string(r));
  }
  const auto B = input.size(0), C = input.size(1), H = input.size(2) / r,
             W = input.size(3) / r;
  std::vector<T> out(static_cast<std::size_t>(input.numel()));
  const T* x = input.data().data();
  for_each_shuffle_pair(B, C, H, W, r,
                        [&](std::int64_t lo, std::int64_t hi) { out[lo] = x[hi]; });
  return autograd::make_result<T>(
      {B, C * r * r, H, W}, std::move(out), {input}, "pixel_unshuffle",
      [input, B, C, H, W, r](std::span<const T> g) {
        auto dx = autograd::grad_slot(input);
        for_each_shuffle_pair(B, C, H, W, r, [&](std::int64_t lo, std::int64_t hi) {
          dx[hi] += g[lo];
        });
      });
}

template <typename T>
Tensor<T> softmax_channels(const Tensor<T>& input) {
  if (!input.defined() || input.dim() < 2) {
    throw ConfigError("softmax_channels: need at least 2 dims");
  }
  const auto B = input.size(0), C = input.size(1);
  const auto S = input.numel() / (B * C);
  std::vector<T> out(static_cast<std::size_t>(input.numel()));
  const T* x = input.data().data();
  for (std::int64_t b = 0; b < B; ++b) {
    const T* xb = x + b * C * S;
    T* yb = out.data() + b * C * S;
    for (std::int64_t s = 0; s < S; ++s) {
      T peak = xb[s];
      for (std::int64_t c = 1; c < C; ++c) peak = std::max(peak, xb[c * S + s]);
      T total = T(0);
      for (std::int64_t c = 0; c < C; ++c) {
        const T e = std::exp(xb[c * S + s] - peak);
        yb[c * S + s] = e;
        total += e;
      }
      for (std::int64_t c = 0; c < C; ++c) yb[c * S + s] /= total;
    }
  }
  return autograd::make_result_with_output<T>(
      input.shape(), std::move(out), {input}, "softmax_channels",
      [input, B, C, S](std::span<const T> y, std::span<const T> g) {
        auto dx = autograd::grad_slot(input);
        for (std::int64_t b = 0; b < B; ++b) {
          const auto base = b * C * S;
          for (std::int64_t s = 0; s < S; ++s) {
            T dot = T(0);
            for (std::int64_t c = 0; c < C; ++c) {
              dot += g[base + c * S + s] * y[base + c * S + s];
            }
            for (std::int64_t c = 0; c < C; ++c) {
              const auto i = base + c * S + s;
              dx[i] += y[i] * (g[i] - dot);
            }
          }
        }
      });
}

namespace {

struct LerpTap {
  std::int64_t lo, hi;
  double w;  // weight of `hi`
};

std::vector<LerpTap> align_corner_taps(std::int64_t in, std::int64_t out) {
  std::vector<LerpTap> taps(static_cast<std::size_t>(out));
  for (std::int64_t o = 0; o < out; ++o) {
    const double src =
        out > 1 ? static_cast<double>(o) * static_cast<double>(in - 1) /
                      static_cast<double>(out - 1)
                : 0.0;
    auto lo = static_cast<std::int64_t>(std::floor(src));
    lo = std::clamp<std::int64_t>(lo, 0, in - 1);
    const auto hi = std::min(lo + 1, in - 1);
    taps[static_cast<std::size_t>(o)] = {lo, hi, src - static_cast<double>(lo)};
  }
  return taps;
}

}  // namespace

template <typename T>
Tensor<T> bilinear_resize(const Tensor<T>& input, int out_h, int out_w) {
  require_dim(input, 4, "bilinear_resize");
  if (out_h < 1 || out_w < 1) {
    throw ConfigError("bilinear_resize: output size must be positive");
  }
  const auto B = input.size(0), C = input.size(1), H = input.size(2),
             W = input.size(3);
  auto ty = align_corner_taps(H, out_h);
  auto tx = align_corner_taps(W, out_w);
  std::vector<T> out(static_cast<std::size_t>(B * C * out_h * out_w));
  const T* x = input.data().data();
  for (std::int64_t p = 0; p < B * C; ++p) {
    const T* src = x + p * H * W;
    T* dst = out.data() + p * out_h * out_w;
    for (std::int64_t oy = 0; oy < out_h; ++oy) {
      const auto& a = ty[static_cast<std::size_t>(oy)];
      const T wy = static_cast<T>(a.w);
      for (std::int64_t ox = 0; ox < out_w; ++ox) {
        const auto& b = tx[static_cast<std::size_t>(ox)];
        const T wx = static_cast<T>(b.w);
        const T top = (T(1) - wx) * src[a.lo * W + b.lo] + wx * src[a.lo * W + b.hi];
        const T bot = (T(1) - wx) * src[a.hi * W + b.lo] + wx * src[a.hi * W + b.hi];
        dst[oy * out_w + ox] = (T(1) - wy) * top + wy * bot;
      }
    }
  }
  return autograd::make_result<T>(
      {B, C, out_h, out_w}, std::move(out), {input}, "bilinear_resize",
      [input, ty = std::move(ty), tx = std::move(tx), B, C, H, W, out_h,
       out_w](std::span<const T> g) {
        auto dx = autograd::grad_slot(input);
        for (std::int64_t p = 0; p < B * C; ++p) {
          const T* gp = g.data() + p * out_h * out_w;
          T* dp = dx.data() + p * H * W;
          for (std::int64_t oy = 0; oy < out_h; ++oy) {
            const auto& a = ty[static_cast<std::size_t>(oy)];
            const T wy = static_cast<T>(a.w);
            for (std::int64_t ox = 0; ox < out_w; ++ox) {
              const auto& b = tx[static_cast<std::size_t>(ox)];
              const T wx = static_cast<T>(b.w);
              const T v = gp[oy * out_w + ox];
              dp[a.lo * W + b.lo] += (T(1) - wy) * (T(1) - wx) * v;
              dp[a.lo * W + b.hi] += (T(1) - wy) * wx * v;
              dp[a.hi * W + b.lo] += wy * (T(1) - wx) * v;
              dp[a.hi * W + b.hi] += wy * wx * v;
            }
          }
        }
      });
}

template <typename T>
Tensor<T> avg_pool2d(const Tensor<T>& input, Pool2dOptions opt) {
  require_dim(input, 4, "avg_pool2d");
  const auto B = input.size(0), C = input.size(1), H = input.size(2),
             W = input.size(3);
  if (opt.kernel_h < 1 || opt.kernel_w < 1 || opt.stride_h < 1 ||
      opt.stride_w < 1 || opt.padding < 0) {
    throw ConfigError("avg_pool2d: kernel and stride must be positive");
  }
  if (opt.kernel_h > H + 2 * opt.padding || opt.kernel_w > W + 2 * opt.padding) {
    throw ConfigError("avg_pool2d: kernel " + std::to_string(opt.kernel_h) + "x" +
                      std::to_string(opt.kernel_w) + " exceeds padded input " +
                      shape_string(input.shape()));
  }
  const auto out_h = (H + 2 * opt.padding - opt.kernel_h) / opt.stride_h + 1;
  const auto out_w = (W + 2 * opt.padding - opt.kernel_w) / opt.stride_w + 1;
  const T inv_area = T(1) / static_cast<T>(opt.kernel_h * opt.kernel_w);

  // Visits the in-bounds input cells of output cell (oy, ox).
  auto window = [=](std::int64_t oy, std::int64_t ox, auto&& f) {
    const auto y0 = oy * opt.stride_h - opt.padding;
    const auto x0 = ox * opt.stride_w - opt.padding;
    for (auto y = std::max<std::int64_t>(y0, 0);
         y < std::min<std::int64_t>(y0 + opt.kernel_h, H); ++y) {
      for (auto x = std::max<std::int64_t>(x0, 0);
           x < std::min<std::int64_t>(x0 + opt.kernel_w, W); ++x) {
        f(y * W + x);
      }
    }
  };

  std::vector<T> out(static_cast<std::size_t>(B * C * out_h * out_w));
  const T* x = input.data().data();
  for (std::int64_t p = 0; p < B * C; ++p) {
    const T* src = x + p * H * W;
    for (std::int64_t oy = 0; oy < out_h; ++oy) {
      for (std::int64_t ox = 0; ox < out_w; ++ox) {
        T acc = T(0);
        window(oy, ox, [&](std::int64_t i) { acc += src[i]; });
        out[static_cast<std::size_t>((p * out_h + oy) * out_w + ox)] = acc * inv_area;
      }
    }
  }
  return autograd::make_result<T>(
      {B, C, out_h, out_w}, std::move(out), {input}, "avg_pool2d",
      [input, window, B, C, H, W, out_h, out_w, inv_area](std::span<const T> g) {
        auto dx = autograd::grad_slot(input);
        for (std::int64_t p = 0; p < B * C; ++p) {
          T* dst = dx.data() + p * H * W;
          for (std::int64_t oy = 0; oy < out_h; ++oy) {
            for (std::int64_t ox = 0; ox < out_w; ++ox) {
              const T v = g[static_cast<std::size_t>((p * out_h + oy) * out_w + ox)] *
                          inv_area;
              window(oy, ox, [&](std::int64_t i) { dst[i] += v; });
            }
          }
        }
      });
}

template <typename T>
Tensor<T> relu(const Tensor<T>& input) {
  std::vector<T> out(input.data().begin(), input.data().end());
  for (auto& v : out) v = v < T(0) ? T(0) : v;  // NaN passes through
  return autograd::make_result<T>(
      input.shape(), std::move(out), {input}, "relu", [input](std::span<const T> g) {
        auto dx = autograd::grad_slot(input);
        const auto x = input.data();
        for (std::size_t i = 0; i < g.size(); ++i) {
          if (x[i] > T(0)) dx[i] += g[i];
        }
      });
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& input) {
  std::vector<T> out(input.data().begin(), input.data().end());
  for (auto& v : out) {
    // Split on sign so exp never overflows.
    if (v >= T(0)) {
      v = T(1) / (T(1) + std::exp(-v));
    } else {
      const T e = std::exp(v);
      v = e / (T(1) + e);
    }
    // Keep the open-interval range once exp saturates.
    v = std::clamp(v, std::numeric_limits<T>::min(),
                   T(1) - std::numeric_limits<T>::epsilon() / T(2));
  }
  return autograd::make_result_with_output<T>(
      input.shape(), std::move(out), {input}, "sigmoid",
      [input](std::span<const T> y, std::span<const T> g) {
        auto dx = autograd::grad_slot(input);
        for (std::size_t i = 0; i < g.size(); ++i) dx[i] += g[i] * y[i] * (T(1) - y[i]);
      });
}

template <typename T>
Tensor<T> batchnorm2d(const Tensor<T>& input, const Tensor<T>& gamma,
                      const Tensor<T>& beta, Tensor<T>& running_mean,
                      Tensor<T>& running_var, BatchNormOptions opt) {
  require_dim(input, 4, "batchnorm2d");
  const auto B = input.size(0), C = input.size(1), S = input.size(2) * input.size(3);
  auto check_vec = [&](const Tensor<T>& t, const char* what) {
    if (t.defined() && (t.dim() != 1 || t.size(0) != C)) {
      throw ConfigError(std::string("batchnorm2d: ") + what + " must have " +
                        std::to_string(C) + " entries, got " +
                        shape_string(t.shape()));
    }
  };
  check_vec(gamma, "gamma");
  check_vec(beta, "beta");
  if (!running_mean.defined() || !running_var.defined()) {
    throw ConfigError("batchnorm2d: running statistics are required");
  }
  check_vec(running_mean, "running_mean");
  check_vec(running_var, "running_var");

  const auto n = B * S;
  std::vector<T> mean(static_cast<std::size_t>(C)), inv_std(static_cast<std::size_t>(C));
  const T* x = input.data().data();
  if (opt.training) {
    auto rm = running_mean.mutable_data();
    auto rv = running_var.mutable_data();
    for (std::int64_t c = 0; c < C; ++c) {
      double acc = 0.0;
      for (std::int64_t b = 0; b < B; ++b) {
        const T* p = x + (b * C + c) * S;
        for (std::int64_t i = 0; i < S; ++i) acc += p[i];
      }
      const double mu = acc / static_cast<double>(n);
      double sq = 0.0;
      for (std::int64_t b = 0; b < B; ++b) {
        const T* p = x + (b * C + c) * S;
        for (std::int64_t i = 0; i < S; ++i) {
          const double d = p[i] - mu;
          sq += d * d;
        }
      }
      const double var = sq / static_cast<double>(n);
      mean[c] = static_cast<T>(mu);
      inv_std[c] = static_cast<T>(1.0 / std::sqrt(var + opt.eps));
      const double unbiased = n > 1 ? sq / static_cast<double>(n - 1) : var;
      rm[c] = static_cast<T>((1.0 - opt.momentum) * rm[c] + opt.momentum * mu);
      rv[c] = static_cast<T>((1.0 - opt.momentum) * rv[c] + opt.momentum * unbiased);
    }
  } else {
    const auto rm = running_mean.data();
    const auto rv = running_var.data();
    for (std::int64_t c = 0; c < C; ++c) {
      mean[c] = rm[c];
      inv_std[c] = static_cast<T>(1.0 / std::sqrt(static_cast<double>(rv[c]) + opt.eps));
    }
  }

  std::vector<T> out(static_cast<std::size_t>(input.numel()));
  for (std::int64_t b = 0; b < B; ++b) {
    for (std::int64_t c = 0; c < C; ++c) {
      const T g = gamma.defined() ? gamma.data()[c] : T(1);
      const T sh = beta.defined() ? beta.data()[c] : T(0);
      const auto base = (b * C + c) * S;
      for (std::int64_t i = 0; i < S; ++i) {
        out[base + i] = (x[base + i] - mean[c]) * inv_std[c] * g + sh;
      }
    }
  }

  std::vector<Tensor<T>> inputs{input};
  if (gamma.defined()) inputs.push_back(gamma);
  if (beta.defined()) inputs.push_back(beta);
  return autograd::make_result<T>(
      input.shape(), std::move(out), std::move(inputs), "batchnorm2d",
      [input, gamma, beta, mean = std::move(mean), inv_std = std::move(inv_std),
       training = opt.training, B, C, S](std::span<const T> gout) {
        auto dx = autograd::grad_slot(input);
        std::span<T> dgamma, dbeta;
        if (gamma.defined()) dgamma = autograd::grad_slot(gamma);
        if (beta.defined()) dbeta = autograd::grad_slot(beta);
        const T* x = input.data().data();
        const auto n = static_cast<T>(B * S);
        for (std::int64_t c = 0; c < C; ++c) {
          const T g = gamma.defined() ? gamma.data()[c] : T(1);
          T sum_dy = T(0), sum_dy_xhat = T(0);
          for (std::int64_t b = 0; b < B; ++b) {
            const auto base = (b * C + c) * S;
            for (std::int64_t i = 0; i < S; ++i) {
              const T xhat = (x[base + i] - mean[c]) * inv_std[c];
              sum_dy += gout[base + i];
              sum_dy_xhat += gout[base + i] * xhat;
            }
          }
          if (!dgamma.empty()) dgamma[c] += sum_dy_xhat;
          if (!dbeta.empty()) dbeta[c] += sum_dy;
          if (dx.empty()) continue;
          for (std::int64_t b = 0; b < B; ++b) {
            const auto base = (b * C + c) * S;
            for (std::int64_t i = 0; i < S; ++i) {
              const T dxhat = gout[base + i] * g;
              if (training) {
                const T xhat = (x[base + i] - mean[c]) * inv_std[c];
                dx[base + i] += inv_std[c] / n *
                                (n * dxhat - g * sum_dy - xhat * g * sum_dy_xhat);
              } else {
                dx[base + i] += dxhat * inv_std[c];
              }
            }
          }
        }
      });
}

template <typename T>
Tensor<T> dense(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias) {
  if (!input.defined() || input.dim() < 2) {
    throw ConfigError("dense: input needs at least 2 dims");
  }
  require_dim(weight, 2, "dense weight");
  const auto B = input.size(0), I = input.size(1), O = weight.size(0);
  if (weight.size(1) != I) {
    throw ConfigError("dense: input " + shape_string(input.shape()) +
                      " incompatible with weight " + shape_string(weight.shape()));
  }
  if (bias.defined() && (bias.dim() != 1 || bias.size(0) != O)) {
    throw ConfigError("dense: bias shape " + shape_string(bias.shape()));
  }
  const auto S = input.numel() / (B * I);
  Shape out_shape = input.shape();
  out_shape[1] = O;
  std::vector<T> out(static_cast<std::size_t>(B * O * S));
  ConstMatMap<T> wm(weight.data().data(), O, I);
  for (std::int64_t b = 0; b < B; ++b) {
    ConstMatMap<T> xm(input.data().data() + b * I * S, I, S);
    MatMap<T> om(out.data() + b * O * S, O, S);
    om.noalias() = wm * xm;
    if (bias.defined()) {
      for (std::int64_t o = 0; o < O; ++o) {
        for (std::int64_t s = 0; s < S; ++s) om(o, s) += bias.data()[o];
      }
    }
  }
  std::vector<Tensor<T>> inputs{input, weight};
  if (bias.defined()) inputs.push_back(bias);
  return autograd::make_result<T>(
      std::move(out_shape), std::move(out), std::move(inputs), "dense",
      [input, weight, bias, B, I, O, S](std::span<const T> g) {
        auto dx = autograd::grad_slot(input);
        auto dw = autograd::grad_slot(weight);
        std::span<T> db;
        if (bias.defined()) db = autograd::grad_slot(bias);
        ConstMatMap<T> wm(weight.data().data(), O, I);
        for (std::int64_t b = 0; b < B; ++b) {
          ConstMatMap<T> gm(g.data() + b * O * S, O, S);
          if (!dx.empty()) {
            MatMap<T> dxm(dx.data() + b * I * S, I, S);
            dxm.noalias() += wm.transpose() * gm;
          }
          if (!dw.empty()) {
            ConstMatMap<T> xm(input.data().data() + b * I * S, I, S);
            MatMap<T> dwm(dw.data(), O, I);
            dwm.noalias() += gm * xm.transpose();
          }
          if (!db.empty()) {
            for (std::int64_t o = 0; o < O; ++o) db[o] += gm.row(o).sum();
          }
        }
      });
}

template <typename T>
Tensor<T> concat_channels(std::span<const Tensor<T>> inputs) {
  if (inputs.empty()) throw ConfigError("concat_channels: no inputs");
  const auto& first = inputs.front();
  if (first.dim() < 2) throw ConfigError("concat_channels: need at least 2 dims");
  const auto B = first.size(0);
  const auto S = first.numel() / (B * first.size(1));
  std::int64_t total_c = 0;
  for (const auto& t : inputs) {
    bool ok = t.dim() == first.dim() && t.size(0) == B;
    for (int d = 2; ok && d < first.dim(); ++d) ok = t.size(d) == first.size(d);
    if (!ok) {
      throw ConfigError("concat_channels: non-channel extents differ: " +
                        shape_string(first.shape()) + " vs " + shape_string(t.shape()));
    }
    total_c += t.size(1);
  }
  Shape out_shape = first.shape();
  out_shape[1] = total_c;
  std::vector<T> out(static_cast<std::size_t>(B * total_c * S));
  std::vector<std::int64_t> offsets;
  std::int64_t offset = 0;
  for (const auto& t : inputs) {
    offsets.push_back(offset);
    const auto c = t.size(1);
    for (std::int64_t b = 0; b < B; ++b) {
      std::copy_n(t.data().data() + b * c * S, c * S,
                  out.data() + (b * total_c + offset) * S);
    }
    offset += c;
  }
  std::vector<Tensor<T>> ins(inputs.begin(), inputs.end());
  return autograd::make_result<T>(
      std::move(out_shape), std::move(out), ins, "concat_channels",
      [ins, offsets = std::move(offsets), B, S, total_c](std::span<const T> g) {
        for (std::size_t k = 0; k < ins.size(); ++k) {
          auto dx = autograd::grad_slot(ins[k]);
          if (dx.empty()) continue;
          const auto c = ins[k].size(1);
          for (std::int64_t b = 0; b < B; ++b) {
            const T* src = g.data() + (b * total_c + offsets[k]) * S;
            T* dst = dx.data() + b * c * S;
            for (std::int64_t i = 0; i < c * S; ++i) dst[i] += src[i];
          }
        }
      });
}

template <typename T>
Tensor<T> hadamard(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "hadamard");
  std::vector<T> out(static_cast<std::size_t>(a.numel()));
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * b.data()[i];
  return autograd::make_result<T>(
      a.shape(), std::move(out), {a, b}, "hadamard", [a, b](std::span<const T> g) {
        auto da = autograd::grad_slot(a);
        for (std::size_t i = 0; i < da.size(); ++i) da[i] += g[i] * b.data()[i];
        auto db = autograd::grad_slot(b);
        for (std::size_t i = 0; i < db.size(); ++i) db[i] += g[i] * a.data()[i];
      });
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "add");
  std::vector<T> out(static_cast<std::size_t>(a.numel()));
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
  return autograd::make_result<T>(a.shape(), std::move(out), {a, b}, "add",
                                  [a, b](std::span<const T> g) {
                                    autograd::accumulate(a, g);
                                    autograd::accumulate(b, g);
                                  });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& input, T factor) {
  std::vector<T> out(input.data().begin(), input.data().end());
  for (auto& v : out) v *= factor;
  return autograd::make_result<T>(input.shape(), std::move(out), {input}, "scale",
                                  [input, factor](std::span<const T> g) {
                                    auto dx = autograd::grad_slot(input);
                                    for (std::size_t i = 0; i < dx.size(); ++i) {
                                      dx[i] += g[i] * factor;
                                    }
                                  });
}

template <typename T>
Tensor<T> sum_channels(const Tensor<T>& input) {
  if (!input.defined() || input.dim() < 2) {
    throw ConfigError("sum_channels: need at least 2 dims");
  }
  const auto B = input.size(0), C = input.size(1);
  const auto S = input.numel() / (B * C);
  Shape out_shape = input.shape();
  out_shape[1] = 1;
  std::vector<T> out(static_cast<std::size_t>(B * S), T(0));
  const T* x = input.data().data();
  for (std::int64_t b = 0; b < B; ++b) {
    for (std::int64_t c = 0; c < C; ++c) {
      for (std::int64_t s = 0; s < S; ++s) out[b * S + s] += x[(b * C + c) * S + s];
    }
  }
  return autograd::make_result<T>(
      std::move(out_shape), std::move(out), {input}, "sum_channels",
      [input, B, C, S](std::span<const T> g) {
        auto dx = autograd::grad_slot(input);
        for (std::int64_t b = 0; b < B; ++b) {
          for (std::int64_t c = 0; c < C; ++c) {
            for (std::int64_t s = 0; s < S; ++s) dx[(b * C + c) * S + s] += g[b * S + s];
          }
        }
      });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& input) {
  T acc = T(0);
  for (T v : input.data()) acc += v;
  return autograd::make_result<T>({}, {acc}, {input}, "sum",
                                  [input](std::span<const T> g) {
                                    auto dx = autograd::grad_slot(input);
                                    for (auto& v : dx) v += g[0];
                                  });
}

template <typename T>
Tensor<T> mean(const Tensor<T>& input) {
  return scale(sum(input), T(1) / static_cast<T>(input.numel()));
}

template <typename T>
Tensor<T> crop2d(const Tensor<T>& input, int top, int left, int height, int width) {
  require_dim(input, 4, "crop2d");
  const auto B = input.size(0), C = input.size(1), H = input.size(2),
             W = input.size(3);
  if (top < 0 || left < 0 || height < 1 || width < 1 || top + height > H ||
      left + width > W) {
    throw ConfigError("crop2d: window out of bounds for " + shape_string(input.shape()));
  }
  std::vector<T> out(static_cast<std::size_t>(B * C * height * width));
  const T* x = input.data().data();
  for (std::int64_t p = 0; p < B * C; ++p) {
    for (std::int64_t y = 0; y < height; ++y) {
      std::copy_n(x + p * H * W + (top + y) * W + left, width,
                  out.data() + (p * height + y) * width);
    }
  }
  return autograd::make_result<T>(
      {B, C, height, width}, std::move(out), {input}, "crop2d",
      [input, B, C, H, W, top, left, height, width](std::span<const T> g) {
        auto dx = autograd::grad_slot(input);
        for (std::int64_t p = 0; p < B * C; ++p) {
          for (std::int64_t y = 0; y < height; ++y) {
            T* dst = dx.data() + p * H * W + (top + y) * W + left;
            const T* src = g.data() + (p * height + y) * width;
            for (std::int64_t x = 0; x < width; ++x) dst[x] += src[x];
          }
        }
      });
}

#define BANET_INSTANTIATE_OPS(T)                                                    \
  template Tensor<T> conv2d<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, \
                               Conv2dOptions);                                      \
  template Tensor<T> pixel_shuffle<T>(const Tensor<T>&, int);                       \
  template Tensor<T> pixel_unshuffle<T>(const Tensor<T>&, int);                     \
  template Tensor<T> softmax_channels<T>(const Tensor<T>&);                         \
  template Tensor<T> bilinear_resize<T>(const Tensor<T>&, int, int);                \
  template Tensor<T> avg_pool2d<T>(const Tensor<T>&, Pool2dOptions);                \
  template Tensor<T> relu<T>(const Tensor<T>&);                                     \
  template Tensor<T> sigmoid<T>(const Tensor<T>&);                                  \
  template Tensor<T> batchnorm2d<T>(const Tensor<T>&, const Tensor<T>&,             \
                                    const Tensor<T>&, Tensor<T>&, Tensor<T>&,       \
                                    BatchNormOptions);                              \
  template Tensor<T> dense<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&); \
  template Tensor<T> concat_channels<T>(std::span<const Tensor<T>>);                \
  template Tensor<T> hadamard<T>(const Tensor<T>&, const Tensor<T>&);               \
  template Tensor<T> add<T>(const Tensor<T>&, const Tensor<T>&);                    \
  template Tensor<T> scale<T>(const Tensor<T>&, T);                                 \
  template Tensor<T> sum_channels<T>(const Tensor<T>&);                             \
  template Tensor<T> sum<T>(const Tensor<T>&);                                      \
  template Tensor<T> mean<T>(const Tensor<T>&);                                     \
  template Tensor<T> crop2d<T>(const Tensor<T>&, int, int, int, int);
BANET_INSTANTIATE_OPS(float)
BANET_INSTANTIATE_OPS(double)
#undef BANET_INSTANTIATE_OPS

}  // namespace banet::ops
