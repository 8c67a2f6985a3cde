#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <string>

#include "banet/data/io.hpp"
#include "banet/errors.hpp"

namespace banet {

namespace {

struct PngError {
  char message[256] = "";
};

void on_error(png_structp png, png_const_charp msg) {
  auto* err = static_cast<PngError*>(png_get_error_ptr(png));
  std::snprintf(err->message, sizeof(err->message), "%s", msg);
  png_longjmp(png, 1);
}

void on_warning(png_structp, png_const_charp) {}

struct RawPng {
  int width = 0;
  int height = 0;
  int channels = 0;
  int bit_depth = 0;   // as stored in the file
  int color_type = 0;  // as stored in the file
  std::vector<std::uint8_t> bytes;
  std::vector<png_bytep> rows;
};

// libpng reports errors by longjmp; nothing with a destructor lives in this
// frame past the setjmp, output buffers are owned by the caller.
bool read_png_stream(std::FILE* fp, bool to_rgb8, RawPng* out, PngError* err) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, err, on_error, on_warning);
  if (!png) return false;
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    return false;
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    return false;
  }
  png_init_io(png, fp);
  png_read_info(png, info);
  out->bit_depth = png_get_bit_depth(png, info);
  out->color_type = png_get_color_type(png, info);
  if (to_rgb8) {
    png_set_expand(png);
    png_set_strip_16(png);
    png_set_strip_alpha(png);
    png_set_gray_to_rgb(png);
  }
  png_read_update_info(png, info);
  out->width = static_cast<int>(png_get_image_width(png, info));
  out->height = static_cast<int>(png_get_image_height(png, info));
  out->channels = png_get_channels(png, info);
  const std::size_t stride = png_get_rowbytes(png, info);
  out->bytes.resize(stride * static_cast<std::size_t>(out->height));
  out->rows.resize(static_cast<std::size_t>(out->height));
  for (int y = 0; y < out->height; ++y) out->rows[y] = out->bytes.data() + stride * y;
  png_read_image(png, out->rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return true;
}

bool write_png_stream(std::FILE* fp, int width, int height, int bit_depth, int color_type,
                      std::vector<png_bytep>* rows, PngError* err) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, err, on_error, on_warning);
  if (!png) return false;
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    return false;
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    return false;
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height),
               bit_depth, color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows->data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return true;
}

RawPng read_png(const std::filesystem::path& path, bool to_rgb8) {
  std::FILE* fp = std::fopen(path.c_str(), "rb");
  if (!fp) throw FileError("cannot open " + path.string() + " for reading");
  RawPng raw;
  PngError err;
  const bool ok = read_png_stream(fp, to_rgb8, &raw, &err);
  std::fclose(fp);
  if (!ok) throw FormatError(path.string() + ": not a readable PNG (" + err.message + ")");
  return raw;
}

void write_png(const std::filesystem::path& path, int width, int height, int bit_depth,
               int color_type, std::vector<std::uint8_t>& bytes, std::size_t stride) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::FILE* fp = std::fopen(path.c_str(), "wb");
  if (!fp) throw FileError("cannot open " + path.string() + " for writing");
  std::vector<png_bytep> rows(static_cast<std::size_t>(height));
  for (int y = 0; y < height; ++y) rows[y] = bytes.data() + stride * y;
  PngError err;
  const bool ok = write_png_stream(fp, width, height, bit_depth, color_type, &rows, &err);
  const bool closed = std::fclose(fp) == 0;
  if (!ok || !closed) throw FileError("failed to write " + path.string() + " " + err.message);
}

void check_map(const DepthMap& d, const char* what) {
  const auto n = static_cast<std::size_t>(d.height) * static_cast<std::size_t>(d.width);
  if (d.height < 1 || d.width < 1 || d.depth.size() != n || d.mask.size() != n) {
    throw ConfigError(std::string(what) + ": depth map buffers do not match " +
                      std::to_string(d.height) + "x" + std::to_string(d.width));
  }
}

}  // namespace

void save_depth_png16(const std::filesystem::path& path, const DepthMap& d, double scale) {
  check_map(d, "save_depth_png16");
  const std::size_t n = d.depth.size();
  std::vector<std::uint8_t> bytes(2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    std::uint16_t raw = 0;
    if (d.mask[i] && std::isfinite(d.depth[i]) && d.depth[i] > 0) {
      raw = static_cast<std::uint16_t>(
          std::clamp(std::lround(double(d.depth[i]) * scale), 1L, 65535L));
    }
    bytes[2 * i] = static_cast<std::uint8_t>(raw >> 8);
    bytes[2 * i + 1] = static_cast<std::uint8_t>(raw & 0xff);
  }
  write_png(path, d.width, d.height, 16, PNG_COLOR_TYPE_GRAY, bytes,
            2 * static_cast<std::size_t>(d.width));
}

DepthMap load_depth_png16(const std::filesystem::path& path, double scale) {
  const auto raw = read_png(path, false);
  if (raw.bit_depth != 16 || raw.color_type != PNG_COLOR_TYPE_GRAY) {
    throw FormatError(path.string() + ": expected a 16-bit grayscale depth PNG, got bit depth " +
                      std::to_string(raw.bit_depth) + " color type " +
                      std::to_string(raw.color_type));
  }
  DepthMap d;
  d.height = raw.height;
  d.width = raw.width;
  const std::size_t n = static_cast<std::size_t>(raw.height) * raw.width;
  d.depth.resize(n);
  d.mask.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const unsigned v = (unsigned(raw.bytes[2 * i]) << 8) | raw.bytes[2 * i + 1];
    d.mask[i] = v != 0;
    d.depth[i] = static_cast<float>(v / scale);
  }
  return d;
}

void save_image_png(const std::filesystem::path& path, const Image& image) {
  const std::size_t plane = static_cast<std::size_t>(image.height) * image.width;
  if (image.rgb.size() != 3 * plane) throw ConfigError("save_image_png: buffer is not 3xHxW");
  std::vector<std::uint8_t> bytes(3 * plane);
  for (std::size_t i = 0; i < plane; ++i) {
    for (int c = 0; c < 3; ++c) {
      const float v = std::clamp(image.rgb[c * plane + i], 0.0f, 1.0f);
      bytes[3 * i + c] = static_cast<std::uint8_t>(std::lround(v * 255.0f));
    }
  }
  write_png(path, image.width, image.height, 8, PNG_COLOR_TYPE_RGB, bytes,
            3 * static_cast<std::size_t>(image.width));
}

Image load_image_png(const std::filesystem::path& path) {
  const auto raw = read_png(path, true);
  Image img;
  img.height = raw.height;
  img.width = raw.width;
  const std::size_t plane = static_cast<std::size_t>(raw.height) * raw.width;
  img.rgb.resize(3 * plane);
  for (std::size_t i = 0; i < plane; ++i) {
    for (int c = 0; c < 3; ++c) img.rgb[c * plane + i] = raw.bytes[3 * i + c] / 255.0f;
  }
  return img;
}

void save_gray_png8(const std::filesystem::path& path, int height, int width,
                    const std::vector<std::uint8_t>& values) {
  if (values.size() != static_cast<std::size_t>(height) * width) {
    throw ConfigError("save_gray_png8: buffer is not HxW");
  }
  auto bytes = values;
  write_png(path, width, height, 8, PNG_COLOR_TYPE_GRAY, bytes, static_cast<std::size_t>(width));
}

std::vector<std::uint8_t> load_gray_png8(const std::filesystem::path& path, int* height,
                                         int* width) {
  const auto raw = read_png(path, false);
  if (raw.bit_depth != 8 || raw.color_type != PNG_COLOR_TYPE_GRAY) {
    throw FormatError(path.string() + ": expected an 8-bit grayscale PNG");
  }
  *height = raw.height;
  *width = raw.width;
  return raw.bytes;
}

}  // namespace banet
