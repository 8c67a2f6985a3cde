#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "banet/data/sample.hpp"

namespace banet {

// 16-bit single-channel PNG, raw = round(depth * scale), 0 = invalid.
// Valid depths are clamped to [1, 65535] raw units so they stay valid.
void save_depth_png16(const std::filesystem::path& path, const DepthMap& depth,
                      double scale = 256.0);
// Throws FileError if unreadable, FormatError unless 16-bit grayscale.
DepthMap load_depth_png16(const std::filesystem::path& path, double scale = 256.0);

// 8-bit RGB PNG.
void save_image_png(const std::filesystem::path& path, const Image& image);
// Accepts gray, RGB, palette and alpha variants at 8 or 16 bits.
Image load_image_png(const std::filesystem::path& path);

// 8-bit single-channel PNG, row-major.
void save_gray_png8(const std::filesystem::path& path, int height, int width,
                    const std::vector<std::uint8_t>& values);
std::vector<std::uint8_t> load_gray_png8(const std::filesystem::path& path, int* height,
                                         int* width);

// Flat binary record: 16-byte little-endian header (magic "BDA1", height,
// width, dtype code 1) followed by H*W float32 depths and H*W mask bytes.
void save_depth_array(const std::filesystem::path& path, const DepthMap& depth);
// Masks out pixels whose depth is non-positive or non-finite. Throws
// FormatError on a bad header or when the payload size disagrees with it.
DepthMap load_depth_array(const std::filesystem::path& path);

}  // namespace banet
