#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "banet/data/io.hpp"
#include "banet/errors.hpp"

namespace banet {

namespace {

constexpr char kMagic[4] = {'B', 'D', 'A', '1'};
constexpr std::uint32_t kFloat32WithMask = 1;

void put_u32(std::vector<char>& out, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xff));
}

std::uint32_t get_u32(const char* p) {
  std::uint32_t v = 0;
  for (int b = 0; b < 4; ++b) v |= std::uint32_t(static_cast<unsigned char>(p[b])) << (8 * b);
  return v;
}

}  // namespace

void DepthSample::validate() const {
  const auto n = static_cast<std::size_t>(image.height) * static_cast<std::size_t>(image.width);
  if (image.rgb.size() != 3 * n || depth.height != image.height || depth.width != image.width ||
      depth.depth.size() != n || depth.mask.size() != n) {
    throw ConfigError("sample " + id + ": image and depth buffers disagree in size");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (depth.mask[i] && !(depth.depth[i] > 0.0f)) {
      throw ConfigError("sample " + id + ": non-positive depth under the mask");
    }
  }
}

void save_depth_array(const std::filesystem::path& path, const DepthMap& d) {
  const std::size_t n = static_cast<std::size_t>(d.height) * static_cast<std::size_t>(d.width);
  if (d.height < 1 || d.width < 1 || d.depth.size() != n || d.mask.size() != n) {
    throw ConfigError("save_depth_array: depth and mask do not match " + std::to_string(d.height) +
                      "x" + std::to_string(d.width));
  }
  std::vector<char> out(kMagic, kMagic + 4);
  put_u32(out, static_cast<std::uint32_t>(d.height));
  put_u32(out, static_cast<std::uint32_t>(d.width));
  put_u32(out, kFloat32WithMask);
  for (float v : d.depth) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    put_u32(out, bits);
  }
  for (auto m : d.mask) out.push_back(static_cast<char>(m ? 1 : 0));

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw FileError("cannot open " + path.string() + " for writing");
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw FileError("failed to write " + path.string());
}

DepthMap load_depth_array(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw FileError("cannot open " + path.string() + " for reading");
  const std::vector<char> in((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (in.size() < 16 || std::memcmp(in.data(), kMagic, 4) != 0) {
    throw FormatError(path.string() + ": not a depth array record");
  }
  DepthMap d;
  d.height = static_cast<int>(get_u32(in.data() + 4));
  d.width = static_cast<int>(get_u32(in.data() + 8));
  if (get_u32(in.data() + 12) != kFloat32WithMask) {
    throw FormatError(path.string() + ": unsupported dtype code " +
                      std::to_string(get_u32(in.data() + 12)));
  }
  const std::size_t n = static_cast<std::size_t>(d.height) * static_cast<std::size_t>(d.width);
  if (d.height < 1 || d.width < 1 || in.size() != 16 + 5 * n) {
    throw FormatError(path.string() + ": depth and mask payload (" +
                      std::to_string(in.size() - 16) + " bytes) does not match " +
                      std::to_string(d.height) + "x" + std::to_string(d.width));
  }
  d.depth.resize(n);
  d.mask.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint32_t bits = get_u32(in.data() + 16 + 4 * i);
    std::memcpy(&d.depth[i], &bits, sizeof bits);
    const bool usable = std::isfinite(d.depth[i]) && d.depth[i] > 0.0f;
    d.mask[i] = (in[16 + 4 * n + i] != 0 && usable) ? 1 : 0;
  }
  return d;
}

}  // namespace banet
