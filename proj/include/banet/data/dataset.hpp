#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "banet/data/augment.hpp"
#include "banet/data/scene.hpp"
#include "banet/tensor/tensor.hpp"

namespace banet {

// On-disk layout:
//   <root>/<split>/manifest.txt          one id per line
//   <root>/<split>/image/<id>.png        8-bit RGB
//   <root>/<split>/depth/<id>.png        16-bit depth (raw / 256 m), or
//   <root>/<split>/depth/<id>.bda        flat depth+mask record
void write_sample(const std::filesystem::path& root, const std::string& split,
                  const DepthSample& sample);
void write_manifest(const std::filesystem::path& root, const std::string& split,
                    const std::vector<std::string>& ids);

// Throws FileError if the split or its manifest is missing.
std::vector<std::string> read_manifest(const std::filesystem::path& root, const std::string& split);
DepthSample read_sample(const std::filesystem::path& root, const std::string& split,
                        const std::string& id, double d_max = 80.0);
std::vector<DepthSample> load_split(const std::filesystem::path& root, const std::string& split,
                                    double d_max = 80.0);

// Scene k of a stream derives its seed from (seed, stream, k).
std::uint64_t scene_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index);

std::vector<DepthSample> generate_samples(const SceneGenConfig& scene, int count,
                                          std::uint64_t seed, std::uint64_t stream,
                                          const std::string& id_prefix);

// Writes `train_count` and `val_count` scenes plus manifests under `root`.
void generate_dataset(const std::filesystem::path& root, const SceneGenConfig& scene,
                      int train_count, int val_count, std::uint64_t seed);

struct Batch {
  Tensor<float> image;  // (B, 3, H, W)
  Tensor<float> depth;  // (B, 1, H, W) meters
  std::vector<std::uint8_t> mask;
  std::vector<std::string> ids;
};

// All samples must share one size.
Batch make_batch(std::span<const DepthSample> samples);

// Deterministic batching: epoch e's order and augmentations depend only on
// (seed, e). The last batch may be short.
class BatchLoader {
 public:
  BatchLoader(std::span<const DepthSample> samples, int batch_size, bool shuffle,
              std::optional<AugmentFlags> augment, std::uint64_t seed);

  std::vector<Batch> epoch(int index) const;
  int batches_per_epoch() const;

 private:
  std::span<const DepthSample> samples_;
  int batch_size_;
  bool shuffle_;
  std::optional<AugmentFlags> augment_;
  std::uint64_t seed_;
};

}  // namespace banet
