#include "banet/data/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>

#include "banet/data/io.hpp"
#include "banet/errors.hpp"

namespace banet {

namespace fs = std::filesystem;

void write_sample(const fs::path& root, const std::string& split, const DepthSample& sample) {
  sample.validate();
  save_image_png(root / split / "image" / (sample.id + ".png"), sample.image);
  save_depth_png16(root / split / "depth" / (sample.id + ".png"), sample.depth);
}

void write_manifest(const fs::path& root, const std::string& split,
                    const std::vector<std::string>& ids) {
  fs::create_directories(root / split);
  const auto path = root / split / "manifest.txt";
  std::ofstream f(path);
  if (!f) throw FileError("cannot write " + path.string());
  for (const auto& id : ids) f << id << '\n';
  if (!f) throw FileError("failed to write " + path.string());
}

std::vector<std::string> read_manifest(const fs::path& root, const std::string& split) {
  const auto path = root / split / "manifest.txt";
  std::ifstream f(path);
  if (!f) throw FileError("dataset split '" + split + "' has no manifest at " + path.string());
  std::vector<std::string> ids;
  std::string line;
  while (std::getline(f, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (!line.empty()) ids.push_back(line);
  }
  return ids;
}

DepthSample read_sample(const fs::path& root, const std::string& split, const std::string& id,
                        double d_max) {
  DepthSample s;
  s.id = id;
  s.dataset = root.filename().string();
  s.d_max = d_max;
  s.image = load_image_png(root / split / "image" / (id + ".png"));
  const auto png = root / split / "depth" / (id + ".png");
  const auto array = root / split / "depth" / (id + ".bda");
  if (fs::exists(png)) {
    s.depth = load_depth_png16(png);
  } else if (fs::exists(array)) {
    s.depth = load_depth_array(array);
  } else {
    throw FileError("no depth file for '" + id + "' under " + (root / split / "depth").string());
  }
  if (s.depth.height != s.image.height || s.depth.width != s.image.width) {
    throw FormatError("sample '" + id + "': image and depth sizes differ");
  }
  return s;
}

std::vector<DepthSample> load_split(const fs::path& root, const std::string& split,
                                    double d_max) {
  std::vector<DepthSample> out;
  for (const auto& id : read_manifest(root, split)) out.push_back(read_sample(root, split, id, d_max));
  return out;
}

std::uint64_t scene_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  // splitmix64 over a combined key
  std::uint64_t z = seed * 0x9e3779b97f4a7c15ULL + stream * 0xbf58476d1ce4e5b9ULL + index + 1;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::vector<DepthSample> generate_samples(const SceneGenConfig& scene, int count,
                                          std::uint64_t seed, std::uint64_t stream,
                                          const std::string& id_prefix) {
  std::vector<DepthSample> out;
  for (int k = 0; k < count; ++k) {
    SceneGenConfig cfg = scene;
    cfg.seed = scene_seed(seed, stream, static_cast<std::uint64_t>(k));
    auto s = generate_synthetic_scene(cfg);
    char id[32];
    std::snprintf(id, sizeof id, "%s%05d", id_prefix.c_str(), k);
    s.id = id;
    out.push_back(std::move(s));
  }
  return out;
}

void generate_dataset(const fs::path& root, const SceneGenConfig& scene, int train_count,
                      int val_count, std::uint64_t seed) {
  scene.validate();
  if (train_count < 0 || val_count < 0) throw ConfigError("sample counts must be non-negative");
  std::error_code ec;
  fs::create_directories(root, ec);
  if (ec || !fs::is_directory(root)) throw FileError("cannot create dataset root " + root.string());
  const std::pair<const char*, int> splits[] = {{"train", train_count}, {"val", val_count}};
  for (std::uint64_t stream = 0; stream < 2; ++stream) {
    const auto& [split, count] = splits[stream];
    std::vector<std::string> ids;
    for (const auto& s : generate_samples(scene, count, seed, stream, "")) {
      write_sample(root, split, s);
      ids.push_back(s.id);
    }
    write_manifest(root, split, ids);
  }
}

Batch make_batch(std::span<const DepthSample> samples) {
  if (samples.empty()) throw UsageError("make_batch: no samples");
  const int H = samples[0].height(), W = samples[0].width();
  const auto B = static_cast<std::int64_t>(samples.size());
  const std::size_t plane = static_cast<std::size_t>(H) * W;
  std::vector<float> image, depth;
  image.reserve(samples.size() * 3 * plane);
  depth.reserve(samples.size() * plane);
  Batch b;
  for (const auto& s : samples) {
    if (s.height() != H || s.width() != W) {
      throw ConfigError("make_batch: sample '" + s.id + "' is " + std::to_string(s.height()) +
                        "x" + std::to_string(s.width()) + ", batch is " + std::to_string(H) +
                        "x" + std::to_string(W));
    }
    s.validate();
    image.insert(image.end(), s.image.rgb.begin(), s.image.rgb.end());
    depth.insert(depth.end(), s.depth.depth.begin(), s.depth.depth.end());
    b.mask.insert(b.mask.end(), s.depth.mask.begin(), s.depth.mask.end());
    b.ids.push_back(s.id);
  }
  b.image = Tensor<float>({B, 3, H, W}, std::move(image));
  b.depth = Tensor<float>({B, 1, H, W}, std::move(depth));
  return b;
}

BatchLoader::BatchLoader(std::span<const DepthSample> samples, int batch_size, bool shuffle,
                         std::optional<AugmentFlags> augment, std::uint64_t seed)
    : samples_(samples), batch_size_(batch_size), shuffle_(shuffle), augment_(augment),
      seed_(seed) {
  if (batch_size < 1) throw ConfigError("batch size must be positive");
  if (samples.empty()) throw UsageError("BatchLoader: empty sample set");
}

int BatchLoader::batches_per_epoch() const {
  return static_cast<int>((samples_.size() + batch_size_ - 1) / batch_size_);
}

std::vector<Batch> BatchLoader::epoch(int index) const {
  Rng rng(scene_seed(seed_, 0x10ad, static_cast<std::uint64_t>(index)));
  std::vector<std::size_t> order(samples_.size());
  std::iota(order.begin(), order.end(), 0);
  if (shuffle_) std::shuffle(order.begin(), order.end(), rng);
  std::vector<Batch> out;
  for (std::size_t start = 0; start < order.size(); start += batch_size_) {
    std::vector<DepthSample> chunk;
    for (std::size_t k = start; k < std::min(order.size(), start + batch_size_); ++k) {
      const auto& s = samples_[order[k]];
      chunk.push_back(augment_ ? augment(s, rng, *augment_) : s);
    }
    out.push_back(make_batch(chunk));
  }
  return out;
}

}  // namespace banet
