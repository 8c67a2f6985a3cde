#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "banet/data/augment.hpp"
#include "banet/data/scene.hpp"
#include "banet/model/config.hpp"

namespace banet {

enum class LossKind { Silog, L1 };

struct PlateauOptions {
  double initial = 1e-4;
  double decay = 0.1;
  double floor = 1e-5;
  int patience = 10;
  double threshold = 1e-4;  // absolute improvement needed to reset patience

  void validate() const;
};

// Everything a run depends on. Serialised as flat `key = value` lines with
// dotted sections; the same text is embedded in checkpoints.
struct RunConfig {
  ModelConfig model;

  std::string data_root;  // empty: generate synthetic scenes in memory
  SceneGenConfig scene{.height = 96, .width = 256};
  int synthetic_train = 16;
  int synthetic_val = 4;
  double d_max = 80.0;
  bool augment = true;
  AugmentFlags augment_flags;

  int batch_size = 4;
  int epochs = 50;
  int max_steps = 0;  // 0: no cap
  LossKind loss = LossKind::Silog;
  bool plateau = true;  // false: constant learning rate
  PlateauOptions schedule;
  bool shuffle = true;

  std::uint64_t seed = 0;
  std::string out_dir = "runs/banet";

  // Throws ConfigError for unknown keys or unparsable values.
  void set(const std::string& key, const std::string& value);
  std::string get(const std::string& key) const;
  static const std::vector<std::string>& keys();

  std::string to_text() const;
  // Lines are `key = value`; blank lines and `#` comments are skipped.
  static RunConfig from_text(const std::string& text, const std::string& origin = "<text>");
  static RunConfig load(const std::filesystem::path& path);

  void validate() const;
};

// Model-defining keys (model.*) that must agree between a checkpoint and a
// config used to evaluate it.
std::vector<std::string> model_keys();

}  // namespace banet
