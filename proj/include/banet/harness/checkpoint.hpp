#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "banet/harness/run_config.hpp"
#include "banet/harness/schedule.hpp"
#include "banet/model/banet.hpp"
#include "banet/tensor/optim.hpp"

namespace banet {

enum class RecordType : std::uint8_t { F32 = 1, F64 = 2, I64 = 3, Text = 4 };

struct CheckpointRecord {
  std::string name;
  RecordType type = RecordType::Text;
  Shape shape;
  std::vector<std::uint8_t> payload;  // little-endian element bytes
};

// Binary container:
//   "BANETCKP" | u32 version | u32 record count
//   per record: u32 name length | name | u8 type | u32 rank | i64 dims... |
//               u64 payload bytes | payload
// All integers little-endian. Records keep insertion order, so a parsed file
// re-serialises to identical bytes.
class Checkpoint {
 public:
  static constexpr std::uint32_t kVersion = 1;

  void add_f32(const std::string& name, const Shape& shape, std::span<const float> values);
  void add_f64(const std::string& name, double value);
  void add_i64(const std::string& name, std::int64_t value);
  void add_text(const std::string& name, const std::string& text);

  const CheckpointRecord* find(const std::string& name) const;
  // Typed accessors; FormatError if missing or of another type.
  std::vector<float> f32(const std::string& name, Shape* shape = nullptr) const;
  double f64(const std::string& name) const;
  std::int64_t i64(const std::string& name) const;
  std::string text(const std::string& name) const;

  const std::vector<CheckpointRecord>& records() const { return records_; }

  std::vector<std::uint8_t> serialize() const;
  static Checkpoint parse(std::span<const std::uint8_t> bytes, const std::string& origin);

  void save(const std::filesystem::path& path) const;
  static Checkpoint load(const std::filesystem::path& path);

 private:
  const CheckpointRecord& require(const std::string& name, RecordType type) const;
  std::vector<CheckpointRecord> records_;
};

struct TrainingState {
  int epoch = 0;  // completed epochs
  double best_val_loss = std::numeric_limits<double>::infinity();
  PlateauSchedule schedule;
  AdamState<float> adam;
};

// Config text, parameters, buffers and, when given, optimizer and schedule
// state.
Checkpoint capture_checkpoint(const RunConfig& config, const BANet<float>& model,
                              const TrainingState* state);

RunConfig checkpoint_config(const Checkpoint& ckpt);

// Copies weights and buffers into `model`. Throws ConfigError when the
// checkpoint's tensors do not fit the model (e.g. a different variant or
// width); FormatError when records are malformed.
void restore_model(const Checkpoint& ckpt, BANet<float>& model);

// Restores optimizer and schedule state written by capture_checkpoint.
TrainingState restore_training_state(const Checkpoint& ckpt, const BANet<float>& model);

// Builds the model described by the embedded config and loads its weights.
// If `expected` is given, its model.* keys must match the checkpoint's.
BANet<float> load_model(const Checkpoint& ckpt, const RunConfig* expected = nullptr);

}  // namespace banet
