#include "banet/harness/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <iterator>

#include "banet/errors.hpp"

namespace banet {

namespace {

constexpr char kMagic[8] = {'B', 'A', 'N', 'E', 'T', 'C', 'K', 'P'};

template <typename U>
void put(std::vector<std::uint8_t>& out, U value) {
  static_assert(std::is_integral_v<U>);
  using V = std::make_unsigned_t<U>;
  const auto v = static_cast<V>(value);
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

template <typename F, typename I>
void put_float(std::vector<std::uint8_t>& out, F value) {
  static_assert(sizeof(F) == sizeof(I));
  I bits;
  std::memcpy(&bits, &value, sizeof bits);
  put(out, bits);
}

class Reader {
 public:
  Reader(std::span<const std::uint8_t> bytes, const std::string& origin)
      : bytes_(bytes), origin_(origin) {}

  template <typename U>
  U get() {
    need(sizeof(U));
    using V = std::make_unsigned_t<U>;
    V v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<V>(bytes_[pos_ + i]) << (8 * i);
    pos_ += sizeof(U);
    return static_cast<U>(v);
  }

  std::span<const std::uint8_t> take(std::size_t n) {
    need(n);
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == bytes_.size(); }
  [[noreturn]] void fail(const std::string& what) const {
    throw FormatError(origin_ + ": " + what + " at byte " + std::to_string(pos_));
  }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) fail("truncated checkpoint");
  }
  std::span<const std::uint8_t> bytes_;
  std::string origin_;
  std::size_t pos_ = 0;
};

std::size_t element_size(RecordType t) {
  switch (t) {
    case RecordType::F32: return 4;
    case RecordType::F64:
    case RecordType::I64: return 8;
    case RecordType::Text: return 1;
  }
  return 0;
}

}  // namespace

void Checkpoint::add_f32(const std::string& name, const Shape& shape, std::span<const float> values) {
  if (shape_numel(shape) != static_cast<std::int64_t>(values.size())) {
    throw UsageError("checkpoint record '" + name + "': shape does not match data");
  }
  CheckpointRecord r{name, RecordType::F32, shape, {}};
  r.payload.reserve(values.size() * 4);
  for (float v : values) put_float<float, std::uint32_t>(r.payload, v);
  records_.push_back(std::move(r));
}

void Checkpoint::add_f64(const std::string& name, double value) {
  CheckpointRecord r{name, RecordType::F64, {}, {}};
  put_float<double, std::uint64_t>(r.payload, value);
  records_.push_back(std::move(r));
}

void Checkpoint::add_i64(const std::string& name, std::int64_t value) {
  CheckpointRecord r{name, RecordType::I64, {}, {}};
  put(r.payload, value);
  records_.push_back(std::move(r));
}

void Checkpoint::add_text(const std::string& name, const std::string& text) {
  CheckpointRecord r{name, RecordType::Text, {static_cast<std::int64_t>(text.size())}, {}};
  r.payload.assign(text.begin(), text.end());
  records_.push_back(std::move(r));
}

const CheckpointRecord* Checkpoint::find(const std::string& name) const {
  for (const auto& r : records_) {
    if (r.name == name) return &r;
  }
  return nullptr;
}

const CheckpointRecord& Checkpoint::require(const std::string& name, RecordType type) const {
  const auto* r = find(name);
  if (!r) throw FormatError("checkpoint has no record '" + name + "'");
  if (r->type != type) throw FormatError("checkpoint record '" + name + "' has the wrong type");
  return *r;
}

std::vector<float> Checkpoint::f32(const std::string& name, Shape* shape) const {
  const auto& r = require(name, RecordType::F32);
  Reader in(r.payload, name);
  std::vector<float> out(r.payload.size() / 4);
  for (auto& v : out) {
    const auto bits = in.get<std::uint32_t>();
    std::memcpy(&v, &bits, 4);
  }
  if (shape) *shape = r.shape;
  return out;
}

double Checkpoint::f64(const std::string& name) const {
  const auto& r = require(name, RecordType::F64);
  Reader in(r.payload, name);
  const auto bits = in.get<std::uint64_t>();
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

std::int64_t Checkpoint::i64(const std::string& name) const {
  const auto& r = require(name, RecordType::I64);
  Reader in(r.payload, name);
  return in.get<std::int64_t>();
}

std::string Checkpoint::text(const std::string& name) const {
  const auto& r = require(name, RecordType::Text);
  return std::string(r.payload.begin(), r.payload.end());
}

std::vector<std::uint8_t> Checkpoint::serialize() const {
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  put(out, kVersion);
  put(out, static_cast<std::uint32_t>(records_.size()));
  for (const auto& r : records_) {
    put(out, static_cast<std::uint32_t>(r.name.size()));
    out.insert(out.end(), r.name.begin(), r.name.end());
    put(out, static_cast<std::uint8_t>(r.type));
    put(out, static_cast<std::uint32_t>(r.shape.size()));
    for (auto d : r.shape) put(out, static_cast<std::int64_t>(d));
    put(out, static_cast<std::uint64_t>(r.payload.size()));
    out.insert(out.end(), r.payload.begin(), r.payload.end());
  }
  return out;
}

Checkpoint Checkpoint::parse(std::span<const std::uint8_t> bytes, const std::string& origin) {
  Reader in(bytes, origin);
  const auto magic = in.take(sizeof kMagic);
  if (std::memcmp(magic.data(), kMagic, sizeof kMagic) != 0) in.fail("not a checkpoint (bad magic)");
  const auto version = in.get<std::uint32_t>();
  if (version != kVersion) in.fail("unsupported checkpoint version " + std::to_string(version));
  const auto count = in.get<std::uint32_t>();
  Checkpoint ckpt;
  for (std::uint32_t k = 0; k < count; ++k) {
    CheckpointRecord r;
    const auto name_len = in.get<std::uint32_t>();
    const auto name = in.take(name_len);
    r.name.assign(name.begin(), name.end());
    const auto type = in.get<std::uint8_t>();
    if (type < 1 || type > 4) in.fail("unknown record type " + std::to_string(type));
    r.type = static_cast<RecordType>(type);
    const auto rank = in.get<std::uint32_t>();
    if (rank > 8) in.fail("implausible rank");
    for (std::uint32_t d = 0; d < rank; ++d) {
      const auto dim = in.get<std::int64_t>();
      if (dim < 0) in.fail("negative dimension");
      r.shape.push_back(dim);
    }
    const auto size = in.get<std::uint64_t>();
    const auto payload = in.take(static_cast<std::size_t>(size));
    r.payload.assign(payload.begin(), payload.end());
    const auto elements = r.type == RecordType::F64 || r.type == RecordType::I64
                              ? std::int64_t{1}
                              : shape_numel(r.shape);
    if (static_cast<std::uint64_t>(elements) * element_size(r.type) != size) {
      in.fail("record '" + r.name + "' payload does not match its shape");
    }
    if (ckpt.find(r.name)) in.fail("duplicate record '" + r.name + "'");
    ckpt.records_.push_back(std::move(r));
  }
  if (!in.done()) in.fail("trailing bytes");
  return ckpt;
}

void Checkpoint::save(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto bytes = serialize();
  std::ofstream f(path, std::ios::binary);
  if (!f) throw FileError("cannot write checkpoint " + path.string());
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw FileError("failed writing checkpoint " + path.string());
}

Checkpoint Checkpoint::load(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw FileError("cannot read checkpoint " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return parse(bytes, path.string());
}

Checkpoint capture_checkpoint(const RunConfig& config, const BANet<float>& model,
                              const TrainingState* state) {
  Checkpoint c;
  c.add_text("config", config.to_text());
  for (const auto& p : model.store().parameters()) {
    c.add_f32("param/" + p.name, p.tensor.shape(), p.tensor.data());
  }
  for (const auto& b : model.store().buffers()) {
    c.add_f32("buffer/" + b.name, b.tensor.shape(), b.tensor.data());
  }
  if (state) {
    c.add_i64("train/epoch", state->epoch);
    c.add_f64("train/best_val_loss", state->best_val_loss);
    c.add_f64("schedule/lr", state->schedule.lr());
    c.add_f64("schedule/best", state->schedule.best());
    c.add_i64("schedule/has_best", state->schedule.has_best() ? 1 : 0);
    c.add_i64("schedule/bad_epochs", state->schedule.bad_epochs());
    c.add_i64("adam/step", state->adam.step);
    const auto& params = model.store().parameters();
    if (state->adam.first_moment.size() == params.size()) {
      for (std::size_t i = 0; i < params.size(); ++i) {
        c.add_f32("adam/m/" + params[i].name, params[i].tensor.shape(), state->adam.first_moment[i]);
        c.add_f32("adam/v/" + params[i].name, params[i].tensor.shape(), state->adam.second_moment[i]);
      }
    }
  }
  return c;
}

RunConfig checkpoint_config(const Checkpoint& ckpt) {
  return RunConfig::from_text(ckpt.text("config"), "checkpoint config");
}

namespace {

void copy_into(const Checkpoint& ckpt, const std::string& record, const Tensor<float>& dst) {
  const auto* r = ckpt.find(record);
  if (!r) throw ConfigError("checkpoint does not match the model: missing '" + record + "'");
  Shape shape;
  const auto values = ckpt.f32(record, &shape);
  if (shape != dst.shape()) {
    throw ConfigError("checkpoint does not match the model: '" + record + "' is " +
                      shape_string(shape) + ", model expects " + shape_string(dst.shape()));
  }
  Tensor<float> t = dst;
  std::copy(values.begin(), values.end(), t.mutable_data().begin());
}

}  // namespace

void restore_model(const Checkpoint& ckpt, BANet<float>& model) {
  std::size_t expected = 0;
  for (const auto& p : model.store().parameters()) {
    copy_into(ckpt, "param/" + p.name, p.tensor);
    ++expected;
  }
  for (const auto& b : model.store().buffers()) {
    copy_into(ckpt, "buffer/" + b.name, b.tensor);
    ++expected;
  }
  std::size_t stored = 0;
  for (const auto& r : ckpt.records()) {
    if (r.name.rfind("param/", 0) == 0 || r.name.rfind("buffer/", 0) == 0) ++stored;
  }
  if (stored != expected) {
    throw ConfigError("checkpoint does not match the model: it holds " + std::to_string(stored) +
                      " tensors, the model has " + std::to_string(expected));
  }
}

TrainingState restore_training_state(const Checkpoint& ckpt, const BANet<float>& model) {
  TrainingState s;
  const auto config = checkpoint_config(ckpt);
  s.epoch = static_cast<int>(ckpt.i64("train/epoch"));
  s.best_val_loss = ckpt.f64("train/best_val_loss");
  s.schedule = PlateauSchedule(config.schedule);
  s.schedule.restore(ckpt.f64("schedule/lr"), ckpt.f64("schedule/best"),
                     ckpt.i64("schedule/has_best") != 0,
                     static_cast<int>(ckpt.i64("schedule/bad_epochs")));
  const auto params = model.store().parameter_tensors();
  s.adam = AdamState<float>(params, AdamOptions{.lr = s.schedule.lr()});
  s.adam.step = ckpt.i64("adam/step");
  if (ckpt.find("adam/m/" + model.store().parameters().front().name)) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      const auto& name = model.store().parameters()[i].name;
      s.adam.first_moment[i] = ckpt.f32("adam/m/" + name);
      s.adam.second_moment[i] = ckpt.f32("adam/v/" + name);
      if (s.adam.first_moment[i].size() != static_cast<std::size_t>(params[i].numel()) ||
          s.adam.second_moment[i].size() != static_cast<std::size_t>(params[i].numel())) {
        throw ConfigError("checkpoint optimizer state does not match '" + name + "'");
      }
    }
  }
  return s;
}

BANet<float> load_model(const Checkpoint& ckpt, const RunConfig* expected) {
  const auto config = checkpoint_config(ckpt);
  if (expected) {
    for (const auto& key : model_keys()) {
      if (expected->get(key) != config.get(key)) {
        throw ConfigError("config/checkpoint mismatch: " + key + " is '" + expected->get(key) +
                          "' in the config but '" + config.get(key) + "' in the checkpoint");
      }
    }
  }
  BANet<float> model(config.model, config.seed);
  restore_model(ckpt, model);
  model.set_training(false);
  return model;
}

}  // namespace banet
