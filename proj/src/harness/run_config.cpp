#include "banet/harness/run_config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "banet/errors.hpp"

namespace banet {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* want) {
  throw ConfigError("config key '" + key + "': cannot parse '" + value + "' as " + want);
}

long long to_int(const std::string& key, const std::string& v) {
  long long out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) bad_value(key, v, "an integer");
  return out;
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) bad_value(key, v, "an unsigned integer");
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double out = std::stod(v, &used);
    if (used != v.size()) bad_value(key, v, "a number");
    return out;
  } catch (const std::logic_error&) {
    bad_value(key, v, "a number");
  }
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  bad_value(key, v, "a boolean");
}

std::string from_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string from_bool(bool v) { return v ? "true" : "false"; }

struct Field {
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string& key, const std::string&)> set;
};

#define BANET_INT_FIELD(member)                                                          \
  Field {                                                                                \
    [](const RunConfig& c) { return std::to_string(c.member); },                         \
        [](RunConfig& c, const std::string& k, const std::string& v) {                   \
          c.member = static_cast<decltype(c.member)>(to_int(k, v));                      \
        }                                                                                \
  }
#define BANET_DOUBLE_FIELD(member)                                                                \
  Field {                                                                                         \
    [](const RunConfig& c) { return from_double(c.member); },                                     \
        [](RunConfig& c, const std::string& k, const std::string& v) { c.member = to_double(k, v); } \
  }
#define BANET_BOOL_FIELD(member)                                                                \
  Field {                                                                                       \
    [](const RunConfig& c) { return from_bool(c.member); },                                     \
        [](RunConfig& c, const std::string& k, const std::string& v) { c.member = to_bool(k, v); } \
  }

// Ordered: this is the serialisation order.
const std::vector<std::pair<std::string, Field>>& fields() {
  static const std::vector<std::pair<std::string, Field>> table = {
      {"model.variant",
       {[](const RunConfig& c) { return std::string(variant_name(c.model.variant)); },
        [](RunConfig& c, const std::string&, const std::string& v) {
          try {
            c.model.variant = parse_variant(v);
          } catch (const UsageError& e) {
            throw ConfigError(e.what());
          }
        }}},
      {"model.stage_channels",
       {[](const RunConfig& c) {
          std::string s;
          for (int i = 0; i < kNumStages; ++i) {
            if (i) s += ",";
            s += std::to_string(c.model.backbone.stage_channels[i]);
          }
          return s;
        },
        [](RunConfig& c, const std::string& k, const std::string& v) {
          std::array<int, kNumStages> out{};
          std::stringstream ss(v);
          std::string item;
          int n = 0;
          while (std::getline(ss, item, ',')) {
            if (n == kNumStages) bad_value(k, v, "five comma-separated widths");
            out[n++] = static_cast<int>(to_int(k, trim(item)));
          }
          if (n != kNumStages) bad_value(k, v, "five comma-separated widths");
          c.model.backbone.stage_channels = out;
        }}},
      {"model.blocks_per_stage", BANET_INT_FIELD(model.backbone.blocks_per_stage)},
      {"model.gc_hidden", BANET_INT_FIELD(model.global_context.hidden)},
      {"model.gc_pool_kernel", BANET_INT_FIELD(model.global_context.pool_kernel)},
      {"model.gc_pool_stride", BANET_INT_FIELD(model.global_context.pool_stride)},
      {"data.root",
       {[](const RunConfig& c) { return c.data_root; },
        [](RunConfig& c, const std::string&, const std::string& v) { c.data_root = v; }}},
      {"data.height", BANET_INT_FIELD(scene.height)},
      {"data.width", BANET_INT_FIELD(scene.width)},
      {"data.synthetic_train", BANET_INT_FIELD(synthetic_train)},
      {"data.synthetic_val", BANET_INT_FIELD(synthetic_val)},
      {"data.d_max", BANET_DOUBLE_FIELD(d_max)},
      {"data.augment", BANET_BOOL_FIELD(augment)},
      {"data.flip", BANET_BOOL_FIELD(augment_flags.flip)},
      {"data.color_jitter", BANET_BOOL_FIELD(augment_flags.color_jitter)},
      {"data.crop", BANET_BOOL_FIELD(augment_flags.crop)},
      {"data.crop_height", BANET_INT_FIELD(augment_flags.crop_height)},
      {"data.crop_width", BANET_INT_FIELD(augment_flags.crop_width)},
      {"data.jitter_low", BANET_DOUBLE_FIELD(augment_flags.jitter_low)},
      {"data.jitter_high", BANET_DOUBLE_FIELD(augment_flags.jitter_high)},
      {"train.batch_size", BANET_INT_FIELD(batch_size)},
      {"train.epochs", BANET_INT_FIELD(epochs)},
      {"train.max_steps", BANET_INT_FIELD(max_steps)},
      {"train.loss",
       {[](const RunConfig& c) { return std::string(c.loss == LossKind::Silog ? "silog" : "l1"); },
        [](RunConfig& c, const std::string& k, const std::string& v) {
          if (v == "silog") c.loss = LossKind::Silog;
          else if (v == "l1") c.loss = LossKind::L1;
          else bad_value(k, v, "silog or l1");
        }}},
      {"train.lr", BANET_DOUBLE_FIELD(schedule.initial)},
      {"train.plateau", BANET_BOOL_FIELD(plateau)},
      {"train.lr_patience", BANET_INT_FIELD(schedule.patience)},
      {"train.lr_decay", BANET_DOUBLE_FIELD(schedule.decay)},
      {"train.lr_floor", BANET_DOUBLE_FIELD(schedule.floor)},
      {"train.plateau_threshold", BANET_DOUBLE_FIELD(schedule.threshold)},
      {"train.shuffle", BANET_BOOL_FIELD(shuffle)},
      {"seed",
       {[](const RunConfig& c) { return std::to_string(c.seed); },
        [](RunConfig& c, const std::string& k, const std::string& v) { c.seed = to_u64(k, v); }}},
      {"out",
       {[](const RunConfig& c) { return c.out_dir; },
        [](RunConfig& c, const std::string&, const std::string& v) { c.out_dir = v; }}},
  };
  return table;
}

const Field& field(const std::string& key) {
  for (const auto& [k, f] : fields()) {
    if (k == key) return f;
  }
  throw ConfigError("unknown config key '" + key + "'");
}

}  // namespace

void PlateauOptions::validate() const {
  if (!(initial > 0)) throw ConfigError("train.lr must be positive");
  if (!(floor > 0) || floor > initial) throw ConfigError("train.lr_floor must be in (0, train.lr]");
  if (patience < 1) throw ConfigError("train.lr_patience must be at least 1");
  if (!(decay > 0 && decay < 1)) throw ConfigError("train.lr_decay must be in (0, 1)");
  if (threshold < 0) throw ConfigError("train.plateau_threshold must be non-negative");
}

void RunConfig::set(const std::string& key, const std::string& value) {
  field(key).set(*this, key, trim(value));
}

std::string RunConfig::get(const std::string& key) const { return field(key).get(*this); }

const std::vector<std::string>& RunConfig::keys() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& [k, f] : fields()) out.push_back(k);
    return out;
  }();
  return names;
}

std::vector<std::string> model_keys() {
  std::vector<std::string> out;
  for (const auto& k : RunConfig::keys()) {
    if (k.rfind("model.", 0) == 0) out.push_back(k);
  }
  return out;
}

std::string RunConfig::to_text() const {
  std::string out;
  for (const auto& [k, f] : fields()) out += k + " = " + f.get(*this) + "\n";
  return out;
}

RunConfig RunConfig::from_text(const std::string& text, const std::string& origin) {
  RunConfig c;
  std::istringstream in(text);
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + ":" + std::to_string(number) + ": expected `key = value`");
    }
    try {
      c.set(trim(line.substr(0, eq)), line.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError(origin + ":" + std::to_string(number) + ": " + e.what());
    }
  }
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw FileError("cannot read config " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return from_text(ss.str(), path.string());
}

void RunConfig::validate() const {
  model.backbone.validate();
  model.global_context.validate();
  schedule.validate();
  if (batch_size < 1) throw ConfigError("train.batch_size must be positive");
  if (epochs < 0 || max_steps < 0) throw ConfigError("train.epochs and train.max_steps must be >= 0");
  if (!(d_max > 0)) throw ConfigError("data.d_max must be positive");
  if (data_root.empty()) {
    scene.validate();
    if (synthetic_train < 1 || synthetic_val < 1) {
      throw ConfigError("synthetic datasets need at least one train and one val sample");
    }
  }
}

}  // namespace banet
