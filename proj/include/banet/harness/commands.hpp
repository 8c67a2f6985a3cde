#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "banet/harness/run_config.hpp"
#include "banet/objectives/metrics.hpp"
#include "banet/tensor/op_suite.hpp"

namespace banet {

// Each command returns a process exit code and writes human-readable output
// to `out`. Errors surface as exceptions; see exit_code_for().

// Writes config.txt, train.log, best.ckpt and last.ckpt under config.out_dir.
int cmd_train(const RunConfig& config, std::ostream& out,
              const std::optional<std::filesystem::path>& resume = std::nullopt);

struct EvalOptions {
  std::filesystem::path checkpoint;
  std::string split = "val";
  std::optional<std::string> data_root;  // overrides the checkpoint's
  const RunConfig* expected = nullptr;    // model.* keys must match the checkpoint
  std::filesystem::path out_dir;          // empty: no metrics file
};

struct EvalResult {
  std::string variant;
  std::int64_t params = 0;
  MetricsReport metrics;
  std::int64_t images = 0;
};

EvalResult run_eval(const EvalOptions& options);
// Fixed-width table: one header row and one row per result.
std::string format_metrics_table(const std::vector<EvalResult>& rows);
// `key=value` lines.
std::string format_metrics_kv(const EvalResult& result);
int cmd_eval(const EvalOptions& options, std::ostream& out);

// Writes <prefix>_depth.png (16-bit, meters * 256) and <prefix>_preview.png.
int cmd_predict(const std::filesystem::path& checkpoint, const std::filesystem::path& image,
                const std::filesystem::path& out_prefix, std::ostream& out);

// Writes attention_stage1..5.png (round(255 * weight)) and captions.txt.
// Throws UnsupportedVariantError for the vanilla variant.
int cmd_export_attention(const std::filesystem::path& checkpoint,
                         const std::filesystem::path& image, const std::filesystem::path& out_dir,
                         std::ostream& out);

struct GradcheckCommandOptions {
  int seeds = 10;
  bool ops = true;
  bool models = true;
  std::vector<Variant> variants{kAllVariants.begin(), kAllVariants.end()};
  std::vector<OpCheckCase> extra_cases;  // appended to the op suite
  double model_tol = 1e-3;
  std::int64_t model_checks_per_input = 4;
};

// Non-zero exit when any check fails.
int cmd_gradcheck(const GradcheckCommandOptions& options, std::ostream& out);

int cmd_gen_data(const RunConfig& config, const std::filesystem::path& root, int train_count,
                 int val_count, std::ostream& out);

// 2 for configuration or usage errors, 3 for file problems, 4 for an
// unsupported variant, 5 for numerical failure, 1 otherwise.
int exit_code_for(const std::exception& error);

}  // namespace banet
