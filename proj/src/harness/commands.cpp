#include "banet/harness/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>

#include "banet/data/dataset.hpp"
#include "banet/data/io.hpp"
#include "banet/data/resolution.hpp"
#include "banet/errors.hpp"
#include "banet/harness/checkpoint.hpp"
#include "banet/harness/trainer.hpp"
#include "banet/objectives/losses.hpp"
#include "banet/tensor/ops.hpp"
#include "banet/tensor/random.hpp"

namespace banet {

namespace fs = std::filesystem;

namespace {

Tensor<float> image_tensor(const Image& image) {
  return Tensor<float>({1, 3, image.height, image.width}, image.rgb);
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path);
  if (!f) throw FileError("cannot write " + path.string());
  f << text;
  if (!f) throw FileError("failed writing " + path.string());
}

// Piecewise-linear map from [0, 1] to RGB; dark for far, bright for near.
std::array<float, 3> colormap(double t) {
  static constexpr std::array<std::array<float, 3>, 5> anchors{{
      {0.00f, 0.00f, 0.02f},
      {0.32f, 0.07f, 0.43f},
      {0.72f, 0.21f, 0.47f},
      {0.98f, 0.56f, 0.35f},
      {0.99f, 0.99f, 0.75f},
  }};
  t = std::clamp(t, 0.0, 1.0) * (anchors.size() - 1);
  const auto i = std::min<std::size_t>(static_cast<std::size_t>(t), anchors.size() - 2);
  const double f = t - static_cast<double>(i);
  std::array<float, 3> out{};
  for (int c = 0; c < 3; ++c) {
    out[c] = static_cast<float>((1 - f) * anchors[i][c] + f * anchors[i + 1][c]);
  }
  return out;
}

// Display width in code points, so UTF-8 headers line up.
std::size_t display_width(const std::string& s) {
  std::size_t n = 0;
  for (unsigned char c : s) n += (c & 0xC0) != 0x80;
  return n;
}

std::string pad_left(const std::string& s, std::size_t width) {
  const auto w = display_width(s);
  return (w < width ? std::string(width - w, ' ') : std::string()) + s;
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace

int cmd_train(const RunConfig& config, std::ostream& out, const std::optional<fs::path>& resume) {
  config.validate();
  Trainer trainer(config, load_data(config));
  if (resume) trainer.resume(Checkpoint::load(*resume));
  std::ofstream log;
  if (!config.out_dir.empty()) {
    fs::create_directories(config.out_dir);
    write_text(fs::path(config.out_dir) / "config.txt", config.to_text());
    log.open(fs::path(config.out_dir) / "train.log", resume ? std::ios::app : std::ios::trunc);
    if (!log) throw FileError("cannot write " + (fs::path(config.out_dir) / "train.log").string());
  }
  struct Tee : std::streambuf {
    std::ostream* a;
    std::ostream* b;
    int overflow(int c) override {
      if (c == EOF) return 0;
      a->put(static_cast<char>(c));
      if (b) b->put(static_cast<char>(c));
      return c;
    }
    int sync() override {
      a->flush();
      if (b) b->flush();
      return 0;
    }
  } tee;
  tee.a = &out;
  tee.b = log.is_open() ? &log : nullptr;
  std::ostream both(&tee);
  out << "variant=" << variant_name(config.model.variant)
      << " params=" << trainer.model().count_params() << " train=" << trainer.train_samples().size()
      << " val=" << trainer.val_samples().size() << '\n';
  const auto result = trainer.run(&both);
  out << "baseline_val_loss=" << fixed(result.baseline_val_loss, 6)
      << " best_val_loss=" << fixed(trainer.state().best_val_loss, 6)
      << " steps=" << trainer.state().adam.step << '\n';
  return 0;
}

EvalResult run_eval(const EvalOptions& options) {
  const auto ckpt = Checkpoint::load(options.checkpoint);
  auto config = checkpoint_config(ckpt);
  const auto model = load_model(ckpt, options.expected);
  if (options.data_root) config.data_root = *options.data_root;
  const auto samples = load_eval_split(config, options.split);
  if (samples.empty()) throw ConfigError("split '" + options.split + "' is empty");
  EvalResult r;
  r.variant = std::string(variant_name(config.model.variant));
  r.params = model.count_params();
  r.metrics = evaluate_model(model, samples, config.d_max);
  r.images = static_cast<std::int64_t>(samples.size());
  return r;
}

std::string format_metrics_table(const std::vector<EvalResult>& rows) {
  const std::vector<std::string> head = {"variant", "params", "SILog", "SqRel", "AbsRel", "MAE",
                                         "RMSE", "iRMSE", "δ25", "δ56", "δ95"};
  std::vector<std::vector<std::string>> cells{head};
  for (const auto& r : rows) {
    const auto& m = r.metrics;
    cells.push_back({r.variant, std::to_string(r.params), fixed(m.silog, 2), fixed(m.sqrel, 2),
                     fixed(m.absrel, 2), fixed(m.mae, 3), fixed(m.rmse, 3), fixed(m.irmse, 2),
                     fixed(m.delta_25, 2), fixed(m.delta_56, 2), fixed(m.delta_95, 2)});
  }
  std::vector<std::size_t> width(head.size(), 0);
  for (const auto& row : cells) {
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], display_width(row[c]));
  }
  std::string out;
  for (const auto& row : cells) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c == 0) {
        out += row[c] + std::string(width[c] - display_width(row[c]), ' ');
      } else {
        out += "  " + pad_left(row[c], width[c]);
      }
    }
    out += '\n';
  }
  return out;
}

std::string format_metrics_kv(const EvalResult& r) {
  const auto& m = r.metrics;
  std::ostringstream os;
  auto put = [&](const char* k, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    os << k << '=' << buf << '\n';
  };
  os << "variant=" << r.variant << '\n' << "params=" << r.params << '\n'
     << "images=" << r.images << '\n' << "valid_pixels=" << m.valid_pixel_count << '\n';
  put("silog", m.silog);
  put("sqrel", m.sqrel);
  put("absrel", m.absrel);
  put("mae", m.mae);
  put("rmse", m.rmse);
  put("irmse", m.irmse);
  put("delta_25", m.delta_25);
  put("delta_56", m.delta_56);
  put("delta_95", m.delta_95);
  return os.str();
}

int cmd_eval(const EvalOptions& options, std::ostream& out) {
  const auto r = run_eval(options);
  out << format_metrics_table({r});
  if (!options.out_dir.empty()) {
    const auto path = options.out_dir / "metrics.txt";
    write_text(path, format_metrics_kv(r));
    out << "wrote " << path.string() << '\n';
  }
  return 0;
}

int cmd_predict(const fs::path& checkpoint, const fs::path& image, const fs::path& out_prefix,
                std::ostream& out) {
  const auto ckpt = Checkpoint::load(checkpoint);
  const auto config = checkpoint_config(ckpt);
  const auto model = load_model(ckpt);
  const auto img = load_image_png(image);
  NoGradGuard no_grad;
  const auto pred = predict_meters(model, image_tensor(img), config.d_max);

  DepthMap depth;
  depth.height = img.height;
  depth.width = img.width;
  depth.depth.assign(pred.data().begin(), pred.data().end());
  depth.mask.assign(depth.depth.size(), 1);
  const fs::path depth_path = out_prefix.string() + "_depth.png";
  const fs::path preview_path = out_prefix.string() + "_preview.png";
  if (out_prefix.has_parent_path()) fs::create_directories(out_prefix.parent_path());
  save_depth_png16(depth_path, depth);

  // Inverse depth spreads near-field detail over the colour range.
  const auto [lo, hi] = std::minmax_element(depth.depth.begin(), depth.depth.end());
  const double inv_far = 1.0 / *hi, inv_near = 1.0 / *lo;
  const std::size_t plane = depth.depth.size();
  Image preview{img.height, img.width, std::vector<float>(3 * plane)};
  for (std::size_t i = 0; i < plane; ++i) {
    const double t = inv_near > inv_far ? (1.0 / depth.depth[i] - inv_far) / (inv_near - inv_far) : 0.5;
    const auto rgb = colormap(t);
    for (int c = 0; c < 3; ++c) preview.rgb[c * plane + i] = rgb[c];
  }
  save_image_png(preview_path, preview);
  out << "wrote " << depth_path.string() << " and " << preview_path.string() << " (range "
      << fixed(*lo, 3) << ".." << fixed(*hi, 3) << " m)\n";
  return 0;
}

int cmd_export_attention(const fs::path& checkpoint, const fs::path& image, const fs::path& out_dir,
                         std::ostream& out) {
  const auto ckpt = Checkpoint::load(checkpoint);
  const auto model = load_model(ckpt);
  if (model.config().variant == Variant::Vanilla) {
    throw UnsupportedVariantError("the vanilla variant has no stage attention to export");
  }
  const auto img = load_image_png(image);
  NoGradGuard no_grad;
  const auto prepared = preprocess(image_tensor(img));
  const auto weights = postprocess(model.export_stage_attention(prepared.image), prepared.pad,
                                   img.height, img.width);
  fs::create_directories(out_dir);
  const std::size_t plane = static_cast<std::size_t>(img.height) * img.width;
  std::string captions;
  for (int s = 0; s < kNumStages; ++s) {
    std::vector<std::uint8_t> px(plane);
    for (std::size_t i = 0; i < plane; ++i) {
      const double w = weights.data()[s * plane + i];
      px[i] = static_cast<std::uint8_t>(std::clamp(std::lround(255.0 * w), 0L, 255L));
    }
    const std::string name = "attention_stage" + std::to_string(s + 1) + ".png";
    save_gray_png8(out_dir / name, img.height, img.width, px);
    captions += name + "\tstage " + std::to_string(s + 1) + " (stride " +
                std::to_string(kStageStrides[s]) + ") fusion weight, pixel = round(255 * w)\n";
  }
  write_text(out_dir / "captions.txt", captions);
  out << "wrote " << kNumStages << " attention maps to " << out_dir.string() << '\n';
  return 0;
}

int cmd_gradcheck(const GradcheckCommandOptions& options, std::ostream& out) {
  bool ok = true;
  if (options.ops) {
    auto cases = op_gradcheck_cases();
    cases.insert(cases.end(), options.extra_cases.begin(), options.extra_cases.end());
    for (const auto& c : cases) {
      double worst = 0.0;
      bool passed = true;
      for (int seed = 0; seed < options.seeds; ++seed) {
        GradcheckOptions go;
        go.seed = static_cast<std::uint64_t>(seed);
        const auto report = c.run(static_cast<std::uint64_t>(seed), go);
        worst = std::max(worst, report.max_rel_error());
        if (!report.passed()) {
          passed = false;
          print_report(out, c.name + " seed " + std::to_string(seed), report);
        }
      }
      char buf[160];
      std::snprintf(buf, sizeof buf, "%s  op %-28s seeds=%d max_rel=%.3e\n", passed ? "ok  " : "FAIL",
                    c.name.c_str(), options.seeds, worst);
      out << buf;
      ok = ok && passed;
    }
  }
  if (options.models) {
    for (const auto v : options.variants) {
      ModelConfig cfg;
      cfg.variant = v;
      cfg.backbone.stage_channels = {2, 2, 2, 2, 2};
      cfg.backbone.blocks_per_stage = 1;
      cfg.global_context.hidden = 3;
      BANet<double> model(cfg, 101);
      Rng rng(102);
      const auto image = uniform_tensor<double>({2, 3, 32, 32}, rng, 0.0, 1.0);
      const auto gt = uniform_tensor<double>({2, 1, 32, 32}, rng, 1.0, 79.0);
      const std::vector<std::uint8_t> mask(static_cast<std::size_t>(gt.numel()), 1);
      std::vector<GradcheckInput> inputs;
      for (const auto& p : model.store().parameters()) inputs.push_back({p.name, p.tensor});
      GradcheckOptions go;
      go.tol = options.model_tol;
      go.max_checks_per_input = options.model_checks_per_input;
      go.seed = 103;
      const auto report = gradcheck(
          [&] { return silog_loss(denormalize(model.forward(image).depth, 80.0), gt, mask); },
          inputs, go);
      print_report(out, "model " + std::string(variant_name(v)), report);
      char buf[160];
      std::snprintf(buf, sizeof buf, "%s  model %-25s params=%zu max_rel=%.3e\n",
                    report.passed() ? "ok  " : "FAIL", std::string(variant_name(v)).c_str(),
                    inputs.size(), report.max_rel_error());
      out << buf;
      ok = ok && report.passed();
    }
  }
  out << (ok ? "gradcheck passed\n" : "gradcheck FAILED\n");
  return ok ? 0 : 1;
}

int cmd_gen_data(const RunConfig& config, const fs::path& root, int train_count, int val_count,
                 std::ostream& out) {
  generate_dataset(root, config.scene, train_count, val_count, config.seed);
  out << "wrote " << train_count << " train and " << val_count << " val scenes ("
      << config.scene.height << "x" << config.scene.width << ") to " << root.string() << '\n';
  return 0;
}

int exit_code_for(const std::exception& error) {
  if (dynamic_cast<const UnsupportedVariantError*>(&error)) return 4;
  if (dynamic_cast<const ConfigError*>(&error) || dynamic_cast<const UsageError*>(&error)) return 2;
  if (dynamic_cast<const FileError*>(&error) || dynamic_cast<const FormatError*>(&error)) return 3;
  if (dynamic_cast<const NumericalError*>(&error)) return 5;
  return 1;
}

}  // namespace banet
