// Acceptance run: one PASS/FAIL line per criterion.
//
//   banet_acceptance [--only N]... [--expect-fail N]...
//
// Exits 0 when every failing criterion was named with --expect-fail.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "banet/data/io.hpp"
#include "banet/data/resolution.hpp"
#include "banet/errors.hpp"
#include "banet/harness/checkpoint.hpp"
#include "banet/harness/commands.hpp"
#include "banet/harness/schedule.hpp"
#include "banet/harness/trainer.hpp"
#include "banet/objectives/metrics.hpp"
#include "banet/tensor/ops.hpp"
#include "banet/tensor/random.hpp"
#include "metric_oracle.hpp"

using namespace banet;
namespace fs = std::filesystem;

namespace {

// Tolerances.
constexpr double kOpTol = 1e-4;
constexpr double kModelTol = 1e-3;
constexpr double kGradcheckSeconds = 300.0;
constexpr double kSimplexTol = 1e-6;
constexpr double kLocalWithin = 0.05;
constexpr double kMetricRelTol = 1e-6;
constexpr double kScaleSilogTol = 1e-6;
constexpr double kOverfitLossRatio = 0.5;
constexpr double kOverfitDelta25 = 90.0;
constexpr double kOverfitSeconds = 600.0;
constexpr double kPngTol = 1.0 / 256.0;

struct Verdict {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;
double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

constexpr std::array<Variant, 5> kAttentionVariants{Variant::Full, Variant::Forward,
                                                    Variant::Backward, Variant::Markov,
                                                    Variant::Local};

ModelConfig with_backbone(Variant v, const BackboneConfig& backbone) {
  ModelConfig c;
  c.variant = v;
  c.backbone = backbone;
  return c;
}

// ---------------------------------------------------------------------------

Verdict gradient_integrity() {
  const auto t0 = Clock::now();
  double op_worst = 0.0;
  bool ok = true;
  std::string failed;
  for (const auto& c : op_gradcheck_cases()) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      GradcheckOptions go;
      go.tol = kOpTol;
      go.seed = seed;
      const auto r = c.run(seed, go);
      op_worst = std::max(op_worst, r.max_rel_error());
      if (!r.passed()) {
        ok = false;
        failed += " " + c.name;
      }
    }
  }
  const auto ops = op_gradcheck_cases().size();

  GradcheckCommandOptions o;
  o.ops = false;
  o.model_tol = kModelTol;
  std::ostringstream report;
  const bool models_ok = cmd_gradcheck(o, report) == 0;
  double model_worst = 0.0;
  std::istringstream lines(report.str());
  std::string line;
  while (std::getline(lines, line)) {
    const auto at = line.find("max_rel=");
    if (line.find("model ") != std::string::npos && at != std::string::npos) {
      model_worst = std::max(model_worst, std::stod(line.substr(at + 8)));
    }
  }
  const double secs = seconds_since(t0);
  Verdict v;
  v.pass = ok && models_ok && secs < kGradcheckSeconds;
  v.detail = fmt("%zu ops x 10 seeds max rel %.2e (tol %.0e); 6 micro models max rel %.2e (tol %.0e); %.0f s",
                 ops, op_worst, kOpTol, model_worst, kModelTol, secs);
  if (!failed.empty()) v.detail += "; failing:" + failed;
  return v;
}

Verdict resolution_contract() {
  const std::vector<std::pair<int, int>> sizes{{64, 64}, {64, 192}, {96, 160}};
  bool ok = true;
  std::string bad;
  double lo = 1.0, hi = 0.0;
  for (auto v : kAllVariants) {
    BANet<float> model(with_backbone(v, BackboneConfig{}), 11);
    model.set_training(false);
    Rng rng(12);
    for (auto [h, w] : sizes) {
      NoGradGuard ng;
      const auto image = uniform_tensor<float>({1, 3, h, w}, rng, 0.0, 1.0);
      const auto prepared = preprocess(image);
      const auto out = postprocess(model.forward(prepared.image).depth, prepared.pad, h, w);
      bool here = out.shape() == Shape{1, 1, h, w};
      for (float x : out.data()) {
        here = here && x > 0.0f && x < 1.0f;
        lo = std::min<double>(lo, x);
        hi = std::max<double>(hi, x);
      }
      if (!here) bad += fmt(" %s@%dx%d", std::string(variant_name(v)).c_str(), h, w);
      ok = ok && here;
    }
  }
  return {ok, fmt("6 variants x {64x64, 64x192, 96x160}: outputs 1xHxW, range [%.4f, %.4f]", lo, hi) +
                  (bad.empty() ? "" : "; bad:" + bad)};
}

Verdict attention_simplex() {
  double worst = 0.0;
  int inputs = 0;
  Rng rng(31);
  std::uniform_int_distribution<int> cells(1, 3);
  for (int k = 0; k < 100; ++k) {
    const Variant v = kAttentionVariants[k % kAttentionVariants.size()];
    BANet<float> model(with_backbone(v, micro_backbone()), 300 + k);
    model.set_training(k % 2 == 0);
    NoGradGuard ng;
    const int h = 32 * cells(rng), w = 32 * cells(rng);
    const auto image = uniform_tensor<float>({1, 3, h, w}, rng, 0.0, 1.0);
    const auto weights = model.export_stage_attention(image);
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    for (std::size_t p = 0; p < plane; ++p) {
      double sum = 0.0;
      for (int s = 0; s < kNumStages; ++s) sum += weights.data()[s * plane + p];
      worst = std::max(worst, std::abs(sum - 1.0));
    }
    ++inputs;
  }
  return {worst <= kSimplexTol,
          fmt("%d random inputs over 5 attention variants: max |sum - 1| = %.2e (tol %.0e)", inputs,
              worst, kSimplexTol)};
}

bool zero_or_absent(const Tensor<double>& t) {
  if (!t.has_grad()) return true;
  return std::all_of(t.grad().begin(), t.grad().end(), [](double g) { return g == 0.0; });
}

Verdict dependency_structure() {
  int checked = 0, wrong = 0;
  std::string bad;
  for (auto v : kAttentionVariants) {
    ModelConfig cfg = with_backbone(v, micro_backbone());
    BANet<double> model(cfg, 41);
    for (bool fwd : {true, false}) {
      if (fwd ? !model.has_forward_attention() : !model.has_backward_attention()) continue;
      for (int i = 0; i < kNumStages; ++i) {
        Rng rng(400 + i);
        std::array<Tensor<double>, kNumStages> sf, sb;
        for (auto* maps : {&sf, &sb}) {
          for (auto& m : *maps) {
            m = uniform_tensor<double>({1, 1, 8, 8}, rng);
            m.set_requires_grad(true);
          }
        }
        const auto stack = model.attend(sf, sb);
        ops::sum(fwd ? stack.forward[i] : stack.backward[i]).backward();
        const auto& own = fwd ? sf : sb;
        const auto& other = fwd ? sb : sf;
        for (int j = 0; j < kNumStages; ++j) {
          bool expect = fwd ? j <= i : j >= i;
          if (v == Variant::Markov) expect = j == (fwd ? std::max(i - 1, 0) : std::min(i + 1, 4));
          ++checked;
          if (zero_or_absent(own[j]) == expect) {
            ++wrong;
            bad += fmt(" %s %s a%d/s%d", std::string(variant_name(v)).c_str(), fwd ? "fwd" : "bwd",
                       i + 1, j + 1);
          }
          ++checked;
          if (!zero_or_absent(other[j])) {
            ++wrong;
            bad += fmt(" %s %s a%d/other s%d", std::string(variant_name(v)).c_str(),
                       fwd ? "fwd" : "bwd", i + 1, j + 1);
          }
        }
      }
    }
  }
  return {wrong == 0, fmt("%d (attention map, stage input) pairs match the expected zero/nonzero "
                          "gradient pattern, %d mismatches", checked - wrong, wrong) + bad};
}

Verdict parameter_ordering() {
  bool ok = true;
  std::string detail;
  for (const auto& [label, backbone] :
       std::vector<std::pair<std::string, BackboneConfig>>{{"default", BackboneConfig{}},
                                                           {"micro", micro_backbone()}}) {
    std::map<Variant, std::int64_t> n;
    for (auto v : kAllVariants) n[v] = BANet<float>(with_backbone(v, backbone), 0).count_params();
    const double local_gap =
        std::abs(double(n[Variant::Local]) - double(n[Variant::Full])) / double(n[Variant::Full]);
    const bool here = n[Variant::Vanilla] < n[Variant::Forward] &&
                      n[Variant::Forward] == n[Variant::Backward] &&
                      n[Variant::Backward] < n[Variant::Full] &&
                      n[Variant::Full] == n[Variant::Markov] && local_gap < kLocalWithin;
    ok = ok && here;
    detail += fmt("%s%s: vanilla %lld < fwd %lld = bwd %lld < full %lld = markov %lld, local %lld (%.2f%%)",
                  detail.empty() ? "" : "; ", label.c_str(), (long long)n[Variant::Vanilla],
                  (long long)n[Variant::Forward], (long long)n[Variant::Backward],
                  (long long)n[Variant::Full], (long long)n[Variant::Markov],
                  (long long)n[Variant::Local], 100 * local_gap);
  }
  return {ok, detail};
}

double rel_err(double got, long double want) {
  const long double scale = std::max<long double>(std::fabs(want), 1e-12L);
  return static_cast<double>(std::fabs(got - want) / scale);
}

Verdict metric_oracle() {
  std::mt19937_64 rng(61);
  double worst = 0.0;
  for (int k = 0; k < 50; ++k) {
    const auto in = oracle::random_instance(rng, 16 * 16);
    const auto want = oracle::metrics(in.pred, in.gt, in.mask, 80.0, 1e-3);
    const auto got = eval_metrics(DepthPair{in.pred, in.gt, in.mask});
    for (auto [g, w] : std::initializer_list<std::pair<double, long double>>{
             {got.silog, want.silog}, {got.sqrel, want.sqrel}, {got.absrel, want.absrel},
             {got.mae, want.mae}, {got.rmse, want.rmse}, {got.irmse, want.irmse},
             {got.delta_25, want.d25}, {got.delta_56, want.d56}, {got.delta_95, want.d95}}) {
      worst = std::max(worst, rel_err(g, w));
    }
  }

  int monotone_violations = 0, fuzzed = 0;
  std::uniform_int_distribution<int> size(1, 400);
  for (int k = 0; k < 1000; ++k) {
    auto in = oracle::random_instance(rng, size(rng));
    in.mask[0] = 1;
    in.gt[0] = std::min(in.gt[0], 80.0);
    const auto m = eval_metrics(DepthPair{in.pred, in.gt, in.mask});
    ++fuzzed;
    if (!(m.delta_25 <= m.delta_56 && m.delta_56 <= m.delta_95)) ++monotone_violations;
  }

  double worst_scale = 0.0;
  std::uniform_real_distribution<double> depth(1.0, 40.0), scale(0.5, 2.0);
  for (int k = 0; k < 50; ++k) {
    std::vector<double> gt(256), pred(256);
    std::vector<std::uint8_t> mask(256, 1);
    const double c = scale(rng);
    for (std::size_t i = 0; i < gt.size(); ++i) {
      gt[i] = depth(rng);
      pred[i] = c * gt[i];
    }
    worst_scale = std::max(worst_scale, eval_metrics(DepthPair{pred, gt, mask}).silog);
  }
  const bool ok = worst <= kMetricRelTol && monotone_violations == 0 && worst_scale <= kScaleSilogTol;
  return {ok, fmt("50 instances max rel err %.2e (tol %.0e); %d/%d fuzzed with d25<=d56<=d95; "
                  "SILog under pred=c*gt max %.2e",
                  worst, kMetricRelTol, fuzzed - monotone_violations, fuzzed, worst_scale)};
}

RunConfig overfit_config(Variant v, int steps) {
  RunConfig c;
  c.model = with_backbone(v, micro_backbone());
  c.scene.height = 64;
  c.scene.width = 64;
  c.synthetic_train = 16;
  c.synthetic_val = 1;
  c.augment = false;
  c.batch_size = 16;  // one full-batch step per epoch
  c.epochs = steps;
  c.max_steps = steps;
  c.plateau = false;  // constant 1e-4
  c.schedule.initial = 1e-4;
  c.seed = 0;
  c.out_dir.clear();
  return c;
}

Verdict micro_overfit() {
  const auto t0 = Clock::now();
  const auto cfg = overfit_config(Variant::Full, 500);
  Trainer trainer(cfg, load_data(cfg));
  const auto result = trainer.run();
  const double first = result.step_losses.front();
  const double last = result.step_losses.back();
  trainer.model().set_training(false);
  const auto report = evaluate_model(trainer.model(), trainer.train_samples(), cfg.d_max);
  const double secs = seconds_since(t0);

  bool others_ok = true;
  std::string others;
  for (auto v : kAllVariants) {
    if (v == Variant::Full) continue;
    const auto c = overfit_config(v, 100);
    try {
      Trainer t(c, load_data(c));
      const auto r = t.run();
      const bool finite = r.step_losses.size() == 100 &&
                          std::all_of(r.step_losses.begin(), r.step_losses.end(),
                                      [](double x) { return std::isfinite(x); });
      others_ok = others_ok && finite;
      others += fmt(" %s %.2f->%.2f", std::string(variant_name(v)).c_str(), r.step_losses.front(),
                    r.step_losses.back());
    } catch (const NumericalError& e) {
      others_ok = false;
      others += fmt(" %s diverged", std::string(variant_name(v)).c_str());
    }
  }
  const double total = seconds_since(t0);
  const bool loss_ok = last < kOverfitLossRatio * first;
  const bool delta_ok = report.delta_25 > kOverfitDelta25;
  return {loss_ok && delta_ok && others_ok && secs < kOverfitSeconds,
          fmt("full (%lld params) SILog loss %.3f -> %.3f (%.1f%% of step 1, need < %.0f%%) %s; "
              "train d25 %.2f%% (need > %.0f%%) %s; %.0f s; 100 steps:",
              (long long)trainer.model().count_params(), first, last, 100 * last / first,
              100 * kOverfitLossRatio, loss_ok ? "ok" : "FAILED", report.delta_25,
              kOverfitDelta25, delta_ok ? "ok" : "FAILED", secs) +
              others + fmt(" (%.0f s total)", total)};
}

Verdict schedule_conformance() {
  PlateauOptions o;
  o.initial = 1e-4;
  o.patience = 10;
  o.decay = 0.1;
  o.floor = 1e-5;
  const std::vector<double> never_improving(51, 0.5);
  const auto lrs = plateau_lr_trace(o, never_improving, 50);
  bool exact = lrs.size() == 50;
  for (std::size_t e = 0; exact && e < lrs.size(); ++e) exact = lrs[e] == (e < 10 ? 1e-4 : 1e-5);

  // Pure function of the history; never below the floor, never increasing.
  std::mt19937_64 rng(81);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  bool properties = true;
  for (int k = 0; k < 200; ++k) {
    std::vector<double> trace(61);
    double level = 10.0;
    for (auto& x : trace) x = (level -= u(rng) < 0.3 ? u(rng) : 0.0) + 1e-5 * u(rng);
    const auto a = plateau_lr_trace(o, trace, 60);
    const auto b = plateau_lr_trace(o, trace, 60);
    properties = properties && a == b;
    for (std::size_t e = 0; e < a.size(); ++e) {
      properties = properties && a[e] >= o.floor && (e == 0 || a[e] <= a[e - 1]);
    }
  }
  return {exact && properties,
          fmt("never-improving trace -> lr %s for epochs 1-10 and %s for 11-50; 200 random traces "
              "deterministic, monotone, >= floor: %s",
              exact ? "1e-4" : "WRONG", exact ? "1e-5" : "WRONG", properties ? "yes" : "no")};
}

std::vector<std::uint8_t> bytes_of(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

Verdict persistence() {
  const fs::path dir = fs::temp_directory_path() / "banet_acceptance_persistence";
  fs::remove_all(dir);
  fs::create_directories(dir);

  RunConfig cfg;
  cfg.model = with_backbone(Variant::Full, micro_backbone());
  cfg.scene.height = 64;
  cfg.scene.width = 96;
  cfg.synthetic_train = 4;
  cfg.synthetic_val = 2;
  cfg.augment = true;
  cfg.augment_flags.crop_height = 64;
  cfg.augment_flags.crop_width = 64;
  cfg.epochs = 2;
  cfg.out_dir = (dir / "run").string();
  Trainer trainer(cfg, load_data(cfg));
  trainer.run();
  trainer.model().set_training(false);

  const auto ckpt_path = dir / "model.ckpt";
  trainer.checkpoint().save(ckpt_path);
  Checkpoint::load(ckpt_path).save(dir / "resaved.ckpt");
  const bool bytes_equal = bytes_of(ckpt_path) == bytes_of(dir / "resaved.ckpt");

  const auto reloaded = load_model(Checkpoint::load(ckpt_path));
  const auto samples = trainer.val_samples();
  bool outputs_equal = true;
  {
    NoGradGuard ng;
    for (const auto& s : samples) {
      const auto batch = make_batch(std::span<const DepthSample>(&s, 1));
      const auto a = predict_meters(trainer.model(), batch.image, cfg.d_max);
      const auto b = predict_meters(reloaded, batch.image, cfg.d_max);
      outputs_equal = outputs_equal && std::equal(a.data().begin(), a.data().end(), b.data().begin());
    }
  }
  const auto direct = evaluate_model(trainer.model(), samples, cfg.d_max);
  EvalResult r0{"full", 0, direct, 0};
  EvalOptions eo;
  eo.checkpoint = ckpt_path;
  const auto e1 = run_eval(eo);
  const auto e2 = run_eval(eo);
  EvalResult r1 = e1;
  r1.params = 0;
  r1.images = 0;
  const bool reports_equal = format_metrics_kv(e1) == format_metrics_kv(e2) &&
                             format_metrics_kv(r0) == format_metrics_kv(r1);

  // Depth PNG quantisation, on random maps and on an actual prediction.
  Rng rng(91);
  std::uniform_real_distribution<double> depth(1e-3, 80.0);
  double worst_png = 0.0;
  for (int k = 0; k < 10; ++k) {
    DepthMap m;
    m.height = 48;
    m.width = 80;
    for (int i = 0; i < m.height * m.width; ++i) {
      m.depth.push_back(static_cast<float>(depth(rng)));
      m.mask.push_back(1);
    }
    save_depth_png16(dir / "d.png", m);
    const auto back = load_depth_png16(dir / "d.png");
    for (std::size_t i = 0; i < m.depth.size(); ++i) {
      worst_png = std::max(worst_png, std::abs(double(back.depth[i]) - double(m.depth[i])));
    }
  }
  save_image_png(dir / "input.png", samples[0].image);
  std::ostringstream sink;
  cmd_predict(ckpt_path, dir / "input.png", dir / "pred", sink);
  const auto png = load_depth_png16(dir / "pred_depth.png");
  double worst_pred = 0.0;
  {
    NoGradGuard ng;
    const auto img = load_image_png(dir / "input.png");
    const auto pred = predict_meters(
        reloaded, Tensor<float>({1, 3, img.height, img.width}, img.rgb), cfg.d_max);
    for (std::size_t i = 0; i < png.depth.size(); ++i) {
      worst_pred = std::max(worst_pred, std::abs(double(png.depth[i]) - double(pred.data()[i])));
    }
  }
  fs::remove_all(dir);
  const bool ok = bytes_equal && outputs_equal && reports_equal && worst_png <= kPngTol &&
                  worst_pred <= kPngTol;
  return {ok, fmt("save-load-save identical bytes: %s; reloaded predictions bit-identical: %s; eval "
                  "reports identical: %s; PNG round trip max err %.5f m, prediction PNG %.5f m "
                  "(tol %.5f)",
                  bytes_equal ? "yes" : "no", outputs_equal ? "yes" : "no",
                  reports_equal ? "yes" : "no", worst_png, worst_pred, kPngTol)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"BANet acceptance criteria"};
  std::vector<int> only, expect_fail;
  app.add_option("--only", only, "run just these criteria")->check(CLI::Range(1, 9));
  app.add_option("--expect-fail", expect_fail, "criteria with a documented failure")
      ->check(CLI::Range(1, 9));
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria = {
      {"gradient integrity", gradient_integrity},
      {"resolution contract", resolution_contract},
      {"attention simplex", attention_simplex},
      {"dependency structure", dependency_structure},
      {"variant parameter ordering", parameter_ordering},
      {"metric oracle equivalence", metric_oracle},
      {"micro-overfit", micro_overfit},
      {"schedule conformance", schedule_conformance},
      {"persistence", persistence},
  };
  const std::set<int> selected(only.begin(), only.end());
  const std::set<int> expected(expect_fail.begin(), expect_fail.end());

  int passed = 0, ran = 0;
  bool unexpected = false;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const int id = static_cast<int>(k) + 1;
    if (!selected.empty() && !selected.count(id)) continue;
    Verdict v;
    try {
      v = criteria[k].second();
    } catch (const std::exception& e) {
      v = {false, std::string("threw: ") + e.what()};
    }
    ++ran;
    passed += v.pass;
    if (!v.pass && !expected.count(id)) unexpected = true;
    std::cout << (v.pass ? "PASS" : "FAIL") << "  [" << id << "] " << criteria[k].first << ": "
              << v.detail << (!v.pass && expected.count(id) ? "  (expected failure)" : "") << '\n'
              << std::flush;
  }
  std::cout << passed << "/" << ran << " criteria passed\n";
  return unexpected ? 1 : 0;
}
