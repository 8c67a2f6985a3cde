// banet: train, evaluate and inspect depth models.
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "banet/errors.hpp"
#include "banet/harness/commands.hpp"

using namespace banet;

namespace {

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::vector<std::string> overrides;  // key=value

  void attach(CLI::App* app) {
    app->add_option("--config", config_path, "key = value run config");
    app->add_option("--seed", seed, "overrides the config seed");
    app->add_option("--out", out, "output directory");
    app->add_option("--set", overrides, "extra key=value overrides, repeatable");
  }

  // File values first, then --set, then the dedicated flags.
  RunConfig resolve(bool* from_file = nullptr) const {
    RunConfig cfg = config_path.empty() ? RunConfig{} : RunConfig::load(config_path);
    if (from_file) *from_file = !config_path.empty() || !overrides.empty();
    for (const auto& kv : overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
      cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (seed) cfg.seed = *seed;
    if (!out.empty()) cfg.out_dir = out;
    return cfg;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"BANet monocular depth estimation"};
  app.require_subcommand(1);

  Common train_opts, eval_opts, predict_opts, attn_opts, grad_opts, gen_opts;

  auto* train = app.add_subcommand("train", "train a model");
  train_opts.attach(train);
  std::string resume;
  train->add_option("--resume", resume, "continue from a checkpoint");

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  eval_opts.attach(eval);
  std::string eval_ckpt, eval_split = "val", eval_data;
  eval->add_option("--checkpoint", eval_ckpt)->required();
  eval->add_option("--split", eval_split);
  eval->add_option("--data", eval_data, "dataset root, overrides the checkpoint's");

  auto* predict = app.add_subcommand("predict", "predict depth for one image");
  predict_opts.attach(predict);
  std::string pred_ckpt, pred_image;
  predict->add_option("--checkpoint", pred_ckpt)->required();
  predict->add_option("--image", pred_image)->required();

  auto* attn = app.add_subcommand("export-attention", "write per-stage attention maps");
  attn_opts.attach(attn);
  std::string attn_ckpt, attn_image;
  attn->add_option("--checkpoint", attn_ckpt)->required();
  attn->add_option("--image", attn_image)->required();

  auto* grad = app.add_subcommand("gradcheck", "finite-difference checks of ops and models");
  grad_opts.attach(grad);
  GradcheckCommandOptions gc;
  std::vector<std::string> gc_variants;
  grad->add_option("--seeds", gc.seeds, "seeds per op");
  grad->add_option("--variant", gc_variants, "restrict model checks, repeatable");
  grad->add_flag("!--no-ops", gc.ops, "skip the op suite");
  grad->add_flag("!--no-models", gc.models, "skip end-to-end model checks");

  auto* gen = app.add_subcommand("gen-data", "write a synthetic dataset");
  gen_opts.attach(gen);
  int gen_train = 64, gen_val = 16;
  gen->add_option("--train", gen_train, "train scenes");
  gen->add_option("--val", gen_val, "val scenes");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) {
      return cmd_train(train_opts.resolve(), std::cout,
                       resume.empty() ? std::nullopt : std::optional<std::filesystem::path>(resume));
    }
    if (*eval) {
      EvalOptions o;
      o.checkpoint = eval_ckpt;
      o.split = eval_split;
      if (!eval_data.empty()) o.data_root = eval_data;
      bool explicit_config = false;
      const auto cfg = eval_opts.resolve(&explicit_config);
      if (explicit_config) o.expected = &cfg;
      o.out_dir = eval_opts.out;
      return cmd_eval(o, std::cout);
    }
    if (*predict) {
      const std::string prefix = predict_opts.out.empty() ? "prediction" : predict_opts.out + "/prediction";
      return cmd_predict(pred_ckpt, pred_image, prefix, std::cout);
    }
    if (*attn) {
      return cmd_export_attention(attn_ckpt, attn_image, attn_opts.out.empty() ? "attention" : attn_opts.out,
                                  std::cout);
    }
    if (*grad) {
      if (!gc_variants.empty()) {
        gc.variants.clear();
        for (const auto& v : gc_variants) gc.variants.push_back(parse_variant(v));
      }
      return cmd_gradcheck(gc, std::cout);
    }
    if (*gen) {
      const auto cfg = gen_opts.resolve();
      return cmd_gen_data(cfg, gen_opts.out.empty() ? "data/synthetic" : gen_opts.out, gen_train,
                          gen_val, std::cout);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e);
  }
  return 0;
}
