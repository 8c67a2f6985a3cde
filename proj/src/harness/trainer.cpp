#include "banet/harness/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>

#include "banet/data/resolution.hpp"
#include "banet/errors.hpp"
#include "banet/objectives/losses.hpp"

namespace banet {

namespace fs = std::filesystem;

DataSplits load_data(const RunConfig& config) {
  DataSplits d;
  if (!config.data_root.empty()) {
    d.train = load_split(config.data_root, "train", config.d_max);
    d.val = load_split(config.data_root, "val", config.d_max);
  } else {
    d.train = generate_samples(config.scene, config.synthetic_train, config.seed, 0, "train");
    d.val = generate_samples(config.scene, config.synthetic_val, config.seed, 1, "val");
  }
  for (auto* split : {&d.train, &d.val}) {
    for (auto& s : *split) s.d_max = config.d_max;
  }
  if (d.train.empty() || d.val.empty()) throw ConfigError("training needs non-empty train and val splits");
  return d;
}

std::vector<DepthSample> load_eval_split(const RunConfig& config, const std::string& split) {
  if (!config.data_root.empty()) return load_split(config.data_root, split, config.d_max);
  if (split == "train") return generate_samples(config.scene, config.synthetic_train, config.seed, 0, "train");
  if (split == "val") return generate_samples(config.scene, config.synthetic_val, config.seed, 1, "val");
  throw UsageError("synthetic data only has 'train' and 'val' splits, not '" + split + "'");
}

Tensor<float> predict_meters(const BANet<float>& model, const Tensor<float>& images, double d_max) {
  const auto prepared = preprocess(images);
  const auto pred = model.forward(prepared.image).depth;
  const auto full = postprocess(pred, prepared.pad, static_cast<int>(images.size(2)),
                                static_cast<int>(images.size(3)));
  return denormalize(full, d_max);
}

Tensor<float> training_loss(LossKind kind, const Tensor<float>& pred_meters,
                            const Tensor<float>& gt, std::span<const std::uint8_t> mask,
                            double d_max) {
  if (kind == LossKind::L1) return l1_loss(pred_meters, gt, mask, d_max);
  SilogOptions opts;
  opts.d_max = d_max;
  return silog_loss(pred_meters, gt, mask, opts);
}

MetricsReport evaluate_predictions(
    std::span<const DepthSample> samples, double d_max,
    const std::function<std::vector<double>(const DepthSample&)>& predict) {
  MetricsAverager avg;
  for (const auto& s : samples) {
    const auto pred = predict(s);
    if (pred.size() != s.depth.depth.size()) {
      throw UsageError("prediction for '" + s.id + "' has the wrong size");
    }
    const std::vector<double> gt(s.depth.depth.begin(), s.depth.depth.end());
    avg.add(eval_metrics(DepthPair{pred, gt, s.depth.mask, d_max}));
  }
  return avg.result();
}

MetricsReport evaluate_model(const BANet<float>& model, std::span<const DepthSample> samples,
                             double d_max) {
  if (model.training()) throw UsageError("evaluate_model: switch the model to eval mode first");
  NoGradGuard no_grad;
  return evaluate_predictions(samples, d_max, [&](const DepthSample& s) {
    const auto batch = make_batch(std::span<const DepthSample>(&s, 1));
    const auto pred = predict_meters(model, batch.image, d_max);
    return std::vector<double>(pred.data().begin(), pred.data().end());
  });
}

std::string format_epoch_log(const EpochLog& log) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "epoch=%d lr=%.6g train_loss=%.6f val_loss=%.6f", log.epoch,
                log.lr, log.train_loss, log.val_loss);
  return buf;
}

Trainer::Trainer(RunConfig config, DataSplits data)
    : config_(std::move(config)), data_(std::move(data)), model_(config_.model, config_.seed) {
  config_.validate();
  if (data_.train.empty() || data_.val.empty()) throw ConfigError("training needs non-empty train and val splits");
  params_ = model_.store().parameter_tensors();
  state_.schedule = PlateauSchedule(config_.schedule);
  state_.adam = AdamState<float>(params_, AdamOptions{.lr = config_.schedule.initial});
}

void Trainer::resume(const Checkpoint& checkpoint) {
  const auto saved = checkpoint_config(checkpoint);
  for (const auto& key : model_keys()) {
    if (saved.get(key) != config_.get(key)) {
      throw ConfigError("config/checkpoint mismatch: " + key + " is '" + config_.get(key) +
                        "' in the config but '" + saved.get(key) + "' in the checkpoint");
    }
  }
  restore_model(checkpoint, model_);
  state_ = restore_training_state(checkpoint, model_);
  steps_ = state_.adam.step;
}

double Trainer::train_step(const Batch& batch, double lr) {
  model_.set_training(true);
  model_.store().zero_grad();
  const auto pred = predict_meters(model_, batch.image, config_.d_max);
  const auto loss = training_loss(config_.loss, pred, batch.depth, batch.mask, config_.d_max);
  const double value = loss.item();
  if (!std::isfinite(value)) return value;
  loss.backward();
  state_.adam.options.lr = lr;
  adam_step(std::span<Tensor<float>>(params_), state_.adam);
  ++steps_;
  return value;
}

double Trainer::validation_loss() {
  NoGradGuard no_grad;
  const bool was_training = model_.training();
  model_.set_training(false);
  double total = 0.0;
  for (const auto& s : data_.val) {
    const auto batch = make_batch(std::span<const DepthSample>(&s, 1));
    const auto pred = predict_meters(model_, batch.image, config_.d_max);
    total += training_loss(config_.loss, pred, batch.depth, batch.mask, config_.d_max).item();
  }
  model_.set_training(was_training);
  return total / static_cast<double>(data_.val.size());
}

TrainResult Trainer::run(std::ostream* log) {
  TrainResult result;
  const bool write = !config_.out_dir.empty();
  const fs::path out = config_.out_dir;
  if (write) fs::create_directories(out);

  if (!state_.schedule.has_best()) {
    const double baseline = validation_loss();
    if (!std::isfinite(baseline)) throw NumericalError("baseline validation loss is not finite");
    state_.schedule.observe(baseline);
    state_.best_val_loss = baseline;
    result.baseline_val_loss = baseline;
    if (write) checkpoint().save(out / "best.ckpt");
  } else {
    result.baseline_val_loss = state_.schedule.best();
  }

  const std::optional<AugmentFlags> aug =
      config_.augment ? std::optional<AugmentFlags>(config_.augment_flags) : std::nullopt;
  const BatchLoader loader(data_.train, config_.batch_size, config_.shuffle, aug, config_.seed);

  bool stop = config_.max_steps > 0 && steps_ >= config_.max_steps;
  for (int epoch = state_.epoch + 1; epoch <= config_.epochs && !stop; ++epoch) {
    const double lr = config_.plateau ? state_.schedule.lr() : config_.schedule.initial;
    double sum = 0.0;
    int count = 0;
    for (const auto& batch : loader.epoch(epoch)) {
      const double loss = train_step(batch, lr);
      if (!std::isfinite(loss)) {
        std::string ids;
        for (const auto& id : batch.ids) ids += (ids.empty() ? "" : ",") + id;
        const std::string what = "non-finite training loss (" + std::to_string(loss) +
                                 ") at epoch " + std::to_string(epoch) + ", step " +
                                 std::to_string(steps_ + 1) + ", batch [" + ids + "]";
        if (write) {
          std::ofstream dump(out / "nonfinite_batch.txt");
          dump << "epoch=" << epoch << "\nstep=" << steps_ + 1 << "\nlr=" << lr
               << "\nloss=" << loss << "\nbatch=" << ids << "\n";
        }
        throw NumericalError(what);
      }
      result.step_losses.push_back(loss);
      sum += loss;
      ++count;
      if (config_.max_steps > 0 && steps_ >= config_.max_steps) {
        stop = true;
        break;
      }
    }

    EpochLog entry{epoch, lr, sum / std::max(count, 1), validation_loss()};
    if (!std::isfinite(entry.val_loss)) {
      throw NumericalError("non-finite validation loss after epoch " + std::to_string(epoch));
    }
    const bool best = entry.val_loss < state_.best_val_loss;
    if (best) state_.best_val_loss = entry.val_loss;
    if (config_.plateau) state_.schedule.observe(entry.val_loss);
    state_.epoch = epoch;
    result.epochs.push_back(entry);
    if (log) *log << format_epoch_log(entry) << '\n' << std::flush;
    if (write) {
      const auto ckpt = checkpoint();
      ckpt.save(out / "last.ckpt");
      if (best) ckpt.save(out / "best.ckpt");
    }
  }
  return result;
}

}  // namespace banet
