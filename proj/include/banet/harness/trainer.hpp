#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "banet/data/dataset.hpp"
#include "banet/harness/checkpoint.hpp"
#include "banet/harness/run_config.hpp"
#include "banet/objectives/metrics.hpp"

namespace banet {

struct DataSplits {
  std::vector<DepthSample> train;
  std::vector<DepthSample> val;
};

// `data.root` splits when set, otherwise synthetic scenes drawn from the run
// seed (train stream 0, val stream 1).
DataSplits load_data(const RunConfig& config);
std::vector<DepthSample> load_eval_split(const RunConfig& config, const std::string& split);

// Model prediction in meters at the images' own resolution: half-sample and
// pad, forward, crop and resize back, scale by d_max.
Tensor<float> predict_meters(const BANet<float>& model, const Tensor<float>& images, double d_max);

Tensor<float> training_loss(LossKind kind, const Tensor<float>& pred_meters,
                            const Tensor<float>& gt, std::span<const std::uint8_t> mask,
                            double d_max);

// Per-image metrics averaged over the samples. `predict` returns a prediction
// in meters with one value per ground-truth pixel.
MetricsReport evaluate_predictions(
    std::span<const DepthSample> samples, double d_max,
    const std::function<std::vector<double>(const DepthSample&)>& predict);
// Throws UsageError for a model in training mode.
MetricsReport evaluate_model(const BANet<float>& model, std::span<const DepthSample> samples,
                             double d_max);

struct EpochLog {
  int epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;  // mean over the epoch's steps
  double val_loss = 0.0;
};

std::string format_epoch_log(const EpochLog& log);

struct TrainResult {
  double baseline_val_loss = 0.0;
  std::vector<EpochLog> epochs;
  std::vector<double> step_losses;
};

// Adam training with the plateau schedule on validation loss. With a
// non-empty `out` directory, writes last.ckpt after every epoch and
// best.ckpt whenever validation loss reaches a new minimum.
class Trainer {
 public:
  Trainer(RunConfig config, DataSplits data);

  // Continues from a checkpoint written by this trainer.
  void resume(const Checkpoint& checkpoint);

  // Runs until train.epochs or train.max_steps. Throws NumericalError on a
  // non-finite loss, after writing <out>/nonfinite_batch.txt.
  TrainResult run(std::ostream* log = nullptr);

  // One optimizer step; returns the loss before the update.
  double train_step(const Batch& batch, double lr);
  double validation_loss();

  BANet<float>& model() { return model_; }
  const BANet<float>& model() const { return model_; }
  const TrainingState& state() const { return state_; }
  const RunConfig& config() const { return config_; }
  std::span<const DepthSample> train_samples() const { return data_.train; }
  std::span<const DepthSample> val_samples() const { return data_.val; }

  Checkpoint checkpoint() const { return capture_checkpoint(config_, model_, &state_); }

 private:
  RunConfig config_;
  DataSplits data_;
  BANet<float> model_;
  std::vector<Tensor<float>> params_;
  TrainingState state_;
  std::int64_t steps_ = 0;
};

}  // namespace banet
