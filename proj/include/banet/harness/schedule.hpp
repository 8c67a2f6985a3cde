#pragma once

#include <span>
#include <vector>

#include "banet/harness/run_config.hpp"

namespace banet {

// Reduce-on-plateau over a validation loss. The first observation is the
// pre-training baseline: it sets the best value and never counts as a bad
// epoch. Afterwards an observation improves only if it beats the best by more
// than `threshold`; `patience` consecutive non-improving observations
// multiply the rate by `decay` (clamped to `floor`) and reset the counter.
class PlateauSchedule {
 public:
  PlateauSchedule() = default;
  explicit PlateauSchedule(const PlateauOptions& options);

  double lr() const { return lr_; }
  // Returns true when the observation improved on the best value.
  bool observe(double val_loss);

  bool has_best() const { return has_best_; }
  double best() const { return best_; }
  int bad_epochs() const { return bad_epochs_; }
  const PlateauOptions& options() const { return options_; }

  // Checkpoint support.
  void restore(double lr, double best, bool has_best, int bad_epochs);

 private:
  PlateauOptions options_;
  double lr_ = 0.0;
  double best_ = 0.0;
  bool has_best_ = false;
  int bad_epochs_ = 0;
};

// Rate used in each epoch 1..N given the baseline and the validation loss at
// the end of epochs 1..N-1. `val_history[0]` is the baseline.
std::vector<double> plateau_lr_trace(const PlateauOptions& options,
                                     std::span<const double> val_history, int epochs);

}  // namespace banet
