#include "banet/harness/schedule.hpp"

#include <algorithm>
#include <cmath>

#include "banet/errors.hpp"

namespace banet {

PlateauSchedule::PlateauSchedule(const PlateauOptions& options)
    : options_(options), lr_(options.initial) {
  options.validate();
}

bool PlateauSchedule::observe(double val_loss) {
  if (!has_best_) {
    has_best_ = true;
    best_ = val_loss;
    return true;
  }
  if (val_loss < best_ - options_.threshold) {
    best_ = val_loss;
    bad_epochs_ = 0;
    return true;
  }
  if (++bad_epochs_ >= options_.patience) {
    bad_epochs_ = 0;
    const double next = lr_ * options_.decay;
    // Snap so that e.g. 1e-4 * 0.1 lands on a 1e-5 floor exactly.
    lr_ = next <= options_.floor * (1.0 + 1e-9) ? options_.floor : next;
  }
  return false;
}

void PlateauSchedule::restore(double lr, double best, bool has_best, int bad_epochs) {
  if (!(lr > 0) || bad_epochs < 0) throw FormatError("invalid schedule state");
  lr_ = lr;
  best_ = best;
  has_best_ = has_best;
  bad_epochs_ = bad_epochs;
}

std::vector<double> plateau_lr_trace(const PlateauOptions& options,
                                     std::span<const double> val_history, int epochs) {
  if (epochs < 0 || val_history.size() < static_cast<std::size_t>(std::max(epochs, 1))) {
    throw UsageError("plateau_lr_trace: need a baseline plus one loss per finished epoch");
  }
  PlateauSchedule s(options);
  std::vector<double> out;
  for (int e = 0; e < epochs; ++e) {
    s.observe(val_history[static_cast<std::size_t>(e)]);
    out.push_back(s.lr());
  }
  return out;
}

}  // namespace banet
