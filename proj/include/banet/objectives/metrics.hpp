#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace banet {

// One evaluation image. Predictions are clamped to [min_prediction, d_max]
// before any metric is computed.
struct DepthPair {
  std::span<const double> prediction;
  std::span<const double> ground_truth;
  std::span<const std::uint8_t> mask;
  double d_max = 80.0;
  double min_prediction = 1e-3;
};

// Error metrics are lower-better; SILog, AbsRel and SqRel in percent, MAE and
// RMSE in meters, iRMSE in 1/km. Deltas are percentages of valid pixels.
struct MetricsReport {
  double silog = 0.0;
  double sqrel = 0.0;
  double absrel = 0.0;
  double mae = 0.0;
  double rmse = 0.0;
  double irmse = 0.0;
  double delta_25 = 0.0;
  double delta_56 = 0.0;
  double delta_95 = 0.0;
  std::int64_t valid_pixel_count = 0;
};

// Percent of valid pixels with max(a/t, t/a) < 1 + k/100.
// Throws EmptyMaskError when nothing is valid.
double delta_accuracy(const DepthPair& pair, int k);

// Throws EmptyMaskError when nothing is valid.
MetricsReport eval_metrics(const DepthPair& pair);

// Dataset-level metrics: every image's report weighs the same, pixel counts
// add up.
class MetricsAverager {
 public:
  void add(const MetricsReport& report);
  std::int64_t images() const { return images_; }
  // Throws EmptyMaskError if nothing was added.
  MetricsReport result() const;

 private:
  MetricsReport sum_;
  std::int64_t images_ = 0;
};

}  // namespace banet
