#include "banet/objectives/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "banet/errors.hpp"
#include "banet/objectives/losses.hpp"

namespace banet {

namespace {

struct ValidPixels {
  std::vector<double> pred;  // clamped
  std::vector<double> gt;
};

ValidPixels gather(const DepthPair& pair) {
  if (pair.prediction.size() != pair.ground_truth.size() ||
      pair.mask.size() != pair.ground_truth.size()) {
    throw ConfigError("eval: prediction, ground truth and mask sizes differ (" +
                      std::to_string(pair.prediction.size()) + ", " +
                      std::to_string(pair.ground_truth.size()) + ", " +
                      std::to_string(pair.mask.size()) + ")");
  }
  ValidPixels v;
  for (std::size_t i = 0; i < pair.ground_truth.size(); ++i) {
    if (!is_valid_depth(pair.mask[i], pair.ground_truth[i], pair.d_max)) continue;
    v.pred.push_back(std::clamp(pair.prediction[i], pair.min_prediction, pair.d_max));
    v.gt.push_back(pair.ground_truth[i]);
  }
  if (v.gt.empty()) throw EmptyMaskError();
  return v;
}

double delta_of(const ValidPixels& v, int k) {
  const double threshold = 1.0 + k / 100.0;
  std::int64_t hits = 0;
  for (std::size_t i = 0; i < v.gt.size(); ++i) {
    if (std::max(v.pred[i] / v.gt[i], v.gt[i] / v.pred[i]) < threshold) ++hits;
  }
  return 100.0 * static_cast<double>(hits) / static_cast<double>(v.gt.size());
}

}  // namespace

double delta_accuracy(const DepthPair& pair, int k) { return delta_of(gather(pair), k); }

MetricsReport eval_metrics(const DepthPair& pair) {
  const auto v = gather(pair);
  const double n = static_cast<double>(v.gt.size());

  std::vector<double> d(v.gt.size());
  double mean_d = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    d[i] = std::log(v.pred[i]) - std::log(v.gt[i]);
    mean_d += d[i];
  }
  mean_d /= n;

  // mean(d^2) - mean(d)^2 as a centered second moment
  double var = 0.0, abs_rel = 0.0, sq_rel = 0.0, abs_err = 0.0, sq_err = 0.0, inv_sq = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const double a = v.pred[i], t = v.gt[i];
    var += (d[i] - mean_d) * (d[i] - mean_d);
    abs_rel += std::abs(a - t) / t;
    sq_rel += ((a - t) / t) * ((a - t) / t);
    abs_err += std::abs(a - t);
    sq_err += (a - t) * (a - t);
    const double inv = 1000.0 / a - 1000.0 / t;
    inv_sq += inv * inv;
  }

  MetricsReport r;
  r.silog = 100.0 * std::sqrt(var / n);
  r.absrel = 100.0 * abs_rel / n;
  r.sqrel = 100.0 * sq_rel / n;
  r.mae = abs_err / n;
  r.rmse = std::sqrt(sq_err / n);
  r.irmse = std::sqrt(inv_sq / n);
  r.delta_25 = delta_of(v, 25);
  r.delta_56 = delta_of(v, 56);
  r.delta_95 = delta_of(v, 95);
  r.valid_pixel_count = static_cast<std::int64_t>(v.gt.size());
  return r;
}

void MetricsAverager::add(const MetricsReport& r) {
  sum_.silog += r.silog;
  sum_.sqrel += r.sqrel;
  sum_.absrel += r.absrel;
  sum_.mae += r.mae;
  sum_.rmse += r.rmse;
  sum_.irmse += r.irmse;
  sum_.delta_25 += r.delta_25;
  sum_.delta_56 += r.delta_56;
  sum_.delta_95 += r.delta_95;
  sum_.valid_pixel_count += r.valid_pixel_count;
  ++images_;
}

MetricsReport MetricsAverager::result() const {
  if (images_ == 0) throw EmptyMaskError("no images were evaluated");
  const double n = static_cast<double>(images_);
  MetricsReport r = sum_;
  for (double* f : {&r.silog, &r.sqrel, &r.absrel, &r.mae, &r.rmse, &r.irmse, &r.delta_25,
                    &r.delta_56, &r.delta_95}) {
    *f /= n;
  }
  return r;
}

}  // namespace banet
