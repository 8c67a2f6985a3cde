#include "banet/tensor/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <random>

#include "banet/errors.hpp"

namespace banet {

bool GradcheckReport::passed() const {
  return std::all_of(entries.begin(), entries.end(),
                     [](const GradcheckEntry& e) { return e.passed; });
}

double GradcheckReport::max_rel_error() const {
  double worst = 0.0;
  for (const auto& e : entries) worst = std::max(worst, e.max_rel_error);
  return worst;
}

double gradient_relative_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

GradcheckReport gradcheck(const std::function<Tensor<double>()>& loss,
                          std::span<const GradcheckInput> inputs,
                          const GradcheckOptions& options) {
  std::vector<Tensor<double>> tensors;
  for (const auto& in : inputs) {
    if (!in.tensor.is_leaf()) {
      throw UsageError("gradcheck input '" + in.name + "' is not a leaf");
    }
    Tensor<double> t = in.tensor;
    t.set_requires_grad(true);
    t.zero_grad();
    tensors.push_back(t);
  }

  std::vector<std::vector<double>> analytic;
  {
    Tensor<double> value = loss();
    value.backward();
    for (auto& t : tensors) {
      if (t.has_grad()) {
        analytic.emplace_back(t.grad().begin(), t.grad().end());
      } else {
        analytic.emplace_back(static_cast<std::size_t>(t.numel()), 0.0);
      }
    }
  }

  auto evaluate = [&] {
    NoGradGuard no_grad;
    return loss().item();
  };

  std::mt19937_64 rng(options.seed);
  GradcheckReport report;
  report.tol = options.tol;
  for (std::size_t k = 0; k < tensors.size(); ++k) {
    auto& t = tensors[k];
    std::vector<std::int64_t> probe(static_cast<std::size_t>(t.numel()));
    std::iota(probe.begin(), probe.end(), 0);
    if (options.max_checks_per_input > 0 &&
        options.max_checks_per_input < t.numel()) {
      const auto m = static_cast<std::size_t>(options.max_checks_per_input);
      for (std::size_t i = 0; i < m; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, probe.size() - 1);
        std::swap(probe[i], probe[pick(rng)]);
      }
      probe.resize(m);
      std::sort(probe.begin(), probe.end());
    }

    GradcheckEntry entry;
    entry.name = inputs[k].name;
    auto values = t.mutable_data();
    for (auto idx : probe) {
      const auto i = static_cast<std::size_t>(idx);
      const double saved = values[i];
      values[i] = saved + options.eps;
      const double up = evaluate();
      values[i] = saved - options.eps;
      const double down = evaluate();
      values[i] = saved;
      const double numeric = (up - down) / (2.0 * options.eps);
      const double a = analytic[k][i];
      entry.max_rel_error = std::max(
          entry.max_rel_error, gradient_relative_error(a, numeric, options.floor));
      entry.max_abs_error = std::max(entry.max_abs_error, std::abs(a - numeric));
      ++entry.checked;
    }
    entry.passed = entry.max_rel_error < options.tol;
    report.entries.push_back(entry);
  }
  for (auto& t : tensors) t.zero_grad();
  return report;
}

void print_report(std::ostream& os, const std::string& title,
                  const GradcheckReport& report) {
  os << "== " << title << " (tol " << report.tol << ")\n";
  for (const auto& e : report.entries) {
    os << "  " << (e.passed ? "ok  " : "FAIL") << "  " << std::left
       << std::setw(44) << e.name << std::right << " checked=" << std::setw(5)
       << e.checked << "  max_rel=" << std::scientific << std::setprecision(3)
       << e.max_rel_error << std::defaultfloat << '\n';
  }
}

}  // namespace banet
