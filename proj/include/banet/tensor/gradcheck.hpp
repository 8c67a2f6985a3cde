#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "banet/tensor/tensor.hpp"

namespace banet {

struct GradcheckOptions {
  double eps = 1e-5;  // central-difference step
  double tol = 1e-4;
  // Denominator floor for the relative error, so near-zero gradient entries
  // are compared on an absolute scale of floor * tol.
  double floor = 1e-4;
  // Entries probed per input; 0 probes every entry.
  std::int64_t max_checks_per_input = 0;
  std::uint64_t seed = 0;
};

struct GradcheckInput {
  std::string name;
  Tensor<double> tensor;  // must be a leaf
};

struct GradcheckEntry {
  std::string name;
  std::int64_t checked = 0;
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  bool passed = true;
};

struct GradcheckReport {
  std::vector<GradcheckEntry> entries;
  double tol = 0.0;

  bool passed() const;
  double max_rel_error() const;
};

// rel = |analytic - numeric| / max(|analytic|, |numeric|, floor)
double gradient_relative_error(double analytic, double numeric, double floor);

// Compares the reverse-mode gradient of `loss` w.r.t. each input against
// central finite differences. `loss` is re-evaluated with inputs perturbed in
// place, so it must read the inputs' current values on every call. Inputs are
// restored bit-exactly afterwards.
GradcheckReport gradcheck(const std::function<Tensor<double>()>& loss,
                          std::span<const GradcheckInput> inputs,
                          const GradcheckOptions& options = {});

// One line per input: name, entries checked, max relative error, verdict.
void print_report(std::ostream& os, const std::string& title,
                  const GradcheckReport& report);

}  // namespace banet
