#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "banet/tensor/gradcheck.hpp"

namespace banet {

// A randomized finite-difference check of one differentiable op. `run`
// draws fresh inputs from `seed` and reduces the op output against a random
// projection so every output entry contributes to the checked loss.
struct OpCheckCase {
  std::string name;
  std::function<GradcheckReport(std::uint64_t seed, const GradcheckOptions&)> run;
};

// Every differentiable op of the tensor engine.
std::vector<OpCheckCase> op_gradcheck_cases();

}  // namespace banet
