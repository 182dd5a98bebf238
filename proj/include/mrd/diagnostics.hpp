#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mrd/model.hpp"

namespace mrd {

/// Random two-view model with N=6, Q=3, M=4, D=5 per view.
MrdModel make_gradcheck_model(std::uint64_t seed, bool dynamical);

struct GradcheckResult {
  bool dynamical = false;
  double max_rel_error = 0.0;
  std::string worst_parameter;  // block name and flat offset within it
};

/// Central differences (step 1e-5) of the bound in unconstrained space, for
/// both prior variants.
std::vector<GradcheckResult> run_gradcheck(std::uint64_t seed, double step = 1e-5);

struct ScalingTiming {
  Index n = 0;
  Index d = 0;
  double seconds = 0.0;  // median time of one bound + gradient evaluation
};

/// Times bound+gradient at M=20, Q=4 over the given (N, D) pairs.
std::vector<ScalingTiming> bench_scaling(const std::vector<std::pair<Index, Index>>& grid,
                                         std::uint64_t seed, int repeats = 7);

}  // namespace mrd
