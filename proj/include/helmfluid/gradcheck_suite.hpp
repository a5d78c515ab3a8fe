#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "helmfluid/autodiff.hpp"

namespace helmfluid {

struct GradCheckEntry {
  std::string name;
  ad::GradCheckReport report;
};

/// Central-difference checks of every autodiff op and the micro model
/// (tau = 2, L = 2, M = 2, channels {8, 16}, radius 1, 8 x 8) in double precision.
/// model_samples bounds the components checked per model parameter tensor (0 = all).
std::vector<GradCheckEntry> run_gradcheck_suite(double tol = 1e-4, std::uint64_t seed = 0,
                                                std::size_t model_samples = 16);

}  // namespace helmfluid
