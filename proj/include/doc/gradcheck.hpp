#pragma once

#include <cstdint>
#include <vector>

#include "doc/optimize.hpp"

namespace doc {

struct GradcheckTrial {
  int dimension{6};
  double max_relative_error{0};
  int coordinates_checked{0};
  bool passed{false};
};

struct GradcheckOptions {
  std::uint64_t seed{7};
  int trials{20};
  double step{1e-5};
  double tolerance{1e-4};
  double min_magnitude{1e-8};
  Loss loss{Loss::TruncatedL1};
  bool corrupt_gradient{false};  // test hook: perturbs the analytic gradient
};

/// Compares energy_gradient with central differences of the energy under the
/// same frozen window state, on seeded synthetic 2- and 3-frame windows
/// (even trials 6-d, odd trials 12-d).
[[nodiscard]] std::vector<GradcheckTrial> run_gradcheck(const GradcheckOptions& opt);

}  // namespace doc
