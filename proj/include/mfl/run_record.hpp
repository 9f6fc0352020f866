#pragma once

#include <cstddef>

namespace mfl {

// One diagnostic row of a chain, taken at the state after `step` updates.
struct RunRecord {
  std::size_t step = 0;
  double loss = 0.0;
  double grad_norm_mean = 0.0;
  double x_m2 = 0.0;
  double v_m2 = 0.0;
  double wall_ms = 0.0;

  bool operator==(const RunRecord&) const = default;
};

}  // namespace mfl
