#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "mfl/objectives.hpp"
#include "mfl/run_record.hpp"

namespace mfl {

struct SeedBand {
  std::size_t step = 0;
  double mean = 0.0;
  double min = 0.0;
  double max = 0.0;

  bool operator==(const SeedBand&) const = default;
};

// Inclusive range of recorded steps.
struct StepWindow {
  std::size_t first = 0;
  std::size_t last = 0;
};

struct DecayFit {
  double rate = 0.0;   // -slope; positive when the excess loss decays
  double slope = 0.0;  // d log(loss - plateau) / d step
  double r_squared = 0.0;
};

// Least-squares fit of log(loss - plateau) against step over the records in
// `window`. Throws FitError when any excess loss in the window is <= 0 or
// fewer than two records fall inside it.
DecayFit fit_decay_rate(std::span<const RunRecord> records, StepWindow window, double plateau);

// Same, with the plateau estimated by plateau_level(records, 0.2).
DecayFit fit_decay_rate(std::span<const RunRecord> records, StepWindow window);

// Mean loss over the final `tail_fraction` of the records. Needs at least
// 10 records in the tail.
double plateau_level(std::span<const RunRecord> records, double tail_fraction = 0.2);

// Pointwise mean/min/max of the loss across runs recorded on one step grid.
std::vector<SeedBand> aggregate_seeds(const std::vector<std::vector<RunRecord>>& runs);

// Smallest C with |D_rho F(mu, x)| <= C (1 + |x|) over random directions and the
// given radii, with mu fixed to the rows of `positions`.
double grad_growth_check(const MeanFieldObjective& objective, const Matrix& positions,
                         std::span<const double> radii, std::size_t n_directions = 32,
                         std::uint64_t seed = 0);

// Radii 0, 1e-2, ..., 100 on a log grid.
std::vector<double> default_growth_radii();

}  // namespace mfl
