#include "mfl/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mfl/errors.hpp"

namespace mfl {

DecayFit fit_decay_rate(std::span<const RunRecord> records, StepWindow window, double plateau) {
  std::vector<double> xs;
  std::vector<double> ys;
  for (const RunRecord& r : records) {
    if (r.step < window.first || r.step > window.last) continue;
    const double excess = r.loss - plateau;
    if (!(excess > 0.0)) {
      throw FitError("non-positive excess loss at step " + std::to_string(r.step));
    }
    xs.push_back(static_cast<double>(r.step));
    ys.push_back(std::log(excess));
  }
  if (xs.size() < 2) throw FitError("decay fit needs at least two records in the window");

  const double n = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  if (sxx == 0.0) throw FitError("decay fit window spans a single step");
  DecayFit fit;
  fit.slope = sxy / sxx;
  fit.rate = -fit.slope;
  fit.r_squared = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  return fit;
}

DecayFit fit_decay_rate(std::span<const RunRecord> records, StepWindow window) {
  return fit_decay_rate(records, window, plateau_level(records, 0.2));
}

double plateau_level(std::span<const RunRecord> records, double tail_fraction) {
  if (!(tail_fraction > 0.0 && tail_fraction <= 1.0)) {
    throw FitError("tail_fraction must lie in (0, 1]");
  }
  const auto tail = static_cast<std::size_t>(
      std::ceil(tail_fraction * static_cast<double>(records.size()) - 1e-9));
  if (tail < 10) {
    throw FitError("plateau needs at least 10 tail records, have " + std::to_string(tail));
  }
  double sum = 0.0;
  for (std::size_t i = records.size() - tail; i < records.size(); ++i) sum += records[i].loss;
  return sum / static_cast<double>(tail);
}

std::vector<SeedBand> aggregate_seeds(const std::vector<std::vector<RunRecord>>& runs) {
  if (runs.empty()) throw FitError("aggregate_seeds needs at least one run");
  const auto& grid = runs.front();
  for (const auto& run : runs) {
    if (run.size() != grid.size()) throw FitError("runs have mismatched step grids");
    for (std::size_t i = 0; i < run.size(); ++i) {
      if (run[i].step != grid[i].step) throw FitError("runs have mismatched step grids");
    }
  }
  std::vector<SeedBand> bands(grid.size());
  const double count = static_cast<double>(runs.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    SeedBand& b = bands[i];
    b.step = grid[i].step;
    b.min = grid[i].loss;
    b.max = grid[i].loss;
    double sum = 0.0;
    for (const auto& run : runs) {
      sum += run[i].loss;
      b.min = std::min(b.min, run[i].loss);
      b.max = std::max(b.max, run[i].loss);
    }
    // Clamp guards the mean against rounding past the extremes.
    b.mean = std::clamp(sum / count, b.min, b.max);
  }
  return bands;
}

double grad_growth_check(const MeanFieldObjective& objective, const Matrix& positions,
                         std::span<const double> radii, std::size_t n_directions,
                         std::uint64_t seed) {
  const RngStreams rng(seed);
  const auto d = static_cast<Eigen::Index>(objective.dim());
  double worst = 0.0;
  for (std::size_t dir = 0; dir < n_directions; ++dir) {
    auto stream = rng.stream(StreamDomain::kOracle, dir, 0);
    Vector u(d);
    for (Eigen::Index j = 0; j < d; ++j) u(j) = stream.next();
    const double norm = u.norm();
    if (norm == 0.0) continue;
    u /= norm;
    for (double r : radii) {
      const Vector x = r * u;
      const double g = objective.intrinsic_grad(positions, x).norm();
      worst = std::max(worst, g / (1.0 + r));
    }
  }
  return worst;
}

std::vector<double> default_growth_radii() {
  std::vector<double> radii{0.0};
  for (int k = 0; k <= 16; ++k) radii.push_back(std::pow(10.0, -2.0 + 0.25 * k));
  return radii;
}

}  // namespace mfl
