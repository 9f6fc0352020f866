#pragma once

#include <cstddef>

#include <Eigen/Dense>

#include "mfl/rng.hpp"

namespace mfl {

// N x d, one particle per row.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

// Entries with magnitude above this bound are treated as divergence.
inline constexpr double kDivergenceBound = 1e12;

// Positions and velocities of an interacting particle system. The empirical
// measure of the rows of `positions` is the mean-field law seen by every
// particle.
class ParticleCloud {
 public:
  ParticleCloud(Matrix positions, Matrix velocities);
  static ParticleCloud zeros(std::size_t n_particles, std::size_t dim);

  std::size_t n_particles() const noexcept {
    return static_cast<std::size_t>(positions_.rows());
  }
  std::size_t dim() const noexcept {
    return static_cast<std::size_t>(positions_.cols());
  }

  const Matrix& positions() const noexcept { return positions_; }
  const Matrix& velocities() const noexcept { return velocities_; }
  Matrix& positions() noexcept { return positions_; }
  Matrix& velocities() noexcept { return velocities_; }

  bool operator==(const ParticleCloud& other) const {
    return positions_ == other.positions_ && velocities_ == other.velocities_;
  }

 private:
  Matrix positions_;
  Matrix velocities_;
};

struct SecondMoments {
  double x_m2 = 0.0;
  double v_m2 = 0.0;
};

// Positions and velocities drawn i.i.d. N(mean, std^2) per coordinate.
ParticleCloud init_cloud(std::size_t n_particles, std::size_t dim, double mean,
                         double std, const RngStreams& rng);

// (1/N) sum_i |x^i|^2 and (1/N) sum_i |v^i|^2.
SecondMoments second_moments(const ParticleCloud& cloud);

// Throws DivergenceError(step) if any entry is non-finite or exceeds
// kDivergenceBound in magnitude.
void check_finite(const Matrix& values, std::size_t step, const char* what);
void check_finite(const ParticleCloud& cloud, std::size_t step);

}  // namespace mfl
