#include "mfl/particle_cloud.hpp"

#include <cmath>
#include <string>

#include "mfl/errors.hpp"

namespace mfl {

ParticleCloud::ParticleCloud(Matrix positions, Matrix velocities)
    : positions_(std::move(positions)), velocities_(std::move(velocities)) {
  if (positions_.rows() != velocities_.rows() ||
      positions_.cols() != velocities_.cols()) {
    throw ConfigError("positions and velocities must have the same shape");
  }
  if (positions_.rows() == 0 || positions_.cols() == 0) {
    throw ConfigError("particle cloud needs n_particles >= 1 and dim >= 1");
  }
}

ParticleCloud ParticleCloud::zeros(std::size_t n_particles, std::size_t dim) {
  const auto n = static_cast<Eigen::Index>(n_particles);
  const auto d = static_cast<Eigen::Index>(dim);
  return ParticleCloud(Matrix::Zero(n, d), Matrix::Zero(n, d));
}

ParticleCloud init_cloud(std::size_t n_particles, std::size_t dim, double mean,
                         double std, const RngStreams& rng) {
  if (n_particles == 0) throw ConfigError("n_particles must be >= 1");
  if (dim == 0) throw ConfigError("dim must be >= 1");
  if (!(std >= 0.0) || !std::isfinite(std)) {
    throw ConfigError("init std must be a finite non-negative number");
  }
  if (!std::isfinite(mean)) throw ConfigError("init mean must be finite");

  ParticleCloud cloud = ParticleCloud::zeros(n_particles, dim);
  Matrix& x = cloud.positions();
  Matrix& v = cloud.velocities();
  for (std::size_t i = 0; i < n_particles; ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    auto xs = rng.stream(StreamDomain::kInit, i, 0);
    auto vs = rng.stream(StreamDomain::kInit, i, 1);
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      x(row, j) = mean + std * xs.next();
      v(row, j) = mean + std * vs.next();
    }
  }
  return cloud;
}

SecondMoments second_moments(const ParticleCloud& cloud) {
  const double n = static_cast<double>(cloud.n_particles());
  return {cloud.positions().squaredNorm() / n,
          cloud.velocities().squaredNorm() / n};
}

void check_finite(const Matrix& values, std::size_t step, const char* what) {
  const double* data = values.data();
  const Eigen::Index size = values.size();
  for (Eigen::Index k = 0; k < size; ++k) {
    const double value = data[k];
    if (!std::isfinite(value) || std::abs(value) > kDivergenceBound) {
      throw DivergenceError(step, std::string("divergence at step ") +
                                      std::to_string(step) + ": " + what +
                                      " entry " + std::to_string(value));
    }
  }
}

void check_finite(const ParticleCloud& cloud, std::size_t step) {
  check_finite(cloud.positions(), step, "position");
  check_finite(cloud.velocities(), step, "velocity");
}

}  // namespace mfl
