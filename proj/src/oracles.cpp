#include "mfl/oracles.hpp"

#include <cmath>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/multiprecision/cpp_bin_float.hpp>
#include <unsupported/Eigen/MatrixFunctions>

#include "mfl/errors.hpp"

namespace mfl::oracles {

StepParams high_precision_step_params(double gamma, double h, double temperature) {
  using Real = boost::multiprecision::cpp_bin_float_50;
  const Real g(gamma);
  const Real t(temperature);
  const Real u = g * Real(h);
  const Real e1 = exp(-u);
  const Real e2 = exp(-2 * u);

  StepParams p;
  p.gamma = gamma;
  p.h = h;
  p.temperature = temperature;
  p.phi0 = static_cast<double>((1 - e1) / g);
  p.phi1 = static_cast<double>((u - 1 + e1) / (g * g));
  p.phi2 = static_cast<double>(e1);
  p.phi3 = p.phi0;
  p.sigma11 = static_cast<double>(2 * t * (u - 2 * (1 - e1) + (1 - e2) / 2) / (g * g));
  p.sigma12 = static_cast<double>(t * (1 - e1) * (1 - e1) / g);
  p.sigma22 = static_cast<double>(t * (1 - e2));
  return p;
}

Eigen::Matrix2d chain_transition(const StepParams& params, double lambda_prime) {
  Eigen::Matrix2d m;
  m << 1.0 - lambda_prime * params.phi1, params.phi0, -lambda_prime * params.phi3, params.phi2;
  return m;
}

Eigen::Matrix2d ou_chain_stationary_covariance(const StepParams& params, double lambda_prime) {
  const Eigen::Matrix2d m = chain_transition(params, lambda_prime);
  const Eigen::Vector2cd eig = m.eigenvalues();
  const double radius = std::max(std::abs(eig(0)), std::abs(eig(1)));
  if (!(radius < 1.0)) {
    throw OracleError("linear chain is not contractive: spectral radius " +
                      std::to_string(radius));
  }
  Eigen::Matrix2d q;
  q << params.sigma11, params.sigma12, params.sigma12, params.sigma22;

  // Doubling form of the fixed-point iteration: after k rounds P holds
  // sum_{i < 2^k} M^i Q (M^i)^T, every partial sum PSD.
  Eigen::Matrix2d p = q;
  Eigen::Matrix2d a = m;
  for (int round = 0; round < 200; ++round) {
    const Eigen::Matrix2d next = p + a * p * a.transpose();
    const double change = (next - p).norm();
    p = next;
    a = a * a;
    if (p(0, 0) < 0.0 || p(1, 1) < 0.0 || p.determinant() < -1e-12 * p.squaredNorm()) {
      throw OracleError("Lyapunov iterate lost positive semidefiniteness");
    }
    if (change <= 1e-12 * p.norm() || p.norm() == 0.0) return p;
  }
  throw OracleError("Lyapunov fixed point did not converge");
}

Eigen::Matrix2d ou_chain_stationary_covariance(const LinearChainSpec& spec) {
  if (!(spec.lambda_prime > 0.0) || !(spec.h > 0.0)) {
    throw OracleError("linear chain needs positive h and lambda'");
  }
  return ou_chain_stationary_covariance(
      derive_step_params(spec.gamma, spec.h, spec.temperature), spec.lambda_prime);
}

LinearStepLaw exact_linear_step_law(double gamma, double h, double temperature, double x,
                                    double v, double g) {
  Eigen::Matrix2d drift;
  drift << 0.0, 1.0, 0.0, -gamma;

  Eigen::Matrix3d mean_gen = Eigen::Matrix3d::Zero();
  mean_gen.topLeftCorner<2, 2>() = drift;
  mean_gen(1, 2) = -g;
  const Eigen::Matrix3d mean_prop = (mean_gen * h).exp();
  const Eigen::Vector3d start(x, v, 1.0);

  Eigen::Matrix2d diffusion = Eigen::Matrix2d::Zero();
  diffusion(1, 1) = 2.0 * gamma * temperature;
  Eigen::Matrix4d cov_gen = Eigen::Matrix4d::Zero();
  cov_gen.topLeftCorner<2, 2>() = -drift;
  cov_gen.topRightCorner<2, 2>() = diffusion;
  cov_gen.bottomRightCorner<2, 2>() = drift.transpose();
  const Eigen::Matrix4d cov_prop = (cov_gen * h).exp();
  const Eigen::Matrix2d f12 = cov_prop.topRightCorner<2, 2>();
  const Eigen::Matrix2d f22 = cov_prop.bottomRightCorner<2, 2>();

  LinearStepLaw law;
  law.mean = (mean_prop * start).head<2>();
  law.covariance = f22.transpose() * f12;
  law.covariance = 0.5 * (law.covariance + law.covariance.transpose()).eval();
  return law;
}

double finite_diff_grad_check(const MeanFieldObjective& objective, const Matrix& positions,
                              std::size_t particle, double eps) {
  if (particle >= static_cast<std::size_t>(positions.rows())) {
    throw OracleError("finite_diff_grad_check: particle index out of range");
  }
  const auto row = static_cast<Eigen::Index>(particle);
  const double n = static_cast<double>(positions.rows());
  const Vector analytic = objective.batch_grad(positions).row(row).transpose();
  Matrix probe = positions;
  double worst = 0.0;
  const double scale = std::max(analytic.cwiseAbs().maxCoeff(), 1e-8);
  for (Eigen::Index k = 0; k < positions.cols(); ++k) {
    const double base = positions(row, k);
    probe(row, k) = base + eps;
    const double up = n * objective.value(probe);
    probe(row, k) = base - eps;
    const double down = n * objective.value(probe);
    probe(row, k) = base;
    const double fd = (up - down) / (2.0 * eps);
    worst = std::max(worst, std::abs(fd - analytic(k)) / scale);
  }
  return worst;
}

namespace {

double gaussian_density(double z, double mean, double sigma) {
  const double t = (z - mean) / sigma;
  return std::exp(-0.5 * t * t) / (sigma * std::sqrt(2.0 * std::numbers::pi));
}

double integrate(const std::function<double(double)>& f, double lo, double hi) {
  double error = 0.0;
  const double value =
      boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, lo, hi, 15, 1e-13, &error);
  if (!std::isfinite(value) || error > 1e-10 * std::max(1.0, std::abs(value))) {
    throw OracleError("quadrature did not converge (error estimate " + std::to_string(error) +
                      ")");
  }
  return value;
}

}  // namespace

MmdQuadratureErrors quadrature_validate_mmd(double x, double xp, double z, double sigma) {
  if (!(sigma > 0.0)) throw OracleError("quadrature_validate_mmd: sigma must be positive");
  const double s2 = sigma * sigma;
  auto rbf = [s2](double a, double b) { return std::exp(-(a - b) * (a - b) / (2.0 * s2)); };

  // Finite windows of +-14 sigma around the density centers hold all but
  // ~1e-44 of the Gaussian mass.
  const double width = 14.0 * sigma;
  const double pair = integrate(
      [&](double z1) {
        const double inner = integrate(
            [&](double z2) { return gaussian_density(z2, xp, sigma) * rbf(z1, z2); },
            xp - width, xp + width);
        return gaussian_density(z1, x, sigma) * inner;
      },
      x - width, x + width);
  const double data = integrate(
      [&](double z1) { return gaussian_density(z1, x, sigma) * rbf(z1, z); }, x - width,
      x + width);

  return {std::abs(pair - mmd_pair_term((x - xp) * (x - xp), 1, sigma)),
          std::abs(data - mmd_data_term((x - z) * (x - z), 1, sigma))};
}

BatchMeans batch_means(std::span<const double> series, std::size_t n_batches) {
  if (n_batches < 2 || series.size() < n_batches) {
    throw OracleError("batch_means needs at least n_batches >= 2 observations");
  }
  const std::size_t batch = series.size() / n_batches;
  std::vector<double> means(n_batches, 0.0);
  for (std::size_t b = 0; b < n_batches; ++b) {
    double sum = 0.0;
    for (std::size_t i = 0; i < batch; ++i) sum += series[b * batch + i];
    means[b] = sum / static_cast<double>(batch);
  }
  double grand = 0.0;
  for (double m : means) grand += m;
  grand /= static_cast<double>(n_batches);
  double ss = 0.0;
  for (double m : means) ss += (m - grand) * (m - grand);
  const double var_of_mean =
      ss / static_cast<double>(n_batches - 1) / static_cast<double>(n_batches);
  return {grand, std::sqrt(var_of_mean)};
}

StationaryCheck run_stationary_check(const LinearChainSpec& spec, std::size_t n_particles,
                                     std::size_t dim, std::size_t steps, std::uint64_t seed,
                                     unsigned threads) {
  if (steps < 100) throw OracleError("stationary check needs at least 100 steps");
  const StepParams params = derive_step_params(spec.gamma, spec.h, spec.temperature);
  StationaryCheck out;
  out.oracle = ou_chain_stationary_covariance(params, spec.lambda_prime);

  const RidgeObjective ridge(dim, spec.lambda_prime);
  const RngStreams rng(seed);
  ParticleCloud cloud = init_cloud(n_particles, dim, 0.0, 1.0, rng);

  const std::size_t burn_in = steps / 2;
  std::vector<double> xx, vv, xv;
  xx.reserve(steps - burn_in);
  vv.reserve(steps - burn_in);
  xv.reserve(steps - burn_in);
  const double count = static_cast<double>(n_particles * dim);

  ChainOptions options;
  options.steps = steps;
  options.record_every = steps;
  options.threads = threads;
  options.on_step = [&](std::size_t k, const ParticleCloud& c) {
    if (k <= burn_in) return;
    const auto& x = c.positions();
    const auto& v = c.velocities();
    xx.push_back(x.squaredNorm() / count);
    vv.push_back(v.squaredNorm() / count);
    xv.push_back(x.cwiseProduct(v).sum() / count);
  };
  run_chain(std::move(cloud), ridge, IntegratorSpec{params}, rng, options);

  out.x_var = batch_means(xx);
  out.v_var = batch_means(vv);
  out.xv_cov = batch_means(xv);
  return out;
}

}  // namespace mfl::oracles
