#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

#include <Eigen/Dense>

#include "mfl/integrators.hpp"
#include "mfl/objectives.hpp"

namespace mfl::oracles {

// Closed-form step coefficients evaluated in 50-digit binary floating point
// and rounded to double; reference values for derive_step_params.
StepParams high_precision_step_params(double gamma, double h, double temperature = 1.0);

// Linear chain: NULA on the pure-ridge objective, gradient lambda' x.
struct LinearChainSpec {
  double gamma = 1.0;
  double h = 0.1;
  double lambda_prime = 1.0;
  double temperature = 1.0;
};

// Deterministic part of the per-coordinate update z' = M z + w for z = (x, v)
// under the gradient lambda' x frozen at the start of the step:
//   M = [[1 - lambda' phi1, phi0], [-lambda' phi3, phi2]].
Eigen::Matrix2d chain_transition(const StepParams& params, double lambda_prime);

// Stationary covariance of the linear-Gaussian recursion z' = M z + w,
// w ~ N(0, Sigma), i.e. the fixed point P = M P M^T + Sigma, iterated to
// relative 1e-12. Throws OracleError if M is not a contraction.
Eigen::Matrix2d ou_chain_stationary_covariance(const LinearChainSpec& spec);
Eigen::Matrix2d ou_chain_stationary_covariance(const StepParams& params, double lambda_prime);

// Exact one-step law of the linear SDE
//   dx = v dt,  dv = (-gamma v - g) dt + sqrt(2 gamma T) dB
// over [0, h] from (x, v) with constant force g, computed by matrix
// exponentials of augmented generators (Van Loan). Independent of the closed
// forms used by derive_step_params.
struct LinearStepLaw {
  Eigen::Vector2d mean;
  Eigen::Matrix2d covariance;
};

LinearStepLaw exact_linear_step_law(double gamma, double h, double temperature, double x,
                                    double v, double g);

// Central-difference gradient of N * value with respect to particle j versus
// batch_grad row j. Returns max_k |fd_k - g_k| / max(|g|_inf, 1e-8).
double finite_diff_grad_check(const MeanFieldObjective& objective, const Matrix& positions,
                              std::size_t particle, double eps = 1e-6);

// Adaptive quadrature of the d = 1 Gaussian convolutions behind the MMD
// closed forms; absolute errors of mmd_pair_term(x, x') and mmd_data_term(x, z).
struct MmdQuadratureErrors {
  double pair_err = 0.0;
  double data_err = 0.0;
};

MmdQuadratureErrors quadrature_validate_mmd(double x, double xp, double z, double sigma);

// Mean and autocorrelation-adjusted standard error by non-overlapping batch
// means.
struct BatchMeans {
  double mean = 0.0;
  double std_error = 0.0;
};

BatchMeans batch_means(std::span<const double> series, std::size_t n_batches = 50);

// Long-run moments of a NULA chain on the pure-ridge objective, compared with
// the stationary covariance of the discrete chain.
struct StationaryCheck {
  Eigen::Matrix2d oracle;  // per-coordinate stationary covariance
  BatchMeans x_var;
  BatchMeans v_var;
  BatchMeans xv_cov;
};

StationaryCheck run_stationary_check(const LinearChainSpec& spec, std::size_t n_particles,
                                     std::size_t dim, std::size_t steps, std::uint64_t seed,
                                     unsigned threads = 1);

}  // namespace mfl::oracles
