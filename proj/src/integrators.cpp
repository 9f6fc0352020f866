#include "mfl/integrators.hpp"

#include <chrono>
#include <cmath>
#include <iostream>
#include <string>

#include "mfl/parallel.hpp"

namespace mfl {
namespace {

// Below this value of gamma*h the closed forms for phi1 and sigma11 lose
// digits to cancellation, so their power series are summed instead.
constexpr double kSeriesThreshold = 0.5;

// u + expm1(-u) = sum_{k>=2} (-1)^k u^k / k!
double phi1_kernel(double u) {
  if (u >= kSeriesThreshold) return u + std::expm1(-u);
  double term = u;  // u^k / k! at k = 1
  double sum = 0.0;
  for (int k = 2; k < 60; ++k) {
    term *= u / k;
    const double signed_term = (k % 2 == 0) ? term : -term;
    sum += signed_term;
    if (std::abs(term) <= 1e-18 * std::abs(sum)) break;
  }
  return sum;
}

// u - 2(1 - e^{-u}) + (1 - e^{-2u})/2 = sum_{k>=3} (-1)^{k+1} (2^{k-1} - 2) u^k / k!
double sigma11_kernel(double u) {
  if (u >= kSeriesThreshold) return u + 2.0 * std::expm1(-u) - 0.5 * std::expm1(-2.0 * u);
  double term = u;  // u^k / k!
  double pow2 = 1.0;  // 2^{k-1}
  double sum = 0.0;
  for (int k = 2; k < 80; ++k) {
    term *= u / k;
    pow2 *= 2.0;
    if (k < 3) continue;
    const double coef = pow2 - 2.0;
    const double magnitude = coef * term;
    sum += (k % 2 == 1) ? magnitude : -magnitude;
    if (magnitude <= 1e-18 * std::abs(sum)) break;
  }
  return sum;
}

void require_finite_nonneg(double value, const char* name) {
  if (!(value >= 0.0) || !std::isfinite(value)) {
    throw ConfigError(std::string(name) + " must be a finite non-negative number");
  }
}

template <typename Fn>
void for_rows(std::size_t n, unsigned threads, Fn&& fn) {
  parallel_for(n, threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) fn(i);
  });
}

void check_shapes(const Matrix& positions, const Matrix& grads) {
  if (grads.rows() != positions.rows() || grads.cols() != positions.cols()) {
    throw ConfigError("gradient matrix shape does not match the particle cloud");
  }
}

}  // namespace

StepParams derive_step_params(double gamma, double h, double temperature) {
  if (!(gamma > 0.0) || !std::isfinite(gamma)) {
    throw ConfigError("gamma must be a finite positive number");
  }
  require_finite_nonneg(h, "h");
  require_finite_nonneg(temperature, "temperature");

  const double u = gamma * h;
  const double one_minus_decay = -std::expm1(-u);  // 1 - e^{-u}
  StepParams p;
  p.mode = StepMode::kExactEi;
  p.gamma = gamma;
  p.h = h;
  p.temperature = temperature;
  p.phi0 = one_minus_decay / gamma;
  p.phi1 = phi1_kernel(u) / (gamma * gamma);
  p.phi2 = std::exp(-u);
  p.phi3 = p.phi0;
  p.sigma11 = temperature * 2.0 * sigma11_kernel(u) / (gamma * gamma);
  p.sigma12 = temperature * one_minus_decay * one_minus_decay / gamma;
  p.sigma22 = temperature * -std::expm1(-2.0 * u);
  return p;
}

StepParams tuned_step_params(double phi0, double phi1, double phi2, double phi3, double eta) {
  if (!(phi2 > 0.0 && phi2 <= 1.0)) {
    throw ConfigError("phi2 must lie in (0, 1]");
  }
  if (!std::isfinite(phi0) || !std::isfinite(phi1) || !std::isfinite(phi3)) {
    throw ConfigError("phi coefficients must be finite");
  }
  require_finite_nonneg(eta, "eta");
  StepParams p;
  p.mode = StepMode::kTuned;
  p.phi0 = phi0;
  p.phi1 = phi1;
  p.phi2 = phi2;
  p.phi3 = phi3;
  p.sigma11 = eta * eta;
  p.sigma12 = 0.0;
  p.sigma22 = eta * eta;
  p.temperature = 1.0;
  p.h = 0.0;
  p.gamma = 0.0;
  return p;
}

NoiseFactor factor_noise(const StepParams& params) {
  const double s11 = params.sigma11;
  const double s12 = params.sigma12;
  const double s22 = params.sigma22;
  if (s11 < 0.0 || s22 < 0.0 || !std::isfinite(s11) || !std::isfinite(s12) ||
      !std::isfinite(s22)) {
    throw NumericalError("noise covariance has a negative or non-finite diagonal");
  }
  NoiseFactor f;
  if (s22 == 0.0) {
    if (s12 != 0.0) throw NumericalError("noise covariance is not PSD: sigma22 = 0, sigma12 != 0");
    f.x_own = std::sqrt(s11);
    return f;
  }
  f.v_scale = std::sqrt(s22);
  f.x_shared = s12 / f.v_scale;
  double radicand = s11 - s12 * s12 / s22;
  if (radicand < 0.0) {
    if (radicand < -1e-14 * s11) {
      throw NumericalError("noise covariance is not PSD: conditional variance " +
                           std::to_string(radicand));
    }
    radicand = 0.0;
  }
  f.x_own = std::sqrt(radicand);
  return f;
}

NoisePair sample_correlated_noise(const StepParams& params, const RngStreams& rng,
                                  std::size_t particle, std::size_t step, std::size_t dim) {
  const NoiseFactor f = factor_noise(params);
  auto stream = rng.particle_step(particle, step);
  const auto d = static_cast<Eigen::Index>(dim);
  NoisePair out{Vector(d), Vector(d)};
  for (Eigen::Index j = 0; j < d; ++j) {
    const double xi1 = stream.next();
    const double xi2 = stream.next();
    out.bv(j) = f.v_scale * xi1;
    out.bx(j) = f.x_shared * xi1 + f.x_own * xi2;
  }
  return out;
}

EmParams make_em_params(double h2, double gamma, double lambda2, std::optional<double> h3) {
  require_finite_nonneg(h2, "h2");
  require_finite_nonneg(lambda2, "lambda2");
  if (!std::isfinite(gamma)) throw ConfigError("gamma must be finite");
  EmParams p{h2, gamma, h3.value_or(gamma * h2), lambda2};
  if (!std::isfinite(p.h3)) throw ConfigError("h3 must be finite");
  if (p.h3 >= 1.0) {
    std::cerr << "warning: EM damping factor 1 - h3 = " << 1.0 - p.h3
              << " is not contractive (h3 >= 1)\n";
  }
  return p;
}

NlaParams make_nla_params(double h1, double lambda1) {
  require_finite_nonneg(h1, "h1");
  require_finite_nonneg(lambda1, "lambda1");
  return {h1, lambda1};
}

std::string integrator_name(const IntegratorSpec& spec) {
  struct Visitor {
    std::string operator()(const StepParams&) const { return "nula"; }
    std::string operator()(const EmParams&) const { return "em_nula"; }
    std::string operator()(const NlaParams&) const { return "nla"; }
  };
  return std::visit(Visitor{}, spec);
}

ParticleCloud nula_step(ParticleCloud cloud, const Matrix& grads, const StepParams& params,
                        const RngStreams& rng, std::size_t step, unsigned threads) {
  check_shapes(cloud.positions(), grads);
  const NoiseFactor f = factor_noise(params);
  const bool noisy = f.x_own != 0.0 || f.x_shared != 0.0 || f.v_scale != 0.0;
  Matrix& x = cloud.positions();
  Matrix& v = cloud.velocities();
  const Eigen::Index d = x.cols();
  for_rows(cloud.n_particles(), threads, [&](std::size_t i) {
    const auto r = static_cast<Eigen::Index>(i);
    double* xr = x.data() + r * d;
    double* vr = v.data() + r * d;
    const double* gr = grads.data() + r * d;
    if (!noisy) {
      for (Eigen::Index j = 0; j < d; ++j) {
        const double vj = vr[j];
        xr[j] += params.phi0 * vj - params.phi1 * gr[j];
        vr[j] = params.phi2 * vj - params.phi3 * gr[j];
      }
      return;
    }
    auto stream = rng.particle_step(i, step);
    for (Eigen::Index j = 0; j < d; ++j) {
      const double xi1 = stream.next();
      const double xi2 = stream.next();
      const double vj = vr[j];
      xr[j] += params.phi0 * vj - params.phi1 * gr[j] + f.x_shared * xi1 + f.x_own * xi2;
      vr[j] = params.phi2 * vj - params.phi3 * gr[j] + f.v_scale * xi1;
    }
  });
  check_finite(cloud, step + 1);
  return cloud;
}

ParticleCloud em_nula_step(ParticleCloud cloud, const Matrix& grads, const EmParams& params,
                           const RngStreams& rng, std::size_t step, unsigned threads) {
  check_shapes(cloud.positions(), grads);
  const double noise = std::sqrt(2.0 * params.lambda2 * params.h2);
  const double damping = 1.0 - params.h3;
  Matrix& x = cloud.positions();
  Matrix& v = cloud.velocities();
  const Eigen::Index d = x.cols();
  for_rows(cloud.n_particles(), threads, [&](std::size_t i) {
    const auto r = static_cast<Eigen::Index>(i);
    double* xr = x.data() + r * d;
    double* vr = v.data() + r * d;
    const double* gr = grads.data() + r * d;
    if (noise == 0.0) {
      for (Eigen::Index j = 0; j < d; ++j) {
        const double vj = vr[j];
        xr[j] += params.h2 * vj;
        vr[j] = damping * vj - params.h2 * gr[j];
      }
      return;
    }
    auto stream = rng.particle_step(i, step);
    for (Eigen::Index j = 0; j < d; ++j) {
      const double vj = vr[j];
      xr[j] += params.h2 * vj;
      vr[j] = damping * vj - params.h2 * gr[j] + noise * stream.next();
    }
  });
  check_finite(cloud, step + 1);
  return cloud;
}

Matrix nla_step(Matrix positions, const Matrix& grads, const NlaParams& params,
                const RngStreams& rng, std::size_t step, unsigned threads) {
  check_shapes(positions, grads);
  const double noise = std::sqrt(2.0 * params.lambda1 * params.h1);
  const Eigen::Index d = positions.cols();
  for_rows(static_cast<std::size_t>(positions.rows()), threads, [&](std::size_t i) {
    const auto r = static_cast<Eigen::Index>(i);
    double* xr = positions.data() + r * d;
    const double* gr = grads.data() + r * d;
    if (noise == 0.0) {
      for (Eigen::Index j = 0; j < d; ++j) xr[j] -= params.h1 * gr[j];
      return;
    }
    auto stream = rng.particle_step(i, step);
    for (Eigen::Index j = 0; j < d; ++j) xr[j] += -params.h1 * gr[j] + noise * stream.next();
  });
  check_finite(positions, step + 1, "position");
  return positions;
}

ParticleCloud apply_step(ParticleCloud cloud, const Matrix& grads, const IntegratorSpec& spec,
                         const RngStreams& rng, std::size_t step, unsigned threads) {
  if (const auto* p = std::get_if<StepParams>(&spec)) {
    return nula_step(std::move(cloud), grads, *p, rng, step, threads);
  }
  if (const auto* p = std::get_if<EmParams>(&spec)) {
    return em_nula_step(std::move(cloud), grads, *p, rng, step, threads);
  }
  const auto& p = std::get<NlaParams>(spec);
  cloud.positions() = nla_step(std::move(cloud.positions()), grads, p, rng, step, threads);
  return cloud;
}

ChainResult run_chain(ParticleCloud cloud, const MeanFieldObjective& objective,
                      const IntegratorSpec& spec, const RngStreams& rng,
                      const ChainOptions& options) {
  if (options.record_every == 0) throw ConfigError("record_every must be >= 1");
  if (cloud.dim() != objective.dim()) {
    throw ConfigError("cloud dim " + std::to_string(cloud.dim()) +
                      " does not match objective dim " + std::to_string(objective.dim()));
  }
  std::vector<RunRecord> records;
  if (options.steps == 0) return {std::move(records), std::move(cloud)};

  using Clock = std::chrono::steady_clock;
  const auto start = Clock::now();
  try {
    for (std::size_t k = 0;; ++k) {
      const Matrix grads = objective.batch_grad(cloud.positions(), options.threads);
      check_finite(grads, k, "gradient");
      if (k % options.record_every == 0 || k == options.steps) {
        RunRecord row;
        row.step = k;
        row.loss = objective.value(cloud.positions());
        if (!std::isfinite(row.loss)) {
          throw DivergenceError(k, "divergence at step " + std::to_string(k) +
                                       ": non-finite loss");
        }
        row.grad_norm_mean = grads.rowwise().norm().mean();
        const SecondMoments m = second_moments(cloud);
        row.x_m2 = m.x_m2;
        row.v_m2 = m.v_m2;
        if (options.measure_wall_time) {
          row.wall_ms =
              std::chrono::duration<double, std::milli>(Clock::now() - start).count();
        }
        records.push_back(row);
      }
      if (k == options.steps) break;
      cloud = apply_step(std::move(cloud), grads, spec, rng, k, options.threads);
      if (options.on_step) options.on_step(k + 1, cloud);
    }
  } catch (const DivergenceError& e) {
    throw ChainDivergence(e, std::move(records));
  }
  return {std::move(records), std::move(cloud)};
}

}  // namespace mfl
