#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "mfl/errors.hpp"
#include "mfl/objectives.hpp"
#include "mfl/particle_cloud.hpp"
#include "mfl/rng.hpp"
#include "mfl/run_record.hpp"

namespace mfl {

enum class StepMode { kExactEi, kTuned };

// Coefficients of one underdamped update
//   x' = x + phi0 v - phi1 g + bx
//   v' = phi2 v - phi3 g + bv
// with (bx_j, bv_j) ~ N(0, [[sigma11, sigma12], [sigma12, sigma22]]) per coordinate.
struct StepParams {
  double gamma = 1.0;
  double h = 0.0;
  double phi0 = 0.0;
  double phi1 = 0.0;
  double phi2 = 1.0;
  double phi3 = 0.0;
  double sigma11 = 0.0;
  double sigma12 = 0.0;
  double sigma22 = 0.0;
  double temperature = 1.0;
  StepMode mode = StepMode::kExactEi;
};

// Exponential-integrator coefficients: the exact one-step solution of the
// kinetic Langevin SDE with the force frozen at the start of the step.
// Noise covariance is scaled by `temperature` (1 is the unit-temperature law).
StepParams derive_step_params(double gamma, double h, double temperature = 1.0);

// Hand-tuned coefficients with isotropic, uncorrelated noise of scale eta in
// both channels.
StepParams tuned_step_params(double phi0, double phi1, double phi2, double phi3, double eta);

// Square-root factorization of the per-coordinate 2x2 noise covariance:
//   bv = v_scale * xi1,  bx = x_shared * xi1 + x_own * xi2.
struct NoiseFactor {
  double x_shared = 0.0;
  double x_own = 0.0;
  double v_scale = 0.0;
};

NoiseFactor factor_noise(const StepParams& params);

struct NoisePair {
  Vector bx;
  Vector bv;
};

// Correlated noise for one particle at one step.
NoisePair sample_correlated_noise(const StepParams& params, const RngStreams& rng,
                                  std::size_t particle, std::size_t step, std::size_t dim);

// Euler-Maruyama underdamped baseline:
//   x' = x + h2 v,  v' = (1 - h3) v - h2 g + sqrt(2 lambda2 h2) xi
struct EmParams {
  double h2 = 0.0;
  double gamma = 1.0;
  double h3 = 0.0;
  double lambda2 = 0.0;
};

// h3 defaults to gamma * h2. Warns on stderr when h3 >= 1 (no contraction).
EmParams make_em_params(double h2, double gamma, double lambda2,
                        std::optional<double> h3 = std::nullopt);

// Overdamped baseline: x' = x - h1 g + sqrt(2 lambda1 h1) xi.
struct NlaParams {
  double h1 = 0.0;
  double lambda1 = 0.0;
};

NlaParams make_nla_params(double h1, double lambda1);

using IntegratorSpec = std::variant<StepParams, EmParams, NlaParams>;

std::string integrator_name(const IntegratorSpec& spec);

// One update of every particle. `step` selects the noise substreams; a
// divergent result throws DivergenceError carrying step + 1.
ParticleCloud nula_step(ParticleCloud cloud, const Matrix& grads, const StepParams& params,
                        const RngStreams& rng, std::size_t step, unsigned threads = 1);

ParticleCloud em_nula_step(ParticleCloud cloud, const Matrix& grads, const EmParams& params,
                           const RngStreams& rng, std::size_t step, unsigned threads = 1);

Matrix nla_step(Matrix positions, const Matrix& grads, const NlaParams& params,
                const RngStreams& rng, std::size_t step, unsigned threads = 1);

ParticleCloud apply_step(ParticleCloud cloud, const Matrix& grads, const IntegratorSpec& spec,
                         const RngStreams& rng, std::size_t step, unsigned threads = 1);

struct ChainOptions {
  std::size_t steps = 0;
  std::size_t record_every = 10;
  unsigned threads = 1;
  bool measure_wall_time = false;
  // Called after every update with the number of completed steps.
  std::function<void(std::size_t, const ParticleCloud&)> on_step;
};

struct ChainResult {
  std::vector<RunRecord> records;
  ParticleCloud cloud;
};

// Divergence inside run_chain; keeps the rows recorded before the failure.
class ChainDivergence : public DivergenceError {
 public:
  ChainDivergence(const DivergenceError& cause, std::vector<RunRecord> records)
      : DivergenceError(cause.step(), cause.what()), records_(std::move(records)) {}

  const std::vector<RunRecord>& records() const noexcept { return records_; }

 private:
  std::vector<RunRecord> records_;
};

// Runs `steps` updates. Records are taken at step 0, every record_every
// steps, and at the final step; none when steps == 0.
ChainResult run_chain(ParticleCloud cloud, const MeanFieldObjective& objective,
                      const IntegratorSpec& spec, const RngStreams& rng,
                      const ChainOptions& options);

}  // namespace mfl
