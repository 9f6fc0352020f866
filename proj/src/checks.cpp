#include "mfl/checks.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>
#include <utility>

#include "mfl/integrators.hpp"
#include "mfl/objectives.hpp"
#include "mfl/oracles.hpp"

namespace mfl {
namespace {

constexpr std::uint64_t kCheckSeed = 20240601;

double rel_err(double got, double want) {
  if (want == 0.0) return std::abs(got);
  return std::abs(got - want) / std::abs(want);
}

CheckResult verdict(std::string name, double value, double threshold, std::string detail) {
  return {std::move(name), value <= threshold, value, threshold, std::move(detail)};
}

StepParams coefficients_under_test(double gamma, double h, const CheckOptions& options) {
  StepParams p = derive_step_params(gamma, h);
  p.phi1 *= 1.0 + options.phi1_tamper;
  return p;
}

std::vector<double> log_grid(double lo, double hi, int n) {
  std::vector<double> out;
  for (int i = 0; i < n; ++i) {
    out.push_back(lo * std::pow(hi / lo, static_cast<double>(i) / (n - 1)));
  }
  return out;
}

CheckResult check_step_params_exact(const CheckOptions& options) {
  double worst = 0.0;
  std::string where;
  for (double gamma : log_grid(1e-2, 1e2, 20)) {
    for (double h : log_grid(1e-4, 1.0, 20)) {
      const StepParams got = coefficients_under_test(gamma, h, options);
      const StepParams ref = oracles::high_precision_step_params(gamma, h);
      const double errs[] = {rel_err(got.phi0, ref.phi0),       rel_err(got.phi1, ref.phi1),
                             rel_err(got.phi2, ref.phi2),       rel_err(got.phi3, ref.phi3),
                             rel_err(got.sigma11, ref.sigma11), rel_err(got.sigma12, ref.sigma12),
                             rel_err(got.sigma22, ref.sigma22)};
      const double e = *std::max_element(std::begin(errs), std::end(errs));
      if (e > worst) {
        worst = e;
        std::ostringstream s;
        s << "worst at gamma=" << gamma << " h=" << h;
        where = s.str();
      }
    }
  }
  return verdict("step_params_exact", worst, 1e-12, where);
}

CheckResult check_taylor_limits(const CheckOptions& options) {
  // Leading terms: Sigma11 ~ (2/3) gamma h^3, Sigma12 ~ gamma h^2,
  // Sigma22 ~ 2 gamma h. The phi's follow their three-term expansions.
  double sigma_worst = 0.0;
  double phi_worst = 0.0;
  for (double gamma : {0.5, 1.0, 2.0}) {
    for (double u : {1e-3, 1e-4, 1e-5}) {
      const double h = u / gamma;
      const StepParams p = coefficients_under_test(gamma, h, options);
      sigma_worst = std::max({sigma_worst, rel_err(p.sigma11, 2.0 / 3.0 * gamma * h * h * h),
                              rel_err(p.sigma12, gamma * h * h), rel_err(p.sigma22, 2.0 * gamma * h)});
      const double phi0 = h * (1.0 - u / 2.0 + u * u / 6.0);
      const double phi1 = h * h / 2.0 * (1.0 - u / 3.0 + u * u / 12.0);
      const double phi2 = 1.0 - u + u * u / 2.0;
      phi_worst = std::max({phi_worst, rel_err(p.phi0, phi0), rel_err(p.phi1, phi1),
                            rel_err(p.phi2, phi2), rel_err(p.phi3, phi0)});
    }
  }
  // The sigma limits hold to O(gamma h); the phi expansions to O((gamma h)^3).
  const bool ok = sigma_worst <= 1e-2 && phi_worst <= 1e-8;
  std::ostringstream s;
  s << "sigma limits " << sigma_worst << " (<= 1e-2), phi residual " << phi_worst
    << " (<= 1e-8)";
  return {"step_params_taylor", ok, std::max(sigma_worst / 1e-2, phi_worst / 1e-8), 1.0,
          s.str()};
}

CheckResult check_van_loan(const CheckOptions& options) {
  double worst = 0.0;
  for (double gamma : {0.3, 1.0, 4.0}) {
    for (double h : {0.01, 0.1, 0.7}) {
      const StepParams p = coefficients_under_test(gamma, h, options);
      const double x = 0.4, v = -1.1, g = 0.75;
      const oracles::LinearStepLaw law = oracles::exact_linear_step_law(gamma, h, 1.0, x, v, g);
      worst = std::max({worst, rel_err(x + p.phi0 * v - p.phi1 * g, law.mean(0)),
                        rel_err(p.phi2 * v - p.phi3 * g, law.mean(1)),
                        rel_err(p.sigma11, law.covariance(0, 0)),
                        rel_err(p.sigma12, law.covariance(0, 1)),
                        rel_err(p.sigma22, law.covariance(1, 1))});
    }
  }
  return verdict("step_law_matrix_exponential", worst, 1e-9, "one step vs Van Loan exponential");
}

CheckResult check_psd_grid() {
  double worst = 0.0;
  for (double gamma : log_grid(1e-3, 1e3, 30)) {
    for (double h : log_grid(1e-6, 1e2, 30)) {
      const StepParams p = derive_step_params(gamma, h);
      const double det = p.sigma11 * p.sigma22 - p.sigma12 * p.sigma12;
      const double scale = p.sigma11 * p.sigma22;
      if (p.sigma11 < 0.0 || p.sigma22 < 0.0) worst = std::max(worst, 1.0);
      if (scale > 0.0) worst = std::max(worst, -det / scale);
      factor_noise(p);
    }
  }
  return verdict("covariance_psd_grid", worst, 1e-12, "relative negative determinant");
}

CheckResult check_noise_mc(std::size_t n_draws, double tolerance) {
  const StepParams p = derive_step_params(1.0, 0.5);
  const RngStreams rng(kCheckSeed);
  const std::size_t dim = 1000;
  const std::size_t particles = n_draws / dim;
  double sxx = 0.0, sxv = 0.0, svv = 0.0;
  for (std::size_t i = 0; i < particles; ++i) {
    const NoisePair pair = sample_correlated_noise(p, rng, i, 0, dim);
    sxx += pair.bx.squaredNorm();
    svv += pair.bv.squaredNorm();
    sxv += pair.bx.dot(pair.bv);
  }
  const double n = static_cast<double>(particles * dim);
  const double worst = std::max(
      {rel_err(sxx / n, p.sigma11), rel_err(sxv / n, p.sigma12), rel_err(svv / n, p.sigma22)});
  std::ostringstream s;
  s << static_cast<std::size_t>(n) << " draws at gamma=1 h=0.5";
  return verdict("noise_covariance_mc", worst, tolerance, s.str());
}

CheckResult check_small_h_correlation() {
  const StepParams p = derive_step_params(1.0, 1e-4);
  const double corr = p.sigma12 / std::sqrt(p.sigma11 * p.sigma22);
  return verdict("noise_correlation_limit", rel_err(corr, std::sqrt(3.0) / 2.0), 5e-3,
                 "correlation at gamma h = 1e-4 vs sqrt(3)/2");
}

Matrix random_positions(std::size_t n, std::size_t d, std::uint64_t instance) {
  const RngStreams rng(kCheckSeed + instance);
  auto stream = rng.stream(StreamDomain::kOracle, instance, 0);
  Matrix x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = stream.next();
  return x;
}

using ObjectiveFactory = std::function<std::unique_ptr<MeanFieldObjective>(std::size_t d,
                                                                           std::uint64_t seed)>;

CheckResult check_grad_identity(const std::string& label, const ObjectiveFactory& make,
                                std::size_t instances) {
  double worst = 0.0;
  for (std::size_t k = 0; k < instances; ++k) {
    const std::size_t d = 1 + k % 5;
    const std::size_t n = 2 + (k * 3) % 7;
    const auto objective = make(d, k);
    const Matrix x = random_positions(n, d, k);
    worst = std::max(worst, oracles::finite_diff_grad_check(*objective, x, k % n));
  }
  std::ostringstream s;
  s << instances << " instances, d <= 5, N <= 8";
  return verdict("grad_identity_" + label, worst, 1e-5, s.str());
}

CheckResult check_mmd_quadrature(std::size_t instances) {
  const RngStreams rng(kCheckSeed);
  auto stream = rng.stream(StreamDomain::kOracle, 999, 0);
  double worst = 0.0;
  for (std::size_t k = 0; k < instances; ++k) {
    const double x = stream.next();
    const double xp = stream.next();
    const double z = stream.next();
    const double sigma = 0.5 + 0.25 * std::abs(stream.next());
    const oracles::MmdQuadratureErrors e = oracles::quadrature_validate_mmd(x, xp, z, sigma);
    worst = std::max({worst, e.pair_err, e.data_err});
  }
  std::ostringstream s;
  s << instances << " random 1-D instances";
  return verdict("mmd_quadrature", worst, 1e-6, s.str());
}

CheckResult check_stein_fd() {
  Eigen::MatrixXd means(2, 3);
  means << 1.0, -0.5, 0.0, -1.0, 0.5, 0.3;
  const ScoreModel score = ScoreModel::gaussian_mixture({0.3, 0.7}, means, 0.9);
  const KsdKernel kernel{1.3, 0.8};
  const double eps = 1e-6;
  double worst = 0.0;
  for (std::uint64_t k = 0; k < 20; ++k) {
    const Matrix pts = random_positions(2, 3, 500 + k);
    const Vector x = pts.row(0).transpose();
    const Vector xp = pts.row(1).transpose();
    const Vector sxp = score.score(xp);
    const Vector g = stein_kernel_grad_x(kernel, x, xp, score.score(x), sxp, score.jacobian(x));
    const double scale = std::max(g.cwiseAbs().maxCoeff(), 1e-8);
    for (Eigen::Index j = 0; j < x.size(); ++j) {
      Vector up = x, down = x;
      up(j) += eps;
      down(j) -= eps;
      const double fd = (stein_kernel(kernel, up, xp, score.score(up), sxp) -
                         stein_kernel(kernel, down, xp, score.score(down), sxp)) /
                        (2.0 * eps);
      worst = std::max(worst, std::abs(fd - g(j)) / scale);
    }
  }
  return verdict("stein_kernel_fd", worst, 1e-6, "20 mixture-score pairs, d=3");
}

CheckResult check_lyapunov() {
  const oracles::LinearChainSpec spec{1.0, 0.05, 1.0, 1.0};
  const StepParams p = derive_step_params(spec.gamma, spec.h, spec.temperature);
  const Eigen::Matrix2d cov = oracles::ou_chain_stationary_covariance(spec);
  const Eigen::Matrix2d m = oracles::chain_transition(p, spec.lambda_prime);
  Eigen::Matrix2d q;
  q << p.sigma11, p.sigma12, p.sigma12, p.sigma22;
  const double residual = (cov - m * cov * m.transpose() - q).norm() / cov.norm();
  const double min_eig = Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d>(cov).eigenvalues()(0);
  const double continuum_gap = std::max(rel_err(cov(0, 0), 1.0 / spec.lambda_prime),
                                        rel_err(cov(1, 1), 1.0));
  std::ostringstream s;
  s << "fixed-point residual " << residual << ", min eigenvalue " << min_eig
    << ", gap to diag(1/lambda', 1) " << continuum_gap;
  const bool ok = residual <= 1e-12 && min_eig > 0.0 && continuum_gap <= 0.05;
  return {"lyapunov_oracle", ok, residual, 1e-12, s.str()};
}

CheckResult check_stationary(unsigned threads) {
  const oracles::LinearChainSpec spec{1.0, 0.05, 1.0, 1.0};
  const oracles::StationaryCheck r =
      oracles::run_stationary_check(spec, 400, 1, 5000, kCheckSeed, threads);
  const double zx = std::abs(r.x_var.mean - r.oracle(0, 0)) / r.x_var.std_error;
  const double zv = std::abs(r.v_var.mean - r.oracle(1, 1)) / r.v_var.std_error;
  const double zc = std::abs(r.xv_cov.mean - r.oracle(0, 1)) / r.xv_cov.std_error;
  std::ostringstream s;
  s << "x var " << r.x_var.mean << " vs " << r.oracle(0, 0) << ", v var " << r.v_var.mean
    << " vs " << r.oracle(1, 1) << " (1e6 tail samples)";
  return verdict("stationary_moments", std::max({zx, zv, zc}), 3.0, s.str());
}

}  // namespace

std::vector<CheckResult> run_checks(CheckLevel level, const CheckOptions& options) {
  const bool full = level == CheckLevel::kFull;
  const std::size_t fd_instances = full ? 100 : 25;

  using Check = std::pair<std::string, std::function<CheckResult()>>;
  std::vector<Check> suite{
      {"step_params_exact", [&] { return check_step_params_exact(options); }},
      {"step_params_taylor", [&] { return check_taylor_limits(options); }},
      {"step_law_matrix_exponential", [&] { return check_van_loan(options); }},
      {"covariance_psd_grid", [] { return check_psd_grid(); }},
      {"noise_covariance_mc",
       [&] { return check_noise_mc(full ? 1000000 : 200000, full ? 1e-2 : 3e-2); }},
      {"noise_correlation_limit", [] { return check_small_h_correlation(); }},
      {"grad_identity_ridge",
       [&] {
         return check_grad_identity(
             "ridge",
             [](std::size_t d, std::uint64_t) { return std::make_unique<RidgeObjective>(d, 0.7); },
             fd_instances);
       }},
      {"grad_identity_nn",
       [&] {
         return check_grad_identity(
             "nn",
             [](std::size_t d, std::uint64_t seed) {
               RegressionData data = make_gaussian_regression_data(d, 5, seed);
               return std::make_unique<NeuralNetObjective>(data.inputs, data.labels, 1e-2);
             },
             fd_instances);
       }},
      {"grad_identity_mmd",
       [&] {
         return check_grad_identity(
             "mmd",
             [](std::size_t d, std::uint64_t seed) {
               return std::make_unique<MmdObjective>(make_gaussian_samples(d, 6, seed), 1.0,
                                                     1e-2);
             },
             fd_instances);
       }},
      {"grad_identity_ksd",
       [&] {
         return check_grad_identity(
             "ksd",
             [](std::size_t d, std::uint64_t) {
               return std::make_unique<KsdObjective>(ScoreModel::standard_gaussian(d), d,
                                                     KsdKernel{1.5, 1.0}, 1e-2);
             },
             fd_instances);
       }},
      {"mmd_quadrature", [&] { return check_mmd_quadrature(full ? 50 : 10); }},
      {"stein_kernel_fd", [] { return check_stein_fd(); }},
      {"lyapunov_oracle", [] { return check_lyapunov(); }},
  };
  if (full) {
    suite.emplace_back("stationary_moments", [&] { return check_stationary(options.threads); });
  }

  std::vector<CheckResult> results;
  for (const auto& [name, check] : suite) {
    try {
      results.push_back(check());
    } catch (const std::exception& e) {
      CheckResult failed;
      failed.name = name;
      failed.detail = std::string("error: ") + e.what();
      results.push_back(failed);
    }
  }
  return results;
}

}  // namespace mfl
