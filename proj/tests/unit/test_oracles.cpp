#include "doctest.h"

#include <cmath>
#include <vector>

#include "mfl/errors.hpp"
#include "mfl/oracles.hpp"

using namespace mfl;
using namespace mfl::oracles;

TEST_CASE("stationary covariance approaches the continuum law") {
  const Eigen::Matrix2d fine = ou_chain_stationary_covariance(LinearChainSpec{1.0, 1e-4, 1.0, 1.0});
  CHECK(fine(0, 0) == doctest::Approx(1.0).epsilon(1e-3));
  CHECK(fine(1, 1) == doctest::Approx(1.0).epsilon(1e-3));
  CHECK(std::abs(fine(0, 1)) < 1e-3);

  const Eigen::Matrix2d coarse = ou_chain_stationary_covariance(LinearChainSpec{1.0, 0.1, 1.0, 1.0});
  CHECK(coarse(0, 0) == doctest::Approx(1.0).epsilon(0.06));
  CHECK(coarse(1, 1) == doctest::Approx(1.0).epsilon(0.06));

  // The gap to diag(1, 1) halves with h: the frozen-force chain is first order.
  std::vector<double> gaps;
  for (double h : {0.1, 0.05, 0.025}) {
    gaps.push_back(ou_chain_stationary_covariance(LinearChainSpec{1.0, h, 1.0, 1.0})(0, 0) - 1.0);
  }
  CHECK(gaps[0] / gaps[1] == doctest::Approx(2.0).epsilon(0.05));
  CHECK(gaps[1] / gaps[2] == doctest::Approx(2.0).epsilon(0.05));
}

TEST_CASE("stationary covariance solves the discrete Lyapunov equation") {
  for (double lambda : {0.3, 1.0, 4.0}) {
    const StepParams p = derive_step_params(1.5, 0.2);
    const Eigen::Matrix2d cov = ou_chain_stationary_covariance(p, lambda);
    const Eigen::Matrix2d m = chain_transition(p, lambda);
    Eigen::Matrix2d q;
    q << p.sigma11, p.sigma12, p.sigma12, p.sigma22;
    CHECK((cov - m * cov * m.transpose() - q).norm() < 1e-12 * cov.norm());
    CHECK(cov.determinant() > 0.0);
  }
  const Eigen::Matrix2d cold = ou_chain_stationary_covariance(LinearChainSpec{1.0, 0.1, 1.0, 0.0});
  CHECK(cold.isZero(0.0));
}

TEST_CASE("non-contractive chains are rejected") {
  const StepParams p = derive_step_params(1.0, 2.0);
  CHECK_THROWS_AS(ou_chain_stationary_covariance(p, 50.0), OracleError);
  CHECK_THROWS_AS(ou_chain_stationary_covariance(LinearChainSpec{1.0, 0.1, 0.0, 1.0}),
                  OracleError);
}

TEST_CASE("matrix exponential law agrees with the closed-form step") {
  for (double gamma : {0.2, 1.0, 5.0}) {
    for (double h : {1e-3, 0.1, 1.5}) {
      const StepParams p = derive_step_params(gamma, h, 0.7);
      const LinearStepLaw law = exact_linear_step_law(gamma, h, 0.7, 0.3, -0.4, 1.2);
      CHECK(law.mean(0) == doctest::Approx(0.3 - 0.4 * p.phi0 - 1.2 * p.phi1).epsilon(1e-11));
      CHECK(law.mean(1) == doctest::Approx(-0.4 * p.phi2 - 1.2 * p.phi3).epsilon(1e-11));
      CHECK(law.covariance(0, 0) == doctest::Approx(p.sigma11).epsilon(1e-9));
      CHECK(law.covariance(0, 1) == doctest::Approx(p.sigma12).epsilon(1e-9));
      CHECK(law.covariance(1, 1) == doctest::Approx(p.sigma22).epsilon(1e-9));
    }
  }
}

TEST_CASE("high precision coefficients") {
  const StepParams hp = high_precision_step_params(2.0, 0.1);
  CHECK(hp.phi0 == doctest::Approx(0.0906346).epsilon(1e-6));
  CHECK(hp.sigma22 == doctest::Approx(0.3296800).epsilon(1e-6));
  const StepParams tiny = high_precision_step_params(1.0, 1e-6);
  CHECK(tiny.sigma11 == doctest::Approx(2.0 / 3.0 * 1e-18).epsilon(1e-5));
}

TEST_CASE("finite difference gradient check") {
  auto s = RngStreams(4).stream(StreamDomain::kOracle, 0, 0);
  auto random = [&](Eigen::Index r, Eigen::Index c) {
    Matrix m(r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = s.next();
    return m;
  };
  const RidgeObjective ridge(3, 0.8);
  CHECK(finite_diff_grad_check(ridge, random(4, 3), 1) < 1e-9);

  const RegressionData data = make_gaussian_regression_data(3, 5, 1);
  const NeuralNetObjective nn(data.inputs, data.labels, 1e-4);
  CHECK(finite_diff_grad_check(nn, random(4, 3), 2) < 1e-5);

  const KsdObjective ksd(ScoreModel::standard_gaussian(2), 2, KsdKernel{1.0, 1.0}, 0.0);
  CHECK(finite_diff_grad_check(ksd, random(3, 2), 0) < 1e-5);

  CHECK_THROWS_AS(finite_diff_grad_check(ridge, random(2, 3), 5), OracleError);
}

TEST_CASE("mmd quadrature") {
  const MmdQuadratureErrors centered = quadrature_validate_mmd(0.0, 0.0, 0.0, 1.0);
  CHECK(centered.pair_err < 1e-8);
  CHECK(centered.data_err < 1e-8);
  const MmdQuadratureErrors off = quadrature_validate_mmd(0.3, -0.2, 0.9, 0.7);
  CHECK(off.pair_err < 1e-6);
  CHECK(off.data_err < 1e-6);
  CHECK_THROWS_AS(quadrature_validate_mmd(0.0, 0.0, 0.0, 0.0), OracleError);
}

TEST_CASE("batch means") {
  std::vector<double> constant(500, 2.5);
  const BatchMeans c = batch_means(constant);
  CHECK(c.mean == 2.5);
  CHECK(c.std_error == 0.0);

  // AR(1) with coefficient 0.9: batch means must report a larger error than
  // the naive i.i.d. formula.
  auto s = RngStreams(2).stream(StreamDomain::kOracle, 0, 0);
  std::vector<double> ar(50000);
  double x = 0.0;
  for (double& v : ar) {
    x = 0.9 * x + s.next();
    v = x;
  }
  double mean = 0.0, var = 0.0;
  for (double v : ar) mean += v;
  mean /= static_cast<double>(ar.size());
  for (double v : ar) var += (v - mean) * (v - mean);
  var /= static_cast<double>(ar.size() - 1);
  const double naive = std::sqrt(var / static_cast<double>(ar.size()));
  const BatchMeans b = batch_means(ar);
  CHECK(b.std_error > 3.0 * naive);
  // Long-run standard deviation of the mean: naive * sqrt((1 + 0.9) / (1 - 0.9)).
  CHECK(b.std_error == doctest::Approx(naive * std::sqrt(19.0)).epsilon(0.35));

  CHECK_THROWS_AS(batch_means(std::vector<double>(10, 0.0)), OracleError);
}

TEST_CASE("short stationary run agrees with the oracle") {
  const StationaryCheck r = run_stationary_check(LinearChainSpec{1.0, 0.1, 1.0, 1.0}, 200, 2, 2000, 3);
  CHECK(std::abs(r.x_var.mean - r.oracle(0, 0)) < 4.0 * r.x_var.std_error);
  CHECK(std::abs(r.v_var.mean - r.oracle(1, 1)) < 4.0 * r.v_var.std_error);
  CHECK(std::abs(r.xv_cov.mean - r.oracle(0, 1)) < 4.0 * r.xv_cov.std_error);
  CHECK_THROWS_AS(run_stationary_check(LinearChainSpec{}, 10, 1, 50, 0), OracleError);
}
