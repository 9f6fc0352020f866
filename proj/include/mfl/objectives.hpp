#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "mfl/particle_cloud.hpp"

namespace mfl {

// A functional F of the empirical measure of particle positions together with
// its intrinsic derivative D_rho F(mu_x, x).
//
// Every implementation satisfies the gradient identity
//   d/dx^j [ N * value(x^1..x^N) ] == batch_grad(x).row(j)
// which ties the per-particle force to the objective it minimizes.
class MeanFieldObjective {
 public:
  virtual ~MeanFieldObjective() = default;

  virtual std::string name() const = 0;
  virtual std::size_t dim() const = 0;

  virtual double value(const Matrix& positions) const = 0;

  // D_rho F evaluated at an arbitrary query point, with the measure given by
  // the rows of `positions`.
  virtual Vector intrinsic_grad(const Matrix& positions, const Vector& query) const = 0;

  // Row i holds intrinsic_grad(positions, positions.row(i)). Row results do
  // not depend on `threads`.
  virtual Matrix batch_grad(const Matrix& positions, unsigned threads) const = 0;
  Matrix batch_grad(const Matrix& positions) const { return batch_grad(positions, 1); }

 protected:
  void check_positions(const Matrix& positions) const;
};

// (lambda'/2) E|x|^2 alone. Its stationary law under the particle dynamics is
// Gaussian, which makes it the reference case for the oracles.
class RidgeObjective final : public MeanFieldObjective {
 public:
  RidgeObjective(std::size_t dim, double lambda_prime);

  std::string name() const override { return "ridge"; }
  std::size_t dim() const override { return dim_; }
  double lambda_prime() const { return lambda_prime_; }

  double value(const Matrix& positions) const override;
  Vector intrinsic_grad(const Matrix& positions, const Vector& query) const override;
  using MeanFieldObjective::batch_grad;
  Matrix batch_grad(const Matrix& positions, unsigned threads) const override;

 private:
  std::size_t dim_;
  double lambda_prime_;
};

// Elementwise neuron nonlinearity and its derivative.
struct Activation {
  std::string name;
  std::function<double(double)> fn;
  std::function<double(double)> derivative;

  static Activation tanh();
};

// Two-layer mean-field network risk with quadratic loss:
//   F = (1/2n) sum_i ((1/N) sum_s act(x^s . a_i) - b_i)^2 + (lambda'/2N) sum_s |x^s|^2
class NeuralNetObjective final : public MeanFieldObjective {
 public:
  NeuralNetObjective(Matrix inputs, Vector labels, double lambda_prime,
                     Activation activation = Activation::tanh());

  std::string name() const override { return "nn"; }
  std::size_t dim() const override { return static_cast<std::size_t>(inputs_.cols()); }
  std::size_t n_samples() const { return static_cast<std::size_t>(inputs_.rows()); }
  double lambda_prime() const { return lambda_prime_; }
  const Matrix& inputs() const { return inputs_; }
  const Vector& labels() const { return labels_; }

  // Mean-field prediction (1/N) sum_s act(x^s . a_i) for every sample i.
  Vector predictions(const Matrix& positions) const;

  double value(const Matrix& positions) const override;
  Vector intrinsic_grad(const Matrix& positions, const Vector& query) const override;
  using MeanFieldObjective::batch_grad;
  Matrix batch_grad(const Matrix& positions, unsigned threads) const override;

 private:
  Matrix inputs_;
  Vector labels_;
  double lambda_prime_;
  Activation activation_;
  bool is_tanh_;
};

// Density estimation by MMD with a Gaussian mixture model of width sigma and
// an RBF kernel of the same width. The Gaussian convolutions are closed form:
//   pair term  3^{-d/2} exp(-|x - x'|^2 / 6 sigma^2)
//   data term  2^{-d/2} exp(-|x - z|^2 / 4 sigma^2)
// The s == t diagonal of the pair sum is kept.
class MmdObjective final : public MeanFieldObjective {
 public:
  MmdObjective(Matrix samples, double sigma, double lambda_prime);

  std::string name() const override { return "mmd"; }
  std::size_t dim() const override { return static_cast<std::size_t>(samples_.cols()); }
  double sigma() const { return sigma_; }
  double lambda_prime() const { return lambda_prime_; }
  const Matrix& samples() const { return samples_; }

  double value(const Matrix& positions) const override;
  Vector intrinsic_grad(const Matrix& positions, const Vector& query) const override;
  using MeanFieldObjective::batch_grad;
  Matrix batch_grad(const Matrix& positions, unsigned threads) const override;

 private:
  void accumulate_grad(const Matrix& positions, const double* query, double* out) const;

  Matrix samples_;
  double sigma_;
  double lambda_prime_;
  double pair_scale_;  // 3^{-d/2}
  double data_scale_;  // 2^{-d/2}
};

// Closed-form Gaussian convolutions behind the MMD objective, as functions
// of the squared distance between the two centers.
//   pair: iint p(x; z) p(x'; z') k(z, z') dz dz' = 3^{-d/2} exp(-|x - x'|^2 / 6 sigma^2)
//   data: int p(x; z) k(z, y) dz                 = 2^{-d/2} exp(-|x - y|^2 / 4 sigma^2)
double mmd_pair_term(double dist2, std::size_t dim, double sigma);
double mmd_data_term(double dist2, std::size_t dim, double sigma);

// Score s = grad log rho_* of a sampling target and its Jacobian ds/dx.
struct ScoreModel {
  std::string name;
  std::function<Vector(const Vector&)> score;
  std::function<Eigen::MatrixXd(const Vector&)> jacobian;

  static ScoreModel standard_gaussian(std::size_t dim);
  // Isotropic mixture sum_c w_c N(m_c, std^2 I). Rows of `means` are m_c.
  static ScoreModel gaussian_mixture(std::vector<double> weights, Eigen::MatrixXd means,
                                     double std);
};

struct KsdKernel {
  double sigma1 = 1.0;  // envelope width
  double sigma2 = 1.0;  // interaction width
};

// Stein kernel u(x, x') built from the light-tailed kernel
//   k(x, x') = exp(-|x|^2/2s1^2 - |x'|^2/2s1^2 - |x - x'|^2/2s2^2).
// Scores are passed in already evaluated.
double stein_kernel(const KsdKernel& kernel, const Vector& x, const Vector& xp,
                    const Vector& score_x, const Vector& score_xp);

// Gradient of u(x, x') in its first argument; needs the score Jacobian at x.
Vector stein_kernel_grad_x(const KsdKernel& kernel, const Vector& x, const Vector& xp,
                           const Vector& score_x, const Vector& score_xp,
                           const Eigen::MatrixXd& score_jacobian_x);

// Kernel Stein discrepancy of the empirical measure plus ridge.
class KsdObjective final : public MeanFieldObjective {
 public:
  KsdObjective(ScoreModel score, std::size_t dim, KsdKernel kernel, double lambda_prime);

  std::string name() const override { return "ksd"; }
  std::size_t dim() const override { return dim_; }
  const KsdKernel& kernel() const { return kernel_; }
  const ScoreModel& score_model() const { return score_; }
  double lambda_prime() const { return lambda_prime_; }

  double stein(const Vector& x, const Vector& xp) const;

  double value(const Matrix& positions) const override;
  Vector intrinsic_grad(const Matrix& positions, const Vector& query) const override;
  using MeanFieldObjective::batch_grad;
  Matrix batch_grad(const Matrix& positions, unsigned threads) const override;

 private:
  ScoreModel score_;
  std::size_t dim_;
  KsdKernel kernel_;
  double lambda_prime_;
};

struct RegressionData {
  Matrix inputs;  // n x d
  Vector labels;  // n
  Vector center;  // m, empty when loaded from file
};

// a_i ~ N(0, I_d), m ~ N(0, I_d), b_i = exp(-|a_i - m|^2 / 2d).
RegressionData make_gaussian_regression_data(std::size_t dim, std::size_t n_samples,
                                             std::uint64_t seed);

// CSV with header a_1..a_d,b.
RegressionData load_regression_csv(const std::filesystem::path& path);

// CSV with header z_1..z_d.
Matrix load_samples_csv(const std::filesystem::path& path);

// n points z_i ~ N(m, I_d) with m ~ N(0, I_d); synthetic target for MMD.
Matrix make_gaussian_samples(std::size_t dim, std::size_t n_samples, std::uint64_t seed);

}  // namespace mfl
