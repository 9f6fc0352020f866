#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <memory>

#include "mfl/errors.hpp"
#include "mfl/objectives.hpp"

using namespace mfl;

namespace {

Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  auto s = RngStreams(seed).stream(StreamDomain::kOracle, 0, 0);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = s.next();
  return m;
}

// Central differences of N * value with respect to every coordinate of
// particle j, relative to the largest gradient entry.
double gradient_identity_error(const MeanFieldObjective& obj, const Matrix& x, Eigen::Index j) {
  const double eps = 1e-6;
  const double n = static_cast<double>(x.rows());
  const Vector g = obj.batch_grad(x).row(j).transpose();
  Matrix probe = x;
  double worst = 0.0;
  for (Eigen::Index k = 0; k < x.cols(); ++k) {
    probe(j, k) = x(j, k) + eps;
    const double up = obj.value(probe);
    probe(j, k) = x(j, k) - eps;
    const double down = obj.value(probe);
    probe(j, k) = x(j, k);
    worst = std::max(worst, std::abs(n * (up - down) / (2 * eps) - g(k)));
  }
  return worst / std::max(g.cwiseAbs().maxCoeff(), 1e-8);
}

void check_batch_matches_pointwise(const MeanFieldObjective& obj, const Matrix& x) {
  const Matrix batch = obj.batch_grad(x, 1);
  CHECK(obj.batch_grad(x, 3) == batch);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const Vector single = obj.intrinsic_grad(x, x.row(i).transpose());
    CHECK((single - batch.row(i).transpose()).norm() <= 1e-12 * (1.0 + single.norm()));
  }
}

}  // namespace

TEST_CASE("ridge objective") {
  const RidgeObjective r(3, 0.5);
  const Matrix x = random_matrix(4, 3, 1);
  CHECK(r.value(x) == doctest::Approx(0.25 * x.squaredNorm() / 4.0));
  CHECK(gradient_identity_error(r, x, 2) < 1e-9);
  CHECK_THROWS_AS(r.value(Matrix::Zero(2, 2)), ConfigError);
  CHECK_THROWS_AS(RidgeObjective(2, -1.0), ConfigError);
}

TEST_CASE("network risk at zero weights is half the mean squared label") {
  const RegressionData data = make_gaussian_regression_data(4, 6, 2);
  const NeuralNetObjective nn(data.inputs, data.labels, 0.0);
  CHECK(nn.value(Matrix::Zero(3, 4)) == doctest::Approx(0.5 * data.labels.squaredNorm() / 6.0));
}

TEST_CASE("network risk single neuron") {
  const NeuralNetObjective nn(Matrix::Constant(1, 1, 1.0), Vector::Constant(1, 0.0), 0.0);
  CHECK(nn.value(Matrix::Constant(1, 1, 1.0)) == doctest::Approx(0.5 * std::pow(std::tanh(1.0), 2)).epsilon(1e-12));
}

TEST_CASE("network gradient by hand and by differences") {
  Matrix a = Matrix::Zero(1, 3);
  a(0, 0) = 1.0;
  const NeuralNetObjective nn(a, Vector::Constant(1, 1.0), 0.0);
  const Vector g = nn.intrinsic_grad(Matrix::Zero(2, 3), Vector::Zero(3));
  CHECK(g(0) == doctest::Approx(-1.0));
  CHECK(g(1) == 0.0);
  CHECK(g(2) == 0.0);

  // With every residual zero only the ridge term is left.
  Matrix one = Matrix::Zero(1, 2);
  one << 0.3, -0.2;
  Matrix inputs(2, 2);
  inputs << 1.0, 0.5, -0.7, 2.0;
  const Vector labels = (inputs * one.transpose()).array().tanh();
  const NeuralNetObjective exact(inputs, labels, 0.1);
  CHECK(exact.intrinsic_grad(one, one.row(0).transpose()).isApprox(0.1 * one.row(0).transpose()));

  const RegressionData data = make_gaussian_regression_data(3, 5, 7);
  const NeuralNetObjective fd(data.inputs, data.labels, 1e-2);
  const Matrix x = random_matrix(4, 3, 3);
  for (Eigen::Index j = 0; j < 4; ++j) CHECK(gradient_identity_error(fd, x, j) < 1e-5);
  check_batch_matches_pointwise(fd, x);
}

TEST_CASE("regression data") {
  const RegressionData d = make_gaussian_regression_data(5, 40, 11);
  CHECK(d.inputs.rows() == 40);
  CHECK(d.inputs.cols() == 5);
  CHECK(d.center.size() == 5);
  CHECK((d.labels.array() > 0.0).all());
  CHECK((d.labels.array() <= 1.0).all());
  for (Eigen::Index i = 0; i < 40; ++i) {
    const double r2 = (d.inputs.row(i).transpose() - d.center).squaredNorm();
    CHECK(d.labels(i) == doctest::Approx(std::exp(-r2 / 10.0)));
  }
  const RegressionData again = make_gaussian_regression_data(5, 40, 11);
  CHECK(again.inputs == d.inputs);
  CHECK_FALSE(make_gaussian_regression_data(5, 40, 12).inputs == d.inputs);
}

TEST_CASE("regression and sample csv loaders") {
  const auto dir = std::filesystem::temp_directory_path() / "mfl_objectives_test";
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "reg.csv");
    out << "a_1,a_2,b\n1,0,0.5\n0.25,-1,1\n";
  }
  const RegressionData d = load_regression_csv(dir / "reg.csv");
  CHECK(d.inputs.rows() == 2);
  CHECK(d.inputs(1, 1) == -1.0);
  CHECK(d.labels(0) == 0.5);
  {
    std::ofstream out(dir / "bad.csv");
    out << "a_1,c\n1,2\n";
  }
  CHECK_THROWS(load_regression_csv(dir / "bad.csv"));
  {
    std::ofstream out(dir / "z.csv");
    out << "z_1,z_2,z_3\n1,2,3\n4,5,6\n";
  }
  const Matrix z = load_samples_csv(dir / "z.csv");
  CHECK(z.rows() == 2);
  CHECK(z(1, 2) == 6.0);
  std::filesystem::remove_all(dir);
}

TEST_CASE("mmd closed forms") {
  CHECK(mmd_pair_term(0.0, 1, 1.0) == doctest::Approx(1.0 / std::sqrt(3.0)));
  CHECK(mmd_data_term(0.0, 1, 1.0) == doctest::Approx(1.0 / std::sqrt(2.0)));
  CHECK(mmd_pair_term(0.0, 4, 2.0) == doctest::Approx(1.0 / 9.0));
  CHECK(mmd_pair_term(6.0, 1, 1.0) == doctest::Approx(std::exp(-1.0) / std::sqrt(3.0)));
  CHECK(mmd_data_term(4.0, 1, 1.0) == doctest::Approx(std::exp(-1.0) / std::sqrt(2.0)));
  // Wide kernels flatten both terms to their prefactors.
  CHECK(mmd_pair_term(1.0, 1, 1e6) == doctest::Approx(1.0 / std::sqrt(3.0)));
  CHECK(mmd_data_term(1.0, 1, 1e6) == doctest::Approx(1.0 / std::sqrt(2.0)));
}

TEST_CASE("mmd value with one particle on its sample") {
  const MmdObjective mmd(Matrix::Constant(1, 1, 0.4), 1.0, 0.0);
  CHECK(mmd.value(Matrix::Constant(1, 1, 0.4)) == doctest::Approx(1.0 / std::sqrt(3.0) - std::sqrt(2.0)).epsilon(1e-12));
}

TEST_CASE("mmd keeps the diagonal pair term") {
  // Far apart particles leave only N self-pairs in the pair sum.
  Matrix x(2, 1);
  x << -1e3, 1e3;
  const MmdObjective mmd(Matrix::Constant(1, 1, 5e3), 1.0, 0.0);
  CHECK(mmd.value(x) == doctest::Approx(2.0 / std::sqrt(3.0) / 4.0));
}

TEST_CASE("mmd gradient symmetry cases") {
  Matrix samples(2, 2);
  samples << 1.0, 0.0, -1.0, 0.0;
  const MmdObjective mmd(samples, 0.8, 0.3);
  Matrix cloud(2, 2);
  cloud << 0.0, 2.0, 0.0, -2.0;
  const Vector g = mmd.intrinsic_grad(cloud, Vector::Zero(2));
  CHECK(g.norm() < 1e-14);

  const MmdObjective lone(Matrix::Constant(1, 2, 0.7), 1.0, 0.2);
  const Matrix at = Matrix::Constant(1, 2, 0.7);
  CHECK(lone.intrinsic_grad(at, at.row(0).transpose()).isApprox(0.2 * Vector::Constant(2, 0.7)));

  const MmdObjective fd(make_gaussian_samples(2, 3, 4), 0.9, 1e-2);
  const Matrix x = random_matrix(4, 2, 5);
  for (Eigen::Index j = 0; j < 4; ++j) CHECK(gradient_identity_error(fd, x, j) < 1e-5);
  check_batch_matches_pointwise(fd, x);
}

TEST_CASE("stein kernel for a standard Gaussian") {
  const KsdKernel k{1.2, 0.7};
  const ScoreModel g = ScoreModel::standard_gaussian(3);
  const Vector zero = Vector::Zero(3);
  CHECK(stein_kernel(k, zero, zero, g.score(zero), g.score(zero)) ==
        doctest::Approx(3.0 / (0.7 * 0.7)));

  const KsdObjective ksd(g, 3, k, 0.0);
  CHECK(ksd.value(Matrix::Zero(1, 3)) == doctest::Approx(3.0 / (0.7 * 0.7)));
}

TEST_CASE("stein kernel symmetry and derivative") {
  Eigen::MatrixXd means(2, 2);
  means << 1.0, 0.0, -1.0, 0.5;
  const ScoreModel mix = ScoreModel::gaussian_mixture({0.4, 0.6}, means, 0.8);
  const KsdKernel k{1.5, 0.9};
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Matrix pts = random_matrix(2, 2, 100 + seed);
    const Vector x = pts.row(0).transpose(), y = pts.row(1).transpose();
    const double uxy = stein_kernel(k, x, y, mix.score(x), mix.score(y));
    const double uyx = stein_kernel(k, y, x, mix.score(y), mix.score(x));
    CHECK(std::abs(uxy - uyx) <= 1e-12 * std::max(1.0, std::abs(uxy)));

    const Vector grad = stein_kernel_grad_x(k, x, y, mix.score(x), mix.score(y), mix.jacobian(x));
    const double eps = 1e-6;
    for (Eigen::Index j = 0; j < 2; ++j) {
      Vector up = x, down = x;
      up(j) += eps;
      down(j) -= eps;
      const double fd = (stein_kernel(k, up, y, mix.score(up), mix.score(y)) -
                         stein_kernel(k, down, y, mix.score(down), mix.score(y))) /
                        (2 * eps);
      CHECK(std::abs(fd - grad(j)) <= 1e-6 * std::max(1.0, grad.cwiseAbs().maxCoeff()));
    }
  }
}

TEST_CASE("mixture score and Jacobian") {
  Eigen::MatrixXd means(2, 1);
  means << -1.0, 2.0;
  const ScoreModel mix = ScoreModel::gaussian_mixture({0.3, 0.7}, means, 0.6);
  auto log_density = [&](double x) {
    const double v = 0.36;
    return std::log(0.3 * std::exp(-(x + 1) * (x + 1) / (2 * v)) +
                    0.7 * std::exp(-(x - 2) * (x - 2) / (2 * v)));
  };
  for (double x : {-2.0, -0.4, 0.5, 1.1, 3.0}) {
    const double eps = 1e-5;
    const double fd_score = (log_density(x + eps) - log_density(x - eps)) / (2 * eps);
    const Vector xv = Vector::Constant(1, x);
    CHECK(mix.score(xv)(0) == doctest::Approx(fd_score).epsilon(1e-7));
    const double fd_jac = (mix.score(Vector::Constant(1, x + eps))(0) -
                           mix.score(Vector::Constant(1, x - eps))(0)) /
                          (2 * eps);
    CHECK(mix.jacobian(xv)(0, 0) == doctest::Approx(fd_jac).epsilon(1e-6));
  }
  CHECK_THROWS_AS(ScoreModel::gaussian_mixture({0.5}, means, 1.0), ConfigError);
  CHECK_THROWS_AS(ScoreModel::gaussian_mixture({0.5, 0.5}, means, 0.0), ConfigError);
}

TEST_CASE("ksd gradient identity") {
  const KsdObjective ksd(ScoreModel::standard_gaussian(2), 2, KsdKernel{1.4, 1.0}, 1e-2);
  const Matrix x = random_matrix(3, 2, 8);
  for (Eigen::Index j = 0; j < 3; ++j) CHECK(gradient_identity_error(ksd, x, j) < 1e-5);
  check_batch_matches_pointwise(ksd, x);

  Eigen::MatrixXd means(2, 3);
  means << 1.0, 0.0, 0.0, -1.0, 0.5, 0.2;
  const KsdObjective mixed(ScoreModel::gaussian_mixture({0.5, 0.5}, means, 1.1), 3,
                           KsdKernel{2.0, 0.8}, 0.0);
  const Matrix y = random_matrix(5, 3, 9);
  for (Eigen::Index j = 0; j < 5; ++j) CHECK(gradient_identity_error(mixed, y, j) < 1e-5);
}

TEST_CASE("objectives reject malformed inputs") {
  CHECK_THROWS_AS(MmdObjective(Matrix::Zero(0, 2), 1.0, 0.0), ConfigError);
  CHECK_THROWS_AS(MmdObjective(Matrix::Zero(2, 2), 0.0, 0.0), ConfigError);
  CHECK_THROWS_AS(NeuralNetObjective(Matrix::Zero(3, 2), Vector::Zero(2), 0.0), ConfigError);
  CHECK_THROWS_AS(KsdObjective(ScoreModel::standard_gaussian(2), 2, KsdKernel{0.0, 1.0}, 0.0),
                  ConfigError);
}
