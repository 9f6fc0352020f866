#include "mfl/objectives.hpp"

#include <cmath>
#include <string>

#include "mfl/csv.hpp"
#include "mfl/errors.hpp"
#include "mfl/parallel.hpp"

namespace mfl {
namespace {

void require_lambda(double lambda_prime) {
  if (!(lambda_prime >= 0.0) || !std::isfinite(lambda_prime)) {
    throw ConfigError("lambda_prime must be a finite non-negative number");
  }
}

void require_width(double sigma, const char* name) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw ConfigError(std::string(name) + " must be a finite positive number");
  }
}

double ridge_value(const Matrix& positions, double lambda_prime) {
  return 0.5 * lambda_prime * positions.squaredNorm() /
         static_cast<double>(positions.rows());
}

}  // namespace

void MeanFieldObjective::check_positions(const Matrix& positions) const {
  if (positions.rows() == 0) throw ConfigError(name() + ": empty particle set");
  if (static_cast<std::size_t>(positions.cols()) != dim()) {
    throw ConfigError(name() + ": positions have dim " + std::to_string(positions.cols()) +
                      ", objective expects " + std::to_string(dim()));
  }
}

// ---------------------------------------------------------------- ridge

RidgeObjective::RidgeObjective(std::size_t dim, double lambda_prime)
    : dim_(dim), lambda_prime_(lambda_prime) {
  if (dim == 0) throw ConfigError("ridge: dim must be >= 1");
  require_lambda(lambda_prime);
}

double RidgeObjective::value(const Matrix& positions) const {
  check_positions(positions);
  return ridge_value(positions, lambda_prime_);
}

Vector RidgeObjective::intrinsic_grad(const Matrix& positions, const Vector& query) const {
  check_positions(positions);
  return lambda_prime_ * query;
}

Matrix RidgeObjective::batch_grad(const Matrix& positions, unsigned) const {
  check_positions(positions);
  return lambda_prime_ * positions;
}

// ---------------------------------------------------------------- neural net

Activation Activation::tanh() {
  return {"tanh", [](double z) { return std::tanh(z); },
          [](double z) {
            const double t = std::tanh(z);
            return 1.0 - t * t;
          }};
}

NeuralNetObjective::NeuralNetObjective(Matrix inputs, Vector labels, double lambda_prime,
                                       Activation activation)
    : inputs_(std::move(inputs)),
      labels_(std::move(labels)),
      lambda_prime_(lambda_prime),
      activation_(std::move(activation)),
      is_tanh_(activation_.name == "tanh") {
  if (inputs_.rows() == 0 || inputs_.cols() == 0) {
    throw ConfigError("nn: need at least one sample and dim >= 1");
  }
  if (labels_.size() != inputs_.rows()) {
    throw ConfigError("nn: labels size " + std::to_string(labels_.size()) +
                      " does not match " + std::to_string(inputs_.rows()) + " inputs");
  }
  require_lambda(lambda_prime);
}

Vector NeuralNetObjective::predictions(const Matrix& positions) const {
  check_positions(positions);
  Matrix pre = positions * inputs_.transpose();  // N x n
  if (is_tanh_) {
    pre = pre.array().tanh().matrix();
  } else {
    pre = pre.unaryExpr(activation_.fn);
  }
  return pre.colwise().mean().transpose();
}

double NeuralNetObjective::value(const Matrix& positions) const {
  const Vector residual = predictions(positions) - labels_;
  const double n = static_cast<double>(inputs_.rows());
  return residual.squaredNorm() / (2.0 * n) + ridge_value(positions, lambda_prime_);
}

Vector NeuralNetObjective::intrinsic_grad(const Matrix& positions, const Vector& query) const {
  const Vector residual = predictions(positions) - labels_;
  const double n = static_cast<double>(inputs_.rows());
  const Vector pre = inputs_ * query;
  Vector weights(pre.size());
  for (Eigen::Index i = 0; i < pre.size(); ++i) {
    weights(i) = residual(i) * activation_.derivative(pre(i)) / n;
  }
  return inputs_.transpose() * weights + lambda_prime_ * query;
}

Matrix NeuralNetObjective::batch_grad(const Matrix& positions, unsigned) const {
  check_positions(positions);
  // Shared reduction first: the mean-field prediction for every sample.
  Matrix pre = positions * inputs_.transpose();  // N x n
  Matrix act;
  Matrix slope;
  if (is_tanh_) {
    act = pre.array().tanh().matrix();
    slope = (1.0 - act.array().square()).matrix();
  } else {
    act = pre.unaryExpr(activation_.fn);
    slope = pre.unaryExpr(activation_.derivative);
  }
  const double n = static_cast<double>(inputs_.rows());
  const Eigen::RowVectorXd residual =
      (act.colwise().mean() - labels_.transpose()) / n;
  // Then the per-particle map.
  slope.array().rowwise() *= residual.array();
  Matrix grads = slope * inputs_;
  grads.noalias() += lambda_prime_ * positions;
  return grads;
}

// ---------------------------------------------------------------- MMD

double mmd_pair_term(double dist2, std::size_t dim, double sigma) {
  return std::pow(3.0, -0.5 * static_cast<double>(dim)) * std::exp(-dist2 / (6.0 * sigma * sigma));
}

double mmd_data_term(double dist2, std::size_t dim, double sigma) {
  return std::pow(2.0, -0.5 * static_cast<double>(dim)) * std::exp(-dist2 / (4.0 * sigma * sigma));
}

MmdObjective::MmdObjective(Matrix samples, double sigma, double lambda_prime)
    : samples_(std::move(samples)), sigma_(sigma), lambda_prime_(lambda_prime) {
  if (samples_.rows() == 0 || samples_.cols() == 0) {
    throw ConfigError("mmd: need at least one sample and dim >= 1");
  }
  require_width(sigma, "mmd sigma");
  require_lambda(lambda_prime);
  const double d = static_cast<double>(samples_.cols());
  pair_scale_ = std::pow(3.0, -0.5 * d);
  data_scale_ = std::pow(2.0, -0.5 * d);
}

double MmdObjective::value(const Matrix& positions) const {
  check_positions(positions);
  const Eigen::Index n_particles = positions.rows();
  const Eigen::Index n_samples = samples_.rows();

  const std::size_t d = dim();
  double pair = 0.0;
  for (Eigen::Index s = 0; s < n_particles; ++s) {
    for (Eigen::Index t = 0; t < n_particles; ++t) {
      pair += mmd_pair_term((positions.row(s) - positions.row(t)).squaredNorm(), d, sigma_);
    }
  }
  double data = 0.0;
  for (Eigen::Index s = 0; s < n_particles; ++s) {
    for (Eigen::Index i = 0; i < n_samples; ++i) {
      data += mmd_data_term((positions.row(s) - samples_.row(i)).squaredNorm(), d, sigma_);
    }
  }
  const double np = static_cast<double>(n_particles);
  const double ns = static_cast<double>(n_samples);
  return pair / (np * np) - 2.0 * data / (ns * np) + ridge_value(positions, lambda_prime_);
}

void MmdObjective::accumulate_grad(const Matrix& positions, const double* query,
                                   double* out) const {
  const Eigen::Index d = positions.cols();
  const Eigen::Index n_particles = positions.rows();
  const Eigen::Index n_samples = samples_.rows();
  const double s2 = sigma_ * sigma_;
  const double pair_coef = 2.0 * pair_scale_ / static_cast<double>(n_particles);
  const double data_coef = 2.0 * data_scale_ / static_cast<double>(n_samples);

  for (Eigen::Index j = 0; j < d; ++j) out[j] = lambda_prime_ * query[j];

  for (Eigen::Index t = 0; t < n_particles; ++t) {
    const double* other = positions.data() + t * d;
    double dist2 = 0.0;
    for (Eigen::Index j = 0; j < d; ++j) {
      const double diff = query[j] - other[j];
      dist2 += diff * diff;
    }
    const double w = -pair_coef * std::exp(-dist2 / (6.0 * s2)) / (3.0 * s2);
    for (Eigen::Index j = 0; j < d; ++j) out[j] += w * (query[j] - other[j]);
  }
  for (Eigen::Index i = 0; i < n_samples; ++i) {
    const double* z = samples_.data() + i * d;
    double dist2 = 0.0;
    for (Eigen::Index j = 0; j < d; ++j) {
      const double diff = query[j] - z[j];
      dist2 += diff * diff;
    }
    const double w = data_coef * std::exp(-dist2 / (4.0 * s2)) / (2.0 * s2);
    for (Eigen::Index j = 0; j < d; ++j) out[j] += w * (query[j] - z[j]);
  }
}

Vector MmdObjective::intrinsic_grad(const Matrix& positions, const Vector& query) const {
  check_positions(positions);
  if (static_cast<std::size_t>(query.size()) != dim()) {
    throw ConfigError("mmd: query dimension mismatch");
  }
  Vector out(query.size());
  accumulate_grad(positions, query.data(), out.data());
  return out;
}

Matrix MmdObjective::batch_grad(const Matrix& positions, unsigned threads) const {
  check_positions(positions);
  Matrix grads(positions.rows(), positions.cols());
  const Eigen::Index d = positions.cols();
  parallel_for(static_cast<std::size_t>(positions.rows()), threads,
               [&](std::size_t begin, std::size_t end) {
                 for (std::size_t row = begin; row < end; ++row) {
                   const auto r = static_cast<Eigen::Index>(row);
                   accumulate_grad(positions, positions.data() + r * d,
                                   grads.data() + r * d);
                 }
               });
  return grads;
}

// ---------------------------------------------------------------- KSD

ScoreModel ScoreModel::standard_gaussian(std::size_t dim) {
  const auto d = static_cast<Eigen::Index>(dim);
  return {"gaussian", [](const Vector& x) -> Vector { return -x; },
          [d](const Vector&) -> Eigen::MatrixXd { return -Eigen::MatrixXd::Identity(d, d); }};
}

ScoreModel ScoreModel::gaussian_mixture(std::vector<double> weights, Eigen::MatrixXd means,
                                        double std) {
  if (weights.empty() || weights.size() != static_cast<std::size_t>(means.rows())) {
    throw ConfigError("mixture: weights and means must have matching non-zero length");
  }
  require_width(std, "mixture std");
  double total = 0.0;
  for (double w : weights) {
    if (!(w > 0.0)) throw ConfigError("mixture: weights must be positive");
    total += w;
  }
  for (double& w : weights) w /= total;
  const double var = std * std;

  // Responsibilities r_c(x) and component scores s_c(x) = -(x - m_c)/var.
  auto components = [weights, means, var](const Vector& x, Vector& resp,
                                          Eigen::MatrixXd& scores) {
    const Eigen::Index k = means.rows();
    resp.resize(k);
    scores.resize(k, x.size());
    Vector log_w(k);
    for (Eigen::Index c = 0; c < k; ++c) {
      const Vector diff = x - means.row(c).transpose();
      scores.row(c) = (-diff / var).transpose();
      log_w(c) = std::log(weights[static_cast<std::size_t>(c)]) - 0.5 * diff.squaredNorm() / var;
    }
    const double top = log_w.maxCoeff();
    resp = (log_w.array() - top).exp().matrix();
    resp /= resp.sum();
  };

  auto score = [components](const Vector& x) -> Vector {
    Vector resp;
    Eigen::MatrixXd scores;
    components(x, resp, scores);
    return scores.transpose() * resp;
  };
  auto jacobian = [components, var](const Vector& x) -> Eigen::MatrixXd {
    Vector resp;
    Eigen::MatrixXd scores;
    components(x, resp, scores);
    const Vector s = scores.transpose() * resp;
    const Eigen::Index d = x.size();
    Eigen::MatrixXd hess = -Eigen::MatrixXd::Identity(d, d) / var;
    for (Eigen::Index c = 0; c < scores.rows(); ++c) {
      const Vector sc = scores.row(c).transpose();
      hess += resp(c) * sc * sc.transpose();
    }
    hess -= s * s.transpose();
    return hess;
  };
  return {"mixture", score, jacobian};
}

namespace {

struct SteinTerms {
  double k;
  Vector a;  // grad_x k / k
  Vector b;  // grad_x' k / k
  double w;  // u / k
};

SteinTerms stein_terms(const KsdKernel& kernel, const Vector& x, const Vector& xp,
                       const Vector& sx, const Vector& sxp) {
  const double s1 = kernel.sigma1 * kernel.sigma1;
  const double s2 = kernel.sigma2 * kernel.sigma2;
  const Vector diff = x - xp;
  const double k = std::exp(-x.squaredNorm() / (2.0 * s1) - xp.squaredNorm() / (2.0 * s1) -
                            diff.squaredNorm() / (2.0 * s2));
  Vector a = -x / s1 - diff / s2;
  Vector b = -xp / s1 + diff / s2;
  const double w =
      (sx + a).dot(sxp + b) + static_cast<double>(x.size()) / s2;
  return {k, std::move(a), std::move(b), w};
}

}  // namespace

double stein_kernel(const KsdKernel& kernel, const Vector& x, const Vector& xp,
                    const Vector& score_x, const Vector& score_xp) {
  const SteinTerms t = stein_terms(kernel, x, xp, score_x, score_xp);
  return t.k * t.w;
}

Vector stein_kernel_grad_x(const KsdKernel& kernel, const Vector& x, const Vector& xp,
                           const Vector& score_x, const Vector& score_xp,
                           const Eigen::MatrixXd& score_jacobian_x) {
  const double s1 = kernel.sigma1 * kernel.sigma1;
  const double s2 = kernel.sigma2 * kernel.sigma2;
  const SteinTerms t = stein_terms(kernel, x, xp, score_x, score_xp);
  const Vector right = score_xp + t.b;
  const Vector left = score_x + t.a;
  // u = k w, so grad u = k (a w + grad w); d a/dx = -(1/s1 + 1/s2) I, d b/dx = I/s2.
  const Vector grad_w = score_jacobian_x.transpose() * right - (1.0 / s1 + 1.0 / s2) * right +
                        left / s2;
  return t.k * (t.a * t.w + grad_w);
}

KsdObjective::KsdObjective(ScoreModel score, std::size_t dim, KsdKernel kernel,
                           double lambda_prime)
    : score_(std::move(score)), dim_(dim), kernel_(kernel), lambda_prime_(lambda_prime) {
  if (dim == 0) throw ConfigError("ksd: dim must be >= 1");
  if (!score_.score || !score_.jacobian) throw ConfigError("ksd: score model is incomplete");
  require_width(kernel.sigma1, "ksd sigma1");
  require_width(kernel.sigma2, "ksd sigma2");
  require_lambda(lambda_prime);
}

double KsdObjective::stein(const Vector& x, const Vector& xp) const {
  return stein_kernel(kernel_, x, xp, score_.score(x), score_.score(xp));
}

double KsdObjective::value(const Matrix& positions) const {
  check_positions(positions);
  const Eigen::Index n = positions.rows();
  std::vector<Vector> xs(static_cast<std::size_t>(n));
  std::vector<Vector> scores(static_cast<std::size_t>(n));
  for (Eigen::Index s = 0; s < n; ++s) {
    xs[static_cast<std::size_t>(s)] = positions.row(s).transpose();
    scores[static_cast<std::size_t>(s)] = score_.score(xs[static_cast<std::size_t>(s)]);
  }
  double total = 0.0;
  for (std::size_t s = 0; s < xs.size(); ++s) {
    for (std::size_t t = 0; t < xs.size(); ++t) {
      total += stein_kernel(kernel_, xs[s], xs[t], scores[s], scores[t]);
    }
  }
  const double np = static_cast<double>(n);
  return total / (np * np) + ridge_value(positions, lambda_prime_);
}

Vector KsdObjective::intrinsic_grad(const Matrix& positions, const Vector& query) const {
  check_positions(positions);
  const Vector sq = score_.score(query);
  const Eigen::MatrixXd jq = score_.jacobian(query);
  Vector grad = Vector::Zero(query.size());
  for (Eigen::Index t = 0; t < positions.rows(); ++t) {
    const Vector xt = positions.row(t).transpose();
    grad += stein_kernel_grad_x(kernel_, query, xt, sq, score_.score(xt), jq);
  }
  return 2.0 * grad / static_cast<double>(positions.rows()) + lambda_prime_ * query;
}

Matrix KsdObjective::batch_grad(const Matrix& positions, unsigned threads) const {
  check_positions(positions);
  const auto n = static_cast<std::size_t>(positions.rows());
  std::vector<Vector> xs(n);
  std::vector<Vector> scores(n);
  for (std::size_t s = 0; s < n; ++s) {
    xs[s] = positions.row(static_cast<Eigen::Index>(s)).transpose();
    scores[s] = score_.score(xs[s]);
  }
  Matrix grads(positions.rows(), positions.cols());
  const double scale = 2.0 / static_cast<double>(n);
  parallel_for(n, threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t j = begin; j < end; ++j) {
      const Eigen::MatrixXd jac = score_.jacobian(xs[j]);
      Vector acc = Vector::Zero(positions.cols());
      for (std::size_t t = 0; t < n; ++t) {
        acc += stein_kernel_grad_x(kernel_, xs[j], xs[t], scores[j], scores[t], jac);
      }
      grads.row(static_cast<Eigen::Index>(j)) =
          (scale * acc + lambda_prime_ * xs[j]).transpose();
    }
  });
  return grads;
}

// ---------------------------------------------------------------- data

RegressionData make_gaussian_regression_data(std::size_t dim, std::size_t n_samples,
                                             std::uint64_t seed) {
  if (dim == 0 || n_samples == 0) throw ConfigError("regression data needs d >= 1 and n >= 1");
  const RngStreams rng(seed);
  const auto d = static_cast<Eigen::Index>(dim);
  RegressionData data{Matrix(static_cast<Eigen::Index>(n_samples), d),
                      Vector(static_cast<Eigen::Index>(n_samples)), Vector(d)};
  auto center_stream = rng.stream(StreamDomain::kData, 0, 0);
  for (Eigen::Index j = 0; j < d; ++j) data.center(j) = center_stream.next();
  for (std::size_t i = 0; i < n_samples; ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    auto input_stream = rng.stream(StreamDomain::kData, i + 1, 0);
    for (Eigen::Index j = 0; j < d; ++j) data.inputs(row, j) = input_stream.next();
    const double dist2 = (data.inputs.row(row).transpose() - data.center).squaredNorm();
    data.labels(row) = std::exp(-dist2 / (2.0 * static_cast<double>(dim)));
  }
  return data;
}

Matrix make_gaussian_samples(std::size_t dim, std::size_t n_samples, std::uint64_t seed) {
  if (dim == 0 || n_samples == 0) throw ConfigError("sample data needs d >= 1 and n >= 1");
  const RngStreams rng(seed);
  const auto d = static_cast<Eigen::Index>(dim);
  Vector center(d);
  auto center_stream = rng.stream(StreamDomain::kData, 0, 0);
  for (Eigen::Index j = 0; j < d; ++j) center(j) = center_stream.next();
  Matrix samples(static_cast<Eigen::Index>(n_samples), d);
  for (std::size_t i = 0; i < n_samples; ++i) {
    auto stream = rng.stream(StreamDomain::kData, i + 1, 0);
    for (Eigen::Index j = 0; j < d; ++j) {
      samples(static_cast<Eigen::Index>(i), j) = center(j) + stream.next();
    }
  }
  return samples;
}

namespace {

Matrix numeric_block(const csv::Table& table, const std::string& prefix, std::size_t& width,
                     const std::filesystem::path& path) {
  width = 0;
  while (true) {
    const std::string name = prefix + std::to_string(width + 1);
    bool found = false;
    for (const auto& h : table.header) found = found || h == name;
    if (!found) break;
    ++width;
  }
  if (width == 0) {
    throw ConfigError(path.string() + ": expected columns " + prefix + "1.." + prefix + "d");
  }
  if (table.rows.empty()) throw ConfigError(path.string() + ": no data rows");
  Matrix out(static_cast<Eigen::Index>(table.rows.size()), static_cast<Eigen::Index>(width));
  for (std::size_t j = 0; j < width; ++j) {
    const std::size_t col = table.column(prefix + std::to_string(j + 1));
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          csv::parse_double(table.rows[i][col], path.string());
    }
  }
  return out;
}

}  // namespace

RegressionData load_regression_csv(const std::filesystem::path& path) {
  csv::Table table;
  try {
    table = csv::read(path);
  } catch (const std::runtime_error& e) {
    throw ConfigError(e.what());
  }
  std::size_t width = 0;
  RegressionData data;
  try {
    data.inputs = numeric_block(table, "a_", width, path);
    if (table.header.size() != width + 1) {
      throw ConfigError(path.string() + ": expected columns a_1..a_" + std::to_string(width) +
                        ",b only");
    }
    const std::size_t col = table.column("b");
    data.labels.resize(static_cast<Eigen::Index>(table.rows.size()));
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
      data.labels(static_cast<Eigen::Index>(i)) = csv::parse_double(table.rows[i][col], path.string());
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const std::runtime_error& e) {
    throw ConfigError(e.what());
  }
  return data;
}

Matrix load_samples_csv(const std::filesystem::path& path) {
  try {
    const csv::Table table = csv::read(path);
    std::size_t width = 0;
    Matrix out = numeric_block(table, "z_", width, path);
    if (table.header.size() != width) {
      throw ConfigError(path.string() + ": expected columns z_1..z_" + std::to_string(width) +
                        " only");
    }
    return out;
  } catch (const ConfigError&) {
    throw;
  } catch (const std::runtime_error& e) {
    throw ConfigError(e.what());
  }
}

}  // namespace mfl
