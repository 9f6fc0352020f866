#include "mfl/config.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "mfl/errors.hpp"

namespace mfl {
namespace {

using nlohmann::json;

// Reads fields of one JSON object, remembering which keys were used so that
// leftovers can be rejected.
class ObjectReader {
 public:
  ObjectReader(const json& object, std::string path) : object_(object), path_(std::move(path)) {
    if (!object_.is_object()) throw ConfigError(where("") + ": expected a JSON object");
  }

  bool has(const std::string& key) const { return object_.contains(key); }

  std::string key_path(const std::string& key) const { return where(key); }

  const json* find(const std::string& key) {
    used_.insert(key);
    const auto it = object_.find(key);
    return it == object_.end() ? nullptr : &*it;
  }

  const json& require(const std::string& key) {
    const json* value = find(key);
    if (value == nullptr) throw ConfigError(where(key) + ": missing required field");
    return *value;
  }

  double number(const std::string& key, double fallback) {
    const json* value = find(key);
    if (value == nullptr) return fallback;
    return as_number(*value, key);
  }

  double number(const std::string& key) { return as_number(require(key), key); }

  std::uint64_t integer(const std::string& key, std::uint64_t fallback) {
    const json* value = find(key);
    if (value == nullptr) return fallback;
    return as_unsigned(*value, key);
  }

  std::string string(const std::string& key, const std::string& fallback) {
    const json* value = find(key);
    if (value == nullptr) return fallback;
    if (!value->is_string()) throw ConfigError(where(key) + ": expected a string");
    return value->get<std::string>();
  }

  std::string string(const std::string& key) {
    const json& value = require(key);
    if (!value.is_string()) throw ConfigError(where(key) + ": expected a string");
    return value.get<std::string>();
  }

  bool boolean(const std::string& key, bool fallback) {
    const json* value = find(key);
    if (value == nullptr) return fallback;
    if (!value->is_boolean()) throw ConfigError(where(key) + ": expected true or false");
    return value->get<bool>();
  }

  double as_number(const json& value, const std::string& key) const {
    if (!value.is_number()) throw ConfigError(where(key) + ": expected a number");
    const double out = value.get<double>();
    if (!std::isfinite(out)) throw ConfigError(where(key) + ": must be finite");
    return out;
  }

  std::uint64_t as_unsigned(const json& value, const std::string& key) const {
    if (value.is_number_unsigned()) return value.get<std::uint64_t>();
    if (value.is_number_integer()) {
      const auto signed_value = value.get<std::int64_t>();
      if (signed_value < 0) throw ConfigError(where(key) + ": must be >= 0");
      return static_cast<std::uint64_t>(signed_value);
    }
    throw ConfigError(where(key) + ": expected a non-negative integer");
  }

  // Every key of the object must have been looked at.
  void finish() const {
    for (const auto& [key, value] : object_.items()) {
      if (!used_.contains(key)) throw ConfigError("unknown key '" + where(key) + "'");
    }
  }

 private:
  std::string where(const std::string& key) const {
    if (path_.empty()) return key;
    if (key.empty()) return path_;
    return path_ + "." + key;
  }

  const json& object_;
  std::string path_;
  std::set<std::string> used_;
};

void require_positive(double value, const std::string& path) {
  if (!(value > 0.0)) throw ConfigError(path + ": must be > 0");
}

void require_nonneg(double value, const std::string& path) {
  if (!(value >= 0.0)) throw ConfigError(path + ": must be >= 0");
}

ObjectiveType parse_objective_type(const std::string& text, const std::string& path) {
  if (text == "nn") return ObjectiveType::kNeuralNet;
  if (text == "mmd") return ObjectiveType::kMmd;
  if (text == "ksd") return ObjectiveType::kKsd;
  if (text == "ridge") return ObjectiveType::kRidge;
  throw ConfigError(path + ": unknown objective type '" + text + "' (nn, mmd, ksd, ridge)");
}

AlgorithmType parse_algorithm_type(const std::string& text, const std::string& path) {
  if (text == "nula") return AlgorithmType::kNula;
  if (text == "em_nula") return AlgorithmType::kEmNula;
  if (text == "nla") return AlgorithmType::kNla;
  throw ConfigError(path + ": unknown algorithm type '" + text + "' (nula, em_nula, nla)");
}

void parse_data(ObjectReader& parent, ObjectiveConfig& out) {
  const json* data = parent.find("data");
  if (data == nullptr) return;
  ObjectReader r(*data, parent.key_path("data"));
  const bool has_seed = r.has("seed");
  const bool has_csv = r.has("csv");
  if (has_seed && has_csv) {
    throw ConfigError(r.key_path("") + ": give either 'seed' or 'csv', not both");
  }
  out.data_seed = r.integer("seed", out.data_seed);
  if (has_csv) out.data_csv = r.string("csv");
  r.finish();
}

void parse_target(ObjectReader& parent, KsdTargetConfig& out, std::size_t dim) {
  const json* target = parent.find("target");
  if (target == nullptr) return;
  ObjectReader r(*target, parent.key_path("target"));
  out.type = r.string("type", out.type);
  if (out.type == "gaussian") {
    r.finish();
    return;
  }
  if (out.type != "mixture") {
    throw ConfigError(r.key_path("type") + ": unknown target '" + out.type +
                      "' (gaussian, mixture)");
  }
  const json& weights = r.require("weights");
  const json& means = r.require("means");
  if (!weights.is_array() || weights.empty()) {
    throw ConfigError(r.key_path("weights") + ": expected a non-empty array");
  }
  if (!means.is_array() || means.size() != weights.size()) {
    throw ConfigError(r.key_path("means") + ": expected one mean per weight");
  }
  out.weights.clear();
  out.means.clear();
  for (const auto& w : weights) {
    const double value = r.as_number(w, "weights");
    require_positive(value, r.key_path("weights"));
    out.weights.push_back(value);
  }
  for (const auto& m : means) {
    if (!m.is_array() || m.size() != dim) {
      throw ConfigError(r.key_path("means") + ": each mean needs " + std::to_string(dim) +
                        " entries");
    }
    std::vector<double> row;
    for (const auto& v : m) row.push_back(r.as_number(v, "means"));
    out.means.push_back(std::move(row));
  }
  out.std = r.number("std", out.std);
  require_positive(out.std, r.key_path("std"));
  r.finish();
}

ObjectiveConfig parse_objective(const json& node, ObjectiveConfig out) {
  ObjectReader r(node, "objective");
  out.type = parse_objective_type(r.string("type"), r.key_path("type"));
  out.dim = r.integer("d", out.dim);
  if (out.dim == 0) throw ConfigError(r.key_path("d") + ": must be >= 1");
  out.lambda_prime = r.number("lambda_prime", out.lambda_prime);
  require_nonneg(out.lambda_prime, r.key_path("lambda_prime"));

  switch (out.type) {
    case ObjectiveType::kNeuralNet:
    case ObjectiveType::kMmd:
      out.n_samples = r.integer("n", out.n_samples);
      if (out.n_samples == 0) throw ConfigError(r.key_path("n") + ": must be >= 1");
      if (out.type == ObjectiveType::kMmd) {
        out.sigma = r.number("sigma", out.sigma);
        require_positive(out.sigma, r.key_path("sigma"));
      }
      parse_data(r, out);
      break;
    case ObjectiveType::kKsd:
      out.sigma1 = r.number("sigma1", out.sigma1);
      out.sigma2 = r.number("sigma2", out.sigma2);
      require_positive(out.sigma1, r.key_path("sigma1"));
      require_positive(out.sigma2, r.key_path("sigma2"));
      parse_target(r, out.target, out.dim);
      break;
    case ObjectiveType::kRidge:
      break;
  }
  r.finish();
  return out;
}

AlgorithmConfig parse_algorithm(const json& node, AlgorithmConfig out) {
  ObjectReader r(node, "algorithm");
  out.type = parse_algorithm_type(r.string("type"), r.key_path("type"));
  switch (out.type) {
    case AlgorithmType::kNula: {
      const std::string mode = r.string("mode", "tuned");
      if (mode == "exact_ei") {
        out.mode = StepMode::kExactEi;
        out.gamma = r.number("gamma");
        out.h = r.number("h");
        out.temperature = r.number("temperature", out.temperature);
        require_positive(out.gamma, r.key_path("gamma"));
        require_nonneg(out.h, r.key_path("h"));
        require_nonneg(out.temperature, r.key_path("temperature"));
      } else if (mode == "tuned") {
        out.mode = StepMode::kTuned;
        out.phi0 = r.number("phi0", out.phi0);
        out.phi1 = r.number("phi1", out.phi1);
        out.phi2 = r.number("phi2", out.phi2);
        out.phi3 = r.number("phi3", out.phi3);
        out.eta = r.number("eta", out.eta);
        if (!(out.phi2 > 0.0 && out.phi2 <= 1.0)) {
          throw ConfigError(r.key_path("phi2") + ": must lie in (0, 1]");
        }
        require_nonneg(out.eta, r.key_path("eta"));
      } else {
        throw ConfigError(r.key_path("mode") + ": unknown mode '" + mode +
                          "' (exact_ei, tuned)");
      }
      break;
    }
    case AlgorithmType::kEmNula:
      out.h2 = r.number("h2", out.h2);
      out.gamma = r.number("gamma", out.gamma);
      out.lambda2 = r.number("lambda2", out.lambda2);
      if (r.has("h3")) out.h3 = r.number("h3");
      require_nonneg(out.h2, r.key_path("h2"));
      require_nonneg(out.lambda2, r.key_path("lambda2"));
      break;
    case AlgorithmType::kNla:
      out.h1 = r.number("h1", out.h1);
      out.lambda1 = r.number("lambda1", out.lambda1);
      require_nonneg(out.h1, r.key_path("h1"));
      require_nonneg(out.lambda1, r.key_path("lambda1"));
      break;
  }
  r.finish();
  return out;
}

RunConfig profile_defaults(const std::string& profile) {
  RunConfig c;
  if (profile == "desk") return c;
  if (profile == "paper") {
    c.objective.dim = 1000;
    c.objective.n_samples = 100;
    c.steps = 10000;
    return c;
  }
  throw ConfigError("profile: unknown profile '" + profile + "' (desk, paper)");
}

json objective_json(const ObjectiveConfig& o) {
  json j{{"type", to_string(o.type)}, {"d", o.dim}, {"lambda_prime", o.lambda_prime}};
  switch (o.type) {
    case ObjectiveType::kNeuralNet:
    case ObjectiveType::kMmd:
      j["n"] = o.n_samples;
      if (o.type == ObjectiveType::kMmd) j["sigma"] = o.sigma;
      if (o.data_csv) {
        j["data"] = {{"csv", o.data_csv->string()}};
      } else {
        j["data"] = {{"seed", o.data_seed}};
      }
      break;
    case ObjectiveType::kKsd: {
      j["sigma1"] = o.sigma1;
      j["sigma2"] = o.sigma2;
      json target{{"type", o.target.type}};
      if (o.target.type == "mixture") {
        target["weights"] = o.target.weights;
        target["means"] = o.target.means;
        target["std"] = o.target.std;
      }
      j["target"] = target;
      break;
    }
    case ObjectiveType::kRidge:
      break;
  }
  return j;
}

json algorithm_json(const AlgorithmConfig& a) {
  json j{{"type", to_string(a.type)}};
  switch (a.type) {
    case AlgorithmType::kNula:
      if (a.mode == StepMode::kExactEi) {
        j["mode"] = "exact_ei";
        j["gamma"] = a.gamma;
        j["h"] = a.h;
        j["temperature"] = a.temperature;
      } else {
        j["mode"] = "tuned";
        j["phi0"] = a.phi0;
        j["phi1"] = a.phi1;
        j["phi2"] = a.phi2;
        j["phi3"] = a.phi3;
        j["eta"] = a.eta;
      }
      break;
    case AlgorithmType::kEmNula:
      j["h2"] = a.h2;
      j["gamma"] = a.gamma;
      j["lambda2"] = a.lambda2;
      if (a.h3) j["h3"] = *a.h3;
      break;
    case AlgorithmType::kNla:
      j["h1"] = a.h1;
      j["lambda1"] = a.lambda1;
      break;
  }
  return j;
}

}  // namespace

std::string to_string(ObjectiveType type) {
  switch (type) {
    case ObjectiveType::kNeuralNet: return "nn";
    case ObjectiveType::kMmd: return "mmd";
    case ObjectiveType::kKsd: return "ksd";
    case ObjectiveType::kRidge: return "ridge";
  }
  return "?";
}

std::string to_string(AlgorithmType type) {
  switch (type) {
    case AlgorithmType::kNula: return "nula";
    case AlgorithmType::kEmNula: return "em_nula";
    case AlgorithmType::kNla: return "nla";
  }
  return "?";
}

RunConfig parse_config(const json& document) {
  ObjectReader r(document, "");
  RunConfig c = profile_defaults(r.string("profile", "desk"));
  c.objective = parse_objective(r.require("objective"), c.objective);
  c.algorithm = parse_algorithm(r.require("algorithm"), c.algorithm);

  c.n_particles = r.integer("n_particles", c.n_particles);
  if (c.n_particles == 0) throw ConfigError("n_particles: must be >= 1");
  c.steps = r.integer("steps", c.steps);
  c.record_every = r.integer("record_every", c.record_every);
  if (c.record_every == 0) throw ConfigError("record_every: must be >= 1");
  c.threads = static_cast<unsigned>(r.integer("threads", c.threads));
  if (c.threads == 0) throw ConfigError("threads: must be >= 1");
  c.record_wall_time = r.boolean("record_wall_time", c.record_wall_time);

  if (const json* seeds = r.find("seeds")) {
    if (!seeds->is_array() || seeds->empty()) {
      throw ConfigError("seeds: expected a non-empty array of integers");
    }
    c.seeds.clear();
    for (const auto& s : *seeds) c.seeds.push_back(r.as_unsigned(s, "seeds"));
  }

  if (const json* init = r.find("init")) {
    ObjectReader ir(*init, "init");
    c.init.mean = ir.number("mean", c.init.mean);
    c.init.std = ir.number("std", c.init.std);
    require_nonneg(c.init.std, "init.std");
    ir.finish();
  }

  c.output_dir = r.string("output_dir");
  if (c.output_dir.empty()) throw ConfigError("output_dir: must not be empty");
  r.finish();
  return c;
}

RunConfig parse_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path.string());
  json document;
  try {
    document = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": invalid JSON: " + e.what());
  }
  return parse_config(document);
}

json to_json(const RunConfig& c) {
  return json{{"objective", objective_json(c.objective)},
              {"algorithm", algorithm_json(c.algorithm)},
              {"n_particles", c.n_particles},
              {"steps", c.steps},
              {"record_every", c.record_every},
              {"seeds", c.seeds},
              {"init", {{"mean", c.init.mean}, {"std", c.init.std}}},
              {"output_dir", c.output_dir.string()},
              {"threads", c.threads},
              {"record_wall_time", c.record_wall_time}};
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    const auto first = item.find_first_not_of(' ');
    const auto last = item.find_last_not_of(' ');
    if (first == std::string::npos) throw ConfigError("seed list has an empty entry: " + text);
    item = item.substr(first, last - first + 1);
    std::size_t consumed = 0;
    unsigned long long value = 0;
    try {
      if (item.front() == '-') throw std::invalid_argument("negative");
      value = std::stoull(item, &consumed);
    } catch (const std::exception&) {
      throw ConfigError("invalid seed '" + item + "' in seed list");
    }
    if (consumed != item.size()) throw ConfigError("invalid seed '" + item + "' in seed list");
    seeds.push_back(value);
  }
  if (seeds.empty()) throw ConfigError("seed list is empty");
  return seeds;
}

void apply_env_overrides(RunConfig& config) {
  if (const char* text = std::getenv("MFL_SEED_OVERRIDE"); text != nullptr && *text != '\0') {
    config.seeds = parse_seed_list(text);
  }
}

std::unique_ptr<MeanFieldObjective> build_objective(const ObjectiveConfig& o) {
  switch (o.type) {
    case ObjectiveType::kNeuralNet: {
      RegressionData data = o.data_csv ? load_regression_csv(*o.data_csv)
                                       : make_gaussian_regression_data(o.dim, o.n_samples,
                                                                       o.data_seed);
      if (static_cast<std::size_t>(data.inputs.cols()) != o.dim) {
        throw ConfigError("objective.d: data file has " + std::to_string(data.inputs.cols()) +
                          " input columns");
      }
      return std::make_unique<NeuralNetObjective>(std::move(data.inputs), std::move(data.labels),
                                                  o.lambda_prime);
    }
    case ObjectiveType::kMmd: {
      Matrix samples = o.data_csv ? load_samples_csv(*o.data_csv)
                                  : make_gaussian_samples(o.dim, o.n_samples, o.data_seed);
      if (static_cast<std::size_t>(samples.cols()) != o.dim) {
        throw ConfigError("objective.d: data file has " + std::to_string(samples.cols()) +
                          " columns");
      }
      return std::make_unique<MmdObjective>(std::move(samples), o.sigma, o.lambda_prime);
    }
    case ObjectiveType::kKsd: {
      ScoreModel score = ScoreModel::standard_gaussian(o.dim);
      if (o.target.type == "mixture") {
        Eigen::MatrixXd means(static_cast<Eigen::Index>(o.target.means.size()),
                              static_cast<Eigen::Index>(o.dim));
        for (std::size_t c = 0; c < o.target.means.size(); ++c) {
          for (std::size_t j = 0; j < o.dim; ++j) {
            means(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(j)) =
                o.target.means[c][j];
          }
        }
        score = ScoreModel::gaussian_mixture(o.target.weights, means, o.target.std);
      }
      return std::make_unique<KsdObjective>(std::move(score), o.dim,
                                            KsdKernel{o.sigma1, o.sigma2}, o.lambda_prime);
    }
    case ObjectiveType::kRidge:
      return std::make_unique<RidgeObjective>(o.dim, o.lambda_prime);
  }
  throw ConfigError("objective.type: unsupported");
}

IntegratorSpec build_integrator(const AlgorithmConfig& a) {
  switch (a.type) {
    case AlgorithmType::kNula:
      if (a.mode == StepMode::kExactEi) return derive_step_params(a.gamma, a.h, a.temperature);
      return tuned_step_params(a.phi0, a.phi1, a.phi2, a.phi3, a.eta);
    case AlgorithmType::kEmNula:
      return make_em_params(a.h2, a.gamma, a.lambda2, a.h3);
    case AlgorithmType::kNla:
      return make_nla_params(a.h1, a.lambda1);
  }
  throw ConfigError("algorithm.type: unsupported");
}

}  // namespace mfl
