#include "doctest.h"

#include <cstdlib>
#include <string>

#include "mfl/config.hpp"
#include "mfl/errors.hpp"

using namespace mfl;
using nlohmann::json;

namespace {

json minimal() {
  return json::parse(R"({
    "objective": {"type": "nn"},
    "algorithm": {"type": "nula"},
    "output_dir": "out"
  })");
}

std::string error_of(const json& doc) {
  try {
    parse_config(doc);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("minimal config gets desk defaults") {
  const RunConfig c = parse_config(minimal());
  CHECK(c.objective.type == ObjectiveType::kNeuralNet);
  CHECK(c.objective.dim == 50);
  CHECK(c.objective.n_samples == 100);
  CHECK(c.objective.lambda_prime == 1e-4);
  CHECK(c.n_particles == 256);
  CHECK(c.steps == 2000);
  CHECK(c.record_every == 10);
  CHECK(c.seeds == std::vector<std::uint64_t>{0, 1, 2, 3, 4});
  CHECK(c.init.std == 0.1);
  CHECK(c.algorithm.mode == StepMode::kTuned);
  CHECK(c.algorithm.phi1 == 0.02);
  CHECK(c.algorithm.eta == 1e-3);
}

TEST_CASE("full-scale profile") {
  json doc = minimal();
  doc["profile"] = "paper";
  const RunConfig c = parse_config(doc);
  CHECK(c.objective.dim == 1000);
  CHECK(c.objective.n_samples == 100);
  CHECK(c.objective.lambda_prime == 1e-4);
  CHECK(c.steps == 10000);
  CHECK(c.n_particles == 256);
  CHECK(c.init.std == 0.1);
  doc["profile"] = "huge";
  CHECK(error_of(doc).find("profile") != std::string::npos);
}

TEST_CASE("errors name the offending key") {
  json neg = minimal();
  neg["algorithm"] = {{"type", "nula"}, {"mode", "exact_ei"}, {"gamma", 1.0}, {"h", -0.1}};
  CHECK(error_of(neg).find("algorithm.h") != std::string::npos);

  json unknown = minimal();
  unknown["foo"] = 1;
  CHECK(error_of(unknown).find("foo") != std::string::npos);

  json nested = minimal();
  nested["objective"]["bogus"] = true;
  CHECK(error_of(nested).find("objective.bogus") != std::string::npos);

  json wrong_type = minimal();
  wrong_type["steps"] = "many";
  CHECK(error_of(wrong_type).find("steps") != std::string::npos);

  json missing = minimal();
  missing.erase("output_dir");
  CHECK(error_of(missing).find("output_dir") != std::string::npos);

  json missing_gamma = minimal();
  missing_gamma["algorithm"] = {{"type", "nula"}, {"mode", "exact_ei"}, {"h", 0.1}};
  CHECK(error_of(missing_gamma).find("algorithm.gamma") != std::string::npos);

  json bad_seed = minimal();
  bad_seed["seeds"] = {1, -2};
  CHECK(error_of(bad_seed).find("seeds") != std::string::npos);

  json tuned_h = minimal();
  tuned_h["algorithm"]["h"] = 0.1;
  CHECK(error_of(tuned_h).find("algorithm.h") != std::string::npos);

  json zero_every = minimal();
  zero_every["record_every"] = 0;
  CHECK(error_of(zero_every).find("record_every") != std::string::npos);

  json sigma = minimal();
  sigma["objective"] = {{"type", "mmd"}, {"sigma", 0.0}};
  CHECK(error_of(sigma).find("objective.sigma") != std::string::npos);

  CHECK_THROWS_AS(parse_config(json::array()), ConfigError);
}

TEST_CASE("resolved config round-trips") {
  std::vector<json> docs;
  docs.push_back(minimal());
  docs.push_back(json::parse(R"({
    "objective": {"type": "mmd", "d": 3, "n": 20, "sigma": 0.7, "lambda_prime": 0.01,
                  "data": {"seed": 9}},
    "algorithm": {"type": "nula", "mode": "exact_ei", "gamma": 2.0, "h": 0.05,
                  "temperature": 0.5},
    "n_particles": 32, "steps": 10, "record_every": 2, "seeds": [7, 8],
    "init": {"mean": 0.5, "std": 0.2}, "output_dir": "x/y", "threads": 2,
    "record_wall_time": true
  })"));
  docs.push_back(json::parse(R"({
    "objective": {"type": "ksd", "d": 2, "sigma1": 2.0, "sigma2": 0.5,
                  "target": {"type": "mixture", "weights": [1, 3],
                             "means": [[0, 1], [1, 0]], "std": 0.8}},
    "algorithm": {"type": "em_nula", "h2": 0.02, "gamma": 0.5, "h3": 0.1, "lambda2": 0.001},
    "output_dir": "k"
  })"));
  docs.push_back(json::parse(R"({
    "objective": {"type": "ridge", "d": 4, "lambda_prime": 1.0},
    "algorithm": {"type": "nla", "h1": 0.1, "lambda1": 0.2},
    "output_dir": "r"
  })"));
  docs.push_back(json::parse(R"({
    "objective": {"type": "nn", "data": {"csv": "data/train.csv"}},
    "algorithm": {"type": "em_nula"},
    "output_dir": "n"
  })"));
  for (const json& doc : docs) {
    const RunConfig c = parse_config(doc);
    const json resolved = to_json(c);
    CHECK(parse_config(resolved) == c);
    CHECK(to_json(parse_config(resolved)) == resolved);
  }
}

TEST_CASE("seed lists and environment override") {
  CHECK(parse_seed_list("3") == std::vector<std::uint64_t>{3});
  CHECK(parse_seed_list("0, 1,2") == std::vector<std::uint64_t>{0, 1, 2});
  CHECK_THROWS_AS(parse_seed_list(""), ConfigError);
  CHECK_THROWS_AS(parse_seed_list("1,,2"), ConfigError);
  CHECK_THROWS_AS(parse_seed_list("1,x"), ConfigError);
  CHECK_THROWS_AS(parse_seed_list("-1"), ConfigError);

  RunConfig c = parse_config(minimal());
  setenv("MFL_SEED_OVERRIDE", "11,12", 1);
  apply_env_overrides(c);
  unsetenv("MFL_SEED_OVERRIDE");
  CHECK(c.seeds == std::vector<std::uint64_t>{11, 12});
  apply_env_overrides(c);
  CHECK(c.seeds == std::vector<std::uint64_t>{11, 12});
}

TEST_CASE("objective and integrator construction") {
  json doc = minimal();
  doc["objective"] = {{"type", "nn"}, {"d", 4}, {"n", 7}};
  auto nn = build_objective(parse_config(doc).objective);
  CHECK(nn->name() == "nn");
  CHECK(nn->dim() == 4);

  doc["objective"] = {{"type", "ksd"}, {"d", 2}};
  CHECK(build_objective(parse_config(doc).objective)->name() == "ksd");
  doc["objective"] = {{"type", "ridge"}, {"d", 2}};
  CHECK(build_objective(parse_config(doc).objective)->name() == "ridge");

  ObjectiveConfig missing_file;
  missing_file.data_csv = "/nonexistent/file.csv";
  CHECK_THROWS(build_objective(missing_file));

  AlgorithmConfig a;
  CHECK(std::get<StepParams>(build_integrator(a)).mode == StepMode::kTuned);
  a.mode = StepMode::kExactEi;
  a.h = 0.1;
  CHECK(std::get<StepParams>(build_integrator(a)).phi2 == doctest::Approx(std::exp(-0.1)));
  a.type = AlgorithmType::kEmNula;
  CHECK(std::holds_alternative<EmParams>(build_integrator(a)));
  a.type = AlgorithmType::kNla;
  CHECK(std::holds_alternative<NlaParams>(build_integrator(a)));
}
