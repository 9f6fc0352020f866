#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mfl/integrators.hpp"
#include "mfl/objectives.hpp"

namespace mfl {

enum class ObjectiveType { kNeuralNet, kMmd, kKsd, kRidge };
enum class AlgorithmType { kNula, kEmNula, kNla };

struct KsdTargetConfig {
  std::string type = "gaussian";  // gaussian | mixture
  std::vector<double> weights;
  std::vector<std::vector<double>> means;
  double std = 1.0;

  bool operator==(const KsdTargetConfig&) const = default;
};

struct ObjectiveConfig {
  ObjectiveType type = ObjectiveType::kNeuralNet;
  std::size_t dim = 50;
  std::size_t n_samples = 100;
  double lambda_prime = 1e-4;
  double sigma = 1.0;   // mmd
  double sigma1 = 1.0;  // ksd
  double sigma2 = 1.0;  // ksd
  std::uint64_t data_seed = 0;
  std::optional<std::filesystem::path> data_csv;
  KsdTargetConfig target;

  bool operator==(const ObjectiveConfig&) const = default;
};

struct AlgorithmConfig {
  AlgorithmType type = AlgorithmType::kNula;
  StepMode mode = StepMode::kTuned;
  // exact_ei
  double gamma = 1.0;
  double h = 0.0;
  double temperature = 1.0;
  // tuned
  double phi0 = 1e-4;
  double phi1 = 0.02;
  double phi2 = 0.99;
  double phi3 = 0.02;
  double eta = 1e-3;
  // em_nula
  double h2 = 1e-2;
  std::optional<double> h3;
  double lambda2 = 1e-4;
  // nla
  double h1 = 1e-2;
  double lambda1 = 1e-4;

  bool operator==(const AlgorithmConfig&) const = default;
};

struct InitConfig {
  double mean = 0.0;
  double std = 0.1;

  bool operator==(const InitConfig&) const = default;
};

struct RunConfig {
  ObjectiveConfig objective;
  AlgorithmConfig algorithm;
  std::size_t n_particles = 256;
  std::size_t steps = 2000;
  std::size_t record_every = 10;
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  InitConfig init;
  std::filesystem::path output_dir;
  unsigned threads = 1;
  bool record_wall_time = false;

  bool operator==(const RunConfig&) const = default;
};

// Validates and applies defaults. Unknown keys, type mismatches, missing
// required fields and out-of-range values throw ConfigError naming the key.
RunConfig parse_config(const nlohmann::json& document);
RunConfig parse_config_file(const std::filesystem::path& path);

// Fully explicit form; parse_config(to_json(c)) == c.
nlohmann::json to_json(const RunConfig& config);

// Comma-separated seed list, e.g. "0,1,2".
std::vector<std::uint64_t> parse_seed_list(const std::string& text);

// Applies MFL_SEED_OVERRIDE when set.
void apply_env_overrides(RunConfig& config);

std::unique_ptr<MeanFieldObjective> build_objective(const ObjectiveConfig& config);
IntegratorSpec build_integrator(const AlgorithmConfig& config);

std::string to_string(ObjectiveType type);
std::string to_string(AlgorithmType type);

}  // namespace mfl
