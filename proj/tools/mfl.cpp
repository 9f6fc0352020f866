// mfl: run, sweep, verify and plot mean-field Langevin particle experiments.
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mfl/commands.hpp"
#include "mfl/config.hpp"
#include "mfl/csv.hpp"
#include "mfl/errors.hpp"

namespace {

std::vector<double> parse_values(const std::string& text) {
  std::vector<double> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    try {
      out.push_back(mfl::csv::parse_double(item, "--values"));
    } catch (const std::exception& e) {
      throw mfl::ConfigError(std::string("values: ") + e.what());
    }
  }
  return out;
}

mfl::RunConfig load(const std::string& path) {
  mfl::RunConfig config = mfl::parse_config_file(path);
  mfl::apply_env_overrides(config);
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mean-field underdamped Langevin particle algorithms"};
  app.require_subcommand(1);

  std::string config_path;
  unsigned workers = 1;

  auto* run = app.add_subcommand("run", "Run every seed of a config");
  run->add_option("--config", config_path, "JSON config file")->required();
  run->add_option("--workers", workers, "Seeds run in parallel")->check(CLI::PositiveNumber);

  std::string axis;
  std::string values;
  auto* sweep = app.add_subcommand("sweep", "Repeat a run over one parameter axis");
  sweep->add_option("--config", config_path, "JSON config file")->required();
  sweep->add_option("--axis", axis, "n_particles | h | gamma")->required();
  sweep->add_option("--values", values, "Comma-separated values")->required();
  sweep->add_option("--workers", workers, "Seeds run in parallel")->check(CLI::PositiveNumber);

  std::string level = "fast";
  std::string check_csv;
  double tamper = 0.0;
  auto* check = app.add_subcommand("check", "Run the verification suite");
  check->add_option("--level", level, "fast | full")
      ->check(CLI::IsMember({"fast", "full"}));
  check->add_option("--csv", check_csv, "Also write results as CSV");
  check->add_option("--tamper-phi1", tamper, "Perturb phi1 by this relative amount")
      ->group("");

  std::string plot_dir;
  auto* plot = app.add_subcommand("plot", "Render loss.svg from bands.csv");
  plot->add_option("--dir", plot_dir, "Run or sweep directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : mfl::kExitConfigError;
  }

  try {
    if (*run) return mfl::cmd_run(load(config_path), workers, std::cerr);
    if (*sweep) {
      const mfl::SweepAxis sweep_axis = mfl::parse_sweep_axis(axis);
      const std::vector<double> sweep_values = parse_values(values);
      return mfl::cmd_sweep(load(config_path), sweep_axis, sweep_values, workers, std::cerr);
    }
    if (*check) {
      mfl::CheckOptions options;
      options.phi1_tamper = tamper;
      std::optional<std::filesystem::path> csv_path;
      if (!check_csv.empty()) csv_path = check_csv;
      return mfl::cmd_check(level == "full" ? mfl::CheckLevel::kFull : mfl::CheckLevel::kFast,
                            std::cout, csv_path, options);
    }
    if (*plot) return mfl::cmd_plot(plot_dir, std::cerr);
  } catch (const std::invalid_argument& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return mfl::kExitConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return mfl::kExitCheckFailure;
  }
  return mfl::kExitConfigError;
}
