#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "mfl/checks.hpp"
#include "mfl/config.hpp"
#include "mfl/run_record.hpp"

namespace mfl {

// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitCheckFailure = 1;
inline constexpr int kExitDivergence = 2;
inline constexpr int kExitConfigError = 3;

struct SeedRun {
  std::uint64_t seed = 0;
  std::vector<RunRecord> records;
  std::optional<std::size_t> diverged_at;
  std::string failure;
};

// Per-seed numbers written to summary.csv; absent values are left empty.
struct SeedSummary {
  std::uint64_t seed = 0;
  std::optional<double> final_loss;
  std::optional<double> plateau;
  std::optional<double> decay_rate;
  std::optional<double> r_squared;
  std::optional<std::size_t> diverged_at;
};

SeedSummary summarize_seed(const SeedRun& run, std::size_t steps);

// Runs every seed of `config` without touching the filesystem. Seeds are
// spread over `workers` threads; results come back in seed-list order.
std::vector<SeedRun> run_seeds(const RunConfig& config, unsigned workers = 1);

// Writes resolved_config.json, run_seed<k>.csv, bands.csv and summary.csv into
// config.output_dir. Returns the runs it wrote.
std::vector<SeedRun> run_experiment(const RunConfig& config, unsigned workers,
                                    std::ostream& log);

int cmd_run(const RunConfig& config, unsigned workers, std::ostream& log);

enum class SweepAxis { kNParticles, kH, kGamma };
SweepAxis parse_sweep_axis(const std::string& name);
std::string to_string(SweepAxis axis);

// Copy of `config` with one axis set to `value`, revalidated. Throws
// ConfigError when the axis does not apply to the configured algorithm.
RunConfig apply_sweep_value(const RunConfig& config, SweepAxis axis, double value);

// Shortest text that reads back to `value`; used for sweep directory names.
std::string sweep_label(SweepAxis axis, double value);

int cmd_sweep(const RunConfig& config, SweepAxis axis, const std::vector<double>& values,
              unsigned workers, std::ostream& log);

// Prints the check table to `out`, optionally writes it as CSV.
int cmd_check(CheckLevel level, std::ostream& out,
              const std::optional<std::filesystem::path>& csv_path = std::nullopt,
              const CheckOptions& options = {});

int cmd_plot(const std::filesystem::path& dir, std::ostream& log);

}  // namespace mfl
