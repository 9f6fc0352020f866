#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "mfl/commands.hpp"
#include "mfl/csv.hpp"
#include "mfl/errors.hpp"
#include "mfl/report.hpp"

using namespace mfl;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("mfl_commands_" + name);
  fs::remove_all(dir);
  return dir;
}

RunConfig small_config(const fs::path& dir) {
  RunConfig c = parse_config(nlohmann::json{
      {"objective", {{"type", "nn"}, {"d", 5}, {"n", 12}}},
      {"algorithm", {{"type", "nula"}, {"mode", "exact_ei"}, {"gamma", 1.0}, {"h", 0.1}}},
      {"n_particles", 16},
      {"steps", 120},
      {"record_every", 1},
      {"seeds", {0, 1, 2}},
      {"output_dir", dir.string()}});
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST_CASE("run writes records, bands and summary") {
  const fs::path dir = scratch("run");
  std::ostringstream log;
  CHECK(cmd_run(small_config(dir), 1, log) == kExitOk);
  for (const char* f : {"resolved_config.json", "run_seed0.csv", "run_seed1.csv", "run_seed2.csv",
                        "bands.csv", "summary.csv"}) {
    CHECK(fs::exists(dir / f));
  }
  CHECK(parse_config_file(dir / "resolved_config.json") == small_config(dir));

  const auto records = read_records_csv(dir / "run_seed1.csv");
  REQUIRE(records.size() == 121);
  CHECK(records.front().step == 0);
  CHECK(records.back().step == 120);

  const auto bands = read_bands_csv(dir / "bands.csv");
  REQUIRE(bands.size() == 121);
  for (const auto& b : bands) {
    CHECK(b.min <= b.mean);
    CHECK(b.mean <= b.max);
  }

  const csv::Table summary = csv::read(dir / "summary.csv");
  CHECK(summary.header == std::vector<std::string>{"seed", "final_loss", "plateau", "decay_rate",
                                                   "r_squared", "diverged_at"});
  REQUIRE(summary.rows.size() == 3);
  CHECK(summary.rows[0][5].empty());
  CHECK(csv::parse_double(summary.rows[1][1], "final_loss") == records.back().loss);
  fs::remove_all(dir);
}

TEST_CASE("zero steps gives header-only records") {
  const fs::path dir = scratch("zero");
  RunConfig c = small_config(dir);
  c.steps = 0;
  std::ostringstream log;
  CHECK(cmd_run(c, 1, log) == kExitOk);
  CHECK(slurp(dir / "run_seed0.csv") == "step,loss,grad_norm_mean,x_m2,v_m2,wall_ms\n");
  CHECK(read_bands_csv(dir / "bands.csv").empty());
  fs::remove_all(dir);
}

TEST_CASE("outputs are byte-identical across repeats and worker counts") {
  const fs::path a = scratch("det_a"), b = scratch("det_b");
  std::ostringstream log;
  RunConfig ca = small_config(a), cb = small_config(b);
  cb.threads = 3;
  CHECK(cmd_run(ca, 1, log) == kExitOk);
  CHECK(cmd_run(cb, 3, log) == kExitOk);
  for (const char* f : {"run_seed0.csv", "run_seed1.csv", "run_seed2.csv", "bands.csv",
                        "summary.csv"}) {
    CHECK(slurp(a / f) == slurp(b / f));
  }
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("divergence exits 2 and keeps finite rows") {
  const fs::path dir = scratch("diverge");
  RunConfig c = parse_config(nlohmann::json{
      {"objective", {{"type", "ridge"}, {"d", 2}, {"lambda_prime", 20.0}}},
      {"algorithm", {{"type", "em_nula"}, {"h2", 1.0}, {"gamma", 1.0}}},
      {"n_particles", 8},
      {"steps", 500},
      {"record_every", 1},
      {"seeds", {0, 1}},
      {"output_dir", dir.string()}});
  std::ostringstream log;
  CHECK(cmd_run(c, 1, log) == kExitDivergence);
  const csv::Table summary = csv::read(dir / "summary.csv");
  for (const auto& row : summary.rows) CHECK_FALSE(row[5].empty());
  const std::string text = slurp(dir / "run_seed0.csv");
  CHECK(text.find("nan") == std::string::npos);
  CHECK(text.find("inf") == std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("sweep over particle counts") {
  const fs::path dir = scratch("sweep");
  RunConfig c = small_config(dir);
  c.steps = 20;
  std::ostringstream log;
  CHECK(cmd_sweep(c, SweepAxis::kNParticles, {4, 8}, 1, log) == kExitOk);
  CHECK(fs::exists(dir / "n_particles_4" / "bands.csv"));
  CHECK(fs::exists(dir / "n_particles_8" / "bands.csv"));
  const csv::Table t = csv::read(dir / "sweep_summary.csv");
  CHECK(t.header == std::vector<std::string>{"value", "mean_final_loss", "mean_plateau"});
  REQUIRE(t.rows.size() == 2);
  CHECK(t.rows[0][0] == "4");
  CHECK(parse_config_file(dir / "n_particles_8" / "resolved_config.json").n_particles == 8);

  CHECK(cmd_plot(dir, log) == kExitOk);
  const std::string svg = slurp(dir / "loss.svg");
  CHECK(svg.find("N=4") != std::string::npos);
  CHECK(svg.find("N=8") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("sweep validation") {
  const RunConfig c = small_config(scratch("sweep_bad"));
  std::ostringstream log;
  CHECK_THROWS_AS(cmd_sweep(c, SweepAxis::kH, {}, 1, log), ConfigError);
  CHECK_THROWS_AS(parse_sweep_axis("temperature"), ConfigError);
  CHECK(apply_sweep_value(c, SweepAxis::kH, 0.2).algorithm.h == 0.2);
  CHECK(apply_sweep_value(c, SweepAxis::kGamma, 3.0).algorithm.gamma == 3.0);
  CHECK_THROWS_AS(apply_sweep_value(c, SweepAxis::kH, -1.0), ConfigError);
  CHECK_THROWS_AS(apply_sweep_value(c, SweepAxis::kNParticles, 2.5), ConfigError);

  RunConfig tuned = c;
  tuned.algorithm.mode = StepMode::kTuned;
  CHECK_THROWS_AS(apply_sweep_value(tuned, SweepAxis::kH, 0.1), ConfigError);
  CHECK_THROWS_AS(apply_sweep_value(tuned, SweepAxis::kGamma, 0.1), ConfigError);

  RunConfig nla = c;
  nla.algorithm.type = AlgorithmType::kNla;
  CHECK(apply_sweep_value(nla, SweepAxis::kH, 0.03).algorithm.h1 == 0.03);
  CHECK_THROWS_AS(apply_sweep_value(nla, SweepAxis::kGamma, 1.0), ConfigError);

  CHECK(sweep_label(SweepAxis::kH, 0.05) == "h_0.05");
  CHECK(sweep_label(SweepAxis::kNParticles, 256) == "n_particles_256");
}

TEST_CASE("plot needs non-empty bands") {
  const fs::path dir = scratch("plot");
  std::ostringstream log;
  CHECK_THROWS_AS(cmd_plot(dir, log), ConfigError);
  fs::create_directories(dir);
  CHECK_THROWS_AS(cmd_plot(dir, log), ConfigError);
  write_bands_csv(dir / "bands.csv", {});
  CHECK_THROWS_AS(cmd_plot(dir, log), ConfigError);

  write_bands_csv(dir / "bands.csv", {{0, 1.0, 0.5, 2.0}, {10, 0.1, 0.05, 0.2}});
  CHECK(cmd_plot(dir, log) == kExitOk);
  const std::string svg = slurp(dir / "loss.svg");
  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK(svg.find("<polygon") != std::string::npos);
  CHECK(svg.find("<polyline") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("check command") {
  std::ostringstream out;
  const fs::path csv_path = fs::temp_directory_path() / "mfl_commands_checks.csv";
  CHECK(cmd_check(CheckLevel::kFast, out, csv_path) == kExitOk);
  CHECK(out.str().find("all") != std::string::npos);
  const csv::Table t = csv::read(csv_path);
  CHECK(t.header == std::vector<std::string>{"check", "passed", "value", "threshold", "detail"});
  CHECK(t.rows.size() >= 10);
  fs::remove(csv_path);

  std::ostringstream tampered;
  CheckOptions opts;
  opts.phi1_tamper = 0.01;
  CHECK(cmd_check(CheckLevel::kFast, tampered, std::nullopt, opts) == kExitCheckFailure);
  CHECK(tampered.str().find("failed: ") != std::string::npos);
  CHECK(tampered.str().find("step_params_taylor") != std::string::npos);
}
