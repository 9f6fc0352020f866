#include "mfl/commands.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <regex>

#include "mfl/csv.hpp"
#include "mfl/diagnostics.hpp"
#include "mfl/errors.hpp"
#include "mfl/parallel.hpp"
#include "mfl/report.hpp"

namespace mfl {
namespace fs = std::filesystem;
namespace {

std::string optional_field(const std::optional<double>& v) {
  return v ? csv::format_double(*v) : std::string();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << text;
  if (!out) throw ConfigError("failed writing " + path.string());
}

void prepare_output_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw ConfigError("output_dir: cannot create '" + dir.string() + "'");
  }
}

std::vector<SeedBand> bands_over_common_prefix(const std::vector<SeedRun>& runs) {
  std::size_t common = runs.empty() ? 0 : runs.front().records.size();
  for (const SeedRun& r : runs) common = std::min(common, r.records.size());
  if (common == 0) return {};
  std::vector<std::vector<RunRecord>> prefixes;
  for (const SeedRun& r : runs) {
    prefixes.emplace_back(r.records.begin(), r.records.begin() + static_cast<long>(common));
  }
  return aggregate_seeds(prefixes);
}

std::optional<double> mean_of(const std::vector<std::optional<double>>& values) {
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto& v : values) {
    if (v) {
      sum += *v;
      ++count;
    }
  }
  if (count == 0) return std::nullopt;
  return sum / static_cast<double>(count);
}

std::string series_label(const fs::path& dir, bool is_subdir) {
  static const std::regex sweep_name(R"(^(n_particles|h|gamma)_(.+)$)");
  const std::string name = dir.filename().string();
  std::smatch m;
  if (is_subdir && std::regex_match(name, m, sweep_name)) {
    const std::string axis = m[1].str() == "n_particles" ? "N" : m[1].str();
    return axis + "=" + m[2].str();
  }
  const fs::path resolved = dir / "resolved_config.json";
  if (fs::exists(resolved)) {
    try {
      const RunConfig c = parse_config_file(resolved);
      std::string label = to_string(c.algorithm.type);
      if (c.algorithm.type == AlgorithmType::kNula) {
        label += c.algorithm.mode == StepMode::kTuned ? " (tuned)" : " (exact_ei)";
      }
      return label + " N=" + std::to_string(c.n_particles);
    } catch (const std::exception&) {
      // fall back to the directory name
    }
  }
  return name.empty() ? std::string("run") : name;
}

}  // namespace

SeedSummary summarize_seed(const SeedRun& run, std::size_t steps) {
  SeedSummary s;
  s.seed = run.seed;
  s.diverged_at = run.diverged_at;
  if (run.records.empty()) return s;
  s.final_loss = run.records.back().loss;
  try {
    s.plateau = plateau_level(run.records);
    const DecayFit fit = fit_decay_rate(run.records, StepWindow{0, steps / 2}, *s.plateau);
    s.decay_rate = fit.rate;
    s.r_squared = fit.r_squared;
  } catch (const FitError&) {
    // too few records, or the loss dips below its plateau inside the window
  }
  return s;
}

std::vector<SeedRun> run_seeds(const RunConfig& config, unsigned workers) {
  const auto objective = build_objective(config.objective);
  const IntegratorSpec spec = build_integrator(config.algorithm);

  std::vector<SeedRun> runs(config.seeds.size());
  parallel_for(runs.size(), workers, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      SeedRun& run = runs[i];
      run.seed = config.seeds[i];
      const RngStreams rng(run.seed);
      ParticleCloud cloud = init_cloud(config.n_particles, config.objective.dim,
                                       config.init.mean, config.init.std, rng);
      ChainOptions options;
      options.steps = config.steps;
      options.record_every = config.record_every;
      options.threads = config.threads;
      options.measure_wall_time = config.record_wall_time;
      try {
        run.records = run_chain(std::move(cloud), *objective, spec, rng, options).records;
      } catch (const ChainDivergence& e) {
        run.records = e.records();
        run.diverged_at = e.step();
        run.failure = e.what();
      }
    }
  });
  return runs;
}

std::vector<SeedRun> run_experiment(const RunConfig& config, unsigned workers,
                                    std::ostream& log) {
  prepare_output_dir(config.output_dir);
  write_text(config.output_dir / "resolved_config.json", to_json(config).dump(2) + "\n");

  std::vector<SeedRun> runs = run_seeds(config, workers);

  csv::Table summary{{"seed", "final_loss", "plateau", "decay_rate", "r_squared", "diverged_at"},
                     {}};
  for (const SeedRun& run : runs) {
    write_records_csv(config.output_dir / ("run_seed" + std::to_string(run.seed) + ".csv"),
                      run.records);
    const SeedSummary s = summarize_seed(run, config.steps);
    summary.rows.push_back({std::to_string(s.seed), optional_field(s.final_loss),
                            optional_field(s.plateau), optional_field(s.decay_rate),
                            optional_field(s.r_squared),
                            s.diverged_at ? std::to_string(*s.diverged_at) : std::string()});
    log << "seed " << run.seed << ": ";
    if (run.diverged_at) {
      log << "diverged at step " << *run.diverged_at << " (" << run.failure << ")\n";
    } else if (s.final_loss) {
      log << "final loss " << csv::format_double(*s.final_loss) << "\n";
    } else {
      log << "no records\n";
    }
  }
  write_bands_csv(config.output_dir / "bands.csv", bands_over_common_prefix(runs));
  csv::write(config.output_dir / "summary.csv", summary);
  return runs;
}

int cmd_run(const RunConfig& config, unsigned workers, std::ostream& log) {
  const auto runs = run_experiment(config, workers, log);
  const bool diverged =
      std::any_of(runs.begin(), runs.end(), [](const SeedRun& r) { return r.diverged_at; });
  return diverged ? kExitDivergence : kExitOk;
}

SweepAxis parse_sweep_axis(const std::string& name) {
  if (name == "n_particles") return SweepAxis::kNParticles;
  if (name == "h") return SweepAxis::kH;
  if (name == "gamma") return SweepAxis::kGamma;
  throw ConfigError("axis: unknown sweep axis '" + name + "' (n_particles, h, gamma)");
}

std::string to_string(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::kNParticles: return "n_particles";
    case SweepAxis::kH: return "h";
    case SweepAxis::kGamma: return "gamma";
  }
  return "?";
}

RunConfig apply_sweep_value(const RunConfig& config, SweepAxis axis, double value) {
  RunConfig c = config;
  AlgorithmConfig& a = c.algorithm;
  const bool exact = a.type == AlgorithmType::kNula && a.mode == StepMode::kExactEi;
  const bool tuned = a.type == AlgorithmType::kNula && a.mode == StepMode::kTuned;
  switch (axis) {
    case SweepAxis::kNParticles:
      if (!(value >= 1.0) || value != std::floor(value)) {
        throw ConfigError("values: n_particles must be positive integers");
      }
      c.n_particles = static_cast<std::size_t>(value);
      break;
    case SweepAxis::kH:
      if (tuned) throw ConfigError("axis: 'h' needs algorithm.mode exact_ei, not tuned");
      if (exact) a.h = value;
      if (a.type == AlgorithmType::kEmNula) a.h2 = value;
      if (a.type == AlgorithmType::kNla) a.h1 = value;
      break;
    case SweepAxis::kGamma:
      if (!exact && a.type != AlgorithmType::kEmNula) {
        throw ConfigError("axis: 'gamma' applies to nula exact_ei and em_nula only");
      }
      a.gamma = value;
      break;
  }
  // Round-trip through the parser so the new value gets the usual checks.
  return parse_config(to_json(c));
}

std::string sweep_label(SweepAxis axis, double value) {
  if (axis == SweepAxis::kNParticles) {
    return to_string(axis) + "_" + std::to_string(static_cast<std::size_t>(value));
  }
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, value);
  return to_string(axis) + "_" + std::string(buf, res.ptr);
}

int cmd_sweep(const RunConfig& config, SweepAxis axis, const std::vector<double>& values,
              unsigned workers, std::ostream& log) {
  if (values.empty()) throw ConfigError("values: sweep needs at least one value");
  std::vector<RunConfig> configs;
  for (double v : values) {
    RunConfig c = apply_sweep_value(config, axis, v);
    c.output_dir = config.output_dir / sweep_label(axis, v);
    configs.push_back(std::move(c));
  }
  prepare_output_dir(config.output_dir);

  csv::Table table{{"value", "mean_final_loss", "mean_plateau"}, {}};
  bool diverged = false;
  for (std::size_t i = 0; i < configs.size(); ++i) {
    log << "== " << configs[i].output_dir.filename().string() << "\n";
    const auto runs = run_experiment(configs[i], workers, log);
    std::vector<std::optional<double>> finals, plateaus;
    for (const SeedRun& r : runs) {
      const SeedSummary s = summarize_seed(r, configs[i].steps);
      diverged = diverged || s.diverged_at.has_value();
      finals.push_back(s.final_loss);
      plateaus.push_back(s.plateau);
    }
    const std::string label = sweep_label(axis, values[i]);
    table.rows.push_back({label.substr(to_string(axis).size() + 1),
                          optional_field(mean_of(finals)), optional_field(mean_of(plateaus))});
  }
  csv::write(config.output_dir / "sweep_summary.csv", table);
  return diverged ? kExitDivergence : kExitOk;
}

int cmd_check(CheckLevel level, std::ostream& out, const std::optional<fs::path>& csv_path,
              const CheckOptions& options) {
  const std::vector<CheckResult> results = run_checks(level, options);
  std::size_t width = 5;
  for (const auto& r : results) width = std::max(width, r.name.size());

  out << std::left << std::setw(static_cast<int>(width)) << "check"
      << "  result  value         threshold  detail\n";
  std::vector<std::string> failed;
  csv::Table table{{"check", "passed", "value", "threshold", "detail"}, {}};
  for (const auto& r : results) {
    out << std::left << std::setw(static_cast<int>(width)) << r.name << "  "
        << (r.passed ? "PASS  " : "FAIL  ") << "  " << std::setw(12) << std::setprecision(4)
        << r.value << "  " << std::setw(9) << r.threshold << "  " << r.detail << "\n";
    if (!r.passed) failed.push_back(r.name);
    std::string detail = r.detail;
    std::replace(detail.begin(), detail.end(), ',', ';');
    table.rows.push_back({r.name, r.passed ? "1" : "0", csv::format_double(r.value),
                          csv::format_double(r.threshold), detail});
  }
  if (csv_path) csv::write(*csv_path, table);

  if (failed.empty()) {
    out << "all " << results.size() << " checks passed\n";
    return kExitOk;
  }
  out << failed.size() << " check(s) failed:";
  for (const auto& name : failed) out << " " << name;
  out << "\n";
  return kExitCheckFailure;
}

int cmd_plot(const fs::path& dir, std::ostream& log) {
  if (!fs::is_directory(dir)) throw ConfigError("dir: not a directory: " + dir.string());
  std::vector<PlotSeries> series;
  if (fs::exists(dir / "bands.csv")) {
    series.push_back({series_label(dir, false), read_bands_csv(dir / "bands.csv")});
  }
  std::vector<fs::path> subdirs;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_directory() && fs::exists(entry.path() / "bands.csv")) {
      subdirs.push_back(entry.path());
    }
  }
  // Numeric order for sweep values, lexicographic otherwise.
  std::sort(subdirs.begin(), subdirs.end(), [](const fs::path& a, const fs::path& b) {
    const std::string sa = a.filename().string(), sb = b.filename().string();
    const auto tail = [](const std::string& s) {
      const auto pos = s.find_last_of('_');
      double v = 0.0;
      if (pos == std::string::npos) return std::optional<double>();
      const auto r = std::from_chars(s.data() + pos + 1, s.data() + s.size(), v);
      if (r.ec != std::errc() || r.ptr != s.data() + s.size()) return std::optional<double>();
      return std::optional<double>(v);
    };
    const auto ta = tail(sa), tb = tail(sb);
    if (ta && tb && sa.substr(0, sa.find_last_of('_')) == sb.substr(0, sb.find_last_of('_'))) {
      return *ta < *tb;
    }
    return sa < sb;
  });
  for (const auto& sub : subdirs) {
    series.push_back({series_label(sub, true), read_bands_csv(sub / "bands.csv")});
  }
  if (series.empty()) throw ConfigError("dir: no bands.csv in " + dir.string());

  std::vector<PlotSeries> nonempty;
  for (auto& s : series) {
    if (s.bands.empty()) {
      log << "skipping empty bands for " << s.label << "\n";
    } else {
      nonempty.push_back(std::move(s));
    }
  }
  if (nonempty.empty()) throw ConfigError("dir: bands.csv has no rows");

  const std::string name = fs::absolute(dir).lexically_normal().filename().string();
  write_text(dir / "loss.svg", render_loss_svg(nonempty, name.empty() ? "loss" : name));
  log << "wrote " << (dir / "loss.svg").string() << " (" << nonempty.size() << " series)\n";
  return kExitOk;
}

}  // namespace mfl
