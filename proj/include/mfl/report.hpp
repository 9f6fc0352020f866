#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "mfl/diagnostics.hpp"
#include "mfl/run_record.hpp"

namespace mfl {

// Column order of run_seed<k>.csv.
inline const std::vector<std::string> kRecordColumns{"step", "loss", "grad_norm_mean",
                                                     "x_m2", "v_m2", "wall_ms"};
inline const std::vector<std::string> kBandColumns{"step", "mean", "min", "max"};

void write_records_csv(const std::filesystem::path& path, const std::vector<RunRecord>& records);
std::vector<RunRecord> read_records_csv(const std::filesystem::path& path);

void write_bands_csv(const std::filesystem::path& path, const std::vector<SeedBand>& bands);
std::vector<SeedBand> read_bands_csv(const std::filesystem::path& path);

struct PlotSeries {
  std::string label;
  std::vector<SeedBand> bands;
};

// Loss against step on a log-scale y axis, one mean line and min-max band per
// series. Throws std::invalid_argument when no series has a positive value.
std::string render_loss_svg(const std::vector<PlotSeries>& series, const std::string& title);

}  // namespace mfl
