#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace mfl::csv {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // Index of a header column, or throws std::runtime_error.
  std::size_t column(const std::string& name) const;
};

// Round-trippable representation: 17 significant digits, "C" locale.
std::string format_double(double value);

// Reads a comma-separated file with a header row. Blank lines are skipped;
// quoting is not supported.
Table read(const std::filesystem::path& path);

// Writes header + rows with LF line endings.
void write(const std::filesystem::path& path, const Table& table);

double parse_double(const std::string& field, const std::string& context);

}  // namespace mfl::csv
