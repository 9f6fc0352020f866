#include "mfl/report.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "mfl/csv.hpp"

namespace mfl {
namespace {

using csv::format_double;

std::size_t parse_step(const std::string& field, const std::string& context) {
  const double value = csv::parse_double(field, context);
  if (value < 0.0 || value != std::floor(value)) {
    throw std::runtime_error("invalid step '" + field + "' in " + context);
  }
  return static_cast<std::size_t>(value);
}

void require_header(const csv::Table& table, const std::vector<std::string>& expected,
                    const std::filesystem::path& path) {
  if (table.header != expected) {
    throw std::runtime_error(path.string() + ": unexpected header");
  }
}

// Fixed short form for SVG coordinates.
std::string fmt(double v) {
  std::ostringstream s;
  s.imbue(std::locale::classic());
  s.setf(std::ios::fixed);
  s.precision(2);
  s << v;
  return s.str();
}

std::string escape(const std::string& text) {
  std::string out;
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                "#9467bd", "#8c564b", "#e377c2", "#17becf"};

}  // namespace

void write_records_csv(const std::filesystem::path& path, const std::vector<RunRecord>& records) {
  csv::Table table{kRecordColumns, {}};
  for (const RunRecord& r : records) {
    table.rows.push_back({std::to_string(r.step), format_double(r.loss),
                          format_double(r.grad_norm_mean), format_double(r.x_m2),
                          format_double(r.v_m2), format_double(r.wall_ms)});
  }
  csv::write(path, table);
}

std::vector<RunRecord> read_records_csv(const std::filesystem::path& path) {
  const csv::Table table = csv::read(path);
  require_header(table, kRecordColumns, path);
  std::vector<RunRecord> out;
  const std::string ctx = path.string();
  for (const auto& row : table.rows) {
    out.push_back({parse_step(row[0], ctx), csv::parse_double(row[1], ctx),
                   csv::parse_double(row[2], ctx), csv::parse_double(row[3], ctx),
                   csv::parse_double(row[4], ctx), csv::parse_double(row[5], ctx)});
  }
  return out;
}

void write_bands_csv(const std::filesystem::path& path, const std::vector<SeedBand>& bands) {
  csv::Table table{kBandColumns, {}};
  for (const SeedBand& b : bands) {
    table.rows.push_back({std::to_string(b.step), format_double(b.mean), format_double(b.min),
                          format_double(b.max)});
  }
  csv::write(path, table);
}

std::vector<SeedBand> read_bands_csv(const std::filesystem::path& path) {
  const csv::Table table = csv::read(path);
  require_header(table, kBandColumns, path);
  std::vector<SeedBand> out;
  const std::string ctx = path.string();
  for (const auto& row : table.rows) {
    out.push_back({parse_step(row[0], ctx), csv::parse_double(row[1], ctx),
                   csv::parse_double(row[2], ctx), csv::parse_double(row[3], ctx)});
  }
  return out;
}

std::string render_loss_svg(const std::vector<PlotSeries>& series, const std::string& title) {
  double y_lo = std::numeric_limits<double>::infinity();
  double y_hi = 0.0;
  double x_hi = 0.0;
  for (const auto& s : series) {
    for (const SeedBand& b : s.bands) {
      for (double v : {b.min, b.mean, b.max}) {
        if (v > 0.0 && std::isfinite(v)) {
          y_lo = std::min(y_lo, v);
          y_hi = std::max(y_hi, v);
        }
      }
      x_hi = std::max(x_hi, static_cast<double>(b.step));
    }
  }
  if (!(y_hi > 0.0)) throw std::invalid_argument("no positive loss values to plot");
  if (x_hi == 0.0) x_hi = 1.0;

  const double width = 800, height = 500;
  const double left = 80, right = 180, top = 40, bottom = 60;
  const double plot_w = width - left - right;
  const double plot_h = height - top - bottom;
  double lo_dec = std::floor(std::log10(y_lo));
  double hi_dec = std::ceil(std::log10(y_hi));
  if (hi_dec <= lo_dec) hi_dec = lo_dec + 1;

  auto px = [&](double step) { return left + plot_w * step / x_hi; };
  auto py = [&](double v) {
    const double t = (std::log10(std::max(v, y_lo)) - lo_dec) / (hi_dec - lo_dec);
    return top + plot_h * (1.0 - t);
  };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
      << height << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"" << fmt(left + plot_w / 2) << "\" y=\"24\" text-anchor=\"middle\" "
      << "font-size=\"15\">" << escape(title) << "</text>\n";

  for (double dec = lo_dec; dec <= hi_dec; dec += 1.0) {
    const double y = py(std::pow(10.0, dec));
    svg << "<line x1=\"" << fmt(left) << "\" y1=\"" << fmt(y) << "\" x2=\"" << fmt(left + plot_w)
        << "\" y2=\"" << fmt(y) << "\" stroke=\"#ddd\"/>\n";
    svg << "<text x=\"" << fmt(left - 8) << "\" y=\"" << fmt(y + 4)
        << "\" text-anchor=\"end\">1e" << static_cast<int>(dec) << "</text>\n";
  }
  for (int i = 0; i <= 5; ++i) {
    const double step = x_hi * i / 5.0;
    const double x = px(step);
    svg << "<line x1=\"" << fmt(x) << "\" y1=\"" << fmt(top + plot_h) << "\" x2=\"" << fmt(x)
        << "\" y2=\"" << fmt(top + plot_h + 5) << "\" stroke=\"black\"/>\n";
    svg << "<text x=\"" << fmt(x) << "\" y=\"" << fmt(top + plot_h + 20)
        << "\" text-anchor=\"middle\">" << static_cast<long long>(std::llround(step))
        << "</text>\n";
  }
  svg << "<rect x=\"" << fmt(left) << "\" y=\"" << fmt(top) << "\" width=\"" << fmt(plot_w)
      << "\" height=\"" << fmt(plot_h) << "\" fill=\"none\" stroke=\"black\"/>\n";
  svg << "<text x=\"" << fmt(left + plot_w / 2) << "\" y=\"" << fmt(height - 15)
      << "\" text-anchor=\"middle\">step</text>\n";
  svg << "<text transform=\"translate(20," << fmt(top + plot_h / 2)
      << ") rotate(-90)\" text-anchor=\"middle\">loss</text>\n";

  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const char* color = kPalette[k % std::size(kPalette)];
    if (!s.bands.empty()) {
      svg << "<polygon fill=\"" << color << "\" fill-opacity=\"0.2\" stroke=\"none\" points=\"";
      for (const SeedBand& b : s.bands) svg << fmt(px(b.step)) << "," << fmt(py(b.max)) << " ";
      for (auto it = s.bands.rbegin(); it != s.bands.rend(); ++it) {
        svg << fmt(px(it->step)) << "," << fmt(py(it->min)) << " ";
      }
      svg << "\"/>\n";
      svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
      for (const SeedBand& b : s.bands) svg << fmt(px(b.step)) << "," << fmt(py(b.mean)) << " ";
      svg << "\"/>\n";
    }
    const double ly = top + 10 + 20.0 * static_cast<double>(k);
    svg << "<line x1=\"" << fmt(left + plot_w + 15) << "\" y1=\"" << fmt(ly) << "\" x2=\""
        << fmt(left + plot_w + 40) << "\" y2=\"" << fmt(ly) << "\" stroke=\"" << color
        << "\" stroke-width=\"3\"/>\n";
    svg << "<text x=\"" << fmt(left + plot_w + 46) << "\" y=\"" << fmt(ly + 4) << "\">"
        << escape(s.label) << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace mfl
