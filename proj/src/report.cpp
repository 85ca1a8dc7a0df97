#include "earlystop/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include <fmt/format.h>

#include "earlystop/errors.hpp"

namespace earlystop {

CsvTable::CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

void CsvTable::add_row(std::vector<CsvCell> row) {
  if (row.size() != header_.size())
    throw DimensionMismatch(fmt::format("csv row has {} cells, header has {}", row.size(), header_.size()));
  rows_.push_back(std::move(row));
}

std::string format_real(double v) { return fmt::format("{:.17g}", v); }

CsvCell optional_cell(const std::optional<double>& v) {
  if (!v) return std::monostate{};
  return *v;
}

namespace {

std::string render_cell(const CsvCell& c) {
  struct {
    std::string operator()(std::monostate) const { return "NA"; }
    std::string operator()(double v) const { return format_real(v); }
    std::string operator()(std::int64_t v) const { return fmt::format("{}", v); }
    std::string operator()(const std::string& v) const {
      if (v.find_first_of(",\"\n") == std::string::npos) return v;
      std::string out = "\"";
      for (char ch : v) {
        if (ch == '"') out += '"';
        out += ch;
      }
      return out + "\"";
    }
  } visitor;
  return std::visit(visitor, c);
}

}  // namespace

std::string CsvTable::render() const {
  std::string out;
  for (std::size_t i = 0; i < header_.size(); ++i) {
    if (i) out += ',';
    out += header_[i];
  }
  out += '\n';
  for (const auto& row : rows_) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out += ',';
      out += render_cell(row[i]);
    }
    out += '\n';
  }
  return out;
}

namespace {

std::string escape_xml(const std::string& s) {
  std::string out;
  for (char c : s) {
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

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"};

}  // namespace

std::string render_line_chart(const std::vector<ChartSeries>& series, const ChartOptions& options) {
  const double left = 70, right = 20, top = 40, bottom = 55;
  const double w = options.width, h = options.height;
  const double pw = w - left - right, ph = h - top - bottom;

  auto tx = [&](double v) { return options.log_x ? std::log10(v) : v; };
  auto ty = [&](double v) { return options.log_y ? std::log10(v) : v; };
  auto usable = [&](double x, double y) {
    return std::isfinite(x) && std::isfinite(y) && (!options.log_x || x > 0) && (!options.log_y || y > 0);
  };

  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : series) {
    for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
      if (!usable(s.x[i], s.y[i])) continue;
      x0 = std::min(x0, tx(s.x[i]));
      x1 = std::max(x1, tx(s.x[i]));
      y0 = std::min(y0, ty(s.y[i]));
      y1 = std::max(y1, ty(s.y[i]));
    }
  }
  if (!(x0 <= x1)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x1 == x0) x0 -= 0.5, x1 += 0.5;
  if (y1 == y0) y0 -= 0.5, y1 += 0.5;
  const double pad = 0.05 * (y1 - y0);
  y0 -= pad;
  y1 += pad;

  auto px = [&](double v) { return left + (tx(v) - x0) / (x1 - x0) * pw; };
  auto py = [&](double v) { return top + ph - (ty(v) - y0) / (y1 - y0) * ph; };
  auto tick_label = [](double v, bool log) { return fmt::format("{:.3g}", log ? std::pow(10.0, v) : v); };

  std::string out = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" viewBox=\"0 0 {0} {1}\">\n"
      "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n",
      options.width, options.height);
  out += fmt::format("<text x=\"{:.2f}\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">{}</text>\n", w / 2,
                     escape_xml(options.title));
  out += fmt::format(
      "<rect x=\"{:.2f}\" y=\"{:.2f}\" width=\"{:.2f}\" height=\"{:.2f}\" fill=\"none\" stroke=\"black\"/>\n", left,
      top, pw, ph);
  for (int k = 0; k <= 4; ++k) {
    const double fx = x0 + (x1 - x0) * k / 4.0;
    const double fy = y0 + (y1 - y0) * k / 4.0;
    const double sx = left + pw * k / 4.0;
    const double sy = top + ph - ph * k / 4.0;
    out += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" text-anchor=\"middle\" font-size=\"11\">{}</text>\n", sx,
                       top + ph + 16, tick_label(fx, options.log_x));
    out += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" text-anchor=\"end\" font-size=\"11\">{}</text>\n", left - 6,
                       sy + 4, tick_label(fy, options.log_y));
  }
  out += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" text-anchor=\"middle\" font-size=\"13\">{}</text>\n",
                     left + pw / 2, h - 12, escape_xml(options.x_label));
  out += fmt::format(
      "<text x=\"16\" y=\"{:.2f}\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 16 {:.2f})\">{}</text>\n",
      top + ph / 2, top + ph / 2, escape_xml(options.y_label));

  for (std::size_t si = 0; si < series.size(); ++si) {
    const auto& s = series[si];
    const char* color = kPalette[si % std::size(kPalette)];
    std::string pts;
    for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
      if (!usable(s.x[i], s.y[i])) continue;
      if (!pts.empty()) pts += ' ';
      pts += fmt::format("{:.2f},{:.2f}", px(s.x[i]), py(s.y[i]));
    }
    out += fmt::format("<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\" points=\"{}\"/>\n", color, pts);
    const double ly = top + 14 + 16 * static_cast<double>(si);
    out += fmt::format("<line x1=\"{:.2f}\" y1=\"{:.2f}\" x2=\"{:.2f}\" y2=\"{:.2f}\" stroke=\"{}\" stroke-width=\"2\"/>\n",
                       left + pw - 120, ly, left + pw - 100, ly, color);
    out += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" font-size=\"11\">{}</text>\n", left + pw - 95, ly + 4,
                       escape_xml(s.label));
  }
  out += "</svg>\n";
  return out;
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw ConfigError(fmt::format("cannot open '{}' for writing", path.string()));
  f << content;
  if (!f) throw ConfigError(fmt::format("failed writing '{}'", path.string()));
}

}  // namespace earlystop
