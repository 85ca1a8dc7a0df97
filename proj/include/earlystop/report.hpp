#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace earlystop {

// Reals use 17 significant digits; a missing value is written as NA.
using CsvCell = std::variant<std::monostate, double, std::int64_t, std::string>;

class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header);

  void add_row(std::vector<CsvCell> row);
  std::size_t rows() const noexcept { return rows_.size(); }
  std::string render() const;

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<CsvCell>> rows_;
};

std::string format_real(double v);
CsvCell optional_cell(const std::optional<double>& v);

struct ChartSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

struct ChartOptions {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_x = false;
  bool log_y = false;
  int width = 640;
  int height = 420;
};

// Axes, one polyline per series, tick labels and a legend.
std::string render_line_chart(const std::vector<ChartSeries>& series, const ChartOptions& options);

// Writes `content` to `path`, creating parent directories.
void write_text_file(const std::filesystem::path& path, const std::string& content);

}  // namespace earlystop
