#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "earlystop/errors.hpp"
#include "earlystop/report.hpp"

using namespace earlystop;

TEST_SUITE("report") {
  TEST_CASE("real formatting round-trips") {
    CHECK(format_real(0.25) == "0.25");
    CHECK(format_real(1.0) == "1");
    const double third = 1.0 / 3.0;
    CHECK(std::stod(format_real(third)) == third);
    CHECK(std::stod(format_real(1e-300)) == 1e-300);
  }

  TEST_CASE("csv layout") {
    CsvTable t({"n", "mse", "stderr", "rule"});
    t.add_row({std::int64_t{50}, 0.5, optional_cell(std::nullopt), std::string("oracle")});
    t.add_row({std::int64_t{100}, 0.125, optional_cell(0.01), std::string("sure")});
    CHECK(t.rows() == 2);
    CHECK(t.render() == "n,mse,stderr,rule\n50,0.5,NA,oracle\n100,0.125,0.01,sure\n");
    CHECK_THROWS_AS(t.add_row({0.5}), DimensionMismatch);
    CHECK(CsvTable({"a"}).render() == "a\n");
  }

  TEST_CASE("svg chart") {
    ChartSeries s{"err", {1, 10, 100}, {0.5, 0.1, 0.05}};
    ChartOptions opt;
    opt.title = "t";
    opt.log_x = true;
    opt.log_y = true;
    const std::string svg = render_line_chart({s}, opt);
    CHECK(svg.rfind("<svg", 0) == 0);
    CHECK(svg.find("</svg>") != std::string::npos);
    CHECK(svg.find("<polyline") != std::string::npos);
    CHECK(svg.find("err") != std::string::npos);
    CHECK(svg.find("nan") == std::string::npos);
    // Non-positive values cannot be placed on a log axis and are dropped.
    ChartSeries z{"z", {0, 1, 2}, {0.0, 1.0, 2.0}};
    const std::string svg2 = render_line_chart({z}, opt);
    CHECK(svg2.find("nan") == std::string::npos);
    CHECK(svg2.find("inf") == std::string::npos);
  }

  TEST_CASE("writing files creates directories") {
    const auto dir = std::filesystem::temp_directory_path() / "earlystop_report_test" / "nested";
    std::filesystem::remove_all(dir.parent_path());
    write_text_file(dir / "a.csv", "x\n1\n");
    std::ifstream in(dir / "a.csv");
    std::stringstream ss;
    ss << in.rdbuf();
    CHECK(ss.str() == "x\n1\n");
    std::filesystem::remove_all(dir.parent_path());
  }
}
