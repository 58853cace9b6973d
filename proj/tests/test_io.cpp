#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <thread>

#include "support.hpp"
#include "tslip/plots.hpp"

using namespace tslip;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("tslip-test-" + name);
  fs::remove_all(p);
  return p;
}

// Largest relative drift between metric sets; work figures are judged
// against the stride throughput, angles against one degree.
double metric_drift(const StrideMetrics& a, const StrideMetrics& b) {
  using test::rel_diff;
  const double w = a.work.throughput;
  return std::max(
      {rel_diff(a.duty_factor, b.duty_factor), rel_diff(a.period, b.period),
       rel_diff(a.stance_time, b.stance_time), rel_diff(a.td_angle, b.td_angle),
       rel_diff(a.trunk.mean_inclination, b.trunk.mean_inclination, 1),
       rel_diff(a.trunk.angular_excursion, b.trunk.angular_excursion, 1),
       rel_diff(a.trunk.mean_angular_velocity, b.trunk.mean_angular_velocity, 1),
       rel_diff(a.trunk.peak_angular_velocity, b.trunk.peak_angular_velocity, 1),
       rel_diff(a.trunk.max_flexion_phase, b.trunk.max_flexion_phase, 1),
       rel_diff(a.work.hip.net, b.work.hip.net, w), rel_diff(a.work.hip.positive, b.work.hip.positive, w),
       rel_diff(a.work.hip.negative, b.work.hip.negative, w),
       rel_diff(a.work.damper.net, b.work.damper.net, w),
       rel_diff(a.work.spring.net, b.work.spring.net, w),
       rel_diff(a.work.energy_change, b.work.energy_change, w),
       rel_diff(a.work.residual, b.work.residual, w), rel_diff(a.work.throughput, b.work.throughput),
       rel_diff(a.peaks.spring_force, b.peaks.spring_force),
       rel_diff(a.peaks.damper_force, b.peaks.damper_force),
       rel_diff(a.peaks.compression, b.peaks.compression),
       rel_diff(a.peaks.length_rate, b.peaks.length_rate)});
}

}  // namespace

TEST_SUITE("cli-io") {
  TEST_CASE("numbers are written with twelve significant digits") {
    CHECK(format_number(1.0 / 3.0) == "0.333333333333");
    CHECK(format_number(-0.0) == "0");
    CHECK(format_number(12345678.9) == "12345678.9");
    CHECK(format_number(1e-20) == "1e-20");
  }

  TEST_CASE("CSV text round-trips including quoted fields") {
    CsvTable t;
    t.columns = {"name", "value"};
    t.units = {"-", "N·m"};
    t.rows = {{"plain", "1"}, {"with, comma", "2"}, {"with \"quote\"", "3"}};
    const CsvTable back = parse_csv(write_csv(t));
    CHECK(back.columns == t.columns);
    CHECK(back.units == t.units);
    CHECK(back.rows == t.rows);
  }

  TEST_CASE("malformed CSV is rejected") {
    CHECK_THROWS_AS(parse_csv(""), CsvError);
    CHECK_THROWS_AS(parse_csv("a,b\n-,-\n\"open,1\n"), CsvError);
    CHECK_THROWS_AS(parse_csv("a,b\n-,-\n1,2,3\n"), CsvError);
    CsvTable t = parse_csv("a,b\n-,-\n1,2\n");
    CHECK_THROWS_AS(t.column("c"), CsvError);
  }

  TEST_CASE("an empty stride list cannot be written") {
    CHECK_THROWS_AS(timeseries_csv({}), std::invalid_argument);
  }

  TEST_CASE("time series header, units and sampling") {
    const auto strides = test::steady(test::fixture_run("gait_5ms_rm04").gait);
    const CsvTable t = parse_csv(timeseries_csv(strides));
    REQUIRE(t.columns.size() == kTimeseriesColumns.size());
    for (std::size_t i = 0; i < t.columns.size(); ++i) CHECK(t.columns[i] == kTimeseriesColumns[i]);
    CHECK(t.units[0] == "s");
    CHECK(t.units[10] == "N");
    CHECK(t.units[14] == "N·m");
    CHECK(t.units[15] == "W");
    const std::size_t time = t.column("time"), phase = t.column("phase");
    int grid_steps = 0;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
      if (t.rows[i][phase] == "flight") {
        for (const char* c : {"GRF_x", "GRF_y", "F_axial", "F_tangential", "tau_hip", "P_hip"})
          CHECK(t.rows[i][t.column(c)] == "0");
      } else {
        CHECK(t.rows[i][phase] == "stance");
      }
      if (i > 0) {
        const double dt = std::stod(t.rows[i][time]) - std::stod(t.rows[i - 1][time]);
        CHECK(dt <= 1e-3 + 1e-9);
        if (std::abs(dt - 1e-3) < 1e-9) ++grid_steps;
      }
    }
    CHECK(grid_steps > static_cast<int>(t.rows.size()) * 9 / 10);
  }

  TEST_CASE("stored strides reproduce the metrics within 1e-9") {
    for (const auto& spec : standard_fixtures()) {
      CAPTURE(spec.name);
      const auto& run = test::fixture_run(spec.name);
      const auto strides = test::steady(run.gait);
      const auto back = parse_timeseries(timeseries_csv(strides), run.setup.model);
      REQUIRE(back.size() == strides.size());
      for (std::size_t i = 0; i < strides.size(); ++i) {
        const StrideMetrics a = stride_metrics(strides[i], run.setup.model);
        const StrideMetrics b = stride_metrics(back[i], run.setup.model);
        CHECK(metric_drift(a, b) < 1e-9);
        CHECK(back[i].events.touchdown == doctest::Approx(strides[i].events.touchdown).epsilon(1e-11));
        CHECK(back[i].events.takeoff == doctest::Approx(strides[i].events.takeoff).epsilon(1e-11));
        CHECK(back[i].td_angle == doctest::Approx(strides[i].td_angle).epsilon(1e-10));
      }
    }
  }

  TEST_CASE("metrics table lists one row per stride with units") {
    const auto& run = test::fixture_run("gait_5ms_r0");
    const auto strides = test::steady(run.gait);
    const auto rows = metrics_rows(strides, run.setup.model, AngularVelocityWindow::dominant_segment);
    const CsvTable t = metrics_table(rows);
    CHECK(t.rows.size() == strides.size());
    CHECK(t.units.size() == t.columns.size());
    CHECK(t.rows[1][t.column("stride")] == "1");
    CHECK(std::find(t.units.begin(), t.units.end(), "") == t.units.end());
  }

  TEST_CASE("bundle manifest lists every emitted file with its digest") {
    const fs::path dir = scratch_dir("bundle");
    {
      OutputBundle b(dir, "cafe");
      b.write_text("a.txt", "alpha\n");
      b.write_text("nested/deeper/b.csv", "x\n-\n1\n");
      write_timeseries(b, test::steady(test::fixture_run("gait_5ms_r0").gait), "ts.csv");
      write_plot(b, "plots/pitch", pitch_trajectory_plot(test::steady(test::fixture_run("gait_5ms_r0").gait)));
      b.write_manifest();
    }
    const auto manifest = nlohmann::json::parse(read_text_file(dir / "manifest.json"));
    CHECK(manifest.at("config_hash") == "cafe");
    std::set<std::string> listed;
    for (const auto& f : manifest.at("files")) {
      listed.insert(f.at("path").get<std::string>());
      CHECK(f.at("sha256") == sha256_file(dir / f.at("path").get<std::string>()));
      CHECK(f.at("bytes").get<std::uintmax_t>() == fs::file_size(dir / f.at("path").get<std::string>()));
    }
    std::set<std::string> on_disk;
    for (const auto& e : fs::recursive_directory_iterator(dir))
      if (e.is_regular_file() && e.path().filename() != "manifest.json")
        on_disk.insert(fs::relative(e.path(), dir).generic_string());
    CHECK(listed == on_disk);
    fs::remove_all(dir);
  }

  TEST_CASE("concurrent writers share one bundle") {
    const fs::path dir = scratch_dir("concurrent");
    OutputBundle b(dir, "0");
    {
      std::vector<std::jthread> pool;
      for (int i = 0; i < 8; ++i)
        pool.emplace_back([&b, i] {
          for (int k = 0; k < 20; ++k)
            b.write_text("cell" + std::to_string(i) + "/f" + std::to_string(k) + ".txt", "x");
        });
    }
    CHECK(b.entries().size() == 160);
    fs::remove_all(dir);
  }

  TEST_CASE("I/O failures name the path") {
    const fs::path dir = scratch_dir("blocked");
    fs::create_directories(dir);
    { std::ofstream(dir / "file") << "x"; }
    try {
      OutputBundle b(dir / "file" / "sub", "0");
      FAIL("created a directory below a file");
    } catch (const IoError& e) {
      CHECK(std::string(e.what()).find("file/sub") != std::string::npos);
    }
    CHECK_THROWS_AS(read_text_file(dir / "missing.csv"), IoError);
    fs::remove_all(dir);
  }

  TEST_CASE("plots are self-contained SVG with their data table") {
    const StrideRecord& r = *test::fixture_run("gait_5ms_rm04").gait.steady_strides().back();
    const LinePlot p = grf_overlay_plot(r);
    const std::string svg = render_svg(p);
    CHECK(svg.rfind("<svg", 0) == 0);
    CHECK(svg.find("</svg>") != std::string::npos);
    CHECK(svg.find("href") == std::string::npos);
    const CsvTable t = plot_table(p);
    std::size_t points = 0;
    for (const auto& s : p.series) points += s.x.size();
    CHECK(t.rows.size() == points + p.markers.size());
    BarChart chart{"w", "work", "J", {"a", "b"}, {"s1", "s2"}, {{1, -2}, {3, 4}}};
    CHECK(render_svg(chart).find("<rect") != std::string::npos);
    CHECK(plot_table(chart).rows.size() == 4);
  }
}
