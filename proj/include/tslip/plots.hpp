// Self-contained SVG figures and the CSV data behind each of them.
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "tslip/io.hpp"

namespace tslip {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  bool dashed{false};
  bool markers{false};
};

struct ShadedBand {
  std::string label;
  std::vector<double> x;
  std::vector<double> lo;
  std::vector<double> hi;
};

struct LinePlot {
  std::string title;
  std::string x_label;
  std::string x_unit;
  std::string y_label;
  std::string y_unit;
  std::vector<Series> series;
  std::vector<ShadedBand> bands;
  std::vector<std::pair<std::string, double>> markers;  // labelled vertical lines
};

struct BarChart {
  std::string title;
  std::string y_label;
  std::string y_unit;
  std::vector<std::string> categories;            // groups along x
  std::vector<std::string> series;                // bars within a group
  std::vector<std::vector<double>> values;        // [series][category]
};

std::string render_svg(const LinePlot& plot);
std::string render_svg(const BarChart& chart);

/// Long-format data: one row per point (series, x, y).
CsvTable plot_table(const LinePlot& plot);
CsvTable plot_table(const BarChart& chart);

// Figures for a single gait.
LinePlot pitch_trajectory_plot(std::span<const StrideRecord> strides);
LinePlot grf_overlay_plot(const StrideRecord& stride);
LinePlot energy_timecourse_plot(const StrideRecord& stride);

// Figures across a sweep.
LinePlot excursion_speed_plot(const SweepResult& result);
LinePlot angular_velocity_speed_plot(const SweepResult& result);
LinePlot peak_rate_speed_plot(const SweepResult& result);
LinePlot duty_factor_speed_plot(const SweepResult& result, const DutyFactorSchedule& band);
LinePlot pitch_comparison_plot(const SweepResult& result, double speed);
LinePlot energy_comparison_plot(const SweepResult& result, double speed);
BarChart work_distribution_chart(const SweepResult& result, double speed);

/// Writes `name`.svg and `name`.csv into the bundle.
void write_plot(OutputBundle& bundle, const std::filesystem::path& stem, const LinePlot& plot);
void write_plot(OutputBundle& bundle, const std::filesystem::path& stem, const BarChart& chart);

}  // namespace tslip
