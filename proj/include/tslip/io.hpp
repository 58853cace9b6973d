// CSV persistence of strides and metrics, and the output bundle with its
// manifest.
#pragma once

#include <cstdint>
#include <filesystem>
#include <mutex>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "tslip/analysis.hpp"
#include "tslip/sweep.hpp"

namespace tslip {

/// File-system failure; the message carries the path and the cause.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed CSV input.
class CsvError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Generic CSV

struct CsvTable {
  std::vector<std::string> columns;
  std::vector<std::string> units;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(std::string_view name) const;  // throws CsvError when absent
};

/// Decimal text with 12 significant digits.
std::string format_number(double value);
std::string csv_escape(std::string_view field);
/// Two header lines (names, units) then the rows.
std::string write_csv(const CsvTable& table);
CsvTable parse_csv(std::string_view text);

// ---------------------------------------------------------------------------
// Strides

inline constexpr std::array<std::string_view, 17> kTimeseriesColumns{
    "time", "x", "y", "pitch", "vx", "vy", "pitch_rate", "phase", "leg_length", "leg_rate",
    "GRF_x", "GRF_y", "F_axial", "F_tangential", "tau_hip", "P_hip", "P_damper"};

/// Samples of consecutive strides. Each stride starts with its apex row, so a
/// row whose time does not advance marks a stride boundary.
std::string timeseries_csv(std::span<const StrideRecord> records);

/// Rebuilds strides from time-series text. Quantities not stored in the file
/// (spring and damper forces, foot position, leg angle) follow from the rows
/// and the model parameters.
std::vector<StrideRecord> parse_timeseries(std::string_view text, const ModelParamsd& params);

// ---------------------------------------------------------------------------
// Metric tables

struct MetricsRow {
  int stride{0};  // position in the stored sequence
  double damping{0};
  StrideMetrics metrics;
};

CsvTable metrics_table(std::span<const MetricsRow> rows);
std::vector<MetricsRow> metrics_rows(std::span<const StrideRecord> records,
                                     const ModelParamsd& params, AngularVelocityWindow window);

CsvTable summary_table(const SweepResult& result);
CsvTable tuning_table(const SweepResult& result);

// ---------------------------------------------------------------------------
// Output bundle

struct ManifestEntry {
  std::string path;  // relative to the bundle root, '/' separated
  std::string sha256;
  std::uintmax_t bytes{0};
};

/// Output directory whose files are all listed, with digests, in
/// manifest.json. Writes are serialized, so cells may share one bundle.
class OutputBundle {
 public:
  OutputBundle(std::filesystem::path root, std::string config_hash);

  const std::filesystem::path& root() const { return root_; }
  const std::string& config_hash() const { return config_hash_; }

  ManifestEntry write_text(const std::filesystem::path& relative, std::string_view content);
  /// Writes manifest.json and returns its path.
  std::filesystem::path write_manifest();
  std::vector<ManifestEntry> entries() const;

 private:
  std::filesystem::path root_;
  std::string config_hash_;
  mutable std::mutex mutex_;
  std::vector<ManifestEntry> entries_;
};

/// write_timeseries as a bundle operation. Throws std::invalid_argument for an
/// empty record list.
ManifestEntry write_timeseries(OutputBundle& bundle, std::span<const StrideRecord> records,
                               const std::filesystem::path& relative);

std::string read_text_file(const std::filesystem::path& path);

}  // namespace tslip
