// Run configuration: JSON schema with strict validation, canonical form and
// content hash.
#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include <json.hpp>

#include "tslip/sweep.hpp"

namespace tslip {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class OutputFormat { csv, plots, both };

const char* to_string(OutputFormat format);
OutputFormat parse_output_format(std::string_view text);

struct RunConfig {
  static constexpr int kSchemaVersion = 1;

  int schema_version{kSchemaVersion};
  ModelParamsd model;
  ControllerSettings controller;
  SimulationOptions simulation;
  AngularVelocityWindow angular_velocity_window{AngularVelocityWindow::dominant_segment};

  // Single run
  double vp_radius{0};
  std::optional<VpFrame> vp_frame;  // by sign of the radius when empty
  double speed{5};
  bool tune_damping{true};

  // Sweep and tuning
  std::vector<double> vp_radii{-0.6, -0.4, -0.2, 0.0, 0.2, 0.4, 0.6};
  std::vector<double> speeds{4, 5, 6, 7, 8, 9, 10};
  VpFrame frame_above{VpFrame::body};
  VpFrame frame_below{VpFrame::world};
  DutyFactorSchedule duty_factor;
  DampingSearch damping_search;
  int parallelism{0};
  GainGrid gain_grid;
  double gain_reference_speed{5};

  // Output
  std::optional<std::string> output_directory;
  OutputFormat output_format{OutputFormat::both};
  bool deterministic{true};

  VpTargetd vp() const;
  SweepPlan sweep_plan() const;
  /// Throws ConfigError naming the offending field.
  void validate() const;
};

/// Defaults, including the gains found by the grid search (artifact-derived).
RunConfig default_config();

/// Overlays a JSON document on the defaults. Unknown keys, wrong types and
/// invalid values raise ConfigError.
RunConfig parse_config(const nlohmann::json& doc);
RunConfig load_config(const std::filesystem::path& path);

/// Fully resolved configuration; keys are sorted so the dump is canonical.
nlohmann::json to_json(const RunConfig& config);
std::string canonical_text(const RunConfig& config);
/// SHA-256 of the canonical text, hex encoded.
std::string config_hash(const RunConfig& config);

std::string sha256_hex(std::string_view data);
std::string sha256_file(const std::filesystem::path& path);

}  // namespace tslip
