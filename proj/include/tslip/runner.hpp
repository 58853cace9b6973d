// Single-gait runs resolved from a RunConfig, and the regression fixtures
// built on them.
#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "tslip/config.hpp"

namespace tslip {

/// Model and controller after damping tuning at the run speed.
struct PreparedRun {
  ModelParamsd model;
  ControllerSettings controller;
  VpTargetd vp;
  double speed{0};
  std::optional<DampingTuning> tuning;
};

/// Tunes the damping when the config asks for it (throws TuningError), then
/// seeds the cold start with the tuned r = 0 touchdown angle, as the sweep does.
PreparedRun prepare_run(const RunConfig& config);

struct SingleRun {
  PreparedRun setup;
  GaitRun gait;
};

SingleRun execute_run(const RunConfig& config);

/// Settings and convergence data needed to reinterpret stored strides.
nlohmann::json gait_document(const SingleRun& run);

struct FixtureSpec {
  std::string name;
  double speed{5};
  double vp_radius{0};
};

std::vector<FixtureSpec> standard_fixtures();

RunConfig fixture_config(const RunConfig& base, const FixtureSpec& spec);

/// Gait document plus the metrics of every steady stride.
nlohmann::json fixture_document(const FixtureSpec& spec, const RunConfig& config,
                                const SingleRun& run);

}  // namespace tslip
