// Two-phase gait convergence: VP plus PID until the apex state settles, then
// PID off with the VP angle adjusted until the trunk holds the desired mean
// pitch on a stride-periodic orbit.
#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "tslip/controllers.hpp"
#include "tslip/engine.hpp"

namespace tslip {

enum class Phase2Method { shooting, incremental };
enum class ColdStart { reference_orbit, height_ratio };
enum class MeanPitchWindow { stride, stance };

const char* to_string(Phase2Method method);
const char* to_string(MeanPitchWindow window);
const char* to_string(ColdStart mode);

struct ControllerSettings {
  LegPlacementGains leg;
  PitchPidGains pid;
  double k_vp{0.5};
  double steady_tolerance{1e-4};
  int steady_strides{3};
  double converge_tolerance{1e-6};
  Phase2Method method{Phase2Method::shooting};
  MeanPitchWindow mean_pitch_window{MeanPitchWindow::stride};
  int stride_budget{500};
  ColdStart cold_start{ColdStart::reference_orbit};
  // Apex hip height over the touchdown height for ColdStart::height_ratio.
  double cold_start_height_ratio{1.05};
  int recorded_strides{3};
  // Newton shooting
  double shooting_tolerance{1e-9};
  int shooting_max_iterations{40};
  double shooting_step{1e-6};
  // Keep the sampled trajectory of transient strides as well.
  bool keep_transient_samples{false};

  void validate() const;
};

/// Distance between two apex states over (vx, y, pitch, pitch rate).
double apex_distance(const BodyStated& a, const BodyStated& b);

double observed_mean_pitch(const StrideRecord& record, MeanPitchWindow window);

struct StrideSummary {
  int index{0};
  ProtocolPhase phase{ProtocolPhase::vp_plus_pid};
  double td_angle{0};
  bool td_clamped{false};
  double vp_angle{0};
  double mean_pitch{0};
  BodyStated apex;  // apex reached at the end of the stride
};

struct ProtocolFailureInfo {
  std::string reason;
  ProtocolPhase phase{ProtocolPhase::vp_plus_pid};
  int stride_index{-1};
};

class ProtocolFailure : public SimulationError {
 public:
  ProtocolFailure(std::string what, ProtocolFailureInfo info)
      : SimulationError(std::move(what)), info_(std::move(info)) {}
  const ProtocolFailureInfo& info() const { return info_; }

 private:
  ProtocolFailureInfo info_;
};

/// Stride-periodic solution together with the controller settings that hold it.
struct ConvergedGait {
  BodyStated apex;
  double td_angle{0};
  VpTargetd vp;
  int phase1_strides{0};
  int phase2_strides{0};
  int shooting_iterations{0};
  double shooting_residual{0};
  double phase1_mean_pitch{0};
};

struct GaitRun {
  ModelParamsd params;
  ControllerSettings settings;
  double target_speed{0};
  std::vector<StrideRecord> strides;
  std::vector<StrideSummary> history;
  ProtocolPhase final_phase{ProtocolPhase::vp_plus_pid};
  std::optional<ConvergedGait> gait;
  std::optional<ProtocolFailureInfo> failure;

  bool converged() const { return gait.has_value(); }
  /// The periodic strides recorded after convergence (the last
  /// `recorded_strides` entries of `strides`).
  std::vector<const StrideRecord*> steady_strides() const;
};

/// Periodic orbit with the VP on the CoM and the trunk held at the desired
/// pitch: the seed for cold starts at a given speed.
struct ReferenceOrbit {
  BodyStated apex;
  double td_angle{0};
  int iterations{0};
};

/// Newton search over (apex height, touchdown angle) starting near
/// `td_guess`. Throws SimulationError when no periodic orbit is found.
ReferenceOrbit find_reference_orbit(const ModelParamsd& params, double speed,
                                    double desired_pitch, double td_guess,
                                    const SimulationOptions& options = {});

/// Runs both protocol phases from a cold start. Throws ProtocolFailure with
/// the phase and stride index when the body falls or the budget runs out.
ConvergedGait run_convergence_protocol(const ModelParamsd& params,
                                       const ControllerSettings& settings, const VpTargetd& vp,
                                       double target_speed, GaitRun* trace = nullptr,
                                       const SimulationOptions& options = {});

/// Protocol followed by `recorded_strides` periodic strides under the final
/// controller. Failures are captured in the returned run, not thrown.
GaitRun run_gait(const ModelParamsd& params, const ControllerSettings& settings,
                 const VpTargetd& vp, double target_speed, const SimulationOptions& options = {},
                 StrideSink* sink = nullptr);

}  // namespace tslip
