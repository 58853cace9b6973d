// Stride-level and stance-level control laws: leg placement at touchdown,
// the additive PID pitch term and the incremental VP-angle adaptation.
#pragma once

#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

#include "tslip/model.hpp"

namespace tslip {

inline constexpr double deg2rad(double deg) { return deg * std::numbers::pi / 180.0; }
inline constexpr double rad2deg(double rad) { return rad * 180.0 / std::numbers::pi; }

struct LegPlacementGains {
  double k_xdot0{0};  // rad per m/s, apex speed error against the target
  double k_xdot{0};   // rad per m/s, stride-to-stride apex speed change
  double k_y{0};      // rad per m, stride-to-stride apex height change
  double initial_td_angle{deg2rad(68.0)};
  // Cold-start schedule: initial angle changes by this much per m/s away
  // from kReferenceSpeed.
  double initial_td_angle_per_speed{0};
  // Largest change of the touchdown angle between strides; 0 disables.
  double max_step{0};

  static constexpr double kReferenceSpeed = 5.0;

  double initial_angle_for(double speed) const {
    return initial_td_angle + initial_td_angle_per_speed * (speed - kReferenceSpeed);
  }
};

struct ApexSample {
  double vx{0};
  double y{0};
};

struct TdAngleUpdate {
  double angle{0};
  bool clamped{false};
};

/// Leg angle for the next touchdown. `apex_history` runs from the cold-start
/// apex to the apex just reached; the stride-to-stride terms use its last two
/// entries and vanish when only one apex is known.
TdAngleUpdate next_td_angle(const LegPlacementGains& gains, double previous_angle,
                            std::span<const ApexSample> apex_history, double target_speed);

struct PitchPidGains {
  double k_p{0};
  double k_d{0};
  double k_i{0};
  double desired_pitch{deg2rad(10.0)};
  double desired_pitch_rate{0};
};

/// Restoring torque on the trunk; adds to the VP torque during the first
/// protocol phase. `integral_error` is the stance integral of
/// (desired - actual) pitch since touchdown.
double pid_torque(const PitchPidGains& gains, const BodyStated& state, double integral_error);

class VpDivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct VpAdaptationState {
  double k_vp{0.5};
  double angle{0};
  // +1 when increasing the VP angle pitches the trunk forward, -1 otherwise.
  // Body-frame targets above the CoM have orientation -1.
  double orientation{1.0};
  bool converged{false};
  std::vector<double> mean_pitch_history;
  std::vector<double> updates;
  int saturated_streak{0};

  static constexpr double kRateLimit = deg2rad(5.0);
  static constexpr double kConvergedStep = 1e-4;
  static constexpr int kConvergedWindow = 5;
  static constexpr int kDivergenceStreak = 20;
};

/// Orientation of the VP-angle update for a target: which way the angle must
/// move to pitch the trunk forward.
double vp_adaptation_orientation(const VpTargetd& vp);

/// One incremental update of the VP angle from the mean pitch observed over
/// the last stride.
VpAdaptationState adapt_vp_angle(VpAdaptationState state, double stride_mean_pitch,
                                 double desired_pitch);

enum class ProtocolPhase { vp_plus_pid, fixed_vp_adaptation, converged };

const char* to_string(ProtocolPhase phase);

/// Torque law active during stance.
struct HipController {
  VpTargetd vp;
  bool pid_enabled{false};
  PitchPidGains pid;

  double torque(const ModelParamsd& params, const BodyStated& state,
                const StanceContextd& stance, double pitch_error_integral) const;
};

}  // namespace tslip
