#include "tslip/controllers.hpp"

#include <algorithm>
#include <cmath>

namespace tslip {

namespace {
constexpr double kMinTdAngle = 1e-6;
constexpr double kMaxTdAngle = std::numbers::pi / 2 - 1e-6;
}  // namespace

TdAngleUpdate next_td_angle(const LegPlacementGains& gains, double previous_angle,
                            std::span<const ApexSample> apex_history, double target_speed) {
  if (apex_history.empty()) throw std::invalid_argument("next_td_angle needs an apex");
  const ApexSample& now = apex_history.back();
  double angle = previous_angle + gains.k_xdot0 * (now.vx - target_speed);
  if (apex_history.size() >= 2) {
    const ApexSample& before = apex_history[apex_history.size() - 2];
    angle += gains.k_xdot * (now.vx - before.vx) + gains.k_y * (now.y - before.y);
  }
  if (gains.max_step > 0)
    angle = std::clamp(angle, previous_angle - gains.max_step, previous_angle + gains.max_step);
  TdAngleUpdate out{angle, false};
  if (!(angle > kMinTdAngle && angle < kMaxTdAngle)) {
    out.angle = std::clamp(std::isfinite(angle) ? angle : previous_angle, kMinTdAngle, kMaxTdAngle);
    out.clamped = true;
  }
  return out;
}

double pid_torque(const PitchPidGains& gains, const BodyStated& state, double integral_error) {
  return gains.k_p * (gains.desired_pitch - state.pitch) +
         gains.k_d * (gains.desired_pitch_rate - state.pitch_rate) + gains.k_i * integral_error;
}

double vp_adaptation_orientation(const VpTargetd& vp) {
  // A VP ahead of the CoM line pitches the trunk backward when it sits above
  // the CoM and forward when it sits below.
  return vp.radius > 0 ? -1.0 : 1.0;
}

VpAdaptationState adapt_vp_angle(VpAdaptationState state, double stride_mean_pitch,
                                 double desired_pitch) {
  const double raw = state.orientation * state.k_vp * (desired_pitch - stride_mean_pitch);
  const double limit = VpAdaptationState::kRateLimit;
  const double step = std::clamp(raw, -limit, limit);
  state.saturated_streak = std::abs(step) >= limit ? state.saturated_streak + 1 : 0;
  state.angle += step;
  state.mean_pitch_history.push_back(stride_mean_pitch);
  state.updates.push_back(step);

  const auto window = static_cast<std::size_t>(VpAdaptationState::kConvergedWindow);
  state.converged =
      state.updates.size() >= window &&
      std::all_of(state.updates.end() - static_cast<std::ptrdiff_t>(window), state.updates.end(),
                  [](double u) { return std::abs(u) < VpAdaptationState::kConvergedStep; });
  if (state.saturated_streak >= VpAdaptationState::kDivergenceStreak)
    throw VpDivergenceError("VP angle update saturated for 20 consecutive strides");
  return state;
}

const char* to_string(ProtocolPhase phase) {
  switch (phase) {
    case ProtocolPhase::vp_plus_pid: return "vp_plus_pid";
    case ProtocolPhase::fixed_vp_adaptation: return "fixed_vp_adaptation";
    case ProtocolPhase::converged: return "converged";
  }
  return "unknown";
}

double HipController::torque(const ModelParamsd& params, const BodyStated& state,
                             const StanceContextd& stance, double pitch_error_integral) const {
  double tau = vp_torque(params, state, stance, vp);
  if (pid_enabled) tau += pid_torque(pid, state, pitch_error_integral);
  return tau;
}

}  // namespace tslip
