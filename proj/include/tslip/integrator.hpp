// Adaptive Runge-Kutta integration with event location for the hybrid
// flight/stance transitions.
#pragma once

#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "tslip/model.hpp"

namespace tslip {

/// Integrated state: the six continuous body coordinates followed by two
/// running integrals (pitch-error integral for the PID term and the pitch
/// integral used for stride-mean pitch).
inline constexpr int kStateSize = 8;
using StateVector = Eigen::Matrix<double, kStateSize, 1>;

namespace slot {
inline constexpr int x = 0;
inline constexpr int y = 1;
inline constexpr int pitch = 2;
inline constexpr int vx = 3;
inline constexpr int vy = 4;
inline constexpr int pitch_rate = 5;
inline constexpr int pitch_error_integral = 6;
inline constexpr int pitch_integral = 7;
}  // namespace slot

StateVector pack(const BodyStated& s, double pitch_error_integral = 0.0,
                 double pitch_integral = 0.0);
BodyStated unpack(const StateVector& x, double time);

enum class EventKind { touchdown, takeoff_force, takeoff_length, apex, fall };
enum class Crossing { rising, falling, any };

const char* to_string(EventKind kind);

struct EventSpec {
  EventKind kind;
  std::function<double(double, const StateVector&)> guard;
  Crossing direction{Crossing::any};
};

struct IntegrationLimits {
  double max_duration{10.0};
  double abs_tol{1e-9};
  double rel_tol{1e-9};
  // Dense output grid; samples fall on integer multiples of this period.
  double sample_period{1e-3};
  double max_step{5e-3};
  double min_step{1e-13};
};

struct IntegrationResult {
  std::vector<double> times;
  std::vector<StateVector> states;
  EventKind terminal_event{EventKind::fall};
  double terminal_time{0};
  StateVector terminal_state{StateVector::Zero()};
  double terminal_guard{0};
};

class IntegrationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// No armed event fired before the time limit.
class NoEventError : public IntegrationError {
 public:
  using IntegrationError::IntegrationError;
};

/// Step size collapsed or the state became non-finite.
class StiffnessError : public IntegrationError {
 public:
  using IntegrationError::IntegrationError;
};

using VectorField = std::function<StateVector(double, const StateVector&)>;

/// Integrate from (t0, x0) until the first armed event crosses in its
/// direction. When several events cross at the same instant (within 1e-12 s),
/// the one listed first wins. Crossings require the guard to start strictly on
/// the pre-crossing side, so a guard that is zero at t0 does not fire there.
IntegrationResult integrate_until_event(const VectorField& field, double t0,
                                        const StateVector& x0, std::span<const EventSpec> events,
                                        const IntegrationLimits& limits = {});

/// Height above ground of the foot of a leg extended to rest length at the
/// commanded touchdown angle.
double foot_height_guard(const ModelParamsd& params, const BodyStated& state,
                         double touchdown_angle);

}  // namespace tslip
