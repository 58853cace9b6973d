// Planar trunk-SLIP model: parameters, state types and the instantaneous
// force/torque laws.
//
// Coordinates: x forward, y up. Trunk pitch is measured from the vertical and
// is positive for a forward (anterior) lean, i.e. clockwise in the x-y plane.
// The leg angle is measured at the foot from the ground behind the foot, so a
// leg touching down ahead of the hip has an angle below 90 degrees and the
// angle grows as the body vaults over the foot. Pitch, leg angle and hip
// torque therefore share the clockwise-positive sense.
//
// The hip torque is the torque the hip actuator applies to the trunk; the leg
// receives the reaction.
#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace tslip {

template <typename Scalar>
using Vector2 = Eigen::Matrix<Scalar, 2, 1>;

/// Planar cross product (z component).
template <typename Scalar>
Scalar cross2(const Vector2<Scalar>& a, const Vector2<Scalar>& b) {
  return a.x() * b.y() - a.y() * b.x();
}

/// Counter-clockwise quarter turn.
template <typename Scalar>
Vector2<Scalar> perp(const Vector2<Scalar>& a) {
  return Vector2<Scalar>(-a.y(), a.x());
}

enum class DamperKind { bilinear, linear };

enum class VpFrame { body, world };

class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when the virtual point direction is orthogonal to the leg, so no
/// finite hip torque can steer the ground reaction force through it.
class DegenerateGeometryError : public ModelError {
 public:
  using ModelError::ModelError;
};

template <typename Scalar>
struct ModelParams {
  Scalar mass{80};
  Scalar inertia{5};
  Scalar leg_stiffness{18000};
  Scalar leg_rest_length{1};
  Scalar hip_com_distance{0.1};
  Scalar gravity{9.81};
  // N s/m^2 for the bilinear damper, N s/m for the linear one.
  Scalar damping_coefficient{0};
  DamperKind damper_kind{DamperKind::bilinear};

  void validate() const {
    using std::isfinite;
    auto positive = [](Scalar v) { return isfinite(v) && v > Scalar(0); };
    if (!positive(mass)) throw ModelError("mass must be positive");
    if (!positive(inertia)) throw ModelError("inertia must be positive");
    if (!positive(leg_stiffness)) throw ModelError("leg_stiffness must be positive");
    if (!positive(leg_rest_length)) throw ModelError("leg_rest_length must be positive");
    if (!positive(gravity)) throw ModelError("gravity must be positive");
    if (!isfinite(hip_com_distance) || hip_com_distance < Scalar(0))
      throw ModelError("hip_com_distance must be non-negative");
    if (!isfinite(damping_coefficient) || damping_coefficient < Scalar(0))
      throw ModelError("damping_coefficient must be non-negative");
  }
};

template <typename Scalar>
struct BodyState {
  Scalar x_com{0};
  Scalar y_com{0};
  Scalar pitch{0};
  Scalar vx{0};
  Scalar vy{0};
  Scalar pitch_rate{0};
  Scalar time{0};

  Vector2<Scalar> com() const { return {x_com, y_com}; }
  Vector2<Scalar> velocity() const { return {vx, vy}; }

  bool finite() const {
    using std::isfinite;
    return isfinite(x_com) && isfinite(y_com) && isfinite(pitch) && isfinite(vx) &&
           isfinite(vy) && isfinite(pitch_rate) && isfinite(time);
  }
};

/// Time derivative of the continuous part of BodyState.
template <typename Scalar>
struct BodyRate {
  Scalar vx{0};
  Scalar vy{0};
  Scalar pitch_rate{0};
  Scalar ax{0};
  Scalar ay{0};
  Scalar pitch_accel{0};

  bool finite() const {
    using std::isfinite;
    return isfinite(vx) && isfinite(vy) && isfinite(pitch_rate) && isfinite(ax) &&
           isfinite(ay) && isfinite(pitch_accel);
  }
};

/// Everything the stance force laws need at one instant.
template <typename Scalar>
struct StanceContext {
  Scalar foot_x{0};
  Scalar foot_y{0};
  Scalar leg_length{0};
  Scalar leg_length_rate{0};
  Scalar leg_angle{0};
  Scalar leg_angle_rate{0};
  Scalar spring_force{0};
  Scalar damper_force{0};
  Scalar axial_force{0};
  Scalar tangential_force{0};
  Scalar hip_torque{0};

  Vector2<Scalar> foot() const { return {foot_x, foot_y}; }

  /// Unit vector from foot to hip.
  Vector2<Scalar> leg_direction() const {
    using std::cos;
    using std::sin;
    return {-cos(leg_angle), sin(leg_angle)};
  }

  /// World-frame ground reaction force rebuilt from the axial and tangential
  /// components.
  Vector2<Scalar> grf() const {
    const Vector2<Scalar> e = leg_direction();
    return axial_force * e + tangential_force * perp(e);
  }
};

template <typename Scalar>
struct VpTarget {
  // Signed: positive above the CoM, negative below.
  Scalar radius{0};
  Scalar angle{0};
  VpFrame angle_frame{VpFrame::body};

  static constexpr double kMaxRadius = 1.0;

  void validate() const {
    using std::abs;
    using std::isfinite;
    if (!isfinite(radius) || abs(radius) > Scalar(kMaxRadius))
      throw ModelError("VP radius must lie within +-1 m");
    if (!isfinite(angle)) throw ModelError("VP angle must be finite");
  }
};

/// Default VP frame: body frame above the CoM, world frame
/// below it.
inline VpFrame default_frame_for_radius(double radius) {
  return radius < 0 ? VpFrame::world : VpFrame::body;
}

// ---------------------------------------------------------------------------
// Geometry

/// Unit vector along the trunk axis, pointing from hip to head.
template <typename Scalar>
Vector2<Scalar> trunk_axis(Scalar pitch) {
  using std::cos;
  using std::sin;
  return {sin(pitch), cos(pitch)};
}

template <typename Scalar>
Vector2<Scalar> hip_position(const ModelParams<Scalar>& p, const BodyState<Scalar>& s) {
  return s.com() - p.hip_com_distance * trunk_axis(s.pitch);
}

template <typename Scalar>
Vector2<Scalar> hip_velocity(const ModelParams<Scalar>& p, const BodyState<Scalar>& s) {
  using std::cos;
  using std::sin;
  return s.velocity() -
         p.hip_com_distance * s.pitch_rate * Vector2<Scalar>(cos(s.pitch), -sin(s.pitch));
}

/// World position of the virtual point.
template <typename Scalar>
Vector2<Scalar> vp_position(const BodyState<Scalar>& s, const VpTarget<Scalar>& vp) {
  const Scalar direction =
      vp.angle_frame == VpFrame::body ? s.pitch + vp.angle : vp.angle;
  return s.com() + vp.radius * trunk_axis(direction);
}

// ---------------------------------------------------------------------------
// Leg force laws

/// Positive in compression.
template <typename Scalar>
Scalar spring_force(const ModelParams<Scalar>& p, Scalar leg_length) {
  return p.leg_stiffness * (p.leg_rest_length - leg_length);
}

/// Bilinear: c * ldot * (l0 - l). Linear: c * ldot.
template <typename Scalar>
Scalar damper_force(const ModelParams<Scalar>& p, Scalar leg_length, Scalar leg_length_rate) {
  if (p.damper_kind == DamperKind::linear) return p.damping_coefficient * leg_length_rate;
  return p.damping_coefficient * leg_length_rate * (p.leg_rest_length - leg_length);
}

/// Leg kinematics and passive axial force for a foot anchored at `foot`. The
/// tangential force and hip torque are left at zero.
template <typename Scalar>
StanceContext<Scalar> leg_kinematics(const ModelParams<Scalar>& p, const BodyState<Scalar>& s,
                                     const Vector2<Scalar>& foot) {
  using std::atan2;
  StanceContext<Scalar> c;
  c.foot_x = foot.x();
  c.foot_y = foot.y();
  const Vector2<Scalar> leg = hip_position(p, s) - foot;
  c.leg_length = leg.norm();
  const Vector2<Scalar> e = leg / c.leg_length;
  const Vector2<Scalar> vh = hip_velocity(p, s);
  c.leg_length_rate = e.dot(vh);
  c.leg_angle = atan2(e.y(), -e.x());
  // d/dt of the angle; (sin, cos) of the leg angle is (e_y, -e_x).
  c.leg_angle_rate = (vh.x() * e.y() - vh.y() * e.x()) / c.leg_length;
  c.spring_force = spring_force(p, c.leg_length);
  c.damper_force = damper_force(p, c.leg_length, c.leg_length_rate);
  c.axial_force = c.spring_force - c.damper_force;
  return c;
}

/// Apply a hip torque to a stance context: the tangential force is the one a
/// massless leg transmits when the trunk receives `torque`.
template <typename Scalar>
void apply_hip_torque(StanceContext<Scalar>& c, Scalar torque) {
  c.hip_torque = torque;
  c.tangential_force = torque / c.leg_length;
}

/// Hip torque that makes the ground reaction force pass through the virtual
/// point. Equivalent to tau = -F_a * l * (r_FV x r_FH) / (r_FV . r_FH).
template <typename Scalar>
Scalar vp_torque(const ModelParams<Scalar>& p, const BodyState<Scalar>& s,
                 const StanceContext<Scalar>& stance, const VpTarget<Scalar>& vp) {
  using std::abs;
  const Vector2<Scalar> r_fv = vp_position(s, vp) - stance.foot();
  const Vector2<Scalar> r_fh = hip_position(p, s) - stance.foot();
  const Scalar along = r_fv.dot(r_fh);
  if (abs(along) < Scalar(1e-9) * r_fv.norm() * r_fh.norm())
    throw DegenerateGeometryError("VP direction is orthogonal to the leg");
  return -stance.axial_force * stance.leg_length * cross2(r_fv, r_fh) / along;
}

/// Moment of the ground reaction force about the virtual point.
template <typename Scalar>
Scalar grf_moment_about(const Vector2<Scalar>& point, const StanceContext<Scalar>& stance) {
  return cross2(Vector2<Scalar>(stance.foot() - point), stance.grf());
}

// ---------------------------------------------------------------------------
// Equations of motion

template <typename Scalar>
BodyRate<Scalar> flight_derivative(const ModelParams<Scalar>& p, const BodyState<Scalar>& s) {
  return {s.vx, s.vy, s.pitch_rate, Scalar(0), -p.gravity, Scalar(0)};
}

/// Stance accelerations for a stance context whose forces are already set.
template <typename Scalar>
BodyRate<Scalar> stance_derivative(const ModelParams<Scalar>& p, const BodyState<Scalar>& s,
                                   const StanceContext<Scalar>& stance) {
  const Vector2<Scalar> grf = stance.grf();
  const Vector2<Scalar> r_fc = s.com() - stance.foot();
  BodyRate<Scalar> d{s.vx,
                     s.vy,
                     s.pitch_rate,
                     grf.x() / p.mass,
                     grf.y() / p.mass - p.gravity,
                     cross2(r_fc, grf) / p.inertia};
  if (!d.finite()) throw ModelError("non-finite stance derivative");
  return d;
}

// ---------------------------------------------------------------------------
// Energetics

/// Total mechanical energy; the spring term is included when `stance` is given.
template <typename Scalar>
Scalar mechanical_energy(const ModelParams<Scalar>& p, const BodyState<Scalar>& s,
                         const StanceContext<Scalar>* stance = nullptr) {
  Scalar e = Scalar(0.5) * p.mass * (s.vx * s.vx + s.vy * s.vy) +
             Scalar(0.5) * p.inertia * s.pitch_rate * s.pitch_rate + p.mass * p.gravity * s.y_com;
  if (stance != nullptr) {
    const Scalar dl = p.leg_rest_length - stance->leg_length;
    e += Scalar(0.5) * p.leg_stiffness * dl * dl;
  }
  return e;
}

/// Power the hip delivers: torque on the trunk times trunk rate plus the
/// reaction on the leg times leg rate.
template <typename Scalar>
Scalar hip_power(const BodyState<Scalar>& s, const StanceContext<Scalar>& stance) {
  return stance.hip_torque * (s.pitch_rate - stance.leg_angle_rate);
}

/// Power the damper delivers to the body (never positive while compressed).
template <typename Scalar>
Scalar damper_power(const StanceContext<Scalar>& stance) {
  return -stance.damper_force * stance.leg_length_rate;
}

template <typename Scalar>
Scalar spring_power(const StanceContext<Scalar>& stance) {
  return stance.spring_force * stance.leg_length_rate;
}

using ModelParamsd = ModelParams<double>;
using BodyStated = BodyState<double>;
using BodyRated = BodyRate<double>;
using StanceContextd = StanceContext<double>;
using VpTargetd = VpTarget<double>;
using Vector2d = Vector2<double>;

}  // namespace tslip
