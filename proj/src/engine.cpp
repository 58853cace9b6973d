#include "tslip/engine.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace tslip {

const char* to_string(GaitPhase phase) {
  return phase == GaitPhase::stance ? "stance" : "flight";
}

namespace {

std::size_t find_time(const std::vector<Sample>& samples, double t) {
  auto it = std::lower_bound(samples.begin(), samples.end(), t,
                             [](const Sample& s, double v) { return s.time < v; });
  if (it == samples.end()) return samples.size() - 1;
  return static_cast<std::size_t>(it - samples.begin());
}

Sample flight_sample(double t, const StateVector& x) {
  Sample s;
  s.time = t;
  s.state = unpack(x, t);
  s.phase = GaitPhase::flight;
  return s;
}

struct StanceModel {
  const ModelParamsd& params;
  const HipController& controller;
  Vector2d foot;

  StanceContextd context(const BodyStated& s, double pitch_error_integral,
                         bool at_contact = false) const {
    StanceContextd c = leg_kinematics(params, s, foot);
    if (at_contact) {
      // The touchdown event puts the leg at rest length; drop the root-finding residual.
      c.leg_length = params.leg_rest_length;
      c.spring_force = spring_force(params, c.leg_length);
      c.damper_force = damper_force(params, c.leg_length, c.leg_length_rate);
      c.axial_force = c.spring_force - c.damper_force;
    }
    apply_hip_torque(c, controller.torque(params, s, c, pitch_error_integral));
    return c;
  }

  Sample sample(double t, const StateVector& x, bool at_contact = false) const {
    Sample out;
    out.time = t;
    out.state = unpack(x, t);
    out.phase = GaitPhase::stance;
    out.stance = context(out.state, x[slot::pitch_error_integral], at_contact);
    out.grf = out.stance.grf();
    out.hip_power = hip_power(out.state, out.stance);
    out.damper_power = damper_power(out.stance);
    out.spring_power = spring_power(out.stance);
    return out;
  }
};

}  // namespace

std::size_t StrideRecord::touchdown_index() const { return find_time(samples, events.touchdown); }
std::size_t StrideRecord::midstance_index() const { return find_time(samples, events.midstance); }
std::size_t StrideRecord::takeoff_index() const { return find_time(samples, events.takeoff); }

BodyStated cold_start_apex(const ModelParamsd& params, double td_angle, double speed,
                           double desired_pitch, double height_ratio) {
  BodyStated s;
  s.pitch = desired_pitch;
  s.vx = speed;
  s.y_com = height_ratio * params.leg_rest_length * std::sin(td_angle) +
            params.hip_com_distance * std::cos(desired_pitch);
  return s;
}

StrideOutcome simulate_stride(const ModelParamsd& params, const HipController& controller,
                              double td_angle, const BodyStated& apex,
                              const SimulationOptions& options) {
  if (!apex.finite()) throw SimulationError("apex state is not finite");
  if (std::abs(apex.vy) > options.apex_tolerance)
    throw SimulationError("stride must start at a flight apex");
  if (foot_height_guard(params, apex, td_angle) <= 0.0)
    throw FallError("foot is below ground at apex for the commanded touchdown angle");

  const double fall_height = options.fall_height_fraction * params.leg_rest_length;
  auto fall_height_guard = [fall_height](double, const StateVector& x) {
    return x[slot::y] - fall_height;
  };
  auto pitch_guard = [](double, const StateVector& x) {
    return std::numbers::pi / 2 - std::abs(x[slot::pitch]);
  };

  StrideOutcome out;
  StrideRecord& rec = out.record;
  rec.td_angle = td_angle;
  rec.vp = controller.vp;
  rec.pid_enabled = controller.pid_enabled;
  rec.start_apex = apex;
  rec.events.start = apex.time;

  // Flight down to touchdown.
  const VectorField ballistic = [&params](double, const StateVector& x) {
    StateVector d = StateVector::Zero();
    d[slot::x] = x[slot::vx];
    d[slot::y] = x[slot::vy];
    d[slot::pitch] = x[slot::pitch_rate];
    d[slot::vy] = -params.gravity;
    d[slot::pitch_integral] = x[slot::pitch];
    return d;
  };
  const EventSpec descent[] = {
      {EventKind::touchdown,
       [&](double t, const StateVector& x) {
         return foot_height_guard(params, unpack(x, t), td_angle);
       },
       Crossing::falling},
      {EventKind::fall, fall_height_guard, Crossing::falling},
  };
  const IntegrationResult down =
      integrate_until_event(ballistic, apex.time, pack(apex), descent, options.limits);
  if (down.terminal_event != EventKind::touchdown) throw FallError("fell before touchdown");
  for (std::size_t i = 0; i + 1 < down.times.size(); ++i)
    rec.samples.push_back(flight_sample(down.times[i], down.states[i]));

  // Stance.
  const double t_td = down.terminal_time;
  StateVector x_td = down.terminal_state;
  x_td[slot::pitch_error_integral] = 0.0;
  const BodyStated s_td = unpack(x_td, t_td);
  const Vector2d hip_td = hip_position(params, s_td);
  rec.foot = Vector2d(hip_td.x() + params.leg_rest_length * std::cos(td_angle), 0.0);
  const StanceModel stance{params, controller, rec.foot};
  if (leg_kinematics(params, s_td, rec.foot).leg_length_rate >= 0.0)
    throw FallError("leg is not compressing at touchdown");

  const double desired_pitch = controller.pid.desired_pitch;
  const VectorField stance_field = [&](double t, const StateVector& x) {
    const BodyStated s = unpack(x, t);
    const StanceContextd c = stance.context(s, x[slot::pitch_error_integral]);
    const BodyRated r = stance_derivative(params, s, c);
    StateVector d;
    d << r.vx, r.vy, r.pitch_rate, r.ax, r.ay, r.pitch_accel, desired_pitch - s.pitch, s.pitch;
    return d;
  };
  const double rest = params.leg_rest_length;
  const EventSpec support[] = {
      {EventKind::takeoff_length,
       [&](double t, const StateVector& x) {
         return (hip_position(params, unpack(x, t)) - rec.foot).norm() - rest;
       },
       Crossing::rising},
      {EventKind::takeoff_force,
       [&](double t, const StateVector& x) {
         return stance.context(unpack(x, t), x[slot::pitch_error_integral]).axial_force;
       },
       Crossing::falling},
      {EventKind::fall, fall_height_guard, Crossing::falling},
      {EventKind::fall, pitch_guard, Crossing::falling},
  };
  IntegrationResult support_run;
  try {
    support_run = integrate_until_event(stance_field, t_td, x_td, support, options.limits);
  } catch (const DegenerateGeometryError& e) {
    throw FallError(std::string("infeasible VP geometry: ") + e.what());
  }
  if (support_run.terminal_event == EventKind::fall) throw FallError("fell during stance");
  for (std::size_t i = 0; i < support_run.times.size(); ++i)
    rec.samples.push_back(stance.sample(support_run.times[i], support_run.states[i], i == 0));

  const double t_to = support_run.terminal_time;
  StateVector x_to = support_run.terminal_state;
  if (x_to[slot::vy] <= 0.0) throw FallError("no flight phase after takeoff");
  const double stance_pitch_integral = x_to[slot::pitch_integral] - x_td[slot::pitch_integral];

  // Flight up to the next apex.
  const EventSpec ascent[] = {
      {EventKind::apex, [](double, const StateVector& x) { return x[slot::vy]; },
       Crossing::falling},
      {EventKind::fall, fall_height_guard, Crossing::falling},
  };
  const IntegrationResult up = integrate_until_event(ballistic, t_to, x_to, ascent, options.limits);
  if (up.terminal_event != EventKind::apex) throw FallError("fell before apex");
  for (std::size_t i = 1; i < up.times.size(); ++i)
    rec.samples.push_back(flight_sample(up.times[i], up.states[i]));

  rec.events.touchdown = t_td;
  rec.events.takeoff = t_to;
  rec.events.takeoff_kind = support_run.terminal_event;
  rec.events.apex = up.terminal_time;

  // Midstance: first stance sample of maximum compression.
  const std::size_t first = rec.touchdown_index();
  const std::size_t last = rec.takeoff_index();
  std::size_t ms = first;
  for (std::size_t i = first; i <= last; ++i)
    if (rec.samples[i].stance.leg_length < rec.samples[ms].stance.leg_length) ms = i;
  rec.events.midstance = rec.samples[ms].time;

  const StrideEvents& ev = rec.events;
  if (!(ev.start < ev.touchdown && ev.touchdown < ev.midstance && ev.midstance < ev.takeoff &&
        ev.takeoff < ev.apex))
    throw EventOrderError("stride events out of order");

  StateVector x_apex = up.terminal_state;
  x_apex[slot::vy] = 0.0;
  out.next_apex = unpack(x_apex, up.terminal_time);
  rec.end_apex = out.next_apex;
  rec.mean_pitch = up.terminal_state[slot::pitch_integral] / rec.period();
  rec.stance_mean_pitch = stance_pitch_integral / (t_to - t_td);
  return out;
}

}  // namespace tslip
