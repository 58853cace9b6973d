#include "tslip/integrator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include <boost/math/tools/toms748_solve.hpp>
#include <boost/numeric/odeint.hpp>
#include <boost/numeric/odeint/external/eigen/eigen.hpp>

namespace tslip {

namespace odeint = boost::numeric::odeint;

StateVector pack(const BodyStated& s, double pitch_error_integral, double pitch_integral) {
  StateVector x;
  x << s.x_com, s.y_com, s.pitch, s.vx, s.vy, s.pitch_rate, pitch_error_integral, pitch_integral;
  return x;
}

BodyStated unpack(const StateVector& x, double time) {
  return {x[slot::x], x[slot::y], x[slot::pitch], x[slot::vx], x[slot::vy], x[slot::pitch_rate],
          time};
}

const char* to_string(EventKind kind) {
  switch (kind) {
    case EventKind::touchdown: return "touchdown";
    case EventKind::takeoff_force: return "takeoff_force";
    case EventKind::takeoff_length: return "takeoff_length";
    case EventKind::apex: return "apex";
    case EventKind::fall: return "fall";
  }
  return "unknown";
}

namespace {

bool crossed(Crossing direction, double before, double after) {
  switch (direction) {
    case Crossing::rising: return before < 0.0 && after >= 0.0;
    case Crossing::falling: return before > 0.0 && after <= 0.0;
    case Crossing::any: return (before < 0.0 && after >= 0.0) || (before > 0.0 && after <= 0.0);
  }
  return false;
}

struct Located {
  std::size_t index;
  double time;
};

}  // namespace

IntegrationResult integrate_until_event(const VectorField& field, double t0,
                                        const StateVector& x0, std::span<const EventSpec> events,
                                        const IntegrationLimits& limits) {
  if (events.empty()) throw IntegrationError("no event armed");
  if (!x0.allFinite()) throw IntegrationError("initial state is not finite");

  using Stepper = odeint::runge_kutta_dopri5<StateVector, double, StateVector, double,
                                             odeint::vector_space_algebra>;
  auto dense = odeint::make_dense_output(limits.abs_tol, limits.rel_tol, limits.max_step, Stepper());

  auto system = [&field](const StateVector& x, StateVector& dxdt, double t) {
    dxdt = field(t, x);
  };

  const double period = limits.sample_period;
  IntegrationResult out;
  out.times.push_back(t0);
  out.states.push_back(x0);
  auto next_grid = static_cast<long long>(std::floor(t0 / period)) + 1;

  std::vector<double> guard_values(events.size());
  for (std::size_t i = 0; i < events.size(); ++i) guard_values[i] = events[i].guard(t0, x0);

  dense.initialize(x0, t0, std::min(1e-4, limits.max_step));
  const double t_end = t0 + limits.max_duration;
  StateVector probe;

  while (true) {
    std::pair<double, double> span;
    try {
      span = dense.do_step(system);
    } catch (const odeint::step_adjustment_error& e) {
      throw StiffnessError(std::string("step size adjustment failed: ") + e.what());
    }
    const auto [ta, tb] = span;
    const StateVector& xb = dense.current_state();
    if (!xb.allFinite()) throw StiffnessError("state became non-finite during integration");
    if (tb - ta < limits.min_step) throw StiffnessError("step size underflow");

    std::optional<Located> hit;
    std::vector<double> after(events.size());
    for (std::size_t i = 0; i < events.size(); ++i) {
      after[i] = events[i].guard(tb, xb);
      if (!crossed(events[i].direction, guard_values[i], after[i])) continue;
      auto g = [&](double t) {
        dense.calc_state(t, probe);
        return events[i].guard(t, probe);
      };
      double root = tb;
      if (after[i] != 0.0) {
        std::uintmax_t iterations = 200;
        boost::math::tools::eps_tolerance<double> tol(std::numeric_limits<double>::digits - 2);
        const auto bracket =
            boost::math::tools::toms748_solve(g, ta, tb, guard_values[i], after[i], tol, iterations);
        // Right end of the bracket is on the post-crossing side.
        root = bracket.second;
      }
      if (!hit || root < hit->time - 1e-12) hit = Located{i, root};
    }

    const double limit = hit ? hit->time : tb;
    while (true) {
      const double tg = static_cast<double>(next_grid) * period;
      if (tg > limit || (hit && tg >= limit - 1e-12)) break;
      if (tg > out.times.back() + 1e-12) {
        dense.calc_state(tg, probe);
        out.times.push_back(tg);
        out.states.push_back(probe);
      }
      ++next_grid;
    }

    if (hit) {
      dense.calc_state(hit->time, probe);
      out.terminal_event = events[hit->index].kind;
      out.terminal_time = hit->time;
      out.terminal_state = probe;
      out.terminal_guard = events[hit->index].guard(hit->time, probe);
      if (hit->time > out.times.back()) {
        out.times.push_back(hit->time);
        out.states.push_back(probe);
      } else {
        out.states.back() = probe;
      }
      return out;
    }
    guard_values = std::move(after);
    if (tb >= t_end) throw NoEventError("no event before the integration time limit");
  }
}

double foot_height_guard(const ModelParamsd& params, const BodyStated& state,
                         double touchdown_angle) {
  return hip_position(params, state).y() - params.leg_rest_length * std::sin(touchdown_angle);
}

}  // namespace tslip
