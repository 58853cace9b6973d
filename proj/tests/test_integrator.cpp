#include <doctest.h>

#include <cmath>
#include <limits>

#include "support.hpp"
#include "tslip/integrator.hpp"

using namespace tslip;

namespace {

StateVector ballistic(double, const StateVector& x) {
  StateVector d = StateVector::Zero();
  d[slot::x] = x[slot::vx];
  d[slot::y] = x[slot::vy];
  d[slot::pitch] = x[slot::pitch_rate];
  d[slot::vy] = -9.81;
  return d;
}

}  // namespace

TEST_SUITE("integrator") {
  TEST_CASE("pack and unpack are inverse") {
    BodyStated s{1, 2, 0.3, 4, -5, 0.6, 7};
    const BodyStated back = unpack(pack(s, 0.1, 0.2), 7);
    CHECK(back.x_com == 1);
    CHECK(back.y_com == 2);
    CHECK(back.pitch == 0.3);
    CHECK(back.vx == 4);
    CHECK(back.vy == -5);
    CHECK(back.pitch_rate == 0.6);
    CHECK(back.time == 7);
    CHECK(pack(s, 0.1, 0.2)[slot::pitch_error_integral] == 0.1);
  }

  TEST_CASE("ground contact time of a drop matches the closed form") {
    BodyStated s;
    s.y_com = 1.2;
    s.vx = 3;
    const double ground = 0.9;
    const EventSpec events[] = {
        {EventKind::touchdown, [&](double, const StateVector& x) { return x[slot::y] - ground; },
         Crossing::falling}};
    const auto r = integrate_until_event(ballistic, 0.0, pack(s), events);
    CHECK(r.terminal_event == EventKind::touchdown);
    CHECK(std::abs(r.terminal_time - std::sqrt(2 * 0.3 / 9.81)) < 1e-9);
  }

  TEST_CASE("apex event stops ascending flight at zero vertical speed") {
    BodyStated s;
    s.y_com = 1;
    s.vy = 1.5;
    const EventSpec events[] = {
        {EventKind::apex, [](double, const StateVector& x) { return x[slot::vy]; },
         Crossing::falling}};
    const auto r = integrate_until_event(ballistic, 0.0, pack(s), events);
    CHECK(r.terminal_event == EventKind::apex);
    CHECK(std::abs(r.terminal_state[slot::vy]) < 1e-10);
    CHECK(r.terminal_time == doctest::Approx(1.5 / 9.81).epsilon(1e-10));
  }

  TEST_CASE("samples lie on the absolute grid") {
    BodyStated s;
    s.y_com = 1;
    s.vy = 1;
    const EventSpec events[] = {
        {EventKind::apex, [](double, const StateVector& x) { return x[slot::vy]; },
         Crossing::falling}};
    const auto r = integrate_until_event(ballistic, 0.0123, pack(s), events);
    REQUIRE(r.times.size() > 10);
    for (std::size_t i = 1; i + 1 < r.times.size(); ++i) {
      const double k = r.times[i] / 1e-3;
      CHECK(std::abs(k - std::round(k)) < 1e-6);
    }
  }

  TEST_CASE("guard that starts on zero does not fire immediately") {
    BodyStated s;
    s.y_com = 1;
    s.vy = 0;
    const EventSpec events[] = {
        {EventKind::apex, [](double, const StateVector& x) { return x[slot::vy]; },
         Crossing::falling},
        {EventKind::fall, [](double, const StateVector& x) { return x[slot::y] - 0.5; },
         Crossing::falling}};
    const auto r = integrate_until_event(ballistic, 0.0, pack(s), events);
    CHECK(r.terminal_event == EventKind::fall);
    CHECK(r.terminal_time == doctest::Approx(std::sqrt(2 * 0.5 / 9.81)).epsilon(1e-9));
  }

  TEST_CASE("missing event raises NoEventError") {
    BodyStated s;
    s.y_com = 1;
    const EventSpec events[] = {
        {EventKind::touchdown, [](double, const StateVector& x) { return x[slot::y] + 1e9; },
         Crossing::falling}};
    IntegrationLimits limits;
    limits.max_duration = 0.1;
    CHECK_THROWS_AS(integrate_until_event(ballistic, 0.0, pack(s), events, limits), NoEventError);
  }

  TEST_CASE("non-finite dynamics raise StiffnessError") {
    BodyStated s;
    s.y_com = 1;
    const EventSpec events[] = {
        {EventKind::touchdown, [](double, const StateVector& x) { return x[slot::y]; },
         Crossing::falling}};
    auto bad = [](double t, const StateVector& x) {
      StateVector d = ballistic(t, x);
      if (t > 0.01) d[slot::vx] = std::nan("");
      return d;
    };
    CHECK_THROWS_AS(integrate_until_event(bad, 0.0, pack(s), events), StiffnessError);
  }

  TEST_CASE("foot height guard measures the would-be foot above ground") {
    ModelParamsd p;
    const double td = deg2rad(70);
    BodyStated s;
    s.pitch = deg2rad(10);
    s.y_com = p.leg_rest_length * std::sin(td) + p.hip_com_distance * std::cos(s.pitch);
    CHECK(std::abs(foot_height_guard(p, s, td)) < 1e-15);
    s.y_com += 0.1;
    CHECK(foot_height_guard(p, s, td) == doctest::Approx(0.1).epsilon(1e-12));
  }

  TEST_CASE("foot height falls monotonically to zero over the flight before touchdown") {
    const auto& run = test::fixture_run("gait_5ms_r0");
    const ModelParamsd& p = run.setup.model;
    for (const StrideRecord* r : run.gait.steady_strides()) {
      double previous = std::numeric_limits<double>::infinity();
      int positive = 0;
      for (const Sample& s : r->samples) {
        if (s.time >= r->events.touchdown) break;
        const double h = foot_height_guard(p, s.state, r->td_angle);
        CHECK(h > 0);
        CHECK(h < previous);
        previous = h;
        ++positive;
      }
      CHECK(positive > 10);
      const Sample& td = r->samples[r->touchdown_index()];
      CHECK(std::abs(foot_height_guard(p, td.state, r->td_angle)) < 1e-9);
    }
  }

  TEST_CASE("halving the tolerances moves event times by less than the coarse tolerance") {
    RunConfig c = fixture_config(default_config(), test::fixture_spec("gait_5ms_rm04"));
    const auto& base = test::fixture_run("gait_5ms_rm04");
    const StrideRecord& ref = *base.gait.steady_strides().back();
    const HipController ctl{base.gait.gait->vp, false, base.setup.controller.pid};
    SimulationOptions fine = c.simulation;
    fine.limits.abs_tol /= 2;
    fine.limits.rel_tol /= 2;
    const auto coarse = simulate_stride(base.setup.model, ctl, ref.td_angle, ref.start_apex,
                                        c.simulation);
    const auto refined = simulate_stride(base.setup.model, ctl, ref.td_angle, ref.start_apex, fine);
    const double tol = c.simulation.limits.abs_tol;
    CHECK(std::abs(coarse.record.events.touchdown - refined.record.events.touchdown) < tol);
    CHECK(std::abs(coarse.record.events.takeoff - refined.record.events.takeoff) < tol);
    CHECK(std::abs(coarse.record.events.apex - refined.record.events.apex) < tol);
  }
}
