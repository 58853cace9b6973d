#include <doctest.h>

#include <random>

#include "support.hpp"
#include "tslip/analysis.hpp"

using namespace tslip;

namespace {

// One stride from the fixture apex under a different model or controller.
StrideRecord restride(const std::string& fixture, ModelParamsd p, std::optional<VpTargetd> vp = {}) {
  const auto& run = test::fixture_run(fixture);
  const ConvergedGait& g = *run.gait.gait;
  const HipController ctl{vp.value_or(g.vp), false, run.setup.controller.pid};
  return simulate_stride(p, ctl, g.td_angle, g.apex).record;
}

StrideRecord synthetic_stride(double td, double to, double period) {
  StrideRecord r;
  r.events = {0, td, 0.5 * (td + to), to, period, EventKind::takeoff_length};
  for (int i = 0; i <= 100; ++i) {
    Sample s;
    s.time = period * i / 100.0;
    s.phase = s.time >= td && s.time <= to ? GaitPhase::stance : GaitPhase::flight;
    s.state.pitch = 0.2;
    s.state.time = s.time;
    r.samples.push_back(s);
  }
  r.mean_pitch = 0.2;
  return r;
}

}  // namespace

TEST_SUITE("analysis") {
  TEST_CASE("sample integration is exact for cubics on uneven grids") {
    std::mt19937 rng(23);
    std::uniform_real_distribution<double> coef(-3, 3), gap(0.2e-3, 1.5e-3);
    for (int trial = 0; trial < 50; ++trial) {
      const double a = coef(rng), b = coef(rng), c = coef(rng), d = coef(rng);
      auto f = [&](double t) { return a + t * (b + t * (c + t * d)); };
      auto F = [&](double t) { return t * (a + t * (b / 2 + t * (c / 3 + t * d / 4))); };
      std::vector<double> t{0.0}, y;
      while (t.back() < 0.3) t.push_back(t.back() + gap(rng));
      for (double x : t) y.push_back(f(x));
      const double exact = F(t.back()) - F(t.front());
      CHECK(integrate_samples(t, y) == doctest::Approx(exact).epsilon(1e-11));
      const auto running = cumulative_integral(t, y);
      CHECK(running.front() == 0.0);
      CHECK(running.back() == doctest::Approx(exact).epsilon(1e-11));
      const std::size_t mid = t.size() / 2;
      CHECK(running[mid] == doctest::Approx(F(t[mid])).epsilon(1e-10));
    }
  }

  TEST_CASE("constant pitch has no excursion and no angular velocity") {
    const StrideRecord r = synthetic_stride(0.2, 0.5, 1.0);
    const TrunkMetrics m = trunk_metrics(r);
    CHECK(m.angular_excursion == 0.0);
    CHECK(m.mean_angular_velocity == 0.0);
    CHECK(m.mean_inclination == doctest::Approx(rad2deg(0.2)));
    CHECK(m.direction == PitchDirection::none);
  }

  TEST_CASE("duty factor is stance time over the two-stride leg cycle") {
    CHECK(duty_factor(synthetic_stride(0.2, 0.5, 1.0)) == doctest::Approx(0.15));
    // Stance as long as one stride is half of the leg cycle.
    CHECK(duty_factor(synthetic_stride(0.0, 1.0, 1.0)) == doctest::Approx(0.5));
  }

  TEST_CASE("GRF components close on every sample") {
    for (const char* name : {"gait_5ms_rm04", "gait_5ms_rp04", "gait_10ms_r0"}) {
      CAPTURE(name);
      const GrfDecomposition d = grf_decompose(*test::fixture_run(name).gait.steady_strides().back());
      CHECK(d.max_closure_error <= 1e-12);
      for (const auto& c : d.samples) {
        CHECK((c.spring + c.damper - c.axial).norm() <= 1e-12 * (1 + c.total.norm()));
        CHECK((c.total - c.damper - c.without_damping).norm() <= 1e-12 * (1 + c.total.norm()));
        CHECK((c.total - c.tangential - c.without_hip).norm() <= 1e-12 * (1 + c.total.norm()));
      }
    }
  }

  TEST_CASE("without damping the damping-subtracted GRF equals the total") {
    ModelParamsd p = test::fixture_run("gait_5ms_rm04").setup.model;
    p.damping_coefficient = 0;
    const GrfDecomposition d = grf_decompose(restride("gait_5ms_rm04", p));
    for (const auto& c : d.samples) CHECK(c.without_damping == c.total);
  }

  TEST_CASE("VP below: hip and leg push the same horizontal way before midstance") {
    for (const char* name : {"gait_5ms_rm04"}) {
      CAPTURE(name);
      const StrideRecord& r = *test::fixture_run(name).gait.steady_strides().back();
      const GrfDecomposition d = grf_decompose(r);
      const double td = r.events.touchdown, ms = r.events.midstance;
      // Horizontal impulses up to midstance share a sign.
      std::vector<double> t, hip_x, leg_x;
      for (const auto& c : d.samples) {
        if (c.time > ms) break;
        t.push_back(c.time);
        hip_x.push_back(c.tangential.x());
        leg_x.push_back(c.axial.x());
      }
      const double hip_impulse = integrate_samples(t, hip_x), leg_impulse = integrate_samples(t, leg_x);
      CHECK(leg_impulse < 0);
      CHECK(hip_impulse < 0);
      // Pointwise over the braking phase; the hip term changes sign just before midstance.
      int checked = 0;
      for (const auto& c : d.samples) {
        if (c.time <= td || c.time >= td + 0.75 * (ms - td)) continue;
        CHECK(c.tangential.x() * c.axial.x() > 0);
        ++checked;
      }
      CHECK(checked > 10);
    }
  }

  TEST_CASE("vertical GRF comes mainly from the leg") {
    for (const char* name : {"gait_5ms_rm04", "gait_5ms_rp04", "gait_5ms_r0"}) {
      CAPTURE(name);
      const GrfDecomposition d = grf_decompose(*test::fixture_run(name).gait.steady_strides().back());
      for (const auto& c : d.samples) CHECK(std::abs(c.axial.y()) >= std::abs(c.tangential.y()));
    }
  }

  TEST_CASE("passive stride conserves energy") {
    ModelParamsd p = test::fixture_run("gait_5ms_r0").setup.model;
    p.damping_coefficient = 0;
    p.hip_com_distance = 0;
    const StrideRecord r = restride("gait_5ms_r0", p, VpTargetd{0, 0, VpFrame::body});
    for (const Sample& s : r.samples) CHECK(s.stance.hip_torque == 0.0);
    const WorkLedger w = work_ledger(r, p);
    CHECK(w.hip.net == 0.0);
    CHECK(w.damper.net == 0.0);
    CHECK(std::abs(w.spring.net) < 1e-9 * w.throughput);
    CHECK(std::abs(w.residual) < 1e-9 * (w.throughput + 1));
  }

  TEST_CASE("ledger closes and the damper removes what the hip injects") {
    for (const auto& spec : standard_fixtures()) {
      CAPTURE(spec.name);
      const auto& run = test::fixture_run(spec.name);
      for (const StrideRecord* r : run.gait.steady_strides()) {
        const WorkLedger w = work_ledger(*r, run.setup.model);
        CHECK(w.closes(1e-6));
        CHECK(w.hip.net > 0);
        CHECK(w.damper.net < 0);
        CHECK(std::abs(w.hip.net + w.damper.net) <= 1e-6 * w.throughput);
        CHECK(w.leg.net == doctest::Approx(w.spring.net + w.damper.net));
        CHECK(w.hip.positive >= 0);
        CHECK(w.hip.negative <= 0);
      }
    }
  }

  TEST_CASE("VP below: the hip drains energy before midstance and returns more after") {
    RunConfig c = default_config();
    c.vp_radius = -0.6;
    const SingleRun run = execute_run(c);
    REQUIRE(run.gait.converged());
    const StrideRecord& r = *run.gait.steady_strides().back();
    const EnergyTimecourse e = energy_timecourse(r);
    const std::size_t ms = r.midstance_index() - r.touchdown_index();
    CHECK(e.hip[ms] < 0);
    CHECK(e.hip.back() > 0);
    REQUIRE(e.reversal_percent.has_value());
    CHECK(*e.reversal_percent < e.midstance_percent);
  }

  TEST_CASE("VP moment error matches an oracle built from the stored file") {
    const auto& f = test::fixture("gait_5ms_rp04");
    const double radius = f.doc.at("vp_radius").get<double>();
    const double angle = deg2rad(f.doc.at("gait").at("vp_angle_deg").get<double>());
    for (const StrideRecord& r : f.strides) {
      double worst = 0;
      for (const Sample& s : r.samples) {
        if (s.phase != GaitPhase::stance || s.grf.norm() == 0.0) continue;
        const double dir = s.state.pitch + angle;  // body frame
        const Vector2d vp = s.state.com() + radius * Vector2d(std::sin(dir), std::cos(dir));
        const Vector2d arm = r.foot - vp;
        const double moment = arm.x() * s.grf.y() - arm.y() * s.grf.x();
        worst = std::max(worst, std::abs(moment) / (s.grf.norm() * std::max(radius, 1.0)));
      }
      // Stored text carries 12 significant digits.
      CHECK(worst < 1e-9);
    }
    for (const auto& stride : f.doc.at("strides"))
      CHECK(stride.at("vp_moment_error").get<double>() < 1e-12);
  }

  TEST_CASE("force scaling ratios are fast over slow peaks") {
    const auto& slow = test::fixture_run("gait_4ms_r0");
    const auto& fast = test::fixture_run("gait_10ms_r0");
    const StrideRecord& rs = *slow.gait.steady_strides().back();
    const StrideRecord& rf = *fast.gait.steady_strides().back();
    const auto report = force_scaling_report(rs, slow.setup.model, 4, rf, fast.setup.model, 10);
    const LegPeaks ps = leg_peaks(rs, slow.setup.model), pf = leg_peaks(rf, fast.setup.model);
    CHECK(report.spring_force_ratio == doctest::Approx(pf.spring_force / ps.spring_force));
    CHECK(report.damper_force_ratio == doctest::Approx(pf.damper_force / ps.damper_force));
    CHECK(report.damping_ratio == doctest::Approx(fast.setup.model.damping_coefficient /
                                                  slow.setup.model.damping_coefficient));
    // Oracle: peaks scanned directly from the samples.
    double fsp = 0, dl = 0;
    for (const Sample& s : rs.samples) {
      fsp = std::max(fsp, s.stance.spring_force);
      if (s.phase == GaitPhase::stance) dl = std::max(dl, 1.0 - s.stance.leg_length);
    }
    CHECK(ps.spring_force == doctest::Approx(fsp).epsilon(1e-4));
    CHECK(ps.compression == doctest::Approx(dl).epsilon(1e-4));
  }

  TEST_CASE("VP offset orders the trunk excursion at a fixed speed") {
    auto excursion = [](const char* name) {
      return trunk_metrics(*test::fixture_run(name).gait.steady_strides().back()).angular_excursion;
    };
    CHECK(excursion("gait_5ms_r0") < excursion("gait_5ms_rp04"));
    CHECK(excursion("gait_5ms_rp04") < excursion("gait_5ms_rm04"));
  }
}
