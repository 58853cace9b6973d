#include <doctest.h>

#include "support.hpp"

using namespace tslip;

namespace {

SweepPlan small_plan() {
  SweepPlan plan = default_config().sweep_plan();
  plan.speeds = {4, 10};
  plan.vp_radii = {-0.4, 0, 0.4};
  return plan;
}

const SweepResult& small_sweep() {
  static const SweepResult result = run_sweep(small_plan());
  return result;
}

}  // namespace

TEST_SUITE("sweep") {
  TEST_CASE("duty-factor schedule interpolates between its anchors") {
    const DutyFactorSchedule s;
    CHECK(s.at(4).lo == doctest::Approx(0.25));
    CHECK(s.at(10).hi == doctest::Approx(0.30));
    CHECK(s.at(7).lo == doctest::Approx(0.215));
    CHECK(s.at(2).lo == doctest::Approx(0.25));
    CHECK(s.at(12).hi == doctest::Approx(0.30));
    CHECK_THROWS_AS((DutyFactorBand{0.5, 0.4}.validate()), ModelError);
  }

  TEST_CASE("vacuous band accepts the first feasible damping") {
    const RunConfig c = default_config();
    const DampingTuning t = tune_damping_for_duty_factor(c.model, c.controller, 5, {0, 1});
    CHECK(t.evaluations.size() == 1);
    CHECK(t.duty_factor > 0);
  }

  TEST_CASE("tuned damping lands in the band and falls with speed") {
    const auto& r = small_sweep();
    REQUIRE(r.tunings[0].has_value());
    REQUIRE(r.tunings[1].has_value());
    const DampingTuning& slow = *r.tunings[0];
    const DampingTuning& fast = *r.tunings[1];
    CHECK(slow.band.contains(slow.duty_factor));
    CHECK(fast.band.contains(fast.duty_factor));
    CHECK(std::abs(slow.duty_factor - slow.band.centre()) <= 1e-3);
    CHECK(slow.damping > fast.damping);
    CHECK(slow.duty_factor > fast.duty_factor);
    CHECK(slow.td_angle > fast.td_angle);
  }

  TEST_CASE("tuned 4 m/s damping matches the stored fixture") {
    const auto& r = small_sweep();
    CHECK(r.tunings[0]->damping ==
          test::fixture("gait_4ms_r0").doc.at("damping_coefficient").get<double>());
  }

  TEST_CASE("unreachable band reports its bracket") {
    const RunConfig c = default_config();
    DampingSearch search;
    search.max_evaluations = 8;
    try {
      tune_damping_for_duty_factor(c.model, c.controller, 5, {0.9, 0.95}, search);
      FAIL("tuned into an impossible band");
    } catch (const TuningError& e) {
      CHECK(e.bracket().evaluations.size() <= 8);
      CHECK_FALSE(e.bracket().above.has_value());
    }
  }

  TEST_CASE("cells cover the plan and share the damping of their speed") {
    const auto& r = small_sweep();
    CHECK(r.cells.size() == r.speeds.size() * r.vp_radii.size());
    for (double v : r.speeds)
      for (double radius : r.vp_radii) {
        const SweepCell& c = r.cell(radius, v);
        CHECK(c.speed == v);
        CHECK(c.vp_radius == radius);
        CHECK(c.damping == r.cell(0, v).damping);
        CHECK(c.converged);
        CHECK(c.metric_spread < 1e-3);
        CHECK(c.steady_metrics.size() == 3);
      }
    CHECK(r.cell(-0.4, 4).vp.angle_frame == VpFrame::world);
    CHECK(r.cell(0.4, 4).vp.angle_frame == VpFrame::body);
    CHECK_THROWS(r.cell(0.3, 4));
  }

  TEST_CASE("single-cell sweep") {
    SweepPlan plan = default_config().sweep_plan();
    plan.speeds = {5};
    plan.vp_radii = {0};
    const SweepResult r = run_sweep(plan);
    REQUIRE(r.cells.size() == 1);
    CHECK(r.cells[0].converged);
    CHECK(r.converged_count() == 1);
  }

  TEST_CASE("results do not depend on the thread count") {
    SweepPlan one = small_plan();
    one.parallelism = 1;
    const SweepResult a = run_sweep(one);
    const SweepResult& b = small_sweep();
    CHECK(write_csv(summary_table(a)) == write_csv(summary_table(b)));
    for (std::size_t i = 0; i < a.cells.size(); ++i) {
      REQUIRE(a.cells[i].stride.has_value());
      const std::vector<StrideRecord> sa{*a.cells[i].stride}, sb{*b.cells[i].stride};
      CHECK(timeseries_csv(sa) == timeseries_csv(sb));
    }
  }

  TEST_CASE("summary direction column follows the VP side") {
    const CsvTable t = summary_table(small_sweep());
    const std::size_t r = t.column("vp_radius"), d = t.column("direction");
    for (const auto& row : t.rows) {
      const double radius = std::stod(row[r]);
      if (radius > 0) CHECK(row[d] == "backward");
      if (radius < 0) CHECK(row[d] == "forward");
    }
  }

  TEST_CASE("gain search keeps the feasible candidate with fewest strides") {
    SweepPlan plan = default_config().sweep_plan();
    plan.speeds = {5};
    plan.vp_radii = {-0.2, 0.2};
    GainGrid grid;
    grid.k_p = {2000};
    grid.k_d = {2000};
    grid.k_xdot0 = {-0.005};
    grid.k_xdot = {-0.1};
    grid.k_y = {0, 1};
    const GainTuning t = tune_gains(plan, grid, 5);
    REQUIRE(t.candidates.size() == 2);
    CHECK(t.best.pid.k_i == doctest::Approx(200));
    int fewest = std::numeric_limits<int>::max();
    for (const auto& c : t.candidates)
      if (c.failed_cells == 0) fewest = std::min(fewest, c.strides_at_reference);
    CHECK(t.best.failed_cells == 0);
    CHECK(t.best.strides_at_reference == fewest);
  }
}
