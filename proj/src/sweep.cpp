#include "tslip/sweep.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <functional>
#include <thread>

namespace tslip {

namespace {
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& task);
}  // namespace

void DutyFactorBand::validate() const {
  if (!(lo >= 0 && hi <= 1 && lo < hi)) throw ModelError("duty-factor band must satisfy 0 <= lo < hi <= 1");
}

DutyFactorBand DutyFactorSchedule::at(double speed) const {
  if (speed <= slow_speed) return slow;
  if (speed >= fast_speed) return fast;
  const double w = (speed - slow_speed) / (fast_speed - slow_speed);
  return {slow.lo + w * (fast.lo - slow.lo), slow.hi + w * (fast.hi - slow.hi)};
}

void DutyFactorSchedule::validate() const {
  slow.validate();
  fast.validate();
  if (!(slow_speed < fast_speed)) throw ModelError("duty-factor anchors must be ordered by speed");
}

void DampingSearch::validate() const {
  if (!(c_min >= 0 && c_min < c_max && std::isfinite(c_max)))
    throw ModelError("damping search bounds must satisfy 0 <= c_min < c_max");
  if (!(centre_tolerance > 0)) throw ModelError("damping centre tolerance must be positive");
  if (max_evaluations < 1) throw ModelError("damping search needs at least one evaluation");
}

std::string TuningBracket::describe() const {
  char buf[256];
  auto side = [](const std::optional<DampingEvaluation>& e) {
    char s[96];
    if (e)
      std::snprintf(s, sizeof s, "c=%.6g DF=%.4f", e->damping, *e->duty_factor);
    else
      std::snprintf(s, sizeof s, "none");
    return std::string(s);
  };
  std::snprintf(buf, sizeof buf,
                "duty-factor band [%.3f, %.3f] not reached at %.3g m/s after %zu evaluations; "
                "below: %s; above: %s",
                band.lo, band.hi, speed, evaluations.size(), side(below).c_str(),
                side(above).c_str());
  return buf;
}

DampingTuning tune_damping_for_duty_factor(const ModelParamsd& model,
                                           const ControllerSettings& settings, double speed,
                                           const DutyFactorBand& band, const DampingSearch& search,
                                           const SimulationOptions& options) {
  band.validate();
  search.validate();
  const VpTargetd centre{0.0, 0.0, VpFrame::body};

  std::vector<DampingEvaluation> evals;
  auto guess_for = [&](double c) {
    // Touchdown angle of the nearest successful evaluation.
    double best = settings.leg.initial_angle_for(speed);
    double gap = INFINITY;
    for (const auto& e : evals)
      if (e.duty_factor && std::abs(e.damping - c) < gap) {
        gap = std::abs(e.damping - c);
        best = e.td_angle;
      }
    return best;
  };
  auto evaluate = [&](double c) {
    ModelParamsd p = model;
    p.damping_coefficient = c;
    ControllerSettings s = settings;
    s.leg.initial_td_angle = guess_for(c);
    s.leg.initial_td_angle_per_speed = 0;
    const GaitRun run = run_gait(p, s, centre, speed, options);
    DampingEvaluation e{c, std::nullopt, 0.0};
    if (run.converged()) {
      e.duty_factor = duty_factor(run.strides.back());
      e.td_angle = run.gait->td_angle;
    }
    evals.push_back(e);
    return e;
  };

  double lo = search.c_min;
  double hi = search.c_max;
  std::optional<DampingEvaluation> best;
  for (int n = 0; n < search.max_evaluations; ++n) {
    const double mid = 0.5 * (lo + hi);
    const DampingEvaluation e = evaluate(mid);
    if (e.duty_factor) {
      const double df = *e.duty_factor;
      if (band.contains(df) &&
          (!best || std::abs(df - band.centre()) < std::abs(*best->duty_factor - band.centre())))
        best = e;
      if (band.vacuous() || std::abs(df - band.centre()) <= search.centre_tolerance) break;
      // Duty factor grows with damping.
      (df < band.centre() ? lo : hi) = mid;
    } else {
      // A failed gait says nothing about the duty factor; move away from it
      // toward the successful evaluations, or downward when there are none.
      bool success_above = false;
      for (const auto& x : evals)
        if (x.duty_factor && x.damping > mid) success_above = true;
      (success_above ? lo : hi) = mid;
    }
    if (hi - lo <= 1e-9 * hi) break;
  }

  if (!best) {
    TuningBracket b{speed, band, std::nullopt, std::nullopt, evals};
    for (const auto& e : evals) {
      if (!e.duty_factor) continue;
      if (*e.duty_factor < band.centre()) {
        if (!b.below || *e.duty_factor > *b.below->duty_factor) b.below = e;
      } else if (!b.above || *e.duty_factor < *b.above->duty_factor) {
        b.above = e;
      }
    }
    throw TuningError(std::move(b));
  }
  return {speed, band, best->damping, *best->duty_factor, best->td_angle, std::move(evals)};
}

VpTargetd SweepPlan::vp_for(double radius) const {
  return {radius, 0.0, radius < 0 ? frame_below : frame_above};
}

void SweepPlan::validate() const {
  model.validate();
  controller.validate();
  if (vp_radii.empty() || speeds.empty()) throw ModelError("sweep grid must not be empty");
  for (double r : vp_radii) vp_for(r).validate();
  for (double v : speeds)
    if (!(std::isfinite(v) && v > 0)) throw ModelError("sweep speeds must be positive");
  if (tune_damping) {
    duty_factor.validate();
    damping.validate();
  }
  if (parallelism < 0) throw ModelError("parallelism must be non-negative");
}

const SweepCell& SweepResult::cell(double vp_radius, double speed) const {
  for (const auto& c : cells)
    if (c.vp_radius == vp_radius && c.speed == speed) return c;
  throw std::out_of_range("no sweep cell for that radius and speed");
}

std::size_t SweepResult::converged_count() const {
  return static_cast<std::size_t>(
      std::count_if(cells.begin(), cells.end(), [](const SweepCell& c) { return c.converged; }));
}

SweepCell run_cell(const ModelParamsd& model, const ControllerSettings& settings,
                   const VpTargetd& vp, double speed, const SimulationOptions& options) {
  SweepCell cell;
  cell.vp_radius = vp.radius;
  cell.speed = speed;
  cell.vp = vp;
  cell.damping = model.damping_coefficient;
  const GaitRun run = run_gait(model, settings, vp, speed, options);
  if (!run.converged() || run.failure) {
    cell.failure = run.failure;
    return cell;
  }
  try {
    const auto steady = run.steady_strides();
    cell.metrics = stride_metrics(*steady.back(), model);
    for (const StrideRecord* s : steady) {
      cell.vp_moment_error = std::max(cell.vp_moment_error, max_vp_moment_error(*s, model));
      const StrideMetrics& m = cell.steady_metrics.emplace_back(stride_metrics(*s, model));
      auto rel = [](double a, double b) {
        const double scale = std::max(std::abs(a), std::abs(b));
        return scale > 0 ? std::abs(a - b) / scale : 0.0;
      };
      cell.metric_spread = std::max(
          {cell.metric_spread, rel(m.duty_factor, cell.metrics->duty_factor),
           rel(m.trunk.angular_excursion, cell.metrics->trunk.angular_excursion),
           rel(m.work.hip.net, cell.metrics->work.hip.net),
           rel(m.work.damper.net, cell.metrics->work.damper.net)});
    }
    cell.stride = *steady.back();
    cell.gait = run.gait;
    cell.converged = true;
  } catch (const std::exception& e) {
    cell.metrics.reset();
    cell.steady_metrics.clear();
    cell.failure = ProtocolFailureInfo{std::string("analysis failed: ") + e.what(),
                                       ProtocolPhase::converged, -1};
  }
  return cell;
}

namespace {

// Runs task(i) for i in [0, n) on up to `threads` workers.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& task) {
  const auto workers = std::min<std::size_t>(
      n, threads > 0 ? static_cast<std::size_t>(threads)
                     : std::max(1u, std::thread::hardware_concurrency()));
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < n; i = next++) task(i);
  };
  if (workers <= 1) {
    work();
    return;
  }
  std::vector<std::jthread> pool;
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
}

}  // namespace

SweepResult run_sweep(const SweepPlan& plan) {
  plan.validate();
  SweepResult result;
  result.vp_radii = plan.vp_radii;
  result.speeds = plan.speeds;
  const std::size_t ns = plan.speeds.size();
  result.tunings.resize(ns);
  result.tuning_failures.resize(ns);

  // Per-speed damping and cold-start touchdown angle.
  std::vector<ModelParamsd> models(ns, plan.model);
  std::vector<ControllerSettings> settings(ns, plan.controller);
  if (plan.tune_damping) {
    parallel_for(ns, plan.parallelism, [&](std::size_t i) {
      const double v = plan.speeds[i];
      try {
        result.tunings[i] = tune_damping_for_duty_factor(
            plan.model, plan.controller, v, plan.duty_factor.at(v), plan.damping, plan.simulation);
        models[i].damping_coefficient = result.tunings[i]->damping;
        settings[i].leg.initial_td_angle = result.tunings[i]->td_angle;
        settings[i].leg.initial_td_angle_per_speed = 0;
      } catch (const std::exception& e) {
        result.tuning_failures[i] = e.what();
      }
    });
  }

  const std::size_t nr = plan.vp_radii.size();
  result.cells.resize(ns * nr);
  parallel_for(ns * nr, plan.parallelism, [&](std::size_t k) {
    const std::size_t i = k / nr;
    const double v = plan.speeds[i];
    const VpTargetd vp = plan.vp_for(plan.vp_radii[k % nr]);
    if (!result.tuning_failures[i].empty()) {
      SweepCell& c = result.cells[k];
      c.vp_radius = vp.radius;
      c.speed = v;
      c.vp = vp;
      c.failure = ProtocolFailureInfo{"damping tuning failed: " + result.tuning_failures[i],
                                      ProtocolPhase::vp_plus_pid, -1};
      return;
    }
    result.cells[k] = run_cell(models[i], settings[i], vp, v, plan.simulation);
  });
  return result;
}

std::size_t GainGrid::size() const {
  return k_p.size() * k_d.size() * k_xdot0.size() * k_xdot.size() * k_y.size();
}

void GainGrid::validate() const {
  if (size() == 0) throw ModelError("gain grid must not be empty");
  for (const auto* axis : {&k_p, &k_d, &k_xdot0, &k_xdot, &k_y})
    for (double v : *axis)
      if (!std::isfinite(v)) throw ModelError("gain grid values must be finite");
  if (!std::isfinite(ki_over_kp)) throw ModelError("k_i / k_p must be finite");
}

GainTuning tune_gains(const SweepPlan& plan, const GainGrid& grid, double reference_speed) {
  plan.validate();
  grid.validate();
  const std::size_t ns = plan.speeds.size();

  GainTuning out;
  out.damping.resize(ns);
  std::vector<ModelParamsd> models(ns, plan.model);
  std::vector<double> td(ns);
  for (std::size_t i = 0; i < ns; ++i) {
    td[i] = plan.controller.leg.initial_angle_for(plan.speeds[i]);
    if (!plan.tune_damping) continue;
    const double v = plan.speeds[i];
    out.damping[i] = tune_damping_for_duty_factor(plan.model, plan.controller, v,
                                                  plan.duty_factor.at(v), plan.damping,
                                                  plan.simulation);
    models[i].damping_coefficient = out.damping[i]->damping;
    td[i] = out.damping[i]->td_angle;
  }

  // Grid in row-major order over (k_p, k_d, k_xdot0, k_xdot, k_y).
  for (double kp : grid.k_p)
    for (double kd : grid.k_d)
      for (double kx0 : grid.k_xdot0)
        for (double kx : grid.k_xdot)
          for (double ky : grid.k_y) {
            GainCandidate c;
            c.leg = plan.controller.leg;
            c.leg.k_xdot0 = kx0;
            c.leg.k_xdot = kx;
            c.leg.k_y = ky;
            c.pid = plan.controller.pid;
            c.pid.k_p = kp;
            c.pid.k_d = kd;
            c.pid.k_i = grid.ki_over_kp * kp;
            out.candidates.push_back(c);
          }

  parallel_for(out.candidates.size(), plan.parallelism, [&](std::size_t k) {
    GainCandidate& c = out.candidates[k];
    for (std::size_t i = 0; i < ns && c.failed_cells == 0; ++i) {
      ControllerSettings s = plan.controller;
      s.leg = c.leg;
      s.pid = c.pid;
      s.leg.initial_td_angle = td[i];
      s.leg.initial_td_angle_per_speed = 0;
      for (double r : plan.vp_radii) {
        if (r == 0) continue;
        const GaitRun run = run_gait(models[i], s, plan.vp_for(r), plan.speeds[i], plan.simulation);
        if (!run.converged() || run.failure) {
          ++c.failed_cells;
          break;
        }
        if (plan.speeds[i] == reference_speed)
          c.strides_at_reference += run.gait->phase1_strides + run.gait->phase2_strides;
      }
    }
  });

  const GainCandidate* best = nullptr;
  for (const auto& c : out.candidates)
    if (c.failed_cells == 0 && (!best || c.strides_at_reference < best->strides_at_reference))
      best = &c;
  if (best == nullptr) throw SimulationError("no gain candidate converges on every sweep cell");
  out.best = *best;
  return out;
}

}  // namespace tslip
