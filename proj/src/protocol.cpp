#include "tslip/protocol.hpp"

#include <cmath>
#include <limits>

#include <Eigen/Dense>

namespace tslip {

const char* to_string(Phase2Method method) {
  return method == Phase2Method::shooting ? "shooting" : "incremental";
}

const char* to_string(MeanPitchWindow window) {
  return window == MeanPitchWindow::stride ? "stride" : "stance";
}

const char* to_string(ColdStart mode) {
  return mode == ColdStart::reference_orbit ? "reference_orbit" : "height_ratio";
}

void ControllerSettings::validate() const {
  auto finite = [](double v) { return std::isfinite(v); };
  if (!finite(leg.k_xdot0) || !finite(leg.k_xdot) || !finite(leg.k_y))
    throw ModelError("leg placement gains must be finite");
  if (!(leg.initial_td_angle > 0 && leg.initial_td_angle < std::numbers::pi / 2))
    throw ModelError("initial touchdown angle must lie in (0, 90) degrees");
  if (!finite(leg.initial_td_angle_per_speed))
    throw ModelError("initial touchdown angle schedule must be finite");
  if (!finite(pid.k_p) || !finite(pid.k_d) || !finite(pid.k_i) || !finite(pid.desired_pitch) ||
      !finite(pid.desired_pitch_rate))
    throw ModelError("PID gains must be finite");
  if (!finite(k_vp)) throw ModelError("k_vp must be finite");
  if (!(cold_start_height_ratio >= 1.0) || !std::isfinite(cold_start_height_ratio))
    throw ModelError("cold-start height ratio must be at least 1");
  if (!(steady_tolerance > 0) || !(converge_tolerance > 0) || !(shooting_tolerance > 0) ||
      !(shooting_step > 0))
    throw ModelError("protocol tolerances must be positive");
  if (steady_strides < 1 || stride_budget < 1 || recorded_strides < 1 ||
      shooting_max_iterations < 1)
    throw ModelError("protocol counts must be positive");
}

double apex_distance(const BodyStated& a, const BodyStated& b) {
  return Eigen::Vector4d(a.vx - b.vx, a.y_com - b.y_com, a.pitch - b.pitch,
                         a.pitch_rate - b.pitch_rate)
      .norm();
}

double observed_mean_pitch(const StrideRecord& record, MeanPitchWindow window) {
  return window == MeanPitchWindow::stride ? record.mean_pitch : record.stance_mean_pitch;
}

std::vector<const StrideRecord*> GaitRun::steady_strides() const {
  std::vector<const StrideRecord*> out;
  if (!gait) return out;
  const auto n = std::min<std::size_t>(strides.size(),
                                       static_cast<std::size_t>(settings.recorded_strides));
  for (std::size_t i = strides.size() - n; i < strides.size(); ++i) out.push_back(&strides[i]);
  return out;
}

namespace {

double initial_vp_angle(const VpTargetd& vp, double desired_pitch) {
  // Start with the VP straight above/below the CoM in the world.
  return vp.angle_frame == VpFrame::body ? -desired_pitch : 0.0;
}

using Vector5d = Eigen::Matrix<double, 5, 1>;
using Matrix5d = Eigen::Matrix<double, 5, 5>;

struct Protocol {
  const ModelParamsd& params;
  const ControllerSettings& settings;
  VpTargetd vp;
  double speed;
  GaitRun* trace;
  const SimulationOptions& options;

  int strides{0};
  ProtocolPhase phase{ProtocolPhase::vp_plus_pid};
  BodyStated apex;
  double td_angle{0};
  std::vector<ApexSample> apex_history;

  [[noreturn]] void fail(const std::string& reason) const {
    throw ProtocolFailure(reason + " (phase " + to_string(phase) + ", stride " +
                              std::to_string(strides) + ")",
                          ProtocolFailureInfo{reason, phase, strides});
  }

  HipController controller(bool pid) const { return {vp, pid, settings.pid}; }

  // One closed-loop stride; advances the apex and the touchdown angle.
  StrideRecord step(bool pid) {
    if (strides >= settings.stride_budget) fail("stride budget exhausted");
    StrideOutcome out;
    try {
      out = simulate_stride(params, controller(pid), td_angle, apex, options);
    } catch (const SimulationError& e) {
      fail(e.what());
    } catch (const ModelError& e) {
      fail(e.what());
    } catch (const IntegrationError& e) {
      fail(e.what());
    }
    out.record.index = strides++;
    apex = out.next_apex;
    apex_history.push_back({apex.vx, apex.y_com});
    const TdAngleUpdate update = next_td_angle(settings.leg, td_angle, apex_history, speed);
    if (trace != nullptr) {
      StrideSummary s;
      s.index = out.record.index;
      s.phase = phase;
      s.td_angle = out.record.td_angle;
      s.td_clamped = update.clamped;
      s.vp_angle = vp.angle;
      s.mean_pitch = observed_mean_pitch(out.record, settings.mean_pitch_window);
      s.apex = apex;
      trace->history.push_back(s);
    }
    td_angle = update.angle;
    return std::move(out.record);
  }

  void keep(StrideRecord&& record, bool with_samples) {
    if (trace == nullptr) return;
    if (!with_samples) {
      record.samples.clear();
      record.samples.shrink_to_fit();
    }
    trace->strides.push_back(std::move(record));
  }

  void run_phase1() {
    int calm = 0;
    while (calm < settings.steady_strides) {
      const BodyStated before = apex;
      StrideRecord r = step(true);
      calm = apex_distance(before, apex) < settings.steady_tolerance ? calm + 1 : 0;
      keep(std::move(r), settings.keep_transient_samples);
    }
  }

  // Apex map for the shooting unknowns (apex height, pitch, pitch rate,
  // touchdown angle, VP angle) with the forward speed pinned to the target.
  std::optional<Vector5d> residual(const Vector5d& z, const BodyStated& base) const {
    BodyStated a = base;
    a.vx = speed;
    a.vy = 0;
    a.y_com = z[0];
    a.pitch = z[1];
    a.pitch_rate = z[2];
    VpTargetd target = vp;
    target.angle = z[4];
    try {
      const StrideOutcome out =
          simulate_stride(params, HipController{target, false, settings.pid}, z[3], a, options);
      Vector5d r;
      r << out.next_apex.y_com - a.y_com, out.next_apex.pitch - a.pitch,
          out.next_apex.pitch_rate - a.pitch_rate, out.next_apex.vx - speed,
          observed_mean_pitch(out.record, settings.mean_pitch_window) -
              settings.pid.desired_pitch;
      return r;
    } catch (const SimulationError&) {
      return std::nullopt;
    } catch (const ModelError&) {
      return std::nullopt;
    } catch (const IntegrationError&) {
      return std::nullopt;
    }
  }

  void run_shooting(ConvergedGait& result) {
    const BodyStated base = apex;
    Vector5d z;
    z << apex.y_com, apex.pitch, apex.pitch_rate, td_angle, vp.angle;
    std::optional<Vector5d> r = residual(z, base);
    if (!r) fail("phase-2 shooting: initial guess falls");
    int iteration = 0;
    for (; r->norm() >= settings.shooting_tolerance; ++iteration) {
      if (iteration >= settings.shooting_max_iterations)
        fail("phase-2 shooting did not converge, residual " + std::to_string(r->norm()));
      Matrix5d jac;
      for (int j = 0; j < 5; ++j) {
        const double h = settings.shooting_step * std::max(1.0, std::abs(z[j]));
        Vector5d zp = z, zm = z;
        zp[j] += h;
        zm[j] -= h;
        const auto rp = residual(zp, base);
        const auto rm = residual(zm, base);
        if (rp && rm)
          jac.col(j) = (*rp - *rm) / (2 * h);
        else if (rp)
          jac.col(j) = (*rp - *r) / h;
        else if (rm)
          jac.col(j) = (*r - *rm) / h;
        else
          fail("phase-2 shooting: Jacobian probe falls");
      }
      // Rank deficient when the VP sits on the CoM; take the minimum-norm step.
      const Vector5d dz = jac.completeOrthogonalDecomposition().solve(-*r);
      double lambda = 1.0;
      std::optional<Vector5d> trial;
      for (; lambda > 1e-3; lambda *= 0.5) {
        trial = residual(z + lambda * dz, base);
        if (trial && trial->norm() < (1 - 1e-4 * lambda) * r->norm()) break;
      }
      if (!(lambda > 1e-3)) fail("phase-2 shooting: line search stalled");
      z += lambda * dz;
      r = trial;
    }
    apex.vx = speed;
    apex.vy = 0;
    apex.y_com = z[0];
    apex.pitch = z[1];
    apex.pitch_rate = z[2];
    td_angle = z[3];
    vp.angle = z[4];
    apex_history.assign(1, {apex.vx, apex.y_com});
    result.shooting_iterations = iteration;
    result.shooting_residual = r->norm();
  }

  VpAdaptationState adaptation() const {
    VpAdaptationState s;
    s.k_vp = settings.k_vp;
    s.angle = vp.angle;
    s.orientation = vp_adaptation_orientation(vp);
    return s;
  }

  // Closed-loop phase-2 strides: leg placement plus the stride-wise VP update.
  // Stops when the update has settled and the apex repeats.
  void run_adaptation(int max_strides) {
    VpAdaptationState state = adaptation();
    for (int n = 0; n < max_strides; ++n) {
      const BodyStated before = apex;
      StrideRecord r = step(false);
      const double mean = observed_mean_pitch(r, settings.mean_pitch_window);
      keep(std::move(r), settings.keep_transient_samples);
      try {
        state = adapt_vp_angle(std::move(state), mean, settings.pid.desired_pitch);
      } catch (const VpDivergenceError& e) {
        fail(e.what());
      }
      vp.angle = state.angle;
      const bool periodic = apex_distance(before, apex) < settings.converge_tolerance;
      const bool settled = settings.method == Phase2Method::shooting || state.converged;
      if (periodic && settled) return;
    }
    fail(settings.method == Phase2Method::shooting
             ? "shooting solution is not reproduced by the closed loop"
             : "stride budget exhausted");
  }
};

}  // namespace

ReferenceOrbit find_reference_orbit(const ModelParamsd& params, double speed,
                                    double desired_pitch, double td_guess,
                                    const SimulationOptions& options) {
  VpTargetd centre;
  centre.angle = -desired_pitch;
  const HipController controller{centre, false, {}};
  auto apex_at = [&](double hip_height) {
    BodyStated a;
    a.vx = speed;
    a.pitch = desired_pitch;
    a.y_com = hip_height + params.hip_com_distance * std::cos(desired_pitch);
    return a;
  };
  // Unknowns: apex hip height and touchdown angle.
  auto residual = [&](const Eigen::Vector2d& z) -> std::optional<Eigen::Vector2d> {
    try {
      const BodyStated a = apex_at(z[0]);
      const StrideOutcome out = simulate_stride(params, controller, z[1], a, options);
      return Eigen::Vector2d(out.next_apex.y_com - a.y_com, out.next_apex.vx - speed);
    } catch (const std::runtime_error&) {
      return std::nullopt;
    }
  };

  const double l0 = params.leg_rest_length;
  for (const double offset : {0.0, 1.0, -1.0, 2.0, -2.0, 3.0, -3.0, 4.0, -4.0}) {
    for (const double ratio : {1.015, 1.03, 1.005}) {
      const double td = td_guess + offset * std::numbers::pi / 180;
      Eigen::Vector2d z(ratio * l0 * std::sin(td), td);
      std::optional<Eigen::Vector2d> r = residual(z);
      if (!r) continue;
      for (int it = 0; it < 30 && r; ++it) {
        if (r->norm() < 1e-11) {
          ReferenceOrbit orbit{apex_at(z[0]), z[1], it};
          return orbit;
        }
        Eigen::Matrix2d jac;
        bool ok = true;
        for (int j = 0; j < 2 && ok; ++j) {
          Eigen::Vector2d zp = z, zm = z;
          zp[j] += 1e-7;
          zm[j] -= 1e-7;
          const auto rp = residual(zp);
          const auto rm = residual(zm);
          ok = rp && rm;
          if (ok) jac.col(j) = (*rp - *rm) / 2e-7;
        }
        if (!ok) break;
        const Eigen::Vector2d dz = jac.colPivHouseholderQr().solve(-*r);
        std::optional<Eigen::Vector2d> trial;
        double lambda = 1.0;
        for (; lambda > 1e-3; lambda *= 0.5) {
          trial = residual(z + lambda * dz);
          if (trial && trial->norm() < r->norm()) break;
        }
        if (!(lambda > 1e-3)) break;
        z += lambda * dz;
        r = trial;
      }
    }
  }
  throw SimulationError("no periodic reference orbit near the touchdown angle guess");
}

ConvergedGait run_convergence_protocol(const ModelParamsd& params,
                                       const ControllerSettings& settings, const VpTargetd& vp,
                                       double target_speed, GaitRun* trace,
                                       const SimulationOptions& options) {
  params.validate();
  settings.validate();
  vp.validate();
  if (!(std::isfinite(target_speed) && target_speed > 0))
    throw ModelError("target speed must be positive");

  Protocol p{params, settings, vp, target_speed, trace, options, 0, ProtocolPhase::vp_plus_pid,
             BodyStated{}, 0.0, {}};
  p.vp.angle = initial_vp_angle(vp, settings.pid.desired_pitch);
  p.td_angle = settings.leg.initial_angle_for(target_speed);
  if (settings.cold_start == ColdStart::reference_orbit) {
    try {
      const ReferenceOrbit seed = find_reference_orbit(params, target_speed,
                                                       settings.pid.desired_pitch, p.td_angle, options);
      p.td_angle = seed.td_angle;
      p.apex = seed.apex;
    } catch (const SimulationError& e) {
      p.fail(e.what());
    }
  } else {
    p.apex = cold_start_apex(params, p.td_angle, target_speed, settings.pid.desired_pitch,
                             settings.cold_start_height_ratio);
  }
  p.apex_history.push_back({p.apex.vx, p.apex.y_com});

  ConvergedGait result;
  p.run_phase1();
  result.phase1_strides = p.strides;
  if (trace != nullptr && !trace->history.empty())
    result.phase1_mean_pitch = trace->history.back().mean_pitch;

  p.phase = ProtocolPhase::fixed_vp_adaptation;
  if (trace != nullptr) trace->final_phase = p.phase;
  if (settings.method == Phase2Method::shooting) {
    p.run_shooting(result);
    // The shooting orbit must survive one closed-loop stride unchanged.
    p.run_adaptation(1);
  } else {
    p.run_adaptation(settings.stride_budget);
  }
  result.phase2_strides = p.strides - result.phase1_strides;

  p.phase = ProtocolPhase::converged;
  if (trace != nullptr) trace->final_phase = p.phase;
  result.apex = p.apex;
  result.td_angle = p.td_angle;
  result.vp = p.vp;
  return result;
}

GaitRun run_gait(const ModelParamsd& params, const ControllerSettings& settings,
                 const VpTargetd& vp, double target_speed, const SimulationOptions& options,
                 StrideSink* sink) {
  GaitRun run;
  run.params = params;
  run.settings = settings;
  run.target_speed = target_speed;
  ConvergedGait gait;
  try {
    gait = run_convergence_protocol(params, settings, vp, target_speed, &run, options);
  } catch (const ProtocolFailure& e) {
    run.failure = e.info();
    run.failure->reason = e.what();
    return run;
  }

  // Periodic strides under the final controller.
  const HipController controller{gait.vp, false, settings.pid};
  BodyStated apex = gait.apex;
  const int first = run.strides.empty() ? 0 : run.strides.back().index + 1;
  for (int n = 0; n < settings.recorded_strides; ++n) {
    StrideOutcome out;
    try {
      out = simulate_stride(params, controller, gait.td_angle, apex, options);
    } catch (const std::runtime_error& e) {
      run.failure = ProtocolFailureInfo{e.what(), ProtocolPhase::converged, first + n};
      return run;
    }
    if (apex_distance(apex, out.next_apex) >= settings.converge_tolerance) {
      run.failure = ProtocolFailureInfo{"recorded stride is not periodic",
                                        ProtocolPhase::converged, first + n};
      return run;
    }
    out.record.index = first + n;
    apex = out.next_apex;
    if (sink != nullptr) sink->consume(out.record);
    StrideSummary s;
    s.index = out.record.index;
    s.phase = ProtocolPhase::converged;
    s.td_angle = gait.td_angle;
    s.vp_angle = gait.vp.angle;
    s.mean_pitch = observed_mean_pitch(out.record, settings.mean_pitch_window);
    s.apex = apex;
    run.history.push_back(s);
    run.strides.push_back(std::move(out.record));
  }
  run.gait = gait;
  return run;
}

}  // namespace tslip
