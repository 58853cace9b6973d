#include "tslip/runner.hpp"

namespace tslip {

using nlohmann::json;

PreparedRun prepare_run(const RunConfig& config) {
  config.validate();
  PreparedRun p{config.model, config.controller, config.vp(), config.speed, std::nullopt};
  if (config.tune_damping) {
    p.tuning = tune_damping_for_duty_factor(config.model, config.controller, config.speed,
                                            config.duty_factor.at(config.speed),
                                            config.damping_search, config.simulation);
    p.model.damping_coefficient = p.tuning->damping;
    p.controller.leg.initial_td_angle = p.tuning->td_angle;
    p.controller.leg.initial_td_angle_per_speed = 0;
  }
  return p;
}

SingleRun execute_run(const RunConfig& config) {
  PreparedRun setup = prepare_run(config);
  GaitRun gait = run_gait(setup.model, setup.controller, setup.vp, setup.speed, config.simulation);
  return {std::move(setup), std::move(gait)};
}

namespace {

json apex_json(const BodyStated& s) {
  return {{"x", s.x_com},      {"y", s.y_com},   {"pitch_deg", rad2deg(s.pitch)},
          {"vx", s.vx},        {"vy", s.vy},     {"pitch_rate_deg", rad2deg(s.pitch_rate)},
          {"time", s.time}};
}

}  // namespace

json gait_document(const SingleRun& run) {
  const PreparedRun& s = run.setup;
  json doc{{"speed", s.speed},
           {"vp_radius", s.vp.radius},
           {"vp_frame", s.vp.angle_frame == VpFrame::body ? "body" : "world"},
           {"damping_coefficient", s.model.damping_coefficient},
           {"initial_td_angle_deg", rad2deg(s.controller.leg.initial_td_angle)},
           {"converged", run.gait.converged()}};
  if (s.tuning) {
    doc["tuning"] = {{"band_lo", s.tuning->band.lo},
                     {"band_hi", s.tuning->band.hi},
                     {"duty_factor", s.tuning->duty_factor},
                     {"td_angle_deg", rad2deg(s.tuning->td_angle)},
                     {"evaluations", s.tuning->evaluations.size()}};
  }
  if (const auto& g = run.gait.gait) {
    doc["gait"] = {{"apex", apex_json(g->apex)},
                   {"td_angle_deg", rad2deg(g->td_angle)},
                   {"vp_angle_deg", rad2deg(g->vp.angle)},
                   {"phase1_strides", g->phase1_strides},
                   {"phase2_strides", g->phase2_strides},
                   {"shooting_iterations", g->shooting_iterations},
                   {"shooting_residual", g->shooting_residual},
                   {"phase1_mean_pitch_deg", rad2deg(g->phase1_mean_pitch)}};
  }
  if (const auto& f = run.gait.failure) {
    doc["failure"] = {{"reason", f->reason},
                      {"phase", to_string(f->phase)},
                      {"stride_index", f->stride_index}};
  }
  return doc;
}

std::vector<FixtureSpec> standard_fixtures() {
  return {{"gait_4ms_r0", 4, 0.0},
          {"gait_5ms_r0", 5, 0.0},
          {"gait_10ms_r0", 10, 0.0},
          {"gait_5ms_rm04", 5, -0.4},
          {"gait_5ms_rp04", 5, 0.4}};
}

RunConfig fixture_config(const RunConfig& base, const FixtureSpec& spec) {
  RunConfig c = base;
  c.speed = spec.speed;
  c.vp_radius = spec.vp_radius;
  c.vp_frame.reset();
  c.tune_damping = true;
  return c;
}

json fixture_document(const FixtureSpec& spec, const RunConfig& config, const SingleRun& run) {
  json doc = gait_document(run);
  doc["name"] = spec.name;
  doc["config_hash"] = config_hash(config);
  json strides = json::array();
  for (const StrideRecord* r : run.gait.steady_strides()) {
    const StrideMetrics m = stride_metrics(*r, run.setup.model);
    strides.push_back({{"index", r->index},
                       {"period", m.period},
                       {"duty_factor", m.duty_factor},
                       {"td_angle_deg", m.td_angle},
                       {"mean_inclination_deg", m.trunk.mean_inclination},
                       {"angular_excursion_deg", m.trunk.angular_excursion},
                       {"mean_angular_velocity_deg_s", m.trunk.mean_angular_velocity},
                       {"hip_net_work", m.work.hip.net},
                       {"damper_net_work", m.work.damper.net},
                       {"spring_net_work", m.work.spring.net},
                       {"vp_moment_error", max_vp_moment_error(*r, run.setup.model)}});
  }
  doc["strides"] = std::move(strides);
  return doc;
}

}  // namespace tslip
