#include "tslip/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include <Eigen/Dense>

namespace tslip {

namespace {

constexpr double kMinNodeGap = 1e-6;  // s; closer nodes are left out of a stencil

// Integral over [times[i], times[i+1]] of the cubic through nearby samples.
double interval_integral(std::span<const double> t, std::span<const double> f, std::size_t i) {
  const double a = t[i];
  const double b = t[i + 1];
  const double h = b - a;
  if (h < kMinNodeGap || t.size() < 4) return 0.5 * h * (f[i] + f[i + 1]);

  // Interval ends plus the nearest well-separated neighbours on each side.
  std::vector<std::size_t> nodes{i, i + 1};
  auto left = static_cast<std::ptrdiff_t>(i) - 1;
  std::size_t right = i + 2;
  while (nodes.size() < 4) {
    while (left >= 0 && t[nodes.front()] - t[static_cast<std::size_t>(left)] < kMinNodeGap) --left;
    while (right < t.size() && t[right] - t[nodes.back()] < kMinNodeGap) ++right;
    const bool has_left = left >= 0;
    const bool has_right = right < t.size();
    if (!has_left && !has_right) break;
    const double dl = has_left ? a - t[static_cast<std::size_t>(left)] : INFINITY;
    const double dr = has_right ? t[right] - b : INFINITY;
    if (dl <= dr) {
      nodes.insert(nodes.begin(), static_cast<std::size_t>(left--));
    } else {
      nodes.push_back(right++);
    }
  }
  if (nodes.size() < 4) return 0.5 * h * (f[i] + f[i + 1]);

  const double centre = 0.5 * (a + b);
  const double scale = t[nodes.back()] - t[nodes.front()];
  Eigen::Matrix4d vander;
  Eigen::Vector4d rhs;
  for (int r = 0; r < 4; ++r) {
    const double s = (t[nodes[static_cast<std::size_t>(r)]] - centre) / scale;
    vander.row(r) << 1, s, s * s, s * s * s;
    rhs[r] = f[nodes[static_cast<std::size_t>(r)]];
  }
  const Eigen::Vector4d coef = vander.partialPivLu().solve(rhs);
  const double sa = (a - centre) / scale;
  const double sb = (b - centre) / scale;
  double integral = 0;
  double pa = sa, pb = sb;
  for (int j = 0; j < 4; ++j) {
    integral += coef[j] * (pb - pa) / (j + 1);
    pa *= sa;
    pb *= sb;
  }
  return integral * scale;
}

Work integrate_work(std::span<const double> t, std::span<const double> p) {
  Work w;
  for (std::size_t i = 0; i + 1 < t.size(); ++i) {
    const double total = interval_integral(t, p, i);
    const double h = t[i + 1] - t[i];
    const double f0 = p[i];
    const double f1 = p[i + 1];
    double pos = 0, neg = 0;
    if (f0 >= 0 && f1 >= 0) {
      pos = total;
    } else if (f0 <= 0 && f1 <= 0) {
      neg = total;
    } else {
      // Sign change: split the linear part at its root and share the
      // higher-order correction in proportion.
      const double root = h * f0 / (f0 - f1);
      const double first = 0.5 * root * f0;
      const double second = 0.5 * (h - root) * f1;
      const double lin_pos = std::max(first, 0.0) + std::max(second, 0.0);
      const double lin_neg = std::min(first, 0.0) + std::min(second, 0.0);
      const double correction = total - (lin_pos + lin_neg);
      const double share = lin_pos / (lin_pos - lin_neg);
      pos = lin_pos + share * correction;
      neg = lin_neg + (1 - share) * correction;
    }
    w.positive += pos;
    w.negative += neg;
  }
  w.positive = std::max(w.positive, 0.0);
  w.negative = std::min(w.negative, 0.0);
  w.net = w.positive + w.negative;
  return w;
}

struct StanceSeries {
  std::vector<double> t, hip, damper, spring, leg;
};

StanceSeries stance_series(const StrideRecord& stride) {
  StanceSeries s;
  const std::size_t first = stride.touchdown_index();
  const std::size_t last = stride.takeoff_index();
  for (std::size_t i = first; i <= last; ++i) {
    const Sample& x = stride.samples[i];
    s.t.push_back(x.time);
    s.hip.push_back(x.hip_power);
    s.damper.push_back(x.damper_power);
    s.spring.push_back(x.spring_power);
    s.leg.push_back(x.spring_power + x.damper_power);
  }
  return s;
}

void require_samples(const StrideRecord& stride) {
  if (stride.samples.size() < 4) throw std::invalid_argument("stride has too few samples");
  if (!(stride.events.touchdown < stride.events.takeoff))
    throw std::invalid_argument("stride has no stance phase");
}

double deg(double rad) { return rad * 180.0 / std::numbers::pi; }

struct Extremum {
  double time;
  double value;
};

// Refines a sampled extremum at index i with the cubic Hermite interpolant of
// pitch and pitch rate on the neighbouring intervals.
Extremum refine_extremum(const std::vector<Sample>& s, std::size_t i, bool maximum) {
  Extremum best{s[i].time, s[i].state.pitch};
  auto better = [&](double v) { return maximum ? v > best.value : v < best.value; };
  for (std::size_t j : {i - 1, i}) {
    if (j + 1 >= s.size() || (i == 0 && j != 0)) continue;
    const double h = s[j + 1].time - s[j].time;
    if (!(h > 0)) continue;
    const double x0 = s[j].state.pitch, x1 = s[j + 1].state.pitch;
    const double v0 = h * s[j].state.pitch_rate, v1 = h * s[j + 1].state.pitch_rate;
    const double a = 6 * x0 + 3 * v0 - 6 * x1 + 3 * v1;
    const double b = -6 * x0 - 4 * v0 + 6 * x1 - 2 * v1;
    const double c = v0;
    std::vector<double> roots;
    if (std::abs(a) < 1e-300) {
      if (b != 0) roots.push_back(-c / b);
    } else {
      const double disc = b * b - 4 * a * c;
      if (disc >= 0) {
        const double q = -0.5 * (b + std::copysign(std::sqrt(disc), b));
        roots.push_back(q / a);
        if (q != 0) roots.push_back(c / q);
      }
    }
    for (double u : roots) {
      if (!(u > 0 && u < 1)) continue;
      const double u2 = u * u, u3 = u2 * u;
      const double value = (2 * u3 - 3 * u2 + 1) * x0 + (u3 - 2 * u2 + u) * v0 +
                           (-2 * u3 + 3 * u2) * x1 + (u3 - u2) * v1;
      if (better(value)) best = {s[j].time + u * h, value};
    }
  }
  return best;
}

}  // namespace

double integrate_samples(std::span<const double> times, std::span<const double> values) {
  if (times.size() != values.size()) throw std::invalid_argument("sample length mismatch");
  double total = 0;
  for (std::size_t i = 0; i + 1 < times.size(); ++i) total += interval_integral(times, values, i);
  return total;
}

std::vector<double> cumulative_integral(std::span<const double> times,
                                        std::span<const double> values) {
  if (times.size() != values.size()) throw std::invalid_argument("sample length mismatch");
  std::vector<double> out(times.size(), 0.0);
  for (std::size_t i = 0; i + 1 < times.size(); ++i)
    out[i + 1] = out[i] + interval_integral(times, values, i);
  return out;
}

const char* to_string(PitchDirection direction) {
  switch (direction) {
    case PitchDirection::forward: return "forward";
    case PitchDirection::backward: return "backward";
    case PitchDirection::none: return "none";
  }
  return "none";
}

double duty_factor(const StrideRecord& stride) {
  return (stride.events.takeoff - stride.events.touchdown) / (2.0 * stride.period());
}

TrunkMetrics trunk_metrics(const StrideRecord& stride, AngularVelocityWindow window) {
  require_samples(stride);
  const auto& samples = stride.samples;
  std::vector<double> t, pitch;
  t.reserve(samples.size());
  pitch.reserve(samples.size());
  for (const Sample& s : samples) {
    t.push_back(s.time);
    pitch.push_back(s.state.pitch);
  }
  const double period = stride.period();
  TrunkMetrics m;
  m.mean_inclination = deg(integrate_samples(t, pitch) / period);

  const auto [lo, hi] = std::minmax_element(pitch.begin(), pitch.end());
  const Extremum low = refine_extremum(samples, static_cast<std::size_t>(lo - pitch.begin()), false);
  const Extremum high = refine_extremum(samples, static_cast<std::size_t>(hi - pitch.begin()), true);
  const double excursion = high.value - low.value;
  m.angular_excursion = deg(excursion);

  // Rates are reported right-handed about z, so forward pitching is negative.
  double peak = 0;
  for (const Sample& s : samples)
    if (std::abs(s.state.pitch_rate) > std::abs(peak)) peak = s.state.pitch_rate;
  m.peak_angular_velocity = -deg(peak);

  const double td = stride.events.touchdown;
  double after_td = std::fmod(high.time - td, period);
  if (after_td < 0) after_td += period;
  m.max_flexion_phase = 100.0 * after_td / (2.0 * period);

  const double p_td = samples[stride.touchdown_index()].state.pitch;
  const double p_ms = samples[stride.midstance_index()].state.pitch;
  m.pitch_touchdown = deg(p_td);
  m.pitch_midstance = deg(p_ms);
  m.direction = p_ms > p_td ? PitchDirection::forward
                : p_ms < p_td ? PitchDirection::backward
                              : PitchDirection::none;
  const double sign = m.direction == PitchDirection::forward    ? 1.0
                      : m.direction == PitchDirection::backward ? -1.0
                                                                : 0.0;

  switch (window) {
    case AngularVelocityWindow::dominant_segment: {
      double rising = std::fmod(high.time - low.time, period);
      if (rising < 0) rising += period;
      const double falling = period - rising;
      const double span = sign > 0 ? rising : falling;
      m.mean_angular_velocity = span > 0 ? -sign * deg(excursion) / span : 0.0;
      break;
    }
    case AngularVelocityWindow::stance: {
      const double p_to = samples[stride.takeoff_index()].state.pitch;
      m.mean_angular_velocity = -deg(p_to - p_td) / (stride.events.takeoff - td);
      break;
    }
    case AngularVelocityWindow::stride:
      m.mean_angular_velocity = -sign * 2.0 * deg(excursion) / period;
      break;
  }
  return m;
}

GrfDecomposition grf_decompose(const StrideRecord& stride) {
  require_samples(stride);
  GrfDecomposition out;
  for (std::size_t i = stride.touchdown_index(); i <= stride.takeoff_index(); ++i) {
    const Sample& s = stride.samples[i];
    const Vector2d e = s.stance.leg_direction();
    GrfComponents c;
    c.time = s.time;
    c.total = s.grf;
    c.axial = s.stance.axial_force * e;
    c.tangential = s.stance.tangential_force * perp(e);
    c.spring = s.stance.spring_force * e;
    c.damper = -s.stance.damper_force * e;
    c.without_damping = c.total - c.damper;
    c.without_hip = c.total - c.tangential;
    const double scale = std::max(c.total.norm(), c.spring.norm() + c.damper.norm() + 1e-300);
    const double closure = (c.spring + c.damper + c.tangential - c.total).norm() / scale;
    out.max_closure_error = std::max(out.max_closure_error, closure);
    out.samples.push_back(c);
  }
  return out;
}

bool WorkLedger::closes(double relative_tolerance) const {
  return std::abs(residual) <= relative_tolerance * throughput;
}

WorkLedger work_ledger(const StrideRecord& stride, const ModelParamsd& params) {
  require_samples(stride);
  const StanceSeries s = stance_series(stride);
  WorkLedger w;
  w.spring = integrate_work(s.t, s.spring);
  w.damper = integrate_work(s.t, s.damper);
  w.hip = integrate_work(s.t, s.hip);
  w.leg = integrate_work(s.t, s.leg);
  const BodyStated& a = stride.samples.front().state;
  const BodyStated& b = stride.samples.back().state;
  w.energy_change = mechanical_energy(params, b) - mechanical_energy(params, a);
  w.residual = w.energy_change - (w.hip.net + w.damper.net + w.spring.net);
  w.throughput = (w.spring.positive - w.spring.negative) +
                 (w.damper.positive - w.damper.negative) + (w.hip.positive - w.hip.negative);
  return w;
}

EnergyTimecourse energy_timecourse(const StrideRecord& stride) {
  require_samples(stride);
  const StanceSeries s = stance_series(stride);
  EnergyTimecourse out;
  const double td = stride.events.touchdown;
  const double stance = stride.events.takeoff - td;
  for (double t : s.t) out.stance_percent.push_back(100.0 * (t - td) / stance);
  out.hip = cumulative_integral(s.t, s.hip);
  out.damper = cumulative_integral(s.t, s.damper);
  out.spring = cumulative_integral(s.t, s.spring);
  out.midstance_percent = 100.0 * (stride.events.midstance - td) / stance;

  const std::size_t n = out.hip.size();
  if (n < 3) return out;
  const double end_lo = std::min(out.hip.front(), out.hip.back());
  const double end_hi = std::max(out.hip.front(), out.hip.back());
  const auto first = out.hip.begin() + 1;
  const auto last = out.hip.end() - 1;
  const auto [lo, hi] = std::minmax_element(first, last);
  std::optional<std::size_t> pick;
  const bool has_min = *lo < end_lo;
  const bool has_max = *hi > end_hi;
  if (has_min && (!has_max || std::abs(*lo) >= std::abs(*hi)))
    pick = static_cast<std::size_t>(lo - out.hip.begin());
  else if (has_max)
    pick = static_cast<std::size_t>(hi - out.hip.begin());
  if (!pick) return out;

  // Refine to the sign change of the hip power next to the extremum.
  const std::size_t k = *pick;
  double when = s.t[k];
  for (std::size_t j : {k - 1, k}) {
    const double p0 = s.hip[j];
    const double p1 = s.hip[j + 1];
    if ((p0 <= 0 && p1 >= 0) || (p0 >= 0 && p1 <= 0)) {
      when = p0 == p1 ? s.t[j] : s.t[j] + (s.t[j + 1] - s.t[j]) * p0 / (p0 - p1);
      break;
    }
  }
  out.reversal_percent = 100.0 * (when - td) / stance;
  out.reversal_value = out.hip[k];
  return out;
}

LegPeaks leg_peaks(const StrideRecord& stride, const ModelParamsd& params) {
  require_samples(stride);
  LegPeaks p;
  p.damping_coefficient = params.damping_coefficient;
  for (std::size_t i = stride.touchdown_index(); i <= stride.takeoff_index(); ++i) {
    const StanceContextd& c = stride.samples[i].stance;
    p.compression = std::max(p.compression, params.leg_rest_length - c.leg_length);
    p.length_rate = std::max(p.length_rate, std::abs(c.leg_length_rate));
    p.spring_force = std::max(p.spring_force, c.spring_force);
    p.damper_force = std::max(p.damper_force, std::abs(c.damper_force));
    p.axial_force = std::max(p.axial_force, c.axial_force);
  }
  return p;
}

ForceScalingReport force_scaling_report(const StrideRecord& slow, const ModelParamsd& slow_params,
                                        double slow_speed, const StrideRecord& fast,
                                        const ModelParamsd& fast_params, double fast_speed) {
  ForceScalingReport r;
  r.slow = leg_peaks(slow, slow_params);
  r.fast = leg_peaks(fast, fast_params);
  r.slow_speed = slow_speed;
  r.fast_speed = fast_speed;
  auto ratio = [](double a, double b) { return b != 0 ? a / b : INFINITY; };
  r.damping_ratio = ratio(r.fast.damping_coefficient, r.slow.damping_coefficient);
  r.compression_ratio = ratio(r.fast.compression, r.slow.compression);
  r.length_rate_ratio = ratio(r.fast.length_rate, r.slow.length_rate);
  r.spring_force_ratio = ratio(r.fast.spring_force, r.slow.spring_force);
  r.damper_force_ratio = ratio(r.fast.damper_force, r.slow.damper_force);
  r.axial_force_ratio = ratio(r.fast.axial_force, r.slow.axial_force);
  return r;
}

double max_vp_moment_error(const StrideRecord& stride, const ModelParamsd& params) {
  double worst = 0;
  const double arm = std::max(std::abs(stride.vp.radius), params.leg_rest_length);
  for (std::size_t i = stride.touchdown_index(); i <= stride.takeoff_index(); ++i) {
    const Sample& s = stride.samples[i];
    const double force = s.grf.norm();
    if (force == 0) continue;
    const Vector2d vp = vp_position(s.state, stride.vp);
    const double moment = cross2(Vector2d(Vector2d(s.stance.foot_x, s.stance.foot_y) - vp), s.grf);
    worst = std::max(worst, std::abs(moment) / (force * arm));
  }
  return worst;
}

StrideMetrics stride_metrics(const StrideRecord& stride, const ModelParamsd& params) {
  StrideMetrics m;
  m.trunk = trunk_metrics(stride);
  m.duty_factor = duty_factor(stride);
  m.work = work_ledger(stride, params);
  m.energy = energy_timecourse(stride);
  m.peaks = leg_peaks(stride, params);
  m.period = stride.period();
  m.stance_time = stride.events.takeoff - stride.events.touchdown;
  m.td_angle = deg(stride.td_angle);
  return m;
}

}  // namespace tslip
