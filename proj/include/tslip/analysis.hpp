// Stride metrics: trunk oscillation, duty factor, GRF decomposition, the
// actuator work ledger, energy time courses and peak-force scaling.
#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tslip/engine.hpp"

namespace tslip {

// ---------------------------------------------------------------------------
// Sampled-signal helpers

/// Integral of the samples of `values` over `times` using local cubic
/// interpolation (exact for cubics, second order at the ends).
double integrate_samples(std::span<const double> times, std::span<const double> values);

/// Running integral; element i is the integral from times[0] to times[i].
std::vector<double> cumulative_integral(std::span<const double> times,
                                        std::span<const double> values);

// ---------------------------------------------------------------------------
// Trunk

enum class PitchDirection { forward, backward, none };

const char* to_string(PitchDirection direction);

enum class AngularVelocityWindow { dominant_segment, stance, stride };

struct TrunkMetrics {
  double mean_inclination{0};       // deg
  double angular_excursion{0};      // deg
  // Angular velocities are right-handed about z (x forward, y up), so forward
  // pitching is negative.
  double mean_angular_velocity{0};  // deg/s
  double peak_angular_velocity{0};  // deg/s, signed value of largest magnitude
  double max_flexion_phase{0};      // % of the gait cycle after touchdown
  PitchDirection direction{PitchDirection::none};
  double pitch_touchdown{0};        // deg
  double pitch_midstance{0};        // deg
};

TrunkMetrics trunk_metrics(const StrideRecord& stride,
                           AngularVelocityWindow window = AngularVelocityWindow::dominant_segment);

/// Stance time over the gait cycle of one leg, which spans two model strides.
double duty_factor(const StrideRecord& stride);

// ---------------------------------------------------------------------------
// GRF decomposition

struct GrfComponents {
  double time{0};
  Vector2d total{Vector2d::Zero()};
  Vector2d axial{Vector2d::Zero()};       // leg force, spring plus damper
  Vector2d tangential{Vector2d::Zero()};  // hip torque
  Vector2d spring{Vector2d::Zero()};
  Vector2d damper{Vector2d::Zero()};
  Vector2d without_damping{Vector2d::Zero()};
  Vector2d without_hip{Vector2d::Zero()};
};

struct GrfDecomposition {
  std::vector<GrfComponents> samples;
  double max_closure_error{0};  // relative, worst sample
};

GrfDecomposition grf_decompose(const StrideRecord& stride);

// ---------------------------------------------------------------------------
// Work

struct Work {
  double positive{0};
  double negative{0};
  double net{0};
};

struct WorkLedger {
  Work spring;
  Work damper;
  Work hip;
  Work leg;  // spring and damper together
  double energy_change{0};
  double residual{0};  // energy_change - (hip + damper + spring net work)
  double throughput{0};

  bool closes(double relative_tolerance = 1e-6) const;
};

WorkLedger work_ledger(const StrideRecord& stride, const ModelParamsd& params);

struct EnergyTimecourse {
  std::vector<double> stance_percent;
  std::vector<double> hip;
  std::vector<double> damper;
  std::vector<double> spring;
  double midstance_percent{0};
  std::optional<double> reversal_percent;  // interior extremum of the hip energy
  double reversal_value{0};
};

EnergyTimecourse energy_timecourse(const StrideRecord& stride);

// ---------------------------------------------------------------------------
// Peak forces

struct LegPeaks {
  double damping_coefficient{0};
  double compression{0};   // max (l0 - l)
  double length_rate{0};   // max |ldot|
  double spring_force{0};
  double damper_force{0};  // max |F_dp|
  double axial_force{0};
};

LegPeaks leg_peaks(const StrideRecord& stride, const ModelParamsd& params);

struct ForceScalingReport {
  LegPeaks slow;
  LegPeaks fast;
  double slow_speed{0};
  double fast_speed{0};
  // fast / slow
  double damping_ratio{0};
  double compression_ratio{0};
  double length_rate_ratio{0};
  double spring_force_ratio{0};
  double damper_force_ratio{0};
  double axial_force_ratio{0};
};

ForceScalingReport force_scaling_report(const StrideRecord& slow, const ModelParamsd& slow_params,
                                        double slow_speed, const StrideRecord& fast,
                                        const ModelParamsd& fast_params, double fast_speed);

// ---------------------------------------------------------------------------
// Checks on recorded strides

/// Largest |moment of the GRF about the VP| / (|GRF| * max(|r_VP|, l0)) over
/// the stance samples.
double max_vp_moment_error(const StrideRecord& stride, const ModelParamsd& params);

struct StrideMetrics {
  TrunkMetrics trunk;
  double duty_factor{0};
  WorkLedger work;
  EnergyTimecourse energy;
  LegPeaks peaks;
  double period{0};
  double stance_time{0};
  double td_angle{0};  // deg
};

StrideMetrics stride_metrics(const StrideRecord& stride, const ModelParamsd& params);

}  // namespace tslip
