// Hybrid flight/stance automaton: simulates one apex-to-apex stride and
// records the sampled trajectory together with its phase events.
#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "tslip/controllers.hpp"
#include "tslip/integrator.hpp"
#include "tslip/model.hpp"

namespace tslip {

enum class GaitPhase { flight, stance };

const char* to_string(GaitPhase phase);

struct Sample {
  double time{0};
  BodyStated state;
  GaitPhase phase{GaitPhase::flight};
  StanceContextd stance;  // all zero in flight
  Vector2d grf{Vector2d::Zero()};
  double hip_power{0};
  double damper_power{0};
  double spring_power{0};
};

struct StrideEvents {
  double start{0};
  double touchdown{0};
  double midstance{0};
  double takeoff{0};
  double apex{0};
  EventKind takeoff_kind{EventKind::takeoff_length};
};

struct StrideRecord {
  int index{0};
  std::vector<Sample> samples;
  StrideEvents events;
  double td_angle{0};
  VpTargetd vp;
  bool pid_enabled{false};
  Vector2d foot{Vector2d::Zero()};
  BodyStated start_apex;
  BodyStated end_apex;
  // Exact time averages from the integrated pitch.
  double mean_pitch{0};
  double stance_mean_pitch{0};

  double period() const { return events.apex - events.start; }
  std::size_t touchdown_index() const;
  std::size_t midstance_index() const;
  std::size_t takeoff_index() const;
};

class SimulationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The body hit the ground, tipped over or cannot enter/leave stance.
class FallError : public SimulationError {
 public:
  using SimulationError::SimulationError;
};

/// Internal consistency guard on the phase sequence.
class EventOrderError : public SimulationError {
 public:
  using SimulationError::SimulationError;
};

struct SimulationOptions {
  IntegrationLimits limits;
  double fall_height_fraction{0.2};
  double apex_tolerance{1e-6};
};

struct StrideOutcome {
  StrideRecord record;
  BodyStated next_apex;
};

/// Apex -> touchdown -> takeoff -> apex with the given touchdown angle and
/// stance torque law. The incoming state must be a flight apex.
StrideOutcome simulate_stride(const ModelParamsd& params, const HipController& controller,
                              double td_angle, const BodyStated& apex,
                              const SimulationOptions& options = {});

/// Cold-start apex: hip at `height_ratio` * l0 * sin(td_angle), forward speed
/// at the target, trunk at the desired pitch and at rest.
BodyStated cold_start_apex(const ModelParamsd& params, double td_angle, double speed,
                           double desired_pitch, double height_ratio = 1.05);

/// Sink for stride records produced by the engine.
class StrideSink {
 public:
  virtual ~StrideSink() = default;
  virtual void consume(const StrideRecord& record) = 0;
};

}  // namespace tslip
