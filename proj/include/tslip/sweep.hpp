// Experiment grid over VP radius and forward speed, with the leg damping
// tuned once per speed so the r = 0 gait hits a duty-factor band.
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "tslip/analysis.hpp"
#include "tslip/protocol.hpp"

namespace tslip {

struct DutyFactorBand {
  double lo{0};
  double hi{1};

  double centre() const { return 0.5 * (lo + hi); }
  bool contains(double df) const { return df >= lo && df <= hi; }
  bool vacuous() const { return lo <= 0 && hi >= 1; }
  void validate() const;
};

/// Band edges interpolated linearly in speed between two anchors and held
/// constant outside them.
struct DutyFactorSchedule {
  double slow_speed{4};
  DutyFactorBand slow{0.25, 0.40};
  double fast_speed{10};
  DutyFactorBand fast{0.18, 0.30};

  DutyFactorBand at(double speed) const;
  void validate() const;
};

struct DampingSearch {
  double c_min{100};
  double c_max{3000};
  // Stop once |DF - band centre| falls below this.
  double centre_tolerance{1e-3};
  int max_evaluations{40};

  void validate() const;
};

struct DampingEvaluation {
  double damping{0};
  std::optional<double> duty_factor;  // empty when the r = 0 gait failed
  double td_angle{0};
};

struct DampingTuning {
  double speed{0};
  DutyFactorBand band;
  double damping{0};
  double duty_factor{0};
  double td_angle{0};  // converged r = 0 touchdown angle
  std::vector<DampingEvaluation> evaluations;
};

struct TuningBracket {
  double speed{0};
  DutyFactorBand band;
  std::optional<DampingEvaluation> below;  // largest DF under the band centre
  std::optional<DampingEvaluation> above;  // smallest DF over it
  std::vector<DampingEvaluation> evaluations;

  std::string describe() const;
};

class TuningError : public SimulationError {
 public:
  explicit TuningError(TuningBracket bracket)
      : SimulationError(bracket.describe()), bracket_(std::move(bracket)) {}
  const TuningBracket& bracket() const { return bracket_; }

 private:
  TuningBracket bracket_;
};

/// Bisection on the damping coefficient until the converged r = 0 gait at
/// `speed` has its duty factor near the band centre. Throws TuningError with
/// the bracketing evaluations when the band is not reached.
DampingTuning tune_damping_for_duty_factor(const ModelParamsd& model,
                                           const ControllerSettings& settings, double speed,
                                           const DutyFactorBand& band,
                                           const DampingSearch& search = {},
                                           const SimulationOptions& options = {});

struct SweepPlan {
  ModelParamsd model;
  ControllerSettings controller;
  SimulationOptions simulation;
  std::vector<double> vp_radii{-0.6, -0.4, -0.2, 0.0, 0.2, 0.4, 0.6};
  VpFrame frame_above{VpFrame::body};
  VpFrame frame_below{VpFrame::world};
  std::vector<double> speeds{4, 5, 6, 7, 8, 9, 10};
  bool tune_damping{true};  // otherwise model.damping_coefficient everywhere
  DutyFactorSchedule duty_factor;
  DampingSearch damping;
  int parallelism{0};  // 0: hardware concurrency

  VpTargetd vp_for(double radius) const;
  void validate() const;
};

struct SweepCell {
  double vp_radius{0};
  double speed{0};
  VpTargetd vp;
  double damping{0};
  bool converged{false};
  std::optional<ProtocolFailureInfo> failure;
  std::optional<ConvergedGait> gait;
  std::optional<StrideRecord> stride;  // last recorded periodic stride
  std::optional<StrideMetrics> metrics;
  std::vector<StrideMetrics> steady_metrics;  // every recorded periodic stride
  double vp_moment_error{0};
  // Largest relative change of DF, excursion and net works across the
  // recorded strides.
  double metric_spread{0};
};

struct SweepResult {
  std::vector<double> vp_radii;
  std::vector<double> speeds;
  std::vector<std::optional<DampingTuning>> tunings;  // per speed
  std::vector<std::string> tuning_failures;           // per speed, empty on success
  std::vector<SweepCell> cells;                       // speed-major, radii inner
  std::string config_hash;

  const SweepCell& cell(double vp_radius, double speed) const;
  std::size_t converged_count() const;
};

/// Candidate values for the coarse gain search; k_i follows k_p / 10.
struct GainGrid {
  std::vector<double> k_p{500, 1000, 2000, 4000};
  std::vector<double> k_d{100, 500, 2000};
  std::vector<double> k_xdot0{0, -0.005, -0.02};
  std::vector<double> k_xdot{0, -0.1, -0.3};
  std::vector<double> k_y{0, 0.5, 1};
  double ki_over_kp{0.1};

  std::size_t size() const;
  void validate() const;
};

struct GainCandidate {
  LegPlacementGains leg;
  PitchPidGains pid;
  int failed_cells{0};         // over the whole grid, evaluation stops at the first
  int strides_at_reference{0}; // protocol strides summed over the reference-speed cells
};

struct GainTuning {
  GainCandidate best;
  std::vector<GainCandidate> candidates;  // grid order
  std::vector<std::optional<DampingTuning>> damping;  // per plan speed
};

/// Coarse grid search over the PID and leg-placement gains. Each candidate
/// runs every r != 0 cell of the plan (damping tuned beforehand); the winner
/// has no failed cell and the fewest protocol strides at `reference_speed`.
/// Ties keep grid order. Throws SimulationError when no candidate survives.
GainTuning tune_gains(const SweepPlan& plan, const GainGrid& grid, double reference_speed = 5.0);

/// Runs a single cell: the protocol plus analysis of the recorded strides.
SweepCell run_cell(const ModelParamsd& model, const ControllerSettings& settings,
                   const VpTargetd& vp, double speed, const SimulationOptions& options = {});

/// Tunes each speed, then runs every cell. Cell failures are recorded, never
/// thrown. Results do not depend on the thread count.
SweepResult run_sweep(const SweepPlan& plan);

}  // namespace tslip
