#pragma once

// Whole-body CoP trajectory planning for one double-support stance: landmark
// construction, short-horizon direct collocation segments, and the
// receding-horizon landmark-switching loop.

#include <array>
#include <string>
#include <vector>

#include "footcal/model.hpp"
#include "footcal/numopt.hpp"

namespace footcal {

struct PlannerConfig {
  /// States per segment, including the fixed start state.
  int horizon = 5;
  double cop_weight = 1e3;         // Q_c (diagonal, 1/m^2)
  double smoothness_weight = 1.0;  // Q_u (diagonal, 1/rad^2)
  double d_min = 0.005;            // m
  double arrival_radius = 0.005;   // m
  double cop_margin = 0.002;       // m, inside every sensing-polygon edge
  double max_transition = 0.05;    // rad per step and joint
  double landmark_inset = 0.25;    // fraction of foot length
  int max_steps = 100;
  /// Tolerance used by the independent checker.
  double feasibility_tolerance = 1e-6;
  numopt::PenaltyOptions penalty;
  numopt::NlsOptions inner;

  /// Throws kInvalidArgument on a malformed config.
  void validate() const;
};

struct LandmarkSet {
  /// p1..p4 in world coordinates, counter-clockwise.
  std::array<Vec2, 4> points;
  /// midpoints[k] lies between points[k] and points[(k + 1) % 4].
  std::array<Vec2, 4> midpoints;
};

LandmarkSet make_landmarks(const RobotModel& model, const DoubleSupportConfig& ds, double inset_fraction = 0.25);

struct Trajectory {
  std::vector<JointVector> q;   // M + 1 states
  std::vector<JointVector> u;   // M transitions
  std::vector<Vec2> cop;        // modeled CoP per state
  std::vector<int> target;      // target index pursued when each state was planned (0 for the start state)
  /// Largest constraint violation over all states (independent re-evaluation).
  double max_violation = 0.0;
};

struct SegmentResult {
  Trajectory segment;  // q[0] is the start state
  numopt::SolveReport report;
  /// True when the final CoP is strictly closer to the target than the start.
  bool progress = false;
};

/// Solves one collocation segment of cfg.horizon states from q_start toward target.
SegmentResult plan_segment(const RobotModel& model, const DoubleSupportConfig& ds, const JointVector& q_start,
                           const Vec2& target, const PlannerConfig& cfg, const JointVector& u_prev = {});

/// Quasi-static posture that realizes the stance with the CoP at the centre
/// of the 8 sensor points. Throws kSolverStall when no feasible posture is found.
JointVector reach_double_support(const RobotModel& model, const DoubleSupportConfig& ds, const PlannerConfig& cfg);

struct LandmarkVisit {
  int step = 0;
  int target = 0;        // index into PlanResult::targets
  double d_prev = 0.0;   // distance to this target before the step
  double d = 0.0;        // distance after the step
  bool switched = false;
};

struct PlanResult {
  Trajectory trajectory;
  std::vector<Vec2> targets;  // nearest midpoint, four landmarks, midpoint again
  LandmarkSet landmarks;
  std::vector<LandmarkVisit> log;
  bool complete = false;
};

/// Receding-horizon landmark tracking. Switches target when the CoP arrives
/// within the radius or stops approaching it.
PlanResult plan_trajectory(const RobotModel& model, const DoubleSupportConfig& ds, const JointVector& q_init,
                           const PlannerConfig& cfg);

struct StateCheck {
  double min_cop_margin = 0.0;     // m, relative to the configured margin
  double limit_violation = 0.0;    // rad
  double min_clearance = 0.0;      // m, capsule distance minus d_min
  double foot_residual = 0.0;      // max |pose error|
  bool ok = false;
};

/// Re-evaluates the stability, limit, collision and foot-transform constraints
/// on one state without touching the solver.
StateCheck check_state(const RobotModel& model, const DoubleSupportConfig& ds, const JointVector& q,
                       const PlannerConfig& cfg);

struct CertificationReport {
  int states = 0;
  int failed_states = 0;
  double worst_cop_margin = 0.0;
  double worst_limit_violation = 0.0;
  double worst_clearance = 0.0;
  double worst_foot_residual = 0.0;
  double worst_transition = 0.0;  // max |u|, rad
  bool transitions_exact = false;
  bool switch_rule_ok = false;
  bool log_monotone = false;
  bool reached_last = false;
  bool counter_clockwise = false;
  std::vector<std::string> failures;
  bool ok() const { return failures.empty(); }
};

/// Independent certification of a plan: every state, the transition identity
/// and bound, and the switch rule "d < r or d_prev - d < 0" on every logged switch.
CertificationReport certify_plan(const RobotModel& model, const DoubleSupportConfig& ds, const PlanResult& plan,
                                 const PlannerConfig& cfg);

}  // namespace footcal
