#pragma once

#include <optional>
#include <string>
#include <vector>

#include "stplan/path.hpp"
#include "stplan/scenario.hpp"
#include "stplan/velocity.hpp"

namespace stplan::sim {

/// Ego pose and speed. `s` is the arc length along the reference line.
struct EgoState {
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;
  double v = 0.0;
  double s = 0.0;
};

/// One RK4 step of the kinematic bicycle; v is floored at 0. `s` is left alone.
EgoState step_vehicle(const EgoState& ego, double accel, double steer, double dt,
                      double wheelbase = 2.9);

/// A planning result expressed on a grid whose sample 0 sits at reference
/// arc length `origin`.
struct Plan {
  double origin = 0.0;
  path::SmoothedPath path;
  LimitProfile limits;
  velocity::ReferenceProfile reference;
  velocity::VelocityTrajectory profile;
};

struct Command {
  double accel = 0.0;      // after actuator clipping
  double accel_raw = 0.0;  // controller output before clipping
  double steer = 0.0;
  double v_plan = 0.0;     // v* at the ego
  double a_plan = 0.0;     // a* at the ego
  bool beyond_horizon = false;
};

/// Speed feedback on the planned profile plus pure pursuit on the planned path.
Command low_level_control(const EgoState& ego, const Plan& plan, const SimConfig& cfg,
                          const Params& params);

/// Oriented rectangle overlap test (separating axis).
struct Box {
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;
  double length = 4.5;
  double width = 1.8;
};
bool boxes_overlap(const Box& a, const Box& b);

enum class ConstraintSet { none, tmin, tmin_tmax, all };
std::optional<ConstraintSet> parse_constraint_set(const std::string& name);
std::string to_string(ConstraintSet c);

struct RunOptions {
  // Authored t_min/t_max plus signal deadlines for `all`; authored ones only
  // for `tmin_tmax`; authored t_min only for `tmin`.
  ConstraintSet constraints = ConstraintSet::all;
  bool cold_start = false;
  double budget_ms = 0.0;  // 0 disables the wall-clock budget
  std::optional<double> duration;
  std::optional<std::uint64_t> seed;
};

struct StageTimes {
  double lateral_ms = 0.0;
  double longitudinal_ms = 0.0;
  double preprocessing_ms = 0.0;
  double total_ms = 0.0;
};

struct CycleLog {
  int cycle = 0;
  double time = 0.0;
  EgoState ego;
  Command command;
  int path_iterations = 0;
  int profile_iterations = 0;
  bool replanned = false;
  double path_violation = 0.0;
  double profile_violation = 0.0;
  int obstacles = 0;
  int time_constraints = 0;
  StageTimes times;
  std::string note;
};

struct ActorState {
  std::string id;
  bool active = false;
  Box box;
  double speed = 0.0;
};

/// Obstacle handed to the velocity stage, in plan coordinates.
struct Obstacle {
  std::string id;
  double s = 0.0;
  double v = 0.0;
  bool is_static = false;
};

struct ArrivalRecord {
  std::string id;
  bool is_min = true;
  bool enforced = false;
  double s = 0.0;
  double bound = 0.0;
  std::optional<double> arrival;
  bool satisfied = true;
};

struct Verdict {
  bool collision = false;
  double collision_time = 0.0;
  std::string collision_with;
  std::vector<ArrivalRecord> arrivals;
  bool constraints_satisfied = true;
  double min_accel = 0.0;
  double max_accel = 0.0;
  double min_planned_accel = 0.0;
  double max_planned_accel = 0.0;
  int stop_line_violations = 0;
  int planner_failures = 0;
  int budget_overruns = 0;
};

struct ProfileSnapshot {
  int cycle = 0;
  double time = 0.0;
  Plan plan;
};

/// Deterministic closed loop: one planning cycle and one vehicle step per dt.
class Simulation {
 public:
  Simulation(Scenario scenario, RunOptions options = {});

  double time() const { return time_; }
  int cycle() const { return cycle_; }
  bool finished() const;
  const EgoState& ego() const { return ego_; }
  const Scenario& scenario() const { return scenario_; }
  const path::ReferenceLine& reference() const { return reference_; }
  const std::optional<Plan>& plan() const { return plan_; }
  const std::vector<CycleLog>& log() const { return log_; }
  const Verdict& verdict() const { return verdict_; }
  std::vector<ActorState> actors() const;

  /// Obstacles and time bounds the next planning cycle would see.
  std::vector<Obstacle> extract_obstacles(const path::SmoothedPath& path, double origin) const;
  std::vector<velocity::SpatioTemporalConstraint> time_constraints(double origin) const;

  /// Plans, controls and advances the world by one dt.
  const CycleLog& step();
  /// Replans at the current state without advancing.
  Plan plan_now();

 private:
  struct Planned {
    Plan plan;
    path::PathWarmStart path_warm;
    velocity::ProfileWarmStart profile_warm;
    int path_iterations = 0;
    int profile_iterations = 0;
    double path_violation = 0.0;
    double profile_violation = 0.0;
    int obstacles = 0;
    int time_constraints = 0;
    StageTimes times;
  };
  Planned plan_cycle() const;
  double legal_limit(double s) const;
  double d_safe() const;
  void update_signals();
  void spawn_actors();
  void record_arrivals(const EgoState& before, const EgoState& after, double t0);
  void check_collision();
  void finalize();

  Scenario scenario_;
  RunOptions options_;
  path::ReferenceLine reference_;
  EgoState ego_;
  double accel_ = 0.0;  // last executed command
  double time_ = 0.0;
  int cycle_ = 0;
  double duration_ = 0.0;

  double origin_ = 0.0;
  bool have_warm_ = false;
  std::optional<Plan> plan_;
  path::PathWarmStart path_warm_;
  velocity::ProfileWarmStart profile_warm_;
  std::vector<double> spawn_s_;
  std::vector<bool> placed_;
  std::vector<bool> committed_;  // per signal: too close to stop when it turned red

  std::vector<CycleLog> log_;
  Verdict verdict_;
  bool stopped_ = false;
};

struct RuntimeStats {
  double mean = 0.0;
  double stddev = 0.0;
  double max = 0.0;
  double p50 = 0.0;
  double p99 = 0.0;
};
RuntimeStats runtime_stats(const std::vector<double>& samples_ms);

struct RunResult {
  std::vector<CycleLog> cycles;
  std::vector<ProfileSnapshot> profiles;
  Verdict verdict;
  RuntimeStats lateral, longitudinal, preprocessing, total;
};

RunResult run_scenario(const Scenario& scenario, const RunOptions& options = {});

/// Reference polyline of the scenario after resampling and optional noise.
std::vector<path::Point> reference_points(const Scenario& scenario, std::uint64_t seed);

}  // namespace stplan::sim
