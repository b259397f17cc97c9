#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace stplan::sim {

struct GridConfig {
  double delta_s = 0.5;
  double horizon = 125.0;

  int samples() const;
  bool operator==(const GridConfig&) const = default;
};

/// Objective and limit parameters; defaults are the published tuning.
struct Params {
  double v_min = 1.0;
  double a_min = -2.5;
  double a_max = 2.5;
  double a_lat_hat = 2.5;
  double j_min = -1.5;
  double j_max = 1.5;
  double kappa_min = -3.0;
  double kappa_max = 3.0;
  double w_d = 1.0;
  double w_kappa = 20.0;
  double w_v = 0.1;
  double w_a = 1.0;
  double alpha = 10.0;
  double beta = 5e-3;
  bool operator==(const Params&) const = default;
};

struct SolverConfig {
  int n_iters = 5;
  double tol = 1e-6;
  double mu_default = 1e2;
  double mu_tmax = 1e3;
  double lambda_max_default = 1e2;
  double lambda_max_tmax = 1e3;
  bool operator==(const SolverConfig&) const = default;
};

struct XY {
  double x = 0.0;
  double y = 0.0;
  bool operator==(const XY&) const = default;
};

struct ReferenceConfig {
  std::vector<XY> points;
  // Lateral Gaussian noise, drawn once every `noise_spacing` meters
  // (0: every grid sample) and linearly interpolated in between.
  double noise_sigma = 0.0;
  double noise_spacing = 0.0;
  std::uint64_t seed = 0;
  bool operator==(const ReferenceConfig&) const = default;
};

/// Legal limit `v` from reference arc length `from` on, until the next segment.
struct SpeedLimit {
  double from = 0.0;
  double v = 13.89;
  bool operator==(const SpeedLimit&) const = default;
};

/// Constant-velocity traffic participant. Either rides the reference line
/// (s, lateral, optionally relative to the ego at spawn) or moves along a
/// fixed heading from a free pose.
struct Actor {
  std::string id;
  enum class Mode { reference, pose } mode = Mode::reference;
  double s = 0.0;
  double lateral = 0.0;
  bool relative_to_ego = false;
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;
  double speed = 0.0;
  double spawn_time = 0.0;
  double length = 4.5;
  double width = 1.8;
  bool operator==(const Actor&) const = default;
};

struct SignalPhase {
  double t = 0.0;
  bool red = false;
  bool operator==(const SignalPhase&) const = default;
};

/// Traffic light at reference arc length `s`. Phases switch at their start
/// times; before the first phase the light is green. With `emit_deadline`
/// a green light emits an arrival deadline at the next red switch.
struct Signal {
  std::string id;
  double s = 0.0;
  std::vector<SignalPhase> schedule;
  bool emit_deadline = false;

  bool red_at(double t) const;
  std::optional<double> next_red_after(double t) const;
  bool operator==(const Signal&) const = default;
};

/// Arrival-time bound at reference arc length `s`, absolute simulation time `t`.
struct TimeConstraint {
  std::string id;
  bool is_min = true;
  double s = 0.0;
  double t = 0.0;
  bool operator==(const TimeConstraint&) const = default;
};

struct EgoConfig {
  double s = 0.0;
  double lateral = 0.0;
  double v = 0.0;
  bool operator==(const EgoConfig&) const = default;
};

/// Closed-loop settings.
struct SimConfig {
  double duration = 20.0;
  double dt = 0.01;
  double wheelbase = 2.9;
  double k_p = 0.5;
  double lookahead_min = 3.0;
  double lookahead_time = 0.5;
  double max_steer = 0.6;
  double d_safe_base = 6.0;
  double d_safe_time = 1.0;
  double lateral_gate = 2.0;
  int profile_stride = 100;
  // How a leading actor limits speed: `gap` scales v_o by gap / d_safe,
  // `ramp` ramps linearly to standstill at the actor.
  enum class Follow { gap, ramp } follow = Follow::gap;
  bool operator==(const SimConfig&) const = default;
};

struct Scenario {
  std::string name;
  GridConfig grid;
  Params params;
  SolverConfig solver;
  ReferenceConfig reference;
  std::vector<SpeedLimit> speed_limits;
  std::vector<Actor> actors;
  std::vector<Signal> signals;
  std::vector<TimeConstraint> spatiotemporal;
  EgoConfig ego;
  SimConfig sim;

  /// Throws ScenarioError on inconsistent values.
  void validate() const;
  bool operator==(const Scenario&) const = default;
};

/// `where` is a JSON pointer into the scenario document, empty if unknown.
class ScenarioError : public std::runtime_error {
 public:
  ScenarioError(const std::string& message, std::string where = {}, int line = 0);
  const std::string& message() const { return message_; }
  const std::string& where() const { return where_; }
  int line() const { return line_; }

 private:
  std::string message_;
  std::string where_;
  int line_;
};

/// Strict parse: unknown keys and wrong types are errors, missing values take
/// defaults. Diagnostics carry the offending line when it can be located.
Scenario parse_scenario(const std::string& text);
Scenario load_scenario(const std::string& path);
std::string dump_scenario(const Scenario& s);

}  // namespace stplan::sim
