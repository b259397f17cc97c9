#pragma once

#include <span>
#include <string>
#include <vector>

#include "stplan/al.hpp"
#include "stplan/grid.hpp"
#include "stplan/ilqr.hpp"

namespace stplan::velocity {

/// Cost weights and dynamic limits of the longitudinal profile.
struct ProfileWeights {
  double w_v = 0.1;
  double w_a = 1.0;
  double v_min = 1.0;
  double a_min = -2.5;
  double a_max = 2.5;
  double j_min = -1.5;
  double j_max = 1.5;

  void validate() const;
};

struct ReferenceProfile {
  SpatialGrid grid;
  std::vector<double> v;
  std::vector<double> v_bwd;
  std::vector<double> v_fwd;
};

enum class TimeBound { min, max };

/// Arrival-time bound at arc length s (grid frame): t(s) >= t for `min`,
/// t(s) <= t for `max`. alpha/beta shape the tracking weight for `min`.
struct SpatioTemporalConstraint {
  std::string id;
  TimeBound kind = TimeBound::max;
  double s = 0.0;
  double t = 0.0;
  double alpha = 10.0;
  double beta = 5e-3;
};

struct VelocityTrajectory {
  SpatialGrid grid;
  std::vector<double> v;
  std::vector<double> t;
  std::vector<double> a;
  bool standstill_postprocessed = false;

  int size() const { return static_cast<int>(v.size()); }
};

struct ProfileOptions {
  ProfileWeights weights;
  double mu = 1e2;
  double lambda_max = 1e2;
  double mu_tmax = 1e3;
  double lambda_max_tmax = 1e3;
  // Divisor floor in the rollout, well below v_min.
  double v_guard = 0.1;
  ilqr::Settings solver;
};

using ProfileWarmStart = al::WarmStart<2, 1>;

struct ProfileResult {
  VelocityTrajectory trajectory;
  ProfileWarmStart solution;
  ilqr::Report report;
  std::vector<std::string> constraint_keys;
  std::vector<double> max_violation;

  double violation(const std::string& key) const;
};

/// v_lim(s_o) <- min(v_lim(s_o), v_o) at the nearest sample; no-op outside
/// the grid.
void apply_static_constraint(LimitProfile& limits, double s_o, double v_o);

/// Linear ramp from v_o at s_o - d_safe down to 0 at s_o, min-combined into
/// the limit. s_o snaps to the grid when it lies on it.
void apply_dynamic_constraint(LimitProfile& limits, double s_o, double v_o, double d_safe);

/// Gap-scaled variant: over [s_o - d_safe, s_o] the limit becomes
/// v_o * min(1, (s_o - s_ego) / d_safe), one value for the whole interval.
void apply_gap_constraint(LimitProfile& limits, double s_o, double v_o, double d_safe,
                          double s_ego);

/// Distance-domain advance of a jerk-limited build-up: starting from (v, a)
/// with a >= 0, jerk `jerk` > 0 raises a until `a_cap`, over `distance`.
/// Exact for piecewise-constant jerk.
struct BuildUpState {
  double v = 0.0;
  double a = 0.0;
};
BuildUpState advance_build_up(BuildUpState s, double jerk, double a_cap, double distance);

/// Backward (deceleration, built up from the horizon end) and forward
/// (acceleration from v_start) jerk-limited sweeps, clamped to v_lim after
/// each step; v_ref is their pointwise minimum. The forward sweep starts at
/// acceleration a_start clipped to [0, a_max].
ReferenceProfile generate_reference(const LimitProfile& limits, double v_start,
                                    const ProfileWeights& weights, double a_start = 0.0);

/// (t_min - t) * (v - v_min); satisfied when <= 0.
double tmin_residual(double t_at_sc, double v_at_sc, double t_min, double v_min);

/// min(1, ((s - s_c - alpha) * beta)^2)
double tmin_weight(double s, double s_c, double alpha, double beta);

/// Velocity-over-space problem: state [v, t], control a.
class VelocityProblem final : public ilqr::Problem<2, 1> {
 public:
  VelocityProblem(const SpatialGrid& grid, std::vector<double> v_ref,
                  std::vector<double> w_v, double w_a, double v_start, double v_guard);

  int horizon() const override { return grid_.samples; }
  State initial_state() const override { return {v_start_, 0.0}; }
  State dynamics(const State& x, const Control& u) const override;
  void linearize(const State& x, const Control& u, StateMatrix& A, InputMatrix& B) const override;
  double cost(const State& x, const Control& u, int k) const override;
  void expand_cost(const State& x, const Control& u, int k,
                   ilqr::CostExpansion<2, 1>& e) const override;

 private:
  SpatialGrid grid_;
  std::vector<double> v_ref_;
  std::vector<double> w_v_;
  double w_a_;
  double v_start_;
  double v_guard_;
};

/// (t_min - t) * (v - v_min) <= 0 at one knot.
class MinArrivalConstraint final : public al::Constraint<2, 1> {
 public:
  MinArrivalConstraint(double t_min, double v_min) : t_min_(t_min), v_min_(v_min) {}

  double value(const T::State& x, const T::Control& u, int k) const override;
  void gradient(const T::State& x, const T::Control& u, int k, T::State& dx,
                T::Control& du) const override;
  void hessian(const T::State& x, const T::Control& u, int k, T::StateMatrix& dxx,
               T::ControlMatrix& duu, T::FeedbackMatrix& dux) const override;

 private:
  double t_min_;
  double v_min_;
};

/// Tracking weight per sample: w_v, or the pointwise minimum of the shaped
/// weights of all min-arrival constraints when any is present.
std::vector<double> tracking_weights(const SpatialGrid& grid, double w_v,
                                     std::span<const SpatioTemporalConstraint> constraints);

/// Box, reference and arrival-time constraints of the profile problem.
/// Constraints located off the grid are skipped.
al::ConstraintSet<2, 1> profile_constraints(const ReferenceProfile& ref,
                                            std::span<const SpatioTemporalConstraint> constraints,
                                            const ProfileOptions& options);

ProfileResult optimize_profile(const ReferenceProfile& ref, double v_start,
                               std::span<const SpatioTemporalConstraint> constraints,
                               const ProfileOptions& options,
                               const ProfileWarmStart* warm = nullptr);

/// Zeroes samples at or just above v_min whose nearest limit sample is a
/// standstill, freezing t over each stopped run.
VelocityTrajectory postprocess_standstill(VelocityTrajectory traj, const LimitProfile& limits,
                                          double v_min);

}  // namespace stplan::velocity
