#include "stplan/velocity.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace stplan::velocity {

void ProfileWeights::validate() const {
  if (!(w_v > 0.0) || !(w_a > 0.0)) throw std::invalid_argument("profile weights must be positive");
  if (!(a_min < 0.0 && a_max > 0.0)) throw std::invalid_argument("need a_min < 0 < a_max");
  if (!(j_min < 0.0 && j_max > 0.0)) throw std::invalid_argument("need j_min < 0 < j_max");
  if (!(v_min > 0.0)) throw std::invalid_argument("v_min must be positive");
}

double ProfileResult::violation(const std::string& key) const {
  for (std::size_t i = 0; i < constraint_keys.size(); ++i)
    if (constraint_keys[i] == key) return max_violation[i];
  return 0.0;
}

void apply_static_constraint(LimitProfile& limits, double s_o, double v_o) {
  if (v_o < 0.0) throw std::invalid_argument("apply_static_constraint: v_o must be >= 0");
  const int k = limits.grid.nearest(s_o);
  if (k < 0) return;
  limits.v[k] = std::min(limits.v[k], v_o);
}

void apply_dynamic_constraint(LimitProfile& limits, double s_o, double v_o, double d_safe) {
  if (v_o < 0.0 || !(d_safe > 0.0))
    throw std::invalid_argument("apply_dynamic_constraint: need v_o >= 0 and d_safe > 0");
  const SpatialGrid& g = limits.grid;
  if (s_o < g.s0) return;
  const int snap = g.nearest(s_o);
  if (snap >= 0) s_o = g.at(snap);

  const double lo = s_o - d_safe;
  for (int k = 0; k < g.samples; ++k) {
    const double s = g.at(k);
    if (s < lo - 1e-9 || s > s_o + 1e-9) continue;
    const double ramp = v_o * std::min(1.0, std::max(0.0, s_o - s) / d_safe);
    limits.v[k] = std::min(limits.v[k], ramp);
  }
}

void apply_gap_constraint(LimitProfile& limits, double s_o, double v_o, double d_safe,
                          double s_ego) {
  if (v_o < 0.0 || !(d_safe > 0.0))
    throw std::invalid_argument("apply_gap_constraint: need v_o >= 0 and d_safe > 0");
  const SpatialGrid& g = limits.grid;
  if (s_o < g.s0) return;
  const double cap = v_o * std::clamp((s_o - s_ego) / d_safe, 0.0, 1.0);
  for (int k = 0; k < g.samples; ++k) {
    const double s = g.at(k);
    if (s >= s_o - d_safe - 1e-9 && s <= s_o + 1e-9) limits.v[k] = std::min(limits.v[k], cap);
  }
}

BuildUpState advance_build_up(BuildUpState st, double jerk, double a_cap, double distance) {
  const double v = std::max(st.v, 0.0);
  const double a = std::clamp(st.a, 0.0, a_cap);
  if (distance <= 0.0) return {v, a};

  if (a >= a_cap) return {std::sqrt(v * v + 2.0 * a_cap * distance), a_cap};

  const double tau = (a_cap - a) / jerk;
  const double d_ramp = v * tau + 0.5 * a * tau * tau + jerk * tau * tau * tau / 6.0;
  if (d_ramp < distance) {
    const double v1 = v + a * tau + 0.5 * jerk * tau * tau;
    return {std::sqrt(v1 * v1 + 2.0 * a_cap * (distance - d_ramp)), a_cap};
  }

  // Elapsed time within the ramp: v dt + a dt^2/2 + j dt^3/6 = distance.
  auto g = [&](double dt) { return v * dt + 0.5 * a * dt * dt + jerk * dt * dt * dt / 6.0 - distance; };
  auto dg = [&](double dt) { return v + a * dt + 0.5 * jerk * dt * dt; };
  double lo = 0.0;
  double hi = tau;
  double dt = v > 0.0 ? std::min(distance / v, tau) : std::cbrt(6.0 * distance / jerk);
  dt = std::clamp(dt, lo, hi);
  for (int it = 0; it < 60; ++it) {
    const double f = g(dt);
    if (f > 0.0) hi = dt; else lo = dt;
    const double d = dg(dt);
    double next = d > 0.0 ? dt - f / d : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - dt) <= 1e-15 * std::max(1.0, dt)) {
      dt = next;
      break;
    }
    dt = next;
  }
  return {v + a * dt + 0.5 * jerk * dt * dt, a + jerk * dt};
}

ReferenceProfile generate_reference(const LimitProfile& limits, double v_start,
                                    const ProfileWeights& w, double a_start) {
  w.validate();
  const SpatialGrid& g = limits.grid;
  const int K = g.samples;
  if (K < 1 || static_cast<int>(limits.v.size()) != K)
    throw std::invalid_argument("generate_reference: limit profile does not match its grid");

  ReferenceProfile ref;
  ref.grid = g;
  ref.v_bwd.resize(K);
  ref.v_fwd.resize(K);
  ref.v.resize(K);

  // Backward: reversed-coordinate build-up with |j_min|, capped by |a_min|.
  BuildUpState st{limits.v[K - 1], 0.0};
  ref.v_bwd[K - 1] = st.v;
  for (int k = K - 2; k >= 0; --k) {
    st = advance_build_up(st, -w.j_min, -w.a_min, g.ds);
    if (st.v > limits.v[k]) {
      st.v = limits.v[k];
      st.a = 0.0;
    }
    ref.v_bwd[k] = st.v;
  }

  st = {std::min(std::max(v_start, w.v_min), limits.v[0]), std::clamp(a_start, 0.0, w.a_max)};
  ref.v_fwd[0] = st.v;
  for (int k = 1; k < K; ++k) {
    st = advance_build_up(st, w.j_max, w.a_max, g.ds);
    if (st.v > limits.v[k]) {
      st.v = limits.v[k];
      st.a = 0.0;
    }
    ref.v_fwd[k] = st.v;
  }

  for (int k = 0; k < K; ++k) ref.v[k] = std::min(ref.v_bwd[k], ref.v_fwd[k]);
  return ref;
}

double tmin_residual(double t_at_sc, double v_at_sc, double t_min, double v_min) {
  return (t_min - t_at_sc) * (v_at_sc - v_min);
}

double tmin_weight(double s, double s_c, double alpha, double beta) {
  const double z = (s - s_c - alpha) * beta;
  return std::min(1.0, z * z);
}

VelocityProblem::VelocityProblem(const SpatialGrid& grid, std::vector<double> v_ref,
                                 std::vector<double> w_v, double w_a, double v_start,
                                 double v_guard)
    : grid_(grid),
      v_ref_(std::move(v_ref)),
      w_v_(std::move(w_v)),
      w_a_(w_a),
      v_start_(v_start),
      v_guard_(v_guard) {
  if (static_cast<int>(v_ref_.size()) != grid.samples ||
      static_cast<int>(w_v_.size()) != grid.samples)
    throw std::invalid_argument("VelocityProblem: reference and weights must match the grid");
}

VelocityProblem::State VelocityProblem::dynamics(const State& x, const Control& u) const {
  const double vg = std::max(x(0), v_guard_);
  return {x(0) + grid_.ds * u(0) / vg, x(1) + grid_.ds / vg};
}

void VelocityProblem::linearize(const State& x, const Control& u, StateMatrix& A,
                                InputMatrix& B) const {
  const double ds = grid_.ds;
  A.setIdentity();
  if (x(0) > v_guard_) {
    const double v = x(0);
    A(0, 0) = 1.0 - ds * u(0) / (v * v);
    A(1, 0) = -ds / (v * v);
    B << ds / v, 0.0;
  } else {
    B << ds / v_guard_, 0.0;
  }
}

double VelocityProblem::cost(const State& x, const Control& u, int k) const {
  const double ev = x(0) - v_ref_[k];
  return grid_.ds * (w_v_[k] * ev * ev + w_a_ * u(0) * u(0));
}

void VelocityProblem::expand_cost(const State& x, const Control& u, int k,
                                  ilqr::CostExpansion<2, 1>& e) const {
  const double ds = grid_.ds;
  e.x << 2.0 * ds * w_v_[k] * (x(0) - v_ref_[k]), 0.0;
  e.u(0) = 2.0 * ds * w_a_ * u(0);
  e.xx.setZero();
  e.xx(0, 0) = 2.0 * ds * w_v_[k];
  e.uu(0, 0) = 2.0 * ds * w_a_;
  e.ux.setZero();
}

double MinArrivalConstraint::value(const T::State& x, const T::Control&, int) const {
  return tmin_residual(x(1), x(0), t_min_, v_min_);
}

void MinArrivalConstraint::gradient(const T::State& x, const T::Control&, int, T::State& dx,
                                    T::Control& du) const {
  dx << t_min_ - x(1), -(x(0) - v_min_);
  du.setZero();
}

void MinArrivalConstraint::hessian(const T::State&, const T::Control&, int, T::StateMatrix& dxx,
                                   T::ControlMatrix& duu, T::FeedbackMatrix& dux) const {
  dxx << 0.0, -1.0, -1.0, 0.0;
  duu.setZero();
  dux.setZero();
}

std::vector<double> tracking_weights(const SpatialGrid& grid, double w_v,
                                     std::span<const SpatioTemporalConstraint> constraints) {
  std::vector<double> w(grid.samples, w_v);
  bool shaped = false;
  for (const auto& c : constraints) {
    if (c.kind != TimeBound::min) continue;
    const int kc = grid.nearest(c.s);
    if (kc < 0) continue;
    const double sc = grid.at(kc);
    for (int k = 0; k < grid.samples; ++k) {
      const double wk = tmin_weight(grid.at(k), sc, c.alpha, c.beta);
      w[k] = shaped ? std::min(w[k], wk) : wk;
    }
    shaped = true;
  }
  return w;
}

al::ConstraintSet<2, 1> profile_constraints(const ReferenceProfile& ref,
                                            std::span<const SpatioTemporalConstraint> constraints,
                                            const ProfileOptions& o) {
  using Affine = al::AffineConstraint<2, 1>;
  using Vec2 = Eigen::Vector2d;
  using Vec1 = Eigen::Matrix<double, 1, 1>;
  const auto& w = o.weights;
  const SpatialGrid& g = ref.grid;

  std::vector<double> neg_ref(ref.v.size());
  std::transform(ref.v.begin(), ref.v.end(), neg_ref.begin(), [](double v) { return -v; });

  al::ConstraintSet<2, 1> set;
  set.push_back({"v_ref", std::make_shared<Affine>(Vec2(1, 0), Vec1(0), std::move(neg_ref)), o.mu,
                 o.lambda_max, {}});
  set.push_back({"v_min", std::make_shared<Affine>(Vec2(-1, 0), Vec1(0), w.v_min), o.mu,
                 o.lambda_max, {}});
  set.push_back({"a_max", std::make_shared<Affine>(Vec2(0, 0), Vec1(1), -w.a_max), o.mu,
                 o.lambda_max, {}});
  set.push_back({"a_min", std::make_shared<Affine>(Vec2(0, 0), Vec1(-1), w.a_min), o.mu,
                 o.lambda_max, {}});

  for (const auto& c : constraints) {
    const int kc = g.nearest(c.s);
    if (kc < 0) continue;
    std::vector<bool> mask(g.samples, false);
    mask[kc] = true;
    if (c.kind == TimeBound::max) {
      set.push_back({"t_max:" + c.id, std::make_shared<Affine>(Vec2(0, 1), Vec1(0), -c.t),
                     o.mu_tmax, o.lambda_max_tmax, std::move(mask)});
    } else {
      set.push_back({"t_min:" + c.id, std::make_shared<MinArrivalConstraint>(c.t, w.v_min), o.mu,
                     o.lambda_max, std::move(mask)});
    }
  }
  return set;
}

ProfileResult optimize_profile(const ReferenceProfile& ref, double v_start,
                               std::span<const SpatioTemporalConstraint> constraints,
                               const ProfileOptions& options, const ProfileWarmStart* warm) {
  options.weights.validate();
  const SpatialGrid& g = ref.grid;
  const int K = g.samples;
  const double v0 = std::max(v_start, options.weights.v_min);

  VelocityProblem problem(g, ref.v, tracking_weights(g, options.weights.w_v, constraints),
                          options.weights.w_a, v0, options.v_guard);
  const auto set = profile_constraints(ref, constraints, options);

  ProfileWarmStart start;
  if (warm && static_cast<int>(warm->controls.size()) == K) {
    start = *warm;
  } else {
    start.controls.assign(K, Eigen::Matrix<double, 1, 1>::Zero());
    start.multipliers = al::ALState::zeros(K, al::keys_of(set));
  }

  auto sol = al::solve_constrained<2, 1>(problem, set, start, options.solver);

  ProfileResult out;
  out.trajectory.grid = g;
  out.trajectory.v.resize(K);
  out.trajectory.t.resize(K);
  out.trajectory.a.resize(K);
  for (int k = 0; k < K; ++k) {
    out.trajectory.v[k] = sol.trajectory.states[k](0);
    out.trajectory.t[k] = sol.trajectory.states[k](1);
    out.trajectory.a[k] = sol.trajectory.controls[k](0);
  }
  out.constraint_keys = al::keys_of(set);
  out.max_violation = std::move(sol.max_violation);
  out.solution.controls = std::move(sol.trajectory.controls);
  out.solution.multipliers = std::move(sol.multipliers);
  out.report = std::move(sol.report);
  return out;
}

VelocityTrajectory postprocess_standstill(VelocityTrajectory traj, const LimitProfile& limits,
                                          double v_min) {
  constexpr double kBand = 0.05;
  bool in_run = false;
  double frozen_t = 0.0;
  for (int k = 0; k < traj.size(); ++k) {
    const int j = limits.grid.clamp_index(traj.grid.at(k));
    const bool stop = limits.v[j] <= 0.0 && traj.v[k] <= v_min + kBand;
    if (!stop) {
      in_run = false;
      continue;
    }
    if (!in_run) frozen_t = traj.t[k];
    in_run = true;
    traj.v[k] = 0.0;
    traj.t[k] = frozen_t;
    traj.standstill_postprocessed = true;
  }
  return traj;
}

}  // namespace stplan::velocity
