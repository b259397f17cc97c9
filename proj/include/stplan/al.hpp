#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "stplan/ilqr.hpp"

namespace stplan::al {

/// Scalar inequality h(x, u, k) <= 0.
template <int Nx, int Nu>
class Constraint {
 public:
  using T = ilqr::Types<Nx, Nu>;

  virtual ~Constraint() = default;

  virtual double value(const typename T::State& x, const typename T::Control& u, int k) const = 0;
  virtual void gradient(const typename T::State& x, const typename T::Control& u, int k,
                        typename T::State& dx, typename T::Control& du) const = 0;

  // Linear constraints keep the zero default.
  virtual void hessian(const typename T::State&, const typename T::Control&, int,
                       typename T::StateMatrix& dxx, typename T::ControlMatrix& duu,
                       typename T::FeedbackMatrix& dux) const {
    dxx.setZero();
    duu.setZero();
    dux.setZero();
  }
};

/// h = cx.x + cu.u + offset_k.
template <int Nx, int Nu>
class AffineConstraint final : public Constraint<Nx, Nu> {
 public:
  using T = ilqr::Types<Nx, Nu>;

  AffineConstraint(typename T::State cx, typename T::Control cu, std::vector<double> offsets)
      : cx_(std::move(cx)), cu_(std::move(cu)), offsets_(std::move(offsets)) {}

  AffineConstraint(typename T::State cx, typename T::Control cu, double offset)
      : AffineConstraint(std::move(cx), std::move(cu), std::vector<double>{offset}) {}

  double value(const typename T::State& x, const typename T::Control& u, int k) const override {
    return cx_.dot(x) + cu_.dot(u) + offset(k);
  }

  void gradient(const typename T::State&, const typename T::Control&, int,
                typename T::State& dx, typename T::Control& du) const override {
    dx = cx_;
    du = cu_;
  }

 private:
  double offset(int k) const { return offsets_.size() == 1 ? offsets_.front() : offsets_[k]; }

  typename T::State cx_;
  typename T::Control cu_;
  std::vector<double> offsets_;
};

template <int Nx, int Nu>
struct ConstraintTerm {
  std::string key;
  std::shared_ptr<const Constraint<Nx, Nu>> function;
  double mu = 1e2;
  double lambda_max = 1e2;
  // Knots the constraint binds; empty means every knot.
  std::vector<bool> mask;

  bool binds(int k) const { return mask.empty() || mask[k]; }
};

template <int Nx, int Nu>
using ConstraintSet = std::vector<ConstraintTerm<Nx, Nu>>;

/// Lagrange multiplier estimates, one column per constraint term.
struct ALState {
  Eigen::MatrixXd multipliers;  // K x I
  std::vector<std::string> keys;

  static ALState zeros(int K, std::vector<std::string> keys) {
    ALState s;
    s.multipliers = Eigen::MatrixXd::Zero(K, static_cast<Eigen::Index>(keys.size()));
    s.keys = std::move(keys);
    return s;
  }

  int horizon() const { return static_cast<int>(multipliers.rows()); }
  int size() const { return static_cast<int>(multipliers.cols()); }
};

template <int Nx, int Nu>
std::vector<std::string> keys_of(const ConstraintSet<Nx, Nu>& constraints) {
  std::vector<std::string> keys;
  keys.reserve(constraints.size());
  for (const auto& c : constraints) keys.push_back(c.key);
  return keys;
}

/// Re-indexes multiplier columns by key onto `keys`; unknown keys start at 0
/// and a horizon mismatch resets everything.
inline ALState match_keys(const ALState& state, int K, const std::vector<std::string>& keys) {
  ALState out = ALState::zeros(K, keys);
  if (state.horizon() != K) return out;
  for (std::size_t j = 0; j < keys.size(); ++j) {
    auto it = std::find(state.keys.begin(), state.keys.end(), keys[j]);
    if (it != state.keys.end())
      out.multipliers.col(static_cast<Eigen::Index>(j)) =
          state.multipliers.col(static_cast<Eigen::Index>(it - state.keys.begin()));
  }
  return out;
}

/// Penalty rule for one constraint: active iff violated or multiplier > 0.
inline bool term_active(double h, double lambda) { return h > 0.0 || lambda > 0.0; }

/// lambda*h + mu*h^2 when active, 0 otherwise.
inline double penalty(double h, double lambda, double mu) {
  return term_active(h, lambda) ? lambda * h + mu * h * h : 0.0;
}

/// Base cost plus the augmented terms of every constraint binding knot k.
template <int Nx, int Nu>
class AugmentedProblem final : public ilqr::Problem<Nx, Nu> {
 public:
  using T = ilqr::Types<Nx, Nu>;
  using State = typename T::State;
  using Control = typename T::Control;

  AugmentedProblem(const ilqr::Problem<Nx, Nu>& base, const ConstraintSet<Nx, Nu>& constraints,
                   const ALState& state)
      : base_(base), constraints_(constraints), state_(state) {
    if (state.horizon() != base.horizon() || state.size() != static_cast<int>(constraints.size()))
      throw std::invalid_argument("AugmentedProblem: multiplier matrix does not match constraints");
  }

  int horizon() const override { return base_.horizon(); }
  State initial_state() const override { return base_.initial_state(); }
  State dynamics(const State& x, const Control& u) const override { return base_.dynamics(x, u); }
  void linearize(const State& x, const Control& u, typename T::StateMatrix& A,
                 typename T::InputMatrix& B) const override {
    base_.linearize(x, u, A, B);
  }

  double cost(const State& x, const Control& u, int k) const override {
    return base_.cost(x, u, k) + constraint_cost(x, u, k);
  }

  double constraint_cost(const State& x, const Control& u, int k) const {
    double J = 0.0;
    for (std::size_t i = 0; i < constraints_.size(); ++i) {
      const auto& c = constraints_[i];
      if (!c.binds(k)) continue;
      J += penalty(c.function->value(x, u, k), lambda(k, i), c.mu);
    }
    return J;
  }

  void expand_cost(const State& x, const Control& u, int k,
                   ilqr::CostExpansion<Nx, Nu>& e) const override {
    base_.expand_cost(x, u, k, e);
    State hx;
    Control hu;
    typename T::StateMatrix hxx;
    typename T::ControlMatrix huu;
    typename T::FeedbackMatrix hux;
    for (std::size_t i = 0; i < constraints_.size(); ++i) {
      const auto& c = constraints_[i];
      if (!c.binds(k)) continue;
      const double h = c.function->value(x, u, k);
      const double lam = lambda(k, i);
      if (!term_active(h, lam)) continue;

      c.function->gradient(x, u, k, hx, hu);
      const double w = lam + 2.0 * c.mu * h;
      e.x += w * hx;
      e.u += w * hu;
      e.xx += 2.0 * c.mu * hx * hx.transpose();
      e.uu += 2.0 * c.mu * hu * hu.transpose();
      e.ux += 2.0 * c.mu * hu * hx.transpose();

      c.function->hessian(x, u, k, hxx, huu, hux);
      e.xx += w * hxx;
      e.uu += w * huu;
      e.ux += w * hux;
    }
  }

 private:
  double lambda(int k, std::size_t i) const {
    return state_.multipliers(k, static_cast<Eigen::Index>(i));
  }

  const ilqr::Problem<Nx, Nu>& base_;
  const ConstraintSet<Nx, Nu>& constraints_;
  const ALState& state_;
};

/// One clamped multiplier step: lambda <- clamp(lambda + mu*h, 0, lambda_max).
template <int Nx, int Nu>
ALState update_multipliers(const ALState& state, const ilqr::Trajectory<Nx, Nu>& traj,
                           const ConstraintSet<Nx, Nu>& constraints) {
  ALState out = state;
  const int K = traj.size();
  for (std::size_t i = 0; i < constraints.size(); ++i) {
    const auto& c = constraints[i];
    const auto col = static_cast<Eigen::Index>(i);
    for (int k = 0; k < K; ++k) {
      if (!c.binds(k)) continue;
      const double h = c.function->value(traj.states[k], traj.controls[k], k);
      out.multipliers(k, col) =
          std::clamp(state.multipliers(k, col) + c.mu * h, 0.0, c.lambda_max);
    }
  }
  return out;
}

/// max_k h_i^+ per constraint.
template <int Nx, int Nu>
std::vector<double> max_violations(const ilqr::Trajectory<Nx, Nu>& traj,
                                   const ConstraintSet<Nx, Nu>& constraints) {
  std::vector<double> v(constraints.size(), 0.0);
  for (std::size_t i = 0; i < constraints.size(); ++i) {
    const auto& c = constraints[i];
    for (int k = 0; k < traj.size(); ++k) {
      if (!c.binds(k)) continue;
      v[i] = std::max(v[i], c.function->value(traj.states[k], traj.controls[k], k));
    }
  }
  return v;
}

template <int Nx, int Nu>
struct WarmStart {
  std::vector<typename ilqr::Types<Nx, Nu>::Control> controls;
  ALState multipliers;
};

template <int Nx, int Nu>
struct ConstrainedSolution {
  ilqr::Trajectory<Nx, Nu> trajectory;
  ALState multipliers;
  ilqr::Report report;
  std::vector<double> max_violation;  // per constraint, before the multiplier update

  double worst_violation() const {
    double w = 0.0;
    for (double v : max_violation) w = std::max(w, v);
    return w;
  }
};

/// ILQR on the augmented objective followed by exactly one multiplier update.
/// Multipliers are matched to the constraint set by key.
template <int Nx, int Nu>
ConstrainedSolution<Nx, Nu> solve_constrained(const ilqr::Problem<Nx, Nu>& problem,
                                              const ConstraintSet<Nx, Nu>& constraints,
                                              const WarmStart<Nx, Nu>& warm,
                                              const ilqr::Settings& settings) {
  const int K = problem.horizon();
  const ALState lambda = match_keys(warm.multipliers, K, keys_of(constraints));

  AugmentedProblem<Nx, Nu> augmented(problem, constraints, lambda);
  auto sol = ilqr::solve<Nx, Nu>(augmented, warm.controls, settings);

  ConstrainedSolution<Nx, Nu> out;
  out.max_violation = max_violations(sol.trajectory, constraints);
  out.multipliers = update_multipliers(lambda, sol.trajectory, constraints);
  out.report = std::move(sol.report);
  out.trajectory = std::move(sol.trajectory);
  return out;
}

template <int Nx, int Nu>
struct ShiftedWarmStart {
  WarmStart<Nx, Nu> warm;
  int shift = 0;
  bool reinitialized = false;
};

/// Shifts controls and multipliers toward the start by `steps` knots. Control
/// tails repeat the last entry, multiplier tails are zero; shifting past the
/// horizon zeroes everything.
template <int Nx, int Nu>
ShiftedWarmStart<Nx, Nu> shift_warm_start(const WarmStart<Nx, Nu>& warm, int steps) {
  if (steps < 0) throw std::invalid_argument("shift_warm_start: negative shift");
  const int K = static_cast<int>(warm.controls.size());

  ShiftedWarmStart<Nx, Nu> out;
  out.shift = steps;
  out.warm.multipliers = ALState::zeros(K, warm.multipliers.keys);
  out.warm.controls.assign(K, ilqr::Types<Nx, Nu>::Control::Zero());
  if (K == 0) return out;
  if (steps >= K) {
    out.reinitialized = true;
    return out;
  }

  for (int k = 0; k < K; ++k) out.warm.controls[k] = warm.controls[std::min(k + steps, K - 1)];
  const int keep = K - steps;
  if (warm.multipliers.horizon() == K && warm.multipliers.size() > 0)
    out.warm.multipliers.multipliers.topRows(keep) = warm.multipliers.multipliers.bottomRows(keep);
  return out;
}

/// Arc-length flavour: shift by round(distance / ds) knots.
template <int Nx, int Nu>
ShiftedWarmStart<Nx, Nu> shift_warm_start(const WarmStart<Nx, Nu>& warm, double distance,
                                          double ds) {
  if (!(distance >= 0.0) || !(ds > 0.0))
    throw std::invalid_argument("shift_warm_start: need distance >= 0 and ds > 0");
  const double steps = std::round(distance / ds);
  const int K = static_cast<int>(warm.controls.size());
  return shift_warm_start(warm, steps >= K ? K : static_cast<int>(steps));
}

}  // namespace stplan::al
