#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace stplan::ilqr {

template <int Nx, int Nu>
struct Types {
  using State = Eigen::Matrix<double, Nx, 1>;
  using Control = Eigen::Matrix<double, Nu, 1>;
  using StateMatrix = Eigen::Matrix<double, Nx, Nx>;
  using ControlMatrix = Eigen::Matrix<double, Nu, Nu>;
  using InputMatrix = Eigen::Matrix<double, Nx, Nu>;
  using FeedbackMatrix = Eigen::Matrix<double, Nu, Nx>;
};

/// Second-order expansion of a stage cost around (x, u).
template <int Nx, int Nu>
struct CostExpansion {
  typename Types<Nx, Nu>::State x = Types<Nx, Nu>::State::Zero();
  typename Types<Nx, Nu>::Control u = Types<Nx, Nu>::Control::Zero();
  typename Types<Nx, Nu>::StateMatrix xx = Types<Nx, Nu>::StateMatrix::Zero();
  typename Types<Nx, Nu>::ControlMatrix uu = Types<Nx, Nu>::ControlMatrix::Zero();
  typename Types<Nx, Nu>::FeedbackMatrix ux = Types<Nx, Nu>::FeedbackMatrix::Zero();

  void set_zero() {
    x.setZero();
    u.setZero();
    xx.setZero();
    uu.setZero();
    ux.setZero();
  }
};

/// Discrete-time optimal control problem over K knot points.
///
/// States x_1..x_K and controls u_1..u_K; x_{k+1} = f(x_k, u_k) for k < K and
/// the objective is the sum of l(x_k, u_k, k) over all K knots. Indices are
/// zero-based in code.
template <int Nx, int Nu>
class Problem {
 public:
  using State = typename Types<Nx, Nu>::State;
  using Control = typename Types<Nx, Nu>::Control;
  using StateMatrix = typename Types<Nx, Nu>::StateMatrix;
  using InputMatrix = typename Types<Nx, Nu>::InputMatrix;

  virtual ~Problem() = default;

  virtual int horizon() const = 0;
  virtual State initial_state() const = 0;

  virtual State dynamics(const State& x, const Control& u) const = 0;
  virtual void linearize(const State& x, const Control& u, StateMatrix& A,
                         InputMatrix& B) const = 0;

  virtual double cost(const State& x, const Control& u, int k) const = 0;
  virtual void expand_cost(const State& x, const Control& u, int k,
                           CostExpansion<Nx, Nu>& e) const = 0;
};

template <int Nx, int Nu>
struct Trajectory {
  std::vector<typename Types<Nx, Nu>::State> states;
  std::vector<typename Types<Nx, Nu>::Control> controls;
  double cost = 0.0;

  int size() const { return static_cast<int>(states.size()); }
};

template <int Nx, int Nu>
struct Gains {
  std::vector<typename Types<Nx, Nu>::Control> feedforward;
  std::vector<typename Types<Nx, Nu>::FeedbackMatrix> feedback;
};

class RolloutDiverged : public std::runtime_error {
 public:
  explicit RolloutDiverged(int index)
      : std::runtime_error("rollout diverged at knot " + std::to_string(index)),
        index_(index) {}

  int index() const { return index_; }

 private:
  int index_;
};

struct Settings {
  int max_iterations = 5;
  double tolerance = 1e-6;

  double reg_initial = 1e-6;
  double reg_growth = 10.0;
  double reg_max = 1e6;

  // Backtracking steps 1, 1/2, ..., 2^-10.
  std::vector<double> step_sizes = default_steps();
  double accept_ratio = 1e-4;

  static std::vector<double> default_steps() {
    std::vector<double> steps;
    double a = 1.0;
    for (int i = 0; i <= 10; ++i, a *= 0.5) steps.push_back(a);
    return steps;
  }

  void validate() const {
    if (max_iterations < 1) throw std::invalid_argument("ilqr: max_iterations must be >= 1");
    if (!(tolerance > 0.0)) throw std::invalid_argument("ilqr: tolerance must be > 0");
    if (!(reg_initial >= 0.0) || !(reg_growth > 1.0) || !(reg_max >= reg_initial))
      throw std::invalid_argument("ilqr: invalid regularization schedule");
    if (step_sizes.empty()) throw std::invalid_argument("ilqr: empty line-search step set");
    for (double a : step_sizes)
      if (!(a > 0.0 && a <= 1.0))
        throw std::invalid_argument("ilqr: line-search steps must lie in (0, 1]");
  }
};

enum class Status { converged, iteration_capped, stalled };

inline const char* to_string(Status s) {
  switch (s) {
    case Status::converged: return "converged";
    case Status::iteration_capped: return "iteration-capped";
    case Status::stalled: return "stalled";
  }
  return "unknown";
}

struct Report {
  Status status = Status::iteration_capped;
  int iterations = 0;
  double initial_cost = 0.0;
  double final_cost = 0.0;
  double regularization = 0.0;
  std::vector<double> cost_history;  // cost after each accepted step
};

template <int Nx, int Nu>
struct Solution {
  Trajectory<Nx, Nu> trajectory;
  Report report;
};

/// Forward simulation of `controls` from the problem's initial state.
template <int Nx, int Nu>
Trajectory<Nx, Nu> rollout(const Problem<Nx, Nu>& problem,
                           const std::vector<typename Types<Nx, Nu>::Control>& controls) {
  const int K = problem.horizon();
  if (static_cast<int>(controls.size()) != K)
    throw std::invalid_argument("rollout: expected " + std::to_string(K) + " controls, got " +
                                std::to_string(controls.size()));

  Trajectory<Nx, Nu> traj;
  traj.states.resize(K);
  traj.controls = controls;
  traj.states[0] = problem.initial_state();
  if (!traj.states[0].allFinite()) throw RolloutDiverged(0);

  double J = 0.0;
  for (int k = 0; k < K; ++k) {
    J += problem.cost(traj.states[k], controls[k], k);
    if (k + 1 < K) {
      traj.states[k + 1] = problem.dynamics(traj.states[k], controls[k]);
      if (!traj.states[k + 1].allFinite()) throw RolloutDiverged(k + 1);
    }
  }
  if (!std::isfinite(J)) throw RolloutDiverged(K - 1);
  traj.cost = J;
  return traj;
}

template <int Nx, int Nu>
struct BackwardPassResult {
  bool ok = false;
  int failed_at = -1;
  Gains<Nx, Nu> gains;
  // Expected change for step a is a * linear + a^2 * quadratic (<= 0).
  double expected_linear = 0.0;
  double expected_quadratic = 0.0;

  double expected_change(double a) const { return a * expected_linear + a * a * expected_quadratic; }
};

/// Riccati recursion on the Gauss-Newton expansion around `traj`.
template <int Nx, int Nu>
BackwardPassResult<Nx, Nu> backward_pass(const Trajectory<Nx, Nu>& traj,
                                         const Problem<Nx, Nu>& problem, double regularization) {
  using T = Types<Nx, Nu>;
  const int K = traj.size();

  BackwardPassResult<Nx, Nu> res;
  res.gains.feedforward.resize(K);
  res.gains.feedback.resize(K);

  typename T::State Vx = T::State::Zero();
  typename T::StateMatrix Vxx = T::StateMatrix::Zero();
  typename T::StateMatrix A;
  typename T::InputMatrix B;
  CostExpansion<Nx, Nu> e;

  for (int k = K - 1; k >= 0; --k) {
    const auto& x = traj.states[k];
    const auto& u = traj.controls[k];
    e.set_zero();
    problem.expand_cost(x, u, k, e);

    typename T::State Qx = e.x;
    typename T::Control Qu = e.u;
    typename T::StateMatrix Qxx = e.xx;
    typename T::ControlMatrix Quu = e.uu;
    typename T::FeedbackMatrix Qux = e.ux;

    if (k + 1 < K) {
      problem.linearize(x, u, A, B);
      Qx.noalias() += A.transpose() * Vx;
      Qu.noalias() += B.transpose() * Vx;
      const typename T::InputMatrix VB = Vxx * B;
      Qxx.noalias() += A.transpose() * Vxx * A;
      Quu.noalias() += B.transpose() * VB;
      Qux.noalias() += VB.transpose() * A;
    }

    typename T::ControlMatrix Quu_reg = Quu;
    Quu_reg.diagonal().array() += regularization;
    Eigen::LLT<typename T::ControlMatrix> llt(Quu_reg);
    if (llt.info() != Eigen::Success || !Quu_reg.allFinite()) {
      res.failed_at = k;
      return res;
    }

    const typename T::Control kff = -llt.solve(Qu);
    const typename T::FeedbackMatrix Kfb = -llt.solve(Qux);
    res.gains.feedforward[k] = kff;
    res.gains.feedback[k] = Kfb;

    res.expected_linear += kff.dot(Qu);
    res.expected_quadratic += 0.5 * kff.dot(Quu * kff);

    Vx = Qx + Kfb.transpose() * Quu * kff + Kfb.transpose() * Qu + Qux.transpose() * kff;
    Vxx = Qxx + Kfb.transpose() * Quu * Kfb + Kfb.transpose() * Qux + Qux.transpose() * Kfb;
    Vxx = 0.5 * (Vxx + Vxx.transpose()).eval();
  }

  res.ok = true;
  return res;
}

template <int Nx, int Nu>
struct ForwardPassResult {
  Trajectory<Nx, Nu> trajectory;
  bool improved = false;
  double step = 0.0;
};

/// Line search over `steps` (tried in order); accepts the first step whose
/// actual/expected reduction ratio exceeds `accept_ratio`.
template <int Nx, int Nu>
ForwardPassResult<Nx, Nu> forward_pass(const Trajectory<Nx, Nu>& traj,
                                       const BackwardPassResult<Nx, Nu>& bp,
                                       const Problem<Nx, Nu>& problem,
                                       const std::vector<double>& steps,
                                       double accept_ratio = 1e-4) {
  using T = Types<Nx, Nu>;
  const int K = traj.size();

  ForwardPassResult<Nx, Nu> out;
  Trajectory<Nx, Nu> cand;
  cand.states.resize(K);
  cand.controls.resize(K);

  for (double alpha : steps) {
    bool finite = true;
    double J = 0.0;
    cand.states[0] = traj.states[0];
    for (int k = 0; k < K && finite; ++k) {
      const typename T::State dx = cand.states[k] - traj.states[k];
      cand.controls[k] = traj.controls[k] + alpha * bp.gains.feedforward[k] +
                         bp.gains.feedback[k] * dx;
      J += problem.cost(cand.states[k], cand.controls[k], k);
      if (k + 1 < K) {
        cand.states[k + 1] = problem.dynamics(cand.states[k], cand.controls[k]);
        finite = cand.states[k + 1].allFinite();
      }
    }
    if (!finite || !std::isfinite(J)) continue;

    const double actual = traj.cost - J;
    const double expected = -bp.expected_change(alpha);
    const bool accept = expected > 0.0 ? actual / expected > accept_ratio : actual > 0.0;
    if (accept) {
      cand.cost = J;
      out.trajectory = std::move(cand);
      out.improved = true;
      out.step = alpha;
      return out;
    }
  }

  out.trajectory = traj;
  return out;
}

/// Iterates backward/forward passes until the relative cost change drops
/// below the tolerance or the iteration cap is hit. Always returns a
/// dynamically consistent trajectory.
template <int Nx, int Nu>
Solution<Nx, Nu> solve(const Problem<Nx, Nu>& problem,
                       const std::vector<typename Types<Nx, Nu>::Control>& initial_controls,
                       const Settings& settings) {
  settings.validate();

  Solution<Nx, Nu> sol;
  sol.trajectory = rollout(problem, initial_controls);
  Report& rep = sol.report;
  rep.initial_cost = sol.trajectory.cost;

  double reg = settings.reg_initial;
  const auto tiny = std::numeric_limits<double>::min();

  for (int it = 1; it <= settings.max_iterations; ++it) {
    rep.iterations = it;

    BackwardPassResult<Nx, Nu> bp = backward_pass(sol.trajectory, problem, reg);
    while (!bp.ok) {
      reg = reg > 0.0 ? reg * settings.reg_growth : settings.reg_growth * 1e-9;
      if (reg > settings.reg_max) {
        rep.status = Status::stalled;
        rep.regularization = reg;
        rep.final_cost = sol.trajectory.cost;
        return sol;
      }
      bp = backward_pass(sol.trajectory, problem, reg);
    }

    const double J = sol.trajectory.cost;
    const double scale = std::max(std::abs(J), tiny);
    if (-bp.expected_change(1.0) < settings.tolerance * scale) {
      rep.status = Status::converged;
      rep.regularization = reg;
      rep.final_cost = J;
      return sol;
    }

    ForwardPassResult<Nx, Nu> fp =
        forward_pass(sol.trajectory, bp, problem, settings.step_sizes, settings.accept_ratio);
    if (!fp.improved) {
      reg *= settings.reg_growth;
      if (reg > settings.reg_max) {
        rep.status = Status::stalled;
        rep.regularization = reg;
        rep.final_cost = J;
        return sol;
      }
      continue;
    }

    sol.trajectory = std::move(fp.trajectory);
    rep.cost_history.push_back(sol.trajectory.cost);
    reg = std::max(reg / settings.reg_growth, settings.reg_initial);

    if ((J - sol.trajectory.cost) / scale < settings.tolerance) {
      rep.status = Status::converged;
      rep.regularization = reg;
      rep.final_cost = sol.trajectory.cost;
      return sol;
    }
  }

  rep.status = Status::iteration_capped;
  rep.regularization = reg;
  rep.final_cost = sol.trajectory.cost;
  return sol;
}

}  // namespace stplan::ilqr
