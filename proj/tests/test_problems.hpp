#pragma once

// Small reference problems with independent closed-form or brute-force optima.

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <vector>

#include "stplan/al.hpp"
#include "stplan/ilqr.hpp"

namespace testing_problems {

/// x' = x + u, l = q x^2 + r u^2.
class ScalarLqr final : public stplan::ilqr::Problem<1, 1> {
 public:
  ScalarLqr(int K, double x0, double q = 1.0, double r = 1.0) : K_(K), x0_(x0), q_(q), r_(r) {}

  int horizon() const override { return K_; }
  State initial_state() const override { return State(x0_); }
  State dynamics(const State& x, const Control& u) const override { return x + u; }
  void linearize(const State&, const Control&, StateMatrix& A, InputMatrix& B) const override {
    A(0, 0) = 1.0;
    B(0, 0) = 1.0;
  }
  double cost(const State& x, const Control& u, int) const override {
    return q_ * x(0) * x(0) + r_ * u(0) * u(0);
  }
  void expand_cost(const State& x, const Control& u, int,
                   stplan::ilqr::CostExpansion<1, 1>& e) const override {
    e.x(0) = 2 * q_ * x(0);
    e.u(0) = 2 * r_ * u(0);
    e.xx(0, 0) = 2 * q_;
    e.uu(0, 0) = 2 * r_;
    e.ux(0, 0) = 0.0;
  }

 private:
  int K_;
  double x0_, q_, r_;
};

/// Scalar Riccati recursion for ScalarLqr: value V_k(x) = P_k x^2.
struct ScalarRiccati {
  std::vector<double> P;     // P[k] for knot k
  std::vector<double> gain;  // u_k = gain[k] * x_k

  ScalarRiccati(int K, double q = 1.0, double r = 1.0) : P(K), gain(K, 0.0) {
    P[K - 1] = q;
    for (int k = K - 2; k >= 0; --k) {
      gain[k] = -P[k + 1] / (r + P[k + 1]);
      P[k] = q + r * P[k + 1] / (r + P[k + 1]);
    }
  }
  double optimal_cost(double x0) const { return P[0] * x0 * x0; }
};

/// Double integrator p' = p + dt v, v' = v + dt a with quadratic tracking
/// cost toward p_goal.
class DoubleIntegrator final : public stplan::ilqr::Problem<2, 1> {
 public:
  int K = 10;
  double dt = 0.5;
  double p_goal = 6.0;
  double q_p = 1.0;
  double q_v = 0.2;
  double r = 0.05;
  State x0 = State::Zero();

  int horizon() const override { return K; }
  State initial_state() const override { return x0; }
  State dynamics(const State& x, const Control& u) const override {
    return {x(0) + dt * x(1), x(1) + dt * u(0)};
  }
  void linearize(const State&, const Control&, StateMatrix& A, InputMatrix& B) const override {
    A << 1, dt, 0, 1;
    B << 0, dt;
  }
  double cost(const State& x, const Control& u, int) const override {
    const double ep = x(0) - p_goal;
    return q_p * ep * ep + q_v * x(1) * x(1) + r * u(0) * u(0);
  }
  void expand_cost(const State& x, const Control& u, int,
                   stplan::ilqr::CostExpansion<2, 1>& e) const override {
    e.x << 2 * q_p * (x(0) - p_goal), 2 * q_v * x(1);
    e.u(0) = 2 * r * u(0);
    e.xx << 2 * q_p, 0, 0, 2 * q_v;
    e.uu(0, 0) = 2 * r;
    e.ux.setZero();
  }

  /// Total cost as a dense quadratic in the stacked controls:
  /// J(U) = U^T H U + 2 g^T U + c.
  void dense_quadratic(Eigen::MatrixXd& H, Eigen::VectorXd& g, double& c) const {
    // x_k = Phi_k x0 + sum_{j<k} G_kj u_j
    Eigen::MatrixXd Q = Eigen::Vector2d(q_p, q_v).asDiagonal();
    Eigen::Matrix2d A;
    A << 1, dt, 0, 1;
    Eigen::Vector2d B(0, dt);
    Eigen::Vector2d offset(p_goal, 0.0);
    H = r * Eigen::MatrixXd::Identity(K, K);
    g = Eigen::VectorXd::Zero(K);
    c = 0.0;
    Eigen::Matrix2d Phi = Eigen::Matrix2d::Identity();
    Eigen::MatrixXd G = Eigen::MatrixXd::Zero(2, K);
    for (int k = 0; k < K; ++k) {
      const Eigen::Vector2d free = Phi * x0 - offset;
      H += G.transpose() * Q * G;
      g += G.transpose() * Q * free;
      c += free.dot(Q * free);
      G = (A * G).eval();
      G.col(k) += B;
      Phi = (A * Phi).eval();
    }
  }
};

/// Exhaustive active-set enumeration for min J(U) s.t. |u_k| <= bound:
/// each control is pinned low, pinned high or free; the free block is solved
/// exactly and infeasible candidates are dropped. Convexity makes the best
/// feasible candidate the global optimum.
inline double box_qp_bruteforce(const Eigen::MatrixXd& H, const Eigen::VectorXd& g, double c,
                                double bound, Eigen::VectorXd* argmin = nullptr) {
  const int n = static_cast<int>(g.size());
  long total = 1;
  for (int i = 0; i < n; ++i) total *= 3;
  double best = std::numeric_limits<double>::infinity();
  Eigen::VectorXd u(n);
  std::vector<int> pattern(n);
  for (long code = 0; code < total; ++code) {
    long rest = code;
    std::vector<int> free_idx;
    for (int i = 0; i < n; ++i) {
      pattern[i] = static_cast<int>(rest % 3);
      rest /= 3;
      if (pattern[i] == 0) free_idx.push_back(i);
      else u(i) = pattern[i] == 1 ? bound : -bound;
    }
    const int nf = static_cast<int>(free_idx.size());
    if (nf > 0) {
      Eigen::MatrixXd Hff(nf, nf);
      Eigen::VectorXd rhs(nf);
      for (int a = 0; a < nf; ++a) {
        rhs(a) = -g(free_idx[a]);
        for (int b = 0; b < n; ++b)
          if (pattern[b] != 0) rhs(a) -= H(free_idx[a], b) * u(b);
        for (int b = 0; b < nf; ++b) Hff(a, b) = H(free_idx[a], free_idx[b]);
      }
      const Eigen::VectorXd uf = Hff.ldlt().solve(rhs);
      bool feasible = true;
      for (int a = 0; a < nf; ++a) {
        if (std::abs(uf(a)) > bound + 1e-12) feasible = false;
        u(free_idx[a]) = uf(a);
      }
      if (!feasible) continue;
    }
    const double J = u.dot(H * u) + 2 * g.dot(u) + c;
    if (J < best) {
      best = J;
      if (argmin) *argmin = u;
    }
  }
  return best;
}

inline stplan::al::ConstraintSet<2, 1> control_box(double bound, double mu = 1e2,
                                                   double lambda_max = 1e2) {
  using C = stplan::al::AffineConstraint<2, 1>;
  const Eigen::Vector2d zero = Eigen::Vector2d::Zero();
  stplan::al::ConstraintSet<2, 1> set;
  set.push_back({"u_max", std::make_shared<C>(zero, Eigen::Matrix<double, 1, 1>(1.0), -bound), mu,
                 lambda_max, {}});
  set.push_back({"u_min", std::make_shared<C>(zero, Eigen::Matrix<double, 1, 1>(-1.0), -bound),
                 mu, lambda_max, {}});
  return set;
}

}  // namespace testing_problems
