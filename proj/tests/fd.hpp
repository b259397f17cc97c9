#pragma once

// Central finite-difference checks for problem derivatives (test-only).

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <random>

#include "stplan/al.hpp"
#include "stplan/ilqr.hpp"

namespace fd {

inline double step_for(double x) { return 1e-6 * std::max(1.0, std::abs(x)); }

inline double rel_err(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max({1.0, std::abs(analytic), std::abs(numeric)});
}

template <typename Derived1, typename Derived2>
double rel_err(const Eigen::MatrixBase<Derived1>& a, const Eigen::MatrixBase<Derived2>& b) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j) worst = std::max(worst, rel_err(a(i, j), b(i, j)));
  return worst;
}

/// Worst relative error of (A, B) against central differences of f.
template <int Nx, int Nu>
double dynamics_error(const stplan::ilqr::Problem<Nx, Nu>& p,
                      const typename stplan::ilqr::Types<Nx, Nu>::State& x,
                      const typename stplan::ilqr::Types<Nx, Nu>::Control& u) {
  using T = stplan::ilqr::Types<Nx, Nu>;
  typename T::StateMatrix A, Afd;
  typename T::InputMatrix B, Bfd;
  p.linearize(x, u, A, B);
  for (int j = 0; j < Nx; ++j) {
    const double h = step_for(x(j));
    auto xp = x, xm = x;
    xp(j) += h;
    xm(j) -= h;
    Afd.col(j) = (p.dynamics(xp, u) - p.dynamics(xm, u)) / (2 * h);
  }
  for (int j = 0; j < Nu; ++j) {
    const double h = step_for(u(j));
    auto up = u, um = u;
    up(j) += h;
    um(j) -= h;
    Bfd.col(j) = (p.dynamics(x, up) - p.dynamics(x, um)) / (2 * h);
  }
  return std::max(rel_err(A, Afd), rel_err(B, Bfd));
}

/// Worst relative error of the cost gradient (vs differences of the cost)
/// and Hessian (vs differences of the analytic gradient).
template <int Nx, int Nu>
double cost_error(const stplan::ilqr::Problem<Nx, Nu>& p,
                  const typename stplan::ilqr::Types<Nx, Nu>::State& x,
                  const typename stplan::ilqr::Types<Nx, Nu>::Control& u, int k) {
  using E = stplan::ilqr::CostExpansion<Nx, Nu>;
  E e;
  p.expand_cost(x, u, k, e);
  double worst = 0.0;
  for (int j = 0; j < Nx; ++j) {
    const double h = step_for(x(j));
    auto xp = x, xm = x;
    xp(j) += h;
    xm(j) -= h;
    worst = std::max(worst, rel_err(e.x(j), (p.cost(xp, u, k) - p.cost(xm, u, k)) / (2 * h)));
    E ep, em;
    p.expand_cost(xp, u, k, ep);
    p.expand_cost(xm, u, k, em);
    worst = std::max(worst, rel_err(e.xx.col(j), (ep.x - em.x) / (2 * h)));
    worst = std::max(worst, rel_err(e.ux.col(j), (ep.u - em.u) / (2 * h)));
  }
  for (int j = 0; j < Nu; ++j) {
    const double h = step_for(u(j));
    auto up = u, um = u;
    up(j) += h;
    um(j) -= h;
    worst = std::max(worst, rel_err(e.u(j), (p.cost(x, up, k) - p.cost(x, um, k)) / (2 * h)));
    E ep, em;
    p.expand_cost(x, up, k, ep);
    p.expand_cost(x, um, k, em);
    worst = std::max(worst, rel_err(e.uu.col(j), (ep.u - em.u) / (2 * h)));
    worst = std::max(worst, rel_err(e.ux.row(j).transpose(), (ep.x - em.x) / (2 * h)));
  }
  return worst;
}

/// Worst relative error of a constraint's gradient and Hessian.
template <int Nx, int Nu>
double constraint_error(const stplan::al::Constraint<Nx, Nu>& c,
                        const typename stplan::ilqr::Types<Nx, Nu>::State& x,
                        const typename stplan::ilqr::Types<Nx, Nu>::Control& u, int k) {
  using T = stplan::ilqr::Types<Nx, Nu>;
  typename T::State gx, gxp, gxm;
  typename T::Control gu, gup, gum;
  typename T::StateMatrix hxx;
  typename T::ControlMatrix huu;
  typename T::FeedbackMatrix hux;
  c.gradient(x, u, k, gx, gu);
  c.hessian(x, u, k, hxx, huu, hux);
  double worst = 0.0;
  for (int j = 0; j < Nx; ++j) {
    const double h = step_for(x(j));
    auto xp = x, xm = x;
    xp(j) += h;
    xm(j) -= h;
    worst = std::max(worst, rel_err(gx(j), (c.value(xp, u, k) - c.value(xm, u, k)) / (2 * h)));
    c.gradient(xp, u, k, gxp, gup);
    c.gradient(xm, u, k, gxm, gum);
    worst = std::max(worst, rel_err(hxx.col(j), (gxp - gxm) / (2 * h)));
    worst = std::max(worst, rel_err(hux.col(j), (gup - gum) / (2 * h)));
  }
  for (int j = 0; j < Nu; ++j) {
    const double h = step_for(u(j));
    auto up = u, um = u;
    up(j) += h;
    um(j) -= h;
    worst = std::max(worst, rel_err(gu(j), (c.value(x, up, k) - c.value(x, um, k)) / (2 * h)));
    c.gradient(x, up, k, gxp, gup);
    c.gradient(x, um, k, gxm, gum);
    worst = std::max(worst, rel_err(huu.col(j), (gup - gum) / (2 * h)));
  }
  return worst;
}

}  // namespace fd
