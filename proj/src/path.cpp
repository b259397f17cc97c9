#include "stplan/path.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace stplan::path {

namespace {

double cross(const Point& a, const Point& b) { return a.x() * b.y() - a.y() * b.x(); }

struct SegmentHit {
  double distance = std::numeric_limits<double>::infinity();
  double s = 0.0;
  double lateral = 0.0;
};

// Closest point on the polyline `pts` with uniform spacing ds; the first and
// last segments extend to infinity.
SegmentHit closest_on_polyline(const std::vector<Point>& pts, double s0, double ds, const Point& p,
                               int first, int last) {
  SegmentHit best;
  const int n = static_cast<int>(pts.size());
  if (n == 1) {
    best.distance = (p - pts[0]).norm();
    best.s = s0;
    return best;
  }
  first = std::clamp(first, 0, n - 2);
  last = std::clamp(last, first, n - 2);
  for (int i = first; i <= last; ++i) {
    const Point d = pts[i + 1] - pts[i];
    const double len2 = d.squaredNorm();
    if (len2 <= 0.0) continue;
    double t = (p - pts[i]).dot(d) / len2;
    if (i > 0) t = std::max(t, 0.0);
    if (i < n - 2) t = std::min(t, 1.0);
    const Point q = pts[i] + t * d;
    const double dist = (p - q).norm();
    if (dist < best.distance) {
      best.distance = dist;
      best.s = s0 + ds * (i + t);
      best.lateral = cross(d, p - pts[i]) / std::sqrt(len2);
    }
  }
  return best;
}

double wrap_angle(double a) { return std::remainder(a, 2.0 * std::numbers::pi); }

// Curvature that follows the reference segment headings from the boundary
// heading, clipped to the box.
std::vector<Eigen::Matrix<double, 1, 1>> heading_rate_guess(const ReferencePolyline& ref,
                                                            double heading0,
                                                            const CurvatureBounds& b) {
  const int K = static_cast<int>(ref.points.size());
  const double ds = ref.grid.ds;
  std::vector<Eigen::Matrix<double, 1, 1>> u(K, Eigen::Matrix<double, 1, 1>::Zero());
  double heading = heading0;
  for (int k = 0; k + 2 < K; ++k) {
    const Point d = ref.points[k + 2] - ref.points[k + 1];
    const double target = std::atan2(d.y(), d.x());
    const double kappa = std::clamp(wrap_angle(target - heading) / ds, b.min, b.max);
    u[k](0) = kappa;
    heading += ds * kappa;
  }
  return u;
}

}  // namespace

ReferencePolyline resample(std::span<const Point> raw, double ds) {
  if (!(ds > 0.0)) throw std::invalid_argument("resample: ds must be positive");

  std::vector<Point> pts;
  pts.reserve(raw.size());
  for (const Point& p : raw) {
    if (!p.allFinite()) throw std::invalid_argument("resample: non-finite reference point");
    if (pts.empty() || (p - pts.back()).norm() > 1e-9) pts.push_back(p);
  }
  if (pts.size() < 2)
    throw std::invalid_argument("resample: reference polyline needs at least 2 distinct points");

  std::vector<double> cum(pts.size(), 0.0);
  for (std::size_t i = 1; i < pts.size(); ++i) cum[i] = cum[i - 1] + (pts[i] - pts[i - 1]).norm();

  const int n = static_cast<int>(std::floor(cum.back() / ds + 1e-9)) + 1;
  ReferencePolyline out;
  out.grid = SpatialGrid{0.0, ds, n};
  out.points.reserve(n);
  std::size_t seg = 0;
  for (int k = 0; k < n; ++k) {
    const double s = std::min(k * ds, cum.back());
    while (seg + 2 < pts.size() && cum[seg + 1] < s) ++seg;
    const double len = cum[seg + 1] - cum[seg];
    const double f = len > 0.0 ? std::clamp((s - cum[seg]) / len, 0.0, 1.0) : 0.0;
    out.points.push_back(pts[seg] + f * (pts[seg + 1] - pts[seg]));
  }
  if (out.points.size() < 2) {
    out.points.push_back(pts.back());
    out.grid.samples = 2;
  }
  return out;
}

ReferenceLine::ReferenceLine(std::span<const Point> raw, double ds) : samples_(resample(raw, ds)) {
  length_ = samples_.grid.back();
}

Point ReferenceLine::at(double s) const {
  const auto& pts = samples_.points;
  const double ds = samples_.grid.ds;
  const int n = static_cast<int>(pts.size());
  const double u = s / ds;
  int i = static_cast<int>(std::floor(u));
  i = std::clamp(i, 0, n - 2);
  const double f = u - i;
  return pts[i] + f * (pts[i + 1] - pts[i]);
}

Point ReferenceLine::tangent(double s) const {
  const auto& pts = samples_.points;
  const int n = static_cast<int>(pts.size());
  const int i = std::clamp(static_cast<int>(std::floor(s / samples_.grid.ds)), 0, n - 2);
  const Point d = pts[i + 1] - pts[i];
  return d / d.norm();
}

ReferenceLine::Projection ReferenceLine::project(const Point& p, std::optional<double> hint,
                                                 double window) const {
  const double ds = samples_.grid.ds;
  const int n = static_cast<int>(samples_.points.size());
  int first = 0;
  int last = n - 2;
  if (hint) {
    first = static_cast<int>(std::floor((*hint - window) / ds));
    last = static_cast<int>(std::ceil((*hint + window) / ds));
  }
  const SegmentHit hit = closest_on_polyline(samples_.points, 0.0, ds, p, first, last);
  return {hit.s, hit.lateral};
}

ReferencePolyline ReferenceLine::window(double s0, double ds, int samples) const {
  ReferencePolyline out;
  out.grid = SpatialGrid{s0, ds, samples};
  out.points.reserve(samples);
  for (int k = 0; k < samples; ++k) out.points.push_back(at(s0 + k * ds));
  return out;
}

PathState SmoothedPath::state_at(double s) const {
  return {interpolate(grid, x, s), interpolate(grid, y, s), interpolate(grid, heading, s)};
}

SmoothedPath::Projection SmoothedPath::project(const Point& p) const {
  std::vector<Point> pts(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) pts[k] = Point(x[k], y[k]);
  const SegmentHit hit = closest_on_polyline(pts, grid.s0, grid.ds, p, 0, size() - 2);
  return {hit.s, hit.lateral};
}

PathProblem::PathProblem(const ReferencePolyline& ref, const PathWeights& w, PathState x0)
    : ref_(ref), w_(w), x0_(std::move(x0)), ds_(ref.grid.ds) {}

PathProblem::State PathProblem::dynamics(const State& x, const Control& u) const {
  return {x(0) + ds_ * std::cos(x(2)), x(1) + ds_ * std::sin(x(2)), x(2) + ds_ * u(0)};
}

void PathProblem::linearize(const State& x, const Control&, StateMatrix& A,
                            InputMatrix& B) const {
  A.setIdentity();
  A(0, 2) = -ds_ * std::sin(x(2));
  A(1, 2) = ds_ * std::cos(x(2));
  B << 0.0, 0.0, ds_;
}

double PathProblem::cost(const State& x, const Control& u, int k) const {
  const Point& r = ref_.points[k];
  const double ex = r.x() - x(0);
  const double ey = r.y() - x(1);
  return ds_ * (w_.w_d * (ex * ex + ey * ey) + w_.w_kappa * u(0) * u(0));
}

void PathProblem::expand_cost(const State& x, const Control& u, int k,
                              ilqr::CostExpansion<3, 1>& e) const {
  const Point& r = ref_.points[k];
  e.x(0) = -2.0 * ds_ * w_.w_d * (r.x() - x(0));
  e.x(1) = -2.0 * ds_ * w_.w_d * (r.y() - x(1));
  e.x(2) = 0.0;
  e.u(0) = 2.0 * ds_ * w_.w_kappa * u(0);
  e.xx.setZero();
  e.xx(0, 0) = e.xx(1, 1) = 2.0 * ds_ * w_.w_d;
  e.uu(0, 0) = 2.0 * ds_ * w_.w_kappa;
  e.ux.setZero();
}

PathState default_boundary(const ReferencePolyline& ref) {
  const Point d = ref.points[1] - ref.points[0];
  return {ref.points[0].x(), ref.points[0].y(), std::atan2(d.y(), d.x())};
}

al::ConstraintSet<3, 1> curvature_constraints(const CurvatureBounds& b, double mu,
                                              double lambda_max) {
  using C = al::AffineConstraint<3, 1>;
  const Eigen::Vector3d zero = Eigen::Vector3d::Zero();
  al::ConstraintSet<3, 1> set;
  set.push_back({"kappa_max", std::make_shared<C>(zero, Eigen::Matrix<double, 1, 1>(1.0), -b.max),
                 mu, lambda_max, {}});
  set.push_back({"kappa_min", std::make_shared<C>(zero, Eigen::Matrix<double, 1, 1>(-1.0), b.min),
                 mu, lambda_max, {}});
  return set;
}

SmoothingResult smooth_path(const ReferencePolyline& ref, const SmoothingOptions& options,
                            const PathWarmStart* warm, std::optional<PathState> boundary) {
  if (ref.points.size() < 2)
    throw std::invalid_argument("smooth_path: reference needs at least 2 points");
  if (!(options.weights.w_d > 0.0) || !(options.weights.w_kappa > 0.0))
    throw std::invalid_argument("smooth_path: weights must be positive");

  const int K = static_cast<int>(ref.points.size());
  const PathState x0 = boundary ? *boundary : default_boundary(ref);
  PathProblem problem(ref, options.weights, x0);
  const auto constraints = curvature_constraints(options.bounds, options.mu, options.lambda_max);

  PathWarmStart start;
  if (warm && static_cast<int>(warm->controls.size()) == K) {
    start = *warm;
  } else {
    start.controls = heading_rate_guess(ref, x0(2), options.bounds);
    start.multipliers = al::ALState::zeros(K, al::keys_of(constraints));
  }

  auto sol = al::solve_constrained<3, 1>(problem, constraints, start, options.solver);

  SmoothingResult out;
  out.path.grid = ref.grid;
  out.path.x.resize(K);
  out.path.y.resize(K);
  out.path.heading.resize(K);
  out.path.curvature.resize(K);
  for (int k = 0; k < K; ++k) {
    const auto& s = sol.trajectory.states[k];
    out.path.x[k] = s(0);
    out.path.y[k] = s(1);
    out.path.heading[k] = s(2);
    out.path.curvature[k] = sol.trajectory.controls[k](0);
  }
  out.solution.controls = std::move(sol.trajectory.controls);
  out.solution.multipliers = std::move(sol.multipliers);
  out.report = std::move(sol.report);
  out.max_violation = std::move(sol.max_violation);
  return out;
}

std::vector<double> local_curvature(const ReferencePolyline& ref) {
  const auto& p = ref.points;
  const int n = static_cast<int>(p.size());
  if (n < 3) throw std::invalid_argument("local_curvature: need at least 3 points");
  std::vector<double> kappa(n, 0.0);
  for (int i = 1; i + 1 < n; ++i) {
    const Point ab = p[i] - p[i - 1];
    const Point bc = p[i + 1] - p[i];
    const Point ac = p[i + 1] - p[i - 1];
    const double denom = ab.norm() * bc.norm() * ac.norm();
    kappa[i] = denom > 0.0 ? 2.0 * cross(ab, ac) / denom : 0.0;
  }
  kappa[0] = kappa[1];
  kappa[n - 1] = kappa[n - 2];
  return kappa;
}

LimitProfile curvature_speed_limit(const SpatialGrid& grid, std::span<const double> curvature,
                                   std::span<const double> legal_limit, double a_lat) {
  constexpr double kCurvatureEps = 1e-6;
  if (!(a_lat > 0.0)) throw std::invalid_argument("curvature_speed_limit: a_lat must be positive");
  if (curvature.size() != legal_limit.size() ||
      static_cast<int>(curvature.size()) != grid.samples)
    throw std::invalid_argument("curvature_speed_limit: inputs are not on the same grid");

  LimitProfile out(grid, 0.0);
  for (int k = 0; k < grid.samples; ++k) {
    const double kappa = std::max(std::abs(curvature[k]), kCurvatureEps);
    out.v[k] = std::min(legal_limit[k], std::sqrt(a_lat / kappa));
  }
  return out;
}

}  // namespace stplan::path
