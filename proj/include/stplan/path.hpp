#pragma once

#include <Eigen/Core>

#include <optional>
#include <span>
#include <vector>

#include "stplan/al.hpp"
#include "stplan/grid.hpp"
#include "stplan/ilqr.hpp"

namespace stplan::path {

using Point = Eigen::Vector2d;
/// (x_r, y_r, heading)
using PathState = Eigen::Vector3d;

/// Reference samples at uniform arc-length spacing.
struct ReferencePolyline {
  SpatialGrid grid;
  std::vector<Point> points;
};

/// Linear-interpolation resampling of a raw polyline to spacing `ds`,
/// starting at its first point. Throws std::invalid_argument for fewer than
/// two distinct points.
ReferencePolyline resample(std::span<const Point> raw, double ds);

/// A complete reference line with arc-length lookup and windowing.
class ReferenceLine {
 public:
  ReferenceLine() = default;
  ReferenceLine(std::span<const Point> raw, double ds);

  double length() const { return length_; }
  double ds() const { return samples_.grid.ds; }
  const ReferencePolyline& samples() const { return samples_; }

  /// Point at arc length s; extrapolates linearly beyond either end.
  Point at(double s) const;
  /// Unit tangent at arc length s.
  Point tangent(double s) const;

  struct Projection {
    double s = 0.0;
    double lateral = 0.0;  // signed, left positive
  };
  /// Closest point search; with a hint only segments within `window` meters
  /// of the hint are scanned.
  Projection project(const Point& p, std::optional<double> hint = {}, double window = 20.0) const;

  /// `samples` points starting at arc length s0 with spacing ds.
  ReferencePolyline window(double s0, double ds, int samples) const;

 private:
  ReferencePolyline samples_;
  double length_ = 0.0;
};

struct SmoothedPath {
  SpatialGrid grid;
  std::vector<double> x, y, heading, curvature;

  int size() const { return static_cast<int>(x.size()); }
  PathState state(int k) const { return {x[k], y[k], heading[k]}; }
  /// Linear interpolation of (x, y, heading) at grid-relative arc length s.
  PathState state_at(double s) const;

  struct Projection {
    double s = 0.0;
    double lateral = 0.0;
  };
  /// Closest point on the sampled path polyline (s on this path's grid).
  Projection project(const Point& p) const;
};

struct PathWeights {
  double w_d = 1.0;
  double w_kappa = 20.0;
};

struct CurvatureBounds {
  double min = -3.0;
  double max = 3.0;
};

struct SmoothingOptions {
  PathWeights weights;
  CurvatureBounds bounds;
  double mu = 1e2;
  double lambda_max = 1e2;
  ilqr::Settings solver;
};

using PathWarmStart = al::WarmStart<3, 1>;

struct SmoothingResult {
  SmoothedPath path;
  PathWarmStart solution;  // controls and updated multipliers
  ilqr::Report report;
  std::vector<double> max_violation;
};

/// Euler-discretized path dynamics with the position/curvature tracking cost.
class PathProblem final : public ilqr::Problem<3, 1> {
 public:
  PathProblem(const ReferencePolyline& ref, const PathWeights& w, PathState x0);

  int horizon() const override { return static_cast<int>(ref_.points.size()); }
  State initial_state() const override { return x0_; }
  State dynamics(const State& x, const Control& u) const override;
  void linearize(const State& x, const Control& u, StateMatrix& A, InputMatrix& B) const override;
  double cost(const State& x, const Control& u, int k) const override;
  void expand_cost(const State& x, const Control& u, int k,
                   ilqr::CostExpansion<3, 1>& e) const override;

 private:
  const ReferencePolyline& ref_;
  PathWeights w_;
  PathState x0_;
  double ds_;
};

/// Boundary state used when no override is given: first sample with the
/// heading of the first segment.
PathState default_boundary(const ReferencePolyline& ref);

al::ConstraintSet<3, 1> curvature_constraints(const CurvatureBounds& b, double mu,
                                              double lambda_max);

/// Smooths `ref` by solving the constrained path problem (curvature box as
/// two inequalities). Without a warm start the curvature guess follows the
/// reference segment headings.
SmoothingResult smooth_path(const ReferencePolyline& ref, const SmoothingOptions& options,
                            const PathWarmStart* warm = nullptr,
                            std::optional<PathState> boundary = {});

/// Signed three-point circumscribed-circle curvature per sample; endpoints copy
/// their neighbour, collinear triples give 0.
std::vector<double> local_curvature(const ReferencePolyline& ref);

/// v_lim = min(v_lg, sqrt(a_lat / max(|kappa|, 1e-6))).
LimitProfile curvature_speed_limit(const SpatialGrid& grid, std::span<const double> curvature,
                                   std::span<const double> legal_limit, double a_lat);

}  // namespace stplan::path
