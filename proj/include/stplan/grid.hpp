#pragma once

#include <vector>

namespace stplan {

/// Uniform arc-length sampling s_k = s0 + k * ds, k = 0..samples-1.
struct SpatialGrid {
  double s0 = 0.0;
  double ds = 0.5;
  int samples = 250;

  double at(int k) const { return s0 + ds * k; }
  double back() const { return at(samples - 1); }
  double length() const { return ds * samples; }

  /// Nearest sample index, or -1 when s lies more than ds/2 outside the grid.
  int nearest(double s) const;
  /// Nearest sample index clamped into the grid.
  int clamp_index(double s) const;
};

/// Piecewise-linear lookup of grid-sampled values; clamps outside the grid.
double interpolate(const SpatialGrid& grid, const std::vector<double>& values, double s);

/// Sampled velocity limit v_lim(s).
struct LimitProfile {
  SpatialGrid grid;
  std::vector<double> v;

  LimitProfile() = default;
  LimitProfile(SpatialGrid g, double value) : grid(g), v(g.samples, value) {}
  LimitProfile(SpatialGrid g, std::vector<double> values) : grid(g), v(std::move(values)) {}

  bool has_standstill() const;
};

}  // namespace stplan
