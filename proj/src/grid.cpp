#include "stplan/grid.hpp"

#include <algorithm>
#include <cmath>

namespace stplan {

int SpatialGrid::nearest(double s) const {
  const double r = std::round((s - s0) / ds);
  if (r < 0.0) return (s0 - s) <= 0.5 * ds ? 0 : -1;
  if (r > samples - 1) return (s - back()) <= 0.5 * ds ? samples - 1 : -1;
  return static_cast<int>(r);
}

int SpatialGrid::clamp_index(double s) const {
  const double r = std::round((s - s0) / ds);
  return static_cast<int>(std::clamp(r, 0.0, static_cast<double>(samples - 1)));
}

double interpolate(const SpatialGrid& grid, const std::vector<double>& values, double s) {
  if (values.empty()) return 0.0;
  const double u = (s - grid.s0) / grid.ds;
  if (u <= 0.0) return values.front();
  const auto last = static_cast<double>(values.size() - 1);
  if (u >= last) return values.back();
  const auto i = static_cast<std::size_t>(u);
  const double f = u - static_cast<double>(i);
  return (1.0 - f) * values[i] + f * values[i + 1];
}

bool LimitProfile::has_standstill() const {
  return std::any_of(v.begin(), v.end(), [](double x) { return x <= 0.0; });
}

}  // namespace stplan
