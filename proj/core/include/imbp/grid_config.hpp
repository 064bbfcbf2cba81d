#pragma once

#include <cmath>
#include <vector>

#include "imbp/errors.hpp"

namespace imbp {

/// Time-population grid: competition factors are frozen over windows
/// [m * epsilon, (m + 1) * epsilon) at the population rounded down to a
/// multiple of delta.
struct GridConfig {
  double epsilon = 0.0;
  double delta = 0.0;
};

std::vector<Violation> check_grid(const GridConfig& grid);
GridConfig validate_grid(GridConfig grid);

/// Largest multiple q * delta (q integer, product evaluated in double) that does
/// not exceed x. Exact at lattice points: floor_quantize(k * delta, delta) == k * delta.
inline double floor_quantize(double x, double delta) {
  double q = std::floor(x / delta);
  while ((q + 1.0) * delta <= x) q += 1.0;
  while (q > 0.0 && q * delta > x) q -= 1.0;
  return q * delta;
}

}  // namespace imbp
