#pragma once

#include "mthin/geometry.hpp"

#include <functional>

namespace mthin {

struct QuadratureResult {
  double value = 0.0;
  double error = 0.0;
  bool converged = true;
  long evaluations = 0;
};

/// Globally adaptive Gauss-Kronrod (7/15) integration of f over [a, b].
QuadratureResult integrate_1d(const std::function<double(double)>& f, double a, double b,
                              double rel_tol, double abs_tol = 0.0, int max_subdivisions = 200);

/// Iterated integral of f over a bounded region: adaptive in each of the first
/// d-1 coordinates, then along the vertical fibers.
QuadratureResult integrate_region(const Region& region, const std::function<double(const Point&)>& f,
                                  double rel_tol, double abs_tol = 0.0, int max_subdivisions = 200);

/// Lebesgue measure of a bounded region.
QuadratureResult region_volume(const Region& region, double rel_tol = 1e-6);

}  // namespace mthin
