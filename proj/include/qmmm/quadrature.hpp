#pragma once

#include <functional>
#include <span>

namespace qmmm {

struct QuadratureResult {
  double value = 0.0;
  double abs_error = 0.0;
  int evaluations = 0;
  bool converged = false;
  // Set when refinement concentrates on an endpoint while the estimate keeps growing.
  bool divergent = false;
};

struct QuadratureSettings {
  double abs_tol = 1e-10;
  int initial_panels = 4;
  int max_panels = 4000;
};

/// Globally adaptive Gauss-Kronrod (7/15) quadrature on [a, b].
///
/// The initial partition is formed from `breakpoints` (clipped to (a, b)) and
/// then split into roughly `initial_panels` pieces. The worst panel is bisected
/// until the summed error estimate drops below `abs_tol` and at least one
/// refinement pass agrees with the previous total to within `abs_tol`.
/// Bisection of the worst panel refines geometrically toward endpoint
/// singularities. Throws Error(NonFinite) if the integrand returns NaN.
QuadratureResult integrate_adaptive(const std::function<double(double)>& f, double a, double b,
                                    const QuadratureSettings& settings,
                                    std::span<const double> breakpoints = {});

}  // namespace qmmm
