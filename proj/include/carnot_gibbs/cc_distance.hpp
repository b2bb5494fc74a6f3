#pragma once

// Carnot-Caratheodory norm on the Heisenberg group, computed from the
// one-parameter helix family of geodesics from the origin.
//
// A subunit curve for (X1, X2) has horizontal projection of speed <= 1 and
// vertical drift z' = 2(y c1 - x c2), so the vertical gain is -4x the area
// swept by the radius vector of the projection. Time-optimal curves have
// circular-arc projections; with |w| = rho, turning angle T in (0, 2pi) and
// arc radius r = rho / (2 sin(T/2)):
//
//   |z| = rho^2 u(T),  u(T) = (T - sin T) / (1 - cos T),   d = rho T / (2 sin(T/2)).
//
// u is monotone on (0, 2pi), so T is found by bisection; the endpoints
// degenerate to the straight segment (z = 0, d = |w|) and the full circle
// (w = 0, d = sqrt(pi |z|)).

#include <cmath>
#include <numbers>

#include "carnot_gibbs/heisenberg.hpp"
#include "carnot_gibbs/util.hpp"

namespace carnot_gibbs {

struct CcSolveResult {
  double value = 0.0;     // the norm d(a)
  double theta = 0.0;     // turning angle of the optimal helix
  double residual = 0.0;  // |u(theta) - |z|/rho^2| relative
  bool converged = true;
};

namespace detail {

inline double helix_u(double theta) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  if (theta < 0.5) {
    // series around 0 avoids the 0/0 cancellation
    const double t2 = theta * theta;
    return (theta / 3.0) * (1.0 + t2 / 30.0 + t2 * t2 / 840.0);
  }
  if (theta > two_pi - 0.5) {
    const double e = two_pi - theta;
    const double s = std::sin(0.5 * e);
    return (two_pi - e + std::sin(e)) / (2.0 * s * s);
  }
  const double s = std::sin(0.5 * theta);
  return (theta - std::sin(theta)) / (2.0 * s * s);
}

}  // namespace detail

inline CcSolveResult cc_norm_solve(const GroupPoint& a) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  const double rho = horizontal_norm(a);
  const double az = std::abs(a.x3);
  CcSolveResult res;
  if (az == 0.0) {
    res.value = rho;
    return res;
  }
  if (rho == 0.0) {
    res.value = std::sqrt(std::numbers::pi * az);
    res.theta = two_pi;
    return res;
  }
  const double target = az / (rho * rho);
  double lo = 1e-15, hi = two_pi - 1e-15;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (detail::helix_u(mid) < target ? lo : hi) = mid;
  }
  const double theta = 0.5 * (lo + hi);
  res.theta = theta;
  res.residual = std::abs(detail::helix_u(theta) - target) /
                 (1.0 + std::abs(target));
  res.converged = res.residual < 1e-9;
  res.value = theta > 1e-12 ? rho * theta / (2.0 * std::sin(0.5 * theta)) : rho;
  if (!res.converged)
    throw NumericalError("cc_norm: helix solve residual " +
                         std::to_string(res.residual));
  return res;
}

/// Carnot-Caratheodory norm d(a) = d(a, 0).
inline double cc_distance(const GroupPoint& a) { return cc_norm_solve(a).value; }

/// d computed after left translation by g; algebraically equal to
/// d(inverse(b) . a) but exercised through an independent solve.
inline double left_translate_distance(const GroupPoint& g, const GroupPoint& a,
                                      const GroupPoint& b) {
  const GroupPoint ga = compose(g, a), gb = compose(g, b);
  return cc_distance(compose(inverse(gb), ga));
}

}  // namespace carnot_gibbs
