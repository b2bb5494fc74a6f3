#pragma once

// Heisenberg group arithmetic on R^3: group law, dilations, and the
// horizontal vector fields
//   X1 = d_1 + 2 x2 d_3,   X2 = d_2 - 2 x1 d_3,   [X1, X2] = -4 d_3.
// All scale constants downstream (Carnot-Caratheodory distance, Kaplan norm)
// are derived from this frame so that the whole calculus is self-consistent.

#include <cmath>
#include <functional>
#include <string>

#include "carnot_gibbs/util.hpp"

namespace carnot_gibbs {

struct GroupPoint {
  double x1 = 0.0;
  double x2 = 0.0;
  double x3 = 0.0;

  friend bool operator==(const GroupPoint&, const GroupPoint&) = default;
};

inline GroupPoint identity() { return {0.0, 0.0, 0.0}; }

inline GroupPoint compose(const GroupPoint& a, const GroupPoint& b) {
  return {a.x1 + b.x1, a.x2 + b.x2,
          a.x3 + b.x3 + 2.0 * (a.x1 * b.x2 - a.x2 * b.x1)};
}

inline GroupPoint inverse(const GroupPoint& a) { return {-a.x1, -a.x2, -a.x3}; }

inline GroupPoint dilate(double lambda, const GroupPoint& a) {
  if (!(lambda > 0.0))
    throw EvaluationError("dilate: scale must be positive, got " +
                          std::to_string(lambda));
  return {lambda * a.x1, lambda * a.x2, lambda * lambda * a.x3};
}

inline double horizontal_norm(const GroupPoint& a) {
  return std::hypot(a.x1, a.x2);
}

inline double euclidean_norm(const GroupPoint& a) {
  return std::sqrt(a.x1 * a.x1 + a.x2 * a.x2 + a.x3 * a.x3);
}

struct HorizontalVector {
  double v1 = 0.0;
  double v2 = 0.0;

  double length() const { return std::hypot(v1, v2); }
};

using ScalarField = std::function<double(const GroupPoint&)>;

namespace detail {

inline double checked(double v, const char* where) {
  if (!std::isfinite(v))
    throw EvaluationError(std::string(where) + ": non-finite field value");
  return v;
}

// Symmetric difference along coordinate axis `axis` with absolute step h.
inline double partial(const ScalarField& f, const GroupPoint& a, int axis,
                      double h) {
  GroupPoint p = a, m = a;
  double* pc = axis == 0 ? &p.x1 : (axis == 1 ? &p.x2 : &p.x3);
  double* mc = axis == 0 ? &m.x1 : (axis == 1 ? &m.x2 : &m.x3);
  *pc += h;
  *mc -= h;
  return (checked(f(p), "partial") - checked(f(m), "partial")) / (2.0 * h);
}

}  // namespace detail

/// Step used by finite-difference subgradients: `base` relative to 1 + |a|.
inline double fd_step(const GroupPoint& a, double base = 1e-4) {
  return base * (1.0 + euclidean_norm(a));
}

/// Finite-difference subgradient (X1 f, X2 f) at `a`. The coordinate
/// partials are combined with the vector-field coefficients evaluated at `a`.
inline HorizontalVector apply_subgradient(const ScalarField& f,
                                          const GroupPoint& a,
                                          double step_base = 1e-4) {
  const double h = fd_step(a, step_base);
  const double d1 = detail::partial(f, a, 0, h);
  const double d2 = detail::partial(f, a, 1, h);
  const double d3 = detail::partial(f, a, 2, h);
  return {d1 + 2.0 * a.x2 * d3, d2 - 2.0 * a.x1 * d3};
}

}  // namespace carnot_gibbs
