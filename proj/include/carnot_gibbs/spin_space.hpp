#pragma once

// Single-spin state space: the Heisenberg group H (3 coordinates, 2
// horizontal gradient components) or Euclidean R^n (n <= 3 at desk scale).

#include <array>
#include <cmath>
#include <string>

#include "carnot_gibbs/heisenberg.hpp"
#include "carnot_gibbs/util.hpp"

namespace carnot_gibbs {

using Spin = std::array<double, 3>;

inline Spin to_spin(const GroupPoint& p) { return {p.x1, p.x2, p.x3}; }
inline GroupPoint to_group_point(const Spin& s) { return {s[0], s[1], s[2]}; }

struct SpinSpace {
  enum class Kind { Heisenberg, Euclidean };

  Kind kind = Kind::Heisenberg;
  int n = 3;  // coordinate count for Euclidean; ignored for Heisenberg

  static SpinSpace heisenberg() { return {Kind::Heisenberg, 3}; }
  static SpinSpace euclidean(int n) {
    if (n < 1 || n > 3)
      throw EvaluationError("SpinSpace: Euclidean n must be in [1,3], got " +
                            std::to_string(n));
    return {Kind::Euclidean, n};
  }

  bool is_heisenberg() const { return kind == Kind::Heisenberg; }
  int dim() const { return is_heisenberg() ? 3 : n; }
  int grad_dim() const { return is_heisenberg() ? 2 : n; }

  /// Group translation for H, vector addition for R^n.
  Spin combine(const Spin& a, const Spin& b) const {
    if (is_heisenberg())
      return to_spin(compose(to_group_point(a), to_group_point(b)));
    Spin r{};
    for (int i = 0; i < n; ++i) r[i] = a[i] + b[i];
    return r;
  }

  Spin invert(const Spin& a) const {
    Spin r{};
    for (int i = 0; i < dim(); ++i) r[i] = -a[i];
    return r;
  }

  /// Anisotropic dilation for H (vertical axis scales quadratically),
  /// plain scaling for R^n.
  Spin scale(double lambda, const Spin& a) const {
    if (is_heisenberg())
      return to_spin(dilate(lambda, to_group_point(a)));
    Spin r{};
    for (int i = 0; i < n; ++i) r[i] = lambda * a[i];
    return r;
  }

  friend bool operator==(const SpinSpace&, const SpinSpace&) = default;
};

/// Gradient of a function of one spin: horizontal components on H,
/// all n components on R^n.
struct SpinGradient {
  std::array<double, 3> comp{};
  int m = 2;

  double length() const {
    double s = 0.0;
    for (int i = 0; i < m; ++i) s += comp[i] * comp[i];
    return std::sqrt(s);
  }
};

inline HorizontalVector to_horizontal(const SpinGradient& g) {
  return {g.comp[0], g.comp[1]};
}

}  // namespace carnot_gibbs
