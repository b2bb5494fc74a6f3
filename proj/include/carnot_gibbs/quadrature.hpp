#pragma once

// Tensor-product quadrature over the truncated spin space [-L, L]^dim.
// Trapezoid (uniform nodes, needed wherever grid functions are
// finite-differenced) and Gauss-Legendre.

#include <cmath>
#include <numbers>
#include <vector>

#include "carnot_gibbs/spin_space.hpp"
#include "carnot_gibbs/util.hpp"

namespace carnot_gibbs {

enum class QuadratureRule { Trapezoid, GaussLegendre };

struct Axis {
  std::vector<double> nodes;
  std::vector<double> weights;
};

inline Axis trapezoid_axis(double L, int n) {
  if (n < 2) throw EvaluationError("quadrature: need n >= 2 nodes per axis");
  Axis ax;
  ax.nodes.resize(n);
  ax.weights.resize(n);
  const double h = 2.0 * L / (n - 1);
  for (int i = 0; i < n; ++i) {
    ax.nodes[i] = -L + h * i;
    ax.weights[i] = (i == 0 || i == n - 1) ? 0.5 * h : h;
  }
  return ax;
}

/// Gauss-Legendre nodes/weights on [-L, L] by Newton iteration on P_n.
inline Axis gauss_legendre_axis(double L, int n) {
  if (n < 1) throw EvaluationError("quadrature: need n >= 1 nodes per axis");
  Axis ax;
  ax.nodes.resize(n);
  ax.weights.resize(n);
  const int m = (n + 1) / 2;
  for (int i = 0; i < m; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double pp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = 0.0;
      for (int j = 0; j < n; ++j) {
        double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * j + 1.0) * x * p1 - j * p2) / (j + 1.0);
      }
      pp = n * (x * p0 - p1) / (x * x - 1.0);
      double dx = p0 / pp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    ax.nodes[i] = -L * x;
    ax.nodes[n - 1 - i] = L * x;
    double w = 2.0 * L / ((1.0 - x * x) * pp * pp);
    ax.weights[i] = w;
    ax.weights[n - 1 - i] = w;
  }
  return ax;
}

struct QuadratureGrid {
  double L = 5.0;
  int n = 17;
  QuadratureRule rule = QuadratureRule::Trapezoid;

  Axis axis() const {
    return rule == QuadratureRule::Trapezoid ? trapezoid_axis(L, n)
                                             : gauss_legendre_axis(L, n);
  }
};

/// Enumerated nodes of the tensor grid over one spin space.
struct SpinGrid {
  SpinSpace space;
  QuadratureGrid spec;
  Axis ax;                      // shared per-axis rule
  std::vector<Spin> nodes;      // size = n^dim
  std::vector<double> weights;  // tensor-product weights

  int size() const { return static_cast<int>(nodes.size()); }
  int per_axis() const { return spec.n; }
  double step() const { return ax.nodes.size() > 1 ? ax.nodes[1] - ax.nodes[0] : 0.0; }

  /// Multi-index of node k: axis d changes fastest for d = 0.
  int axis_index(int k, int d) const {
    int idx = k;
    for (int i = 0; i < d; ++i) idx /= spec.n;
    return idx % spec.n;
  }

  /// True when the node touches the outermost index shell (used by the
  /// truncation-mass check).
  bool on_boundary_shell(int k) const {
    for (int d = 0; d < space.dim(); ++d) {
      int i = axis_index(k, d);
      if (i == 0 || i == spec.n - 1) return true;
    }
    return false;
  }
};

inline SpinGrid make_spin_grid(const SpinSpace& space, const QuadratureGrid& spec) {
  SpinGrid g{space, spec, spec.axis(), {}, {}};
  const int dim = space.dim();
  long total = 1;
  for (int d = 0; d < dim; ++d) total *= spec.n;
  g.nodes.reserve(total);
  g.weights.reserve(total);
  std::vector<int> idx(dim, 0);
  for (long k = 0; k < total; ++k) {
    Spin s{};
    double w = 1.0;
    for (int d = 0; d < dim; ++d) {
      s[d] = g.ax.nodes[idx[d]];
      w *= g.ax.weights[idx[d]];
    }
    g.nodes.push_back(s);
    g.weights.push_back(w);
    for (int d = 0; d < dim; ++d) {
      if (++idx[d] < spec.n) break;
      idx[d] = 0;
    }
  }
  return g;
}

}  // namespace carnot_gibbs
