#pragma once

// Test-function families the estimators maximize over: random Gaussian bumps
// centered in the truncation box, capped norm powers min(norm^s, cap), and
// coordinate functions. Each function carries an analytic gradient where one
// exists; otherwise the space's finite-difference subgradient is used.

#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "carnot_gibbs/norms.hpp"
#include "carnot_gibbs/spin_space.hpp"

namespace carnot_gibbs {

struct TestFunction {
  std::string name;
  std::function<double(const Spin&)> value;
  // may be empty; callers then fall back to finite differences
  std::function<SpinGradient(const Spin&)> grad;
};

inline SpinGradient fd_spin_gradient(const SpinSpace& space,
                                     const std::function<double(const Spin&)>& f,
                                     const Spin& s, double step = 1e-5) {
  SpinGradient g;
  g.m = space.grad_dim();
  const int dim = space.dim();
  double d[3] = {0, 0, 0};
  for (int a = 0; a < dim; ++a) {
    Spin p = s, m = s;
    p[a] += step;
    m[a] -= step;
    d[a] = (f(p) - f(m)) / (2.0 * step);
  }
  if (space.is_heisenberg()) {
    g.comp[0] = d[0] + 2.0 * s[1] * d[2];
    g.comp[1] = d[1] - 2.0 * s[0] * d[2];
  } else {
    for (int a = 0; a < space.n; ++a) g.comp[a] = d[a];
  }
  return g;
}

inline SpinGradient eval_gradient(const SpinSpace& space, const TestFunction& f,
                                  const Spin& s) {
  if (f.grad) return f.grad(s);
  return fd_spin_gradient(space, f.value, s);
}

/// Gaussian bump exp(-|x - c|^2 / (2 sigma^2)) in the coordinates.
inline TestFunction gaussian_bump(const SpinSpace& space, const Spin& center,
                                  double sigma, const std::string& name) {
  const int dim = space.dim();
  auto value = [center, sigma, dim](const Spin& s) {
    double r2 = 0.0;
    for (int a = 0; a < dim; ++a) r2 += (s[a] - center[a]) * (s[a] - center[a]);
    return std::exp(-r2 / (2.0 * sigma * sigma));
  };
  auto grad = [space, center, sigma, dim, value](const Spin& s) {
    const double v = value(s);
    double d[3] = {0, 0, 0};
    for (int a = 0; a < dim; ++a)
      d[a] = -(s[a] - center[a]) / (sigma * sigma) * v;
    SpinGradient g;
    g.m = space.grad_dim();
    if (space.is_heisenberg()) {
      g.comp[0] = d[0] + 2.0 * s[1] * d[2];
      g.comp[1] = d[1] - 2.0 * s[0] * d[2];
    } else {
      for (int a = 0; a < space.n; ++a) g.comp[a] = d[a];
    }
    return g;
  };
  return {name, value, grad};
}

/// min(norm^s, cap^s): gradient s norm^{s-1} grad(norm) below the cap,
/// zero above (the kink is a null set for the quadratures used here).
inline TestFunction capped_norm_power(const SpinSpace& space,
                                      const HomogeneousNorm& norm, double s,
                                      double cap_radius,
                                      const std::string& name) {
  auto value = [space, norm, s, cap_radius](const Spin& x) {
    return std::pow(std::min(norm.value(space, x), cap_radius), s);
  };
  auto grad = [space, norm, s, cap_radius](const Spin& x) {
    SpinGradient g;
    g.m = space.grad_dim();
    const double v = norm.value(space, x);
    if (v >= cap_radius || v < 1e-9) return g;  // flat beyond the cap
    auto gn = norm.subgradient(space, x);
    if (!gn) return g;
    const double f = s * std::pow(v, s - 1.0);
    for (int a = 0; a < g.m; ++a) g.comp[a] = f * gn->comp[a];
    return g;
  };
  return {name, value, grad};
}

inline TestFunction coordinate_function(const SpinSpace& space, int axis) {
  auto value = [axis](const Spin& s) { return s[axis]; };
  auto grad = [space, axis](const Spin& s) {
    SpinGradient g;
    g.m = space.grad_dim();
    if (space.is_heisenberg()) {
      if (axis == 0) g.comp[0] = 1.0;
      if (axis == 1) g.comp[1] = 1.0;
      if (axis == 2) {
        g.comp[0] = 2.0 * s[1];
        g.comp[1] = -2.0 * s[0];
      }
    } else {
      g.comp[axis] = 1.0;
    }
    return g;
  };
  return {"coord_x" + std::to_string(axis + 1), value, grad};
}

struct FamilyOptions {
  int random_bumps = 12;
  double bump_sigma = 1.0;
  std::vector<double> power_exponents = {1.0, 2.0, 3.0};
  std::vector<double> axis_bump_fracs = {0.35, 0.55, 0.75};
  bool include_coordinates = true;
  bool include_unit = false;  // g == 1 (U-bound families include it)
  std::uint64_t seed = 42;
};

/// The default family over one spin: random bumps in 0.8x the truncation
/// box, deterministic bumps along the first axis at fixed fractions of L,
/// norm powers capped at 0.8 L, and coordinate functions.
inline std::vector<TestFunction> make_test_family(const SpinSpace& space,
                                                  const HomogeneousNorm& norm,
                                                  double L,
                                                  const FamilyOptions& opt) {
  std::vector<TestFunction> fam;
  if (opt.include_unit)
    fam.push_back({"unit", [](const Spin&) { return 1.0; },
                   [space](const Spin&) {
                     SpinGradient g;
                     g.m = space.grad_dim();
                     return g;
                   }});
  for (double frac : opt.axis_bump_fracs) {
    Spin c{};
    c[0] = frac * L;
    fam.push_back(gaussian_bump(space, c, opt.bump_sigma,
                                "bump_axis_" + std::to_string(frac)));
  }
  std::mt19937_64 rng(opt.seed);
  std::uniform_real_distribution<double> u(-0.8 * L, 0.8 * L);
  for (int k = 0; k < opt.random_bumps; ++k) {
    Spin c{};
    for (int a = 0; a < space.dim(); ++a) c[a] = u(rng);
    fam.push_back(
        gaussian_bump(space, c, opt.bump_sigma, "bump_rnd_" + std::to_string(k)));
  }
  for (double s : opt.power_exponents)
    fam.push_back(capped_norm_power(space, norm, s, 0.8 * L,
                                    norm.name() + "^" + std::to_string(s)));
  if (opt.include_coordinates)
    for (int a = 0; a < space.dim(); ++a)
      fam.push_back(coordinate_function(space, a));
  return fam;
}

}  // namespace carnot_gibbs
