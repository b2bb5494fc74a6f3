#pragma once

// Numerical estimation of the model constants: q-spectral-gap constants by
// Rayleigh-quotient maximization (plus, at q = 2, the inverse of the
// smallest nonzero eigenvalue of the discretized generator), U-bound
// constants, interaction gradient bounds, and Dobrushin coefficients.
//
// All estimates are maximizations over finite test families: lower bounds
// flagged by refinement stability, never certified upper bounds.

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "carnot_gibbs/lattice.hpp"
#include "carnot_gibbs/quadrature.hpp"
#include "carnot_gibbs/report.hpp"
#include "carnot_gibbs/test_functions.hpp"
#include "carnot_gibbs/util.hpp"

namespace carnot_gibbs {

// ---------------------------------------------------------------------------
// Product measure over k independent copies of one single-spin measure
// (the beta = 0 window; k = 1 is the plain single-site measure).

class ProductMeasure {
 public:
  ProductMeasure(SpinSpace space, const Phase& phase, QuadratureGrid spec,
                 int sites = 1,
                 std::function<double(const Spin&)> extra_potential = {})
      : space_(space), grid_(make_spin_grid(space, spec)), sites_(sites) {
    const int G = grid_.size();
    mass_.resize(G);
    z_ = 0.0;
    for (int x = 0; x < G; ++x) {
      double u = phase.value(space_, grid_.nodes[x]);
      if (extra_potential) u += extra_potential(grid_.nodes[x]);
      mass_[x] = grid_.weights[x] * std::exp(-u);
      z_ += mass_[x];
    }
    if (z_ <= 0.0) throw NumericalError("product measure: zero mass");
    double total = 1.0;
    for (int s = 0; s < sites_; ++s) total *= double(G);
    if (total > 4e6)
      throw NumericalError("product measure: grid too large for " +
                           std::to_string(sites_) + " sites");
    count_ = long(total);
  }

  const SpinGrid& grid() const { return grid_; }
  int sites() const { return sites_; }
  long count() const { return count_; }

  /// Joint test function: a product of optional per-site factors.
  struct Fn {
    std::string name;
    std::vector<std::optional<TestFunction>> factor;  // size = sites
  };

  Fn lift(const TestFunction& f, int site) const {
    Fn out;
    out.name = f.name + "@site" + std::to_string(site);
    out.factor.resize(sites_);
    out.factor[site] = f;
    return out;
  }

  struct Moments {
    double mean = 0.0;
    double centered_q = 0.0;   // nu |f - nu f|^q
    double dirichlet_q = 0.0;  // sum_sites nu |grad_site f|^q
  };

  Moments moments(const Fn& f, double q) const {
    const int G = grid_.size();
    // two passes: mean first, then centered moment and Dirichlet term
    double zq = std::pow(z_, sites_);
    double mean = 0.0;
    for_each_config([&](const std::vector<int>& idx, double m) {
      mean += m * joint_value(f, idx);
    });
    mean /= zq;
    Moments mo;
    mo.mean = mean;
    double cq = 0.0, dq = 0.0;
    for_each_config([&](const std::vector<int>& idx, double m) {
      const double v = joint_value(f, idx);
      cq += m * std::pow(std::abs(v - mean), q);
      double g = 0.0;
      for (int s = 0; s < sites_; ++s) g += std::pow(site_grad_len(f, idx, s), q);
      dq += m * g;
    });
    mo.centered_q = cq / zq;
    mo.dirichlet_q = dq / zq;
    return mo;
  }

  double expectation(const std::function<double(const Spin&)>& f) const {
    double acc = 0.0;
    const int G = grid_.size();
    for (int x = 0; x < G; ++x) acc += mass_[x] * f(grid_.nodes[x]);
    return acc / z_;
  }

  const std::vector<double>& site_mass() const { return mass_; }
  double site_z() const { return z_; }
  const SpinSpace& space() const { return space_; }

 private:
  template <typename Cb>
  void for_each_config(Cb&& cb) const {
    const int G = grid_.size();
    std::vector<int> idx(sites_, 0);
    for (long e = 0; e < count_; ++e) {
      long rem = e;
      double m = 1.0;
      for (int s = 0; s < sites_; ++s) {
        idx[s] = int(rem % G);
        rem /= G;
        m *= mass_[idx[s]];
      }
      cb(idx, m);
    }
  }

  double joint_value(const Fn& f, const std::vector<int>& idx) const {
    double v = 1.0;
    for (int s = 0; s < sites_; ++s)
      if (f.factor[s]) v *= f.factor[s]->value(grid_.nodes[idx[s]]);
    return v;
  }

  double site_grad_len(const Fn& f, const std::vector<int>& idx, int site) const {
    if (!f.factor[site]) return 0.0;
    double rest = 1.0;
    for (int s = 0; s < sites_; ++s)
      if (s != site && f.factor[s]) rest *= f.factor[s]->value(grid_.nodes[idx[s]]);
    const SpinGradient g =
        eval_gradient(space_, *f.factor[site], grid_.nodes[idx[site]]);
    return std::abs(rest) * g.length();
  }

  SpinSpace space_;
  SpinGrid grid_;
  int sites_;
  std::vector<double> mass_;
  double z_ = 0.0;
  long count_ = 0;
};

// ---------------------------------------------------------------------------
// Discretized generator gap: smallest nonzero eigenvalue of
// L = Delta - grad U . grad on the (product) grid, via the Dirichlet form
// K = G^T M G with no-flux boundaries, inverse power iteration, and CG.

struct GapResult {
  double lambda1 = 0.0;
  bool converged = false;
  int iterations = 0;
};

namespace detail {

class DirichletOperator {
 public:
  DirichletOperator(const ProductMeasure& pm) : pm_(pm), grid_(pm.grid()) {
    n_ = grid_.per_axis();
    h_ = grid_.step();
    if (grid_.spec.rule != QuadratureRule::Trapezoid)
      throw EvaluationError("generator gap: needs a uniform grid");
    dim_ = pm.space().dim();
    axes_ = pm.sites() * dim_;
    total_ = 1;
    for (int a = 0; a < axes_; ++a) total_ *= n_;
    // joint mass per flat index over all axes
    mass_.resize(total_);
    const int G = grid_.size();
    for (long e = 0; e < total_; ++e) {
      long rem = e;
      double m = 1.0;
      for (int s = 0; s < pm.sites(); ++s) {
        int node = 0, stride = 1;
        for (int a = 0; a < dim_; ++a) {
          node += stride * int(rem % n_);
          stride *= n_;
          rem /= n_;
        }
        m *= pm.site_mass()[node] / pm.site_z();
      }
      mass_[e] = m;
    }
  }

  long size() const { return total_; }
  const std::vector<double>& mass() const { return mass_; }

  // out = K v with K = (1/2) sum_{dir} G_dir^T M G_dir: the average of the
  // forward- and backward-difference Dirichlet forms. Centered differences
  // would decouple the node parities and admit a spurious near-null mode;
  // the one-sided pair couples neighbors and its O(h) form errors cancel.
  void apply_K(const std::vector<double>& v, std::vector<double>& out) const {
    std::fill(out.begin(), out.end(), 0.0);
    std::vector<double> w1(total_);
    const bool heis = pm_.space().is_heisenberg();
    for (int dir : {+1, -1}) {
      for (int s = 0; s < pm_.sites(); ++s) {
        const int base = s * dim_;
        const int ncomp = pm_.space().grad_dim();
        for (int c = 0; c < ncomp; ++c) {
          // w1 = (1/2) M G_{s,c,dir} v
          for (long e = 0; e < total_; ++e) {
            double g = 0.0;
            if (heis) {
              const double x = coord(e, base + 0), y = coord(e, base + 1);
              if (c == 0)
                g = diff(v, e, base + 0, dir) + 2.0 * y * diff(v, e, base + 2, dir);
              else
                g = diff(v, e, base + 1, dir) - 2.0 * x * diff(v, e, base + 2, dir);
            } else {
              g = diff(v, e, base + c, dir);
            }
            w1[e] = 0.5 * g * mass_[e];
          }
          // out += G_dir^T w1 (scatter the same stencils)
          for (long e = 0; e < total_; ++e) {
            const double u = w1[e];
            if (u == 0.0) continue;
            if (heis) {
              const double x = coord(e, base + 0), y = coord(e, base + 1);
              if (c == 0) {
                scatter(out, e, base + 0, dir, u);
                scatter(out, e, base + 2, dir, 2.0 * y * u);
              } else {
                scatter(out, e, base + 1, dir, u);
                scatter(out, e, base + 2, dir, -2.0 * x * u);
              }
            } else {
              scatter(out, e, base + c, dir, u);
            }
          }
        }
      }
    }
  }

  double coord(long e, int axis) const {
    long stride = 1;
    for (int a = 0; a < axis; ++a) stride *= n_;
    return grid_.ax.nodes[(e / stride) % n_];
  }

 private:
  // one-sided difference along one axis; falls back to the other side at
  // the box edge
  double diff(const std::vector<double>& v, long e, int axis, int dir) const {
    long stride = 1;
    for (int a = 0; a < axis; ++a) stride *= n_;
    const int i = int((e / stride) % n_);
    if (dir > 0)
      return i < n_ - 1 ? (v[e + stride] - v[e]) / h_
                        : (v[e] - v[e - stride]) / h_;
    return i > 0 ? (v[e] - v[e - stride]) / h_
                 : (v[e + stride] - v[e]) / h_;
  }

  void scatter(std::vector<double>& out, long e, int axis, int dir,
               double coef) const {
    long stride = 1;
    for (int a = 0; a < axis; ++a) stride *= n_;
    const int i = int((e / stride) % n_);
    if (dir > 0) {
      if (i < n_ - 1) {
        out[e + stride] += coef / h_;
        out[e] -= coef / h_;
      } else {
        out[e] += coef / h_;
        out[e - stride] -= coef / h_;
      }
    } else {
      if (i > 0) {
        out[e] += coef / h_;
        out[e - stride] -= coef / h_;
      } else {
        out[e + stride] += coef / h_;
        out[e] -= coef / h_;
      }
    }
  }

  const ProductMeasure& pm_;
  const SpinGrid& grid_;
  int n_ = 0, dim_ = 0, axes_ = 0;
  double h_ = 0.0;
  long total_ = 0;
  std::vector<double> mass_;
};

}  // namespace detail

/// Smallest nonzero generalized eigenvalue of K v = lambda M v (the spectral
/// gap of the discretized generator), by inverse power iteration with the
/// constant mode deflated; linear solves by plain CG.
inline GapResult generator_gap(const ProductMeasure& pm, double shift = 0.5,
                               int max_outer = 400, double tol = 1e-8) {
  detail::DirichletOperator op(pm);
  const long N = op.size();
  const auto& m = op.mass();
  double msum = 0.0;
  for (double x : m) msum += x;

  auto deflate = [&](std::vector<double>& v) {
    double dot = 0.0;
    for (long e = 0; e < N; ++e) dot += m[e] * v[e];
    dot /= msum;
    for (long e = 0; e < N; ++e) v[e] -= dot;
  };
  auto apply_A = [&](const std::vector<double>& v, std::vector<double>& out) {
    op.apply_K(v, out);
    for (long e = 0; e < N; ++e) out[e] += shift * m[e] * v[e];
  };

  // CG solve A x = b
  std::vector<double> x(N), r(N), p(N), Ap(N), Kv(N);
  auto cg = [&](const std::vector<double>& b, std::vector<double>& sol) {
    std::fill(sol.begin(), sol.end(), 0.0);
    r = b;
    p = r;
    double rs = 0.0;
    for (long e = 0; e < N; ++e) rs += r[e] * r[e];
    const double rs0 = rs;
    for (int it = 0; it < 2000 && rs > 1e-26 * (rs0 + 1e-300); ++it) {
      apply_A(p, Ap);
      double pAp = 0.0;
      for (long e = 0; e < N; ++e) pAp += p[e] * Ap[e];
      if (pAp <= 0.0) break;
      const double alpha = rs / pAp;
      double rs_new = 0.0;
      for (long e = 0; e < N; ++e) {
        sol[e] += alpha * p[e];
        r[e] -= alpha * Ap[e];
        rs_new += r[e] * r[e];
      }
      const double beta = rs_new / rs;
      rs = rs_new;
      for (long e = 0; e < N; ++e) p[e] = r[e] + beta * p[e];
    }
  };

  // start from the first coordinate function: good overlap with the gap mode
  std::vector<double> v(N), b(N);
  for (long e = 0; e < N; ++e) v[e] = op.coord(e, 0);
  deflate(v);

  GapResult res;
  double lambda_prev = -1.0;
  for (int outer = 0; outer < max_outer; ++outer) {
    for (long e = 0; e < N; ++e) b[e] = m[e] * v[e];
    cg(b, x);
    deflate(x);
    double norm2 = 0.0;
    for (long e = 0; e < N; ++e) norm2 += m[e] * x[e] * x[e];
    if (!(norm2 > 0.0)) break;
    const double inv = 1.0 / std::sqrt(norm2);
    for (long e = 0; e < N; ++e) v[e] = x[e] * inv;
    // Rayleigh quotient of the deflated iterate
    op.apply_K(v, Kv);
    double num = 0.0, den = 0.0;
    for (long e = 0; e < N; ++e) {
      num += v[e] * Kv[e];
      den += m[e] * v[e] * v[e];
    }
    const double lambda = num / den;
    res.iterations = outer + 1;
    if (lambda_prev > 0.0 && std::abs(lambda - lambda_prev) < tol * lambda) {
      res.lambda1 = lambda;
      res.converged = true;
      return res;
    }
    lambda_prev = lambda;
    res.lambda1 = lambda;
  }
  return res;
}

// ---------------------------------------------------------------------------
// q-spectral-gap constant

struct SGIParams {
  double q = 2.0;
  FamilyOptions family;
  bool use_generator = true;

  double p() const { return q / (q - 1.0); }
};

struct SgiResult {
  double rayleigh = 0.0;
  double generator = 0.0;  // 1 / lambda_1; 0 when unavailable
  bool generator_ok = false;
  std::string argmax;
  EstimateReport report;
};

/// C-hat = max over the family of nu|f - nu f|^q / nu|grad f|^q; at q = 2
/// also 1 / lambda_1 of the discretized generator. The larger is reported,
/// both are recorded.
inline SgiResult estimate_sgi_constant(const ProductMeasure& pm,
                                       const HomogeneousNorm& family_norm,
                                       const SGIParams& params) {
  SgiResult res;
  const double L = pm.grid().spec.L;
  FamilyOptions fam = params.family;
  std::vector<TestFunction> base = make_test_family(pm.space(), family_norm, L, fam);
  std::vector<ProductMeasure::Fn> fns;
  for (int s = 0; s < pm.sites(); ++s)
    for (const auto& f : base) fns.push_back(pm.lift(f, s));
  if (pm.sites() > 1) {
    // genuine joint functions: products of per-site bumps
    std::mt19937_64 rng(fam.seed ^ 0x9e37u);
    std::uniform_real_distribution<double> u(-0.7 * L, 0.7 * L);
    for (int k = 0; k < fam.random_bumps; ++k) {
      ProductMeasure::Fn f;
      f.name = "joint_bump_" + std::to_string(k);
      f.factor.resize(pm.sites());
      for (int s = 0; s < pm.sites(); ++s) {
        Spin c{};
        for (int a = 0; a < pm.space().dim(); ++a) c[a] = u(rng);
        f.factor[s] = gaussian_bump(pm.space(), c, fam.bump_sigma, f.name);
      }
      fns.push_back(std::move(f));
    }
  }

  for (const auto& f : fns) {
    const auto mo = pm.moments(f, params.q);
    if (mo.dirichlet_q < 1e-10) continue;  // near-constant excluded
    const double ratio = mo.centered_q / mo.dirichlet_q;
    if (ratio > res.rayleigh) {
      res.rayleigh = ratio;
      res.argmax = f.name;
    }
  }

  if (params.use_generator && std::abs(params.q - 2.0) < 1e-12) {
    try {
      const GapResult gap = generator_gap(pm);
      if (gap.converged && gap.lambda1 > 0.0) {
        res.generator = 1.0 / gap.lambda1;
        res.generator_ok = true;
      }
    } catch (const std::exception&) {
      res.generator_ok = false;  // fall back to Rayleigh-only, flagged
    }
  }

  res.report.constant = "C_SG";
  res.report.value = std::max(res.rayleigh, res.generator);
  res.report.method = res.generator_ok ? "rayleigh+generator" : "rayleigh-only";
  res.report.uncertainty = std::abs(res.rayleigh - res.generator);
  res.report.metadata["rayleigh"] = res.rayleigh;
  res.report.metadata["generator"] = res.generator;
  res.report.metadata["q"] = params.q;
  res.report.metadata["p"] = params.p();
  res.report.metadata["grid_L"] = pm.grid().spec.L;
  res.report.metadata["grid_n"] = pm.grid().spec.n;
  res.report.metadata["sites"] = pm.sites();
  res.report.notes["argmax"] = res.argmax;
  res.report.seed = params.family.seed;
  return res;
}

// ---------------------------------------------------------------------------
// U-bound (C1)

/// eta = base^exponent, nonnegative, expected to diverge in all directions
/// for the valid presets (checked on a radial grid).
struct UBoundFunction {
  std::string tag;
  HomogeneousNorm base;
  double exponent = 2.0;

  double value(const SpinSpace& space, const Spin& s) const {
    return std::pow(base.value(space, s), exponent);
  }

  /// Sampled-ray divergence: the value must keep growing along every
  /// direction of the spin space out to rmax.
  bool diverges(const SpinSpace& space, double rmax = 64.0) const {
    if (exponent <= 0.0) return false;
    static const std::vector<Spin> dirs = {
        {1, 0, 0}, {0, 1, 0}, {0, 0, 1}, {1, 1, 1}, {-1, 0.5, 2}};
    for (Spin dir : dirs) {
      Spin far{}, mid{};
      bool nonzero = false;
      for (int a = 0; a < space.dim(); ++a) {
        far[a] = rmax * dir[a];
        mid[a] = 0.5 * rmax * dir[a];
        nonzero = nonzero || dir[a] != 0.0;
      }
      if (!nonzero) continue;
      const double vf = value(space, far), vm = value(space, mid);
      if (vf < 1.0 || vf < 1.2 * vm) return false;
    }
    return true;
  }
};

struct C1Options {
  double q = 2.0;
  double L = 8.0;
  double spacing = 0.35;  // node spacing target; n is derived (odd)
  FamilyOptions family;   // include_unit is forced on
  bool support_outside_unit_ball = false;
  double radius_factor = 1.5;  // second radius for the stability flag
  double stability_tol = 0.10;
};

struct C1Single {
  double B_hat = 0.0;
  std::string argmax;
  int skipped = 0;
};

namespace detail {

inline int odd_nodes_for(double L, double spacing) {
  int n = int(std::ceil(2.0 * L / spacing)) + 1;
  return n % 2 == 0 ? n + 1 : n;
}

}  // namespace detail

/// B-hat at one truncation radius: max over the family of
/// int |g|^q eta e^{-phi} / int (|grad g|^q + |g|^q) e^{-phi}.
///
/// Members are tabulated as the pair (|g|^q e^{-phi} w, |grad g|^q e^{-phi} w)
/// per node so that the exponentially tilted members exp(t phi / q), whose
/// raw values overflow, stay finite: their weights reduce to
/// exp(-(1-t) phi) w. Those tilted members have their support radius tied
/// to the truncation box; for a valid eta their ratios stay bounded while
/// for an eta growing faster than the U-bound allows they escalate with L,
/// which is the divergence signature the negative controls look for.
/// The base norm's value and subgradient are cached once per radius (the CC
/// gradient costs six geodesic solves per point, shared by every member).
inline C1Single verify_ubound_c1_at(const SpinSpace& space, const Phase& phase,
                                    const UBoundFunction& eta, double q,
                                    double L, const C1Options& opt) {
  QuadratureGrid spec{L, detail::odd_nodes_for(L, opt.spacing),
                      QuadratureRule::Trapezoid};
  const SpinGrid grid = make_spin_grid(space, spec);
  const int G = grid.size();
  std::vector<double> phi(G), mu(G), eta_v(G), nv(G);
  std::vector<SpinGradient> ng(G);
  parallel_for(std::size_t(G), [&](std::size_t x) {
    phi[x] = phase.value(space, grid.nodes[x]);
    mu[x] = grid.weights[x] * std::exp(-phi[x]);
    eta_v[x] = eta.value(space, grid.nodes[x]);
    nv[x] = eta.base.value(space, grid.nodes[x]);
    auto g = eta.base.subgradient(space, grid.nodes[x]);
    ng[x] = g ? *g : SpinGradient{{}, space.grad_dim()};
  });

  // per-phase-term norm caches for the tilted members' grad(phi)
  std::vector<std::vector<double>> term_nv;
  std::vector<std::vector<SpinGradient>> term_ng;
  for (const PhaseTerm& t : phase.terms()) {
    if (t.norm.name() == eta.base.name()) {
      term_nv.push_back(nv);
      term_ng.push_back(ng);
      continue;
    }
    std::vector<double> v(G);
    std::vector<SpinGradient> g(G);
    parallel_for(std::size_t(G), [&](std::size_t x) {
      v[x] = t.norm.value(space, grid.nodes[x]);
      auto gg = t.norm.subgradient(space, grid.nodes[x]);
      g[x] = gg ? *gg : SpinGradient{{}, space.grad_dim()};
    });
    term_nv.push_back(std::move(v));
    term_ng.push_back(std::move(g));
  }
  auto phase_gradient = [&](int x) {
    SpinGradient acc{{}, space.grad_dim()};
    for (std::size_t k = 0; k < phase.terms().size(); ++k) {
      const PhaseTerm& t = phase.terms()[k];
      if (t.exponent == 0.0) continue;
      const double f = t.coefficient * t.exponent *
                       std::pow(term_nv[k][x], t.exponent - 1.0);
      for (int a = 0; a < acc.m; ++a) acc.comp[a] += f * term_ng[k][x].comp[a];
    }
    return acc;
  };

  struct Member {
    std::string name;
    std::vector<double> vqmu;  // |g|^q e^{-phi} w per node
    std::vector<double> gqmu;  // |grad g|^q e^{-phi} w per node
  };
  std::vector<Member> members;

  auto chi = [](double v) {
    const double t = std::clamp((v - 1.0) / 0.5, 0.0, 1.0);
    return t * t * (3.0 - 2.0 * t);
  };
  auto chi_prime = [](double v) {
    const double t = std::clamp((v - 1.0) / 0.5, 0.0, 1.0);
    return (6.0 * t - 6.0 * t * t) / 0.5;
  };

  // value/gradient form: bumps, powers, unit
  auto add_pointwise = [&](const std::string& name,
                           const std::function<double(int)>& val,
                           const std::function<SpinGradient(int)>& grad) {
    Member m{name, std::vector<double>(G), std::vector<double>(G)};
    parallel_for(std::size_t(G), [&](std::size_t x) {
      double v = val(int(x));
      SpinGradient g = grad(int(x));
      if (opt.support_outside_unit_ball) {
        const double c = chi(nv[x]), cp = chi_prime(nv[x]);
        for (int a = 0; a < g.m; ++a)
          g.comp[a] = c * g.comp[a] + v * cp * ng[x].comp[a];
        v *= c;
      }
      m.vqmu[x] = std::pow(std::abs(v), q) * mu[x];
      m.gqmu[x] = std::pow(g.length(), q) * mu[x];
    });
    members.push_back(std::move(m));
  };

  FamilyOptions fam = opt.family;
  add_pointwise(
      "unit", [&](int) { return 1.0; },
      [&](int) { return SpinGradient{{}, space.grad_dim()}; });
  std::vector<TestFunction> bumps;
  for (double frac : fam.axis_bump_fracs) {
    Spin c{};
    c[0] = frac * L;
    bumps.push_back(gaussian_bump(space, c, fam.bump_sigma,
                                  "bump_axis_" + std::to_string(frac)));
  }
  {
    std::mt19937_64 rng(fam.seed);
    std::uniform_real_distribution<double> u(-0.8 * L, 0.8 * L);
    for (int k = 0; k < fam.random_bumps; ++k) {
      Spin c{};
      for (int a = 0; a < space.dim(); ++a) c[a] = u(rng);
      bumps.push_back(gaussian_bump(space, c, fam.bump_sigma,
                                    "bump_rnd_" + std::to_string(k)));
    }
  }
  for (const TestFunction& b : bumps)
    add_pointwise(
        b.name, [&](int x) { return b.value(grid.nodes[x]); },
        [&](int x) { return b.grad(grid.nodes[x]); });

  const double cap = 0.8 * L;
  for (double s : fam.power_exponents)
    add_pointwise(
        eta.base.name() + "^" + std::to_string(s),
        [&](int x) { return std::pow(std::min(nv[x], cap), s); },
        [&](int x) {
          SpinGradient g{{}, space.grad_dim()};
          if (nv[x] < cap && nv[x] > 1e-9) {
            const double f = s * std::pow(nv[x], s - 1.0);
            for (int a = 0; a < g.m; ++a) g.comp[a] = f * ng[x].comp[a];
          }
          return g;
        });

  // tilted members exp(t phi / q) with the tilt chosen so the reweighted
  // measure e^{-(1-t) phi} concentrates at a fixed fraction of the box
  const PhaseTerm& lead = *std::max_element(
      phase.terms().begin(), phase.terms().end(),
      [](const PhaseTerm& a, const PhaseTerm& b) { return a.exponent < b.exponent; });
  for (double frac : {1.0 / 3.0, 1.0 / 4.0}) {
    const double rs = frac * L;
    const double denom = lead.coefficient * std::pow(rs, lead.exponent);
    if (denom <= 1.0) continue;
    const double t = std::min(0.98, 1.0 - 1.0 / denom);
    if (t <= 0.0) continue;
    Member m{"tilt_" + std::to_string(frac), std::vector<double>(G),
             std::vector<double>(G)};
    parallel_for(std::size_t(G), [&](std::size_t x) {
      const double w = grid.weights[x] * std::exp(-(1.0 - t) * phi[x]);
      SpinGradient gp = phase_gradient(int(x));
      double base_q = std::pow((t / q), q) * std::pow(gp.length(), q);
      if (opt.support_outside_unit_ball) {
        // grad(chi g) = (chi t/q grad(phi) + chi' grad(nu)) g
        const double c = chi(nv[x]), cp = chi_prime(nv[x]);
        SpinGradient comb{{}, space.grad_dim()};
        for (int a = 0; a < comb.m; ++a)
          comb.comp[a] = c * (t / q) * gp.comp[a] + cp * ng[x].comp[a];
        m.vqmu[x] = std::pow(c, q) * w;
        m.gqmu[x] = std::pow(comb.length(), q) * w;
      } else {
        m.vqmu[x] = w;
        m.gqmu[x] = base_q * w;
      }
    });
    members.push_back(std::move(m));
  }

  C1Single out;
  for (const Member& m : members) {
    double lhs = 0.0, rhs = 0.0;
    for (int x = 0; x < G; ++x) {
      lhs += m.vqmu[x] * eta_v[x];
      rhs += m.gqmu[x] + m.vqmu[x];
    }
    if (rhs < 1e-12) {
      ++out.skipped;
      continue;
    }
    const double ratio = lhs / rhs;
    if (ratio > out.B_hat) {
      out.B_hat = ratio;
      out.argmax = m.name;
    }
  }
  return out;
}

/// B-hat with a stability flag comparing truncation radii L and 1.5 L.
inline EstimateReport verify_ubound_C1(const SpinSpace& space, const Phase& phase,
                                       const UBoundFunction& eta, double q,
                                       const C1Options& opt) {
  const C1Single base = verify_ubound_c1_at(space, phase, eta, q, opt.L, opt);
  const C1Single wide =
      verify_ubound_c1_at(space, phase, eta, q, opt.radius_factor * opt.L, opt);
  EstimateReport rep;
  rep.constant = "B_C1";
  rep.value = base.B_hat;
  rep.method = "family-max";
  rep.uncertainty = std::abs(wide.B_hat - base.B_hat);
  const double rel =
      std::abs(wide.B_hat - base.B_hat) / std::max(base.B_hat, 1e-300);
  rep.pass = rel <= opt.stability_tol;
  rep.metadata["B_at_L"] = base.B_hat;
  rep.metadata["B_at_wide"] = wide.B_hat;
  rep.metadata["L"] = opt.L;
  rep.metadata["q"] = q;
  rep.metadata["skipped"] = base.skipped;
  rep.metadata["eta_diverges"] = eta.diverges(space) ? 1.0 : 0.0;
  rep.notes["eta"] = eta.tag;
  rep.notes["argmax"] = base.argmax;
  rep.seed = opt.family.seed;
  return rep;
}

inline std::vector<std::pair<double, double>> c1_radius_sweep(
    const SpinSpace& space, const Phase& phase, const UBoundFunction& eta,
    double q, const std::vector<double>& radii, const C1Options& opt) {
  std::vector<std::pair<double, double>> out;
  for (double L : radii)
    out.emplace_back(L, verify_ubound_c1_at(space, phase, eta, q, L, opt).B_hat);
  return out;
}

// ---------------------------------------------------------------------------
// Gradient bound (C2)

struct C2Options {
  double q = 2.0;
  double L = 6.0;
  int n = 20;  // even: keeps the identity off the grid
  double refine_factor = 1.3;
  double stability_tol = 0.15;
};

struct C2Single {
  double B_hat = 0.0;
  long skipped = 0;
  long pairs = 0;
};

/// sup over grid pairs of (|grad_1 V|^q + |grad_2 V|^q) / (1 + eta(x) + eta(y)).
inline C2Single verify_gradient_bound_c2_at(const SpinSpace& space,
                                            const Interaction& V,
                                            const UBoundFunction& eta, double q,
                                            double L, int n) {
  QuadratureGrid spec{L, n, QuadratureRule::Trapezoid};
  const SpinGrid grid = make_spin_grid(space, spec);
  const int G = grid.size();

  // per-node: eta, slot gradients of every monomial, and validity
  struct NodeData {
    double eta = 0.0;
    bool ok = true;
    std::vector<double> pow_a, pow_b;       // rho^alpha, delta^beta
    std::vector<SpinGradient> da, db;       // d(rho^alpha), d(delta^beta)
  };
  const auto& monomials = V.monomials();
  std::vector<NodeData> nd(G);
  long skipped_nodes = 0;
  for (int x = 0; x < G; ++x) {
    NodeData& d = nd[x];
    d.eta = eta.value(space, grid.nodes[x]);
    d.pow_a.resize(monomials.size());
    d.pow_b.resize(monomials.size());
    d.da.resize(monomials.size());
    d.db.resize(monomials.size());
    for (std::size_t k = 0; k < monomials.size(); ++k) {
      const auto& m = monomials[k];
      const double rv = m.rho.value(space, grid.nodes[x]);
      const double dv = m.delta.value(space, grid.nodes[x]);
      d.pow_a[k] = std::pow(rv, m.alpha);
      d.pow_b[k] = std::pow(dv, m.beta_exp);
      SpinGradient ga, gb;
      ga.m = gb.m = space.grad_dim();
      if (m.alpha > 0.0) {
        auto g = m.rho.subgradient(space, grid.nodes[x]);
        if (!g) { d.ok = false; break; }
        for (int a = 0; a < ga.m; ++a)
          ga.comp[a] = m.alpha * std::pow(rv, m.alpha - 1.0) * g->comp[a];
      }
      if (m.beta_exp > 0.0) {
        auto g = m.delta.subgradient(space, grid.nodes[x]);
        if (!g) { d.ok = false; break; }
        for (int a = 0; a < gb.m; ++a)
          gb.comp[a] = m.beta_exp * std::pow(dv, m.beta_exp - 1.0) * g->comp[a];
      }
      d.da[k] = ga;
      d.db[k] = gb;
    }
    if (!d.ok) ++skipped_nodes;
  }

  std::vector<double> rowmax = parallel_map(G, [&](std::size_t x) {
    if (!nd[x].ok) return 0.0;
    double best = 0.0;
    const int m = space.grad_dim();
    for (int y = 0; y < G; ++y) {
      if (!nd[y].ok) continue;
      double g1[3] = {0, 0, 0}, g2[3] = {0, 0, 0};
      for (std::size_t k = 0; k < monomials.size(); ++k) {
        const double ck = monomials[k].c;
        for (int a = 0; a < m; ++a) {
          g1[a] += ck * nd[x].da[k].comp[a] * nd[y].pow_b[k];
          g2[a] += ck * nd[x].pow_a[k] * nd[y].db[k].comp[a];
        }
      }
      double l1 = 0.0, l2 = 0.0;
      for (int a = 0; a < m; ++a) {
        l1 += g1[a] * g1[a];
        l2 += g2[a] * g2[a];
      }
      const double num = std::pow(l1, 0.5 * q) + std::pow(l2, 0.5 * q);
      const double ratio = num / (1.0 + nd[x].eta + nd[y].eta);
      best = std::max(best, ratio);
    }
    return best;
  });

  C2Single out;
  out.pairs = long(G) * G;
  out.skipped = skipped_nodes * G * 2;
  for (double r : rowmax) out.B_hat = std::max(out.B_hat, r);
  return out;
}

inline EstimateReport verify_gradient_bound_C2(const SpinSpace& space,
                                               const Interaction& V,
                                               const UBoundFunction& eta,
                                               double q, const C2Options& opt) {
  const C2Single base = verify_gradient_bound_c2_at(space, V, eta, q, opt.L, opt.n);
  const int n2 = int(opt.n * opt.refine_factor) & ~1;  // keep it even
  const C2Single fine = verify_gradient_bound_c2_at(space, V, eta, q, opt.L, n2);
  EstimateReport rep;
  rep.constant = "B_C2";
  rep.value = std::max(base.B_hat, fine.B_hat);
  rep.method = "grid-sup";
  rep.uncertainty = std::abs(fine.B_hat - base.B_hat);
  rep.pass = rep.uncertainty <= opt.stability_tol * std::max(base.B_hat, 1e-300);
  rep.metadata["B_coarse"] = base.B_hat;
  rep.metadata["B_fine"] = fine.B_hat;
  rep.metadata["L"] = opt.L;
  rep.metadata["q"] = q;
  rep.metadata["skipped"] = double(base.skipped);
  rep.notes["eta"] = eta.tag;
  return rep;
}

inline std::vector<std::pair<double, double>> c2_radius_sweep(
    const SpinSpace& space, const Interaction& V, const UBoundFunction& eta,
    double q, const std::vector<double>& radii, int n) {
  std::vector<std::pair<double, double>> out;
  for (double L : radii)
    out.emplace_back(L, verify_gradient_bound_c2_at(space, V, eta, q, L, n).B_hat);
  return out;
}

// ---------------------------------------------------------------------------
// Dobrushin

struct DobrushinClosedForm {
  double K1 = 0.0;
  double c1 = 0.0;
  bool valid = false;  // requires 2^{q-1} B^2 beta^q < 1
};

inline DobrushinClosedForm dobrushin_closed_form(double B, double q,
                                                 double beta_pow_q) {
  DobrushinClosedForm out;
  const double twoq = std::pow(2.0, q - 1.0);
  const double denom = 1.0 - twoq * B * B * beta_pow_q;
  out.valid = denom > 0.0;
  if (!out.valid) return out;
  out.K1 = std::max(twoq * B, B * (1.0 + twoq * B * beta_pow_q)) / denom;
  out.c1 = twoq * B * B / denom;
  return out;
}

struct DobrushinOptions {
  QuadratureGrid grid{5.0, 21, QuadratureRule::Trapezoid};
  std::vector<double> lambdas = {0.0, 0.5, 1.0, 2.0, 4.0};
  int unit_points = 8;
  std::uint64_t seed = 7;
};

struct DobrushinResult {
  double K1_hat = 0.0;
  double c1_hat = 0.0;        // |LS slope|; the signed slope is in metadata
  double sum_c = 0.0;         // c1_hat * sum_j |beta_ij|^q
  double r2 = 0.0;
  bool contraction = false;   // sum_c < 1
  int samples = 0;
  EstimateReport report;
};

/// Samples boundary configurations omega_j = dilation of random unit-norm
/// points, evaluates E_i^omega(eta_i) by single-site quadrature, and fits
/// E_i^omega(eta_i) ~ K1 + c1 * sum_j |beta_ij|^q eta_j(omega).
inline DobrushinResult dobrushin_check(const SpinModel& model,
                                       const UBoundFunction& eta,
                                       const DobrushinOptions& opt) {
  const SpinGrid grid = make_spin_grid(model.space, opt.grid);
  const int G = grid.size();
  std::vector<double> phi(G), eta_v(G);
  for (int x = 0; x < G; ++x) {
    phi[x] = model.phase.value(model.space, grid.nodes[x]);
    eta_v[x] = eta.value(model.space, grid.nodes[x]);
  }
  const Site origin{0, 0, 0};
  const auto nbs = neighbors(origin, model.D, model.range());
  const double row_q = model.couplings.row_sum_pow(model.q);

  // boundary family: dilation-scaled random unit-norm points
  std::mt19937_64 rng(opt.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<Spin> units;
  for (int k = 0; k < opt.unit_points; ++k) {
    Spin g{};
    for (int a = 0; a < model.space.dim(); ++a) g[a] = gauss(rng);
    double nv = model.space.is_heisenberg()
                    ? kaplan_norm(to_group_point(g))
                    : HomogeneousNorm::euclidean().value(model.space, g);
    if (nv < 1e-9) { --k; continue; }
    units.push_back(model.space.scale(1.0 / nv, g));
  }

  std::vector<double> xs, ys;
  for (const Spin& u : units) {
    for (double lam : opt.lambdas) {
      const Spin v = lam > 0.0 ? model.space.scale(lam, u) : Spin{};
      // E_i^omega(eta_i) with every neighbor pinned to v
      double num = 0.0, den = 0.0;
      for (int x = 0; x < G; ++x) {
        double en = phi[x];
        for (const Site& j : nbs) {
          const double b = model.couplings.beta(origin, j);
          if (b == 0.0) continue;
          en += b * model.interaction.value(model.space, grid.nodes[x], v) +
                model.couplings.beta(j, origin) *
                    model.interaction.value(model.space, v, grid.nodes[x]);
        }
        const double k = grid.weights[x] * std::exp(-en);
        num += k * eta_v[x];
        den += k;
      }
      if (den <= 0.0) throw NumericalError("dobrushin: zero mass at a boundary");
      double reg = 0.0;
      for (const Site& j : nbs)
        reg += std::pow(std::abs(model.couplings.beta(origin, j)), model.q) *
               eta.value(model.space, v);
      xs.push_back(reg);
      ys.push_back(num / den);
    }
  }

  DobrushinResult res;
  res.samples = int(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    mx += xs[k];
    my += ys[k];
  }
  mx /= double(xs.size());
  my /= double(xs.size());
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    sxx += (xs[k] - mx) * (xs[k] - mx);
    sxy += (xs[k] - mx) * (ys[k] - my);
    syy += (ys[k] - my) * (ys[k] - my);
  }
  double slope = 0.0;
  if (sxx < 1e-14) {
    // all boundary regressors identical: decoupled (beta = 0) case
    if (model.couplings.beta_bound() > 0.0)
      throw NumericalError("dobrushin: boundary family does not excite the "
                           "regressor; widen it");
    slope = 0.0;
    res.r2 = 1.0;
  } else {
    slope = sxy / sxx;
    res.r2 = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  }
  res.c1_hat = std::abs(slope);
  res.K1_hat = my - slope * mx;
  res.sum_c = res.c1_hat * row_q;
  res.contraction = res.sum_c < 1.0;

  res.report.constant = "sum_c";
  res.report.value = res.sum_c;
  res.report.method = "boundary-regression";
  res.report.uncertainty =
      sxx > 1e-14 ? std::sqrt(std::max(0.0, (syy - slope * sxy) /
                                                std::max(1.0, double(xs.size()) - 2.0)) /
                              sxx) *
                        row_q
                  : 0.0;
  res.report.pass = res.contraction;
  res.report.seed = opt.seed;
  res.report.metadata["K1_hat"] = res.K1_hat;
  res.report.metadata["c1_hat"] = res.c1_hat;
  res.report.metadata["slope_signed"] = slope;
  res.report.metadata["r2"] = res.r2;
  res.report.metadata["beta"] = model.couplings.beta_bound();
  res.report.metadata["row_sum_pow_q"] = row_q;
  res.report.notes["eta"] = eta.tag;
  return res;
}

}  // namespace carnot_gibbs
