#pragma once

// Conditional expectations E_Lambda^omega on a finite window, realized by
// quadrature on a shared per-site grid.
//
// Grid functions are stored factored: a tensor over only the sites the
// function still depends on. Applying a single-site expectation E_i removes
// axis i and introduces the in-window neighbors of i (the kernel depends on
// them), so sweeping keeps tensors small instead of building the full
// product grid. The sweep operator applies E_{Gamma_0} twice and then the
// remaining sublattice expectations in ascending order.
//
// Two independent evaluation paths are provided on purpose: the factored
// elimination machinery, and direct nested quadrature over explicit site
// sets (used by the compatibility checks and small-window estimators).

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <vector>

#include "carnot_gibbs/lattice.hpp"
#include "carnot_gibbs/quadrature.hpp"
#include "carnot_gibbs/util.hpp"

namespace carnot_gibbs {

/// A function tabulated over the grid coordinates it still depends on.
/// Axis k enumerates the nodes of window site deps[k]; axis 0 runs fastest.
struct SiteTensor {
  std::vector<int> deps;  // window site indices, ascending
  std::vector<double> values;

  bool scalar() const { return deps.empty(); }
  double scalar_value() const { return values.at(0); }

  bool depends_on(int site) const {
    return std::find(deps.begin(), deps.end(), site) != deps.end();
  }

  double spread() const {
    auto [mn, mx] = std::minmax_element(values.begin(), values.end());
    return values.empty() ? 0.0 : *mx - *mn;
  }

  double max_abs() const {
    double m = 0.0;
    for (double v : values) m = std::max(m, std::abs(v));
    return m;
  }
};

class GibbsEngine {
 public:
  GibbsEngine(SpinModel model, LatticeWindow window, QuadratureGrid spec,
              BoundaryConfig omega, long max_tensor_elems = 32'000'000)
      : model_(std::move(model)),
        window_(std::move(window)),
        grid_(make_spin_grid(model_.space, spec)),
        omega_(std::move(omega)),
        partition_(model_.D, model_.range()),
        max_tensor_elems_(max_tensor_elems) {
    model_.validate();
    precompute();
  }

  const SpinModel& model() const { return model_; }
  const LatticeWindow& window() const { return window_; }
  const SpinGrid& grid() const { return grid_; }
  const SublatticePartition& partition() const { return partition_; }
  const BoundaryConfig& boundary() const { return omega_; }

  int nodes() const { return grid_.size(); }

  // -- tensor construction --------------------------------------------------

  SiteTensor constant_tensor(double v) const { return SiteTensor{{}, {v}}; }

  SiteTensor tabulate_site_function(
      int site_idx, const std::function<double(const Spin&)>& f) const {
    SiteTensor t;
    t.deps = {site_idx};
    t.values.resize(grid_.size());
    for (int x = 0; x < grid_.size(); ++x) t.values[x] = f(grid_.nodes[x]);
    return t;
  }

  // -- single-site and sublattice expectations -------------------------------

  /// In-window sites whose value enters site i's kernel: neighbors with a
  /// nonzero coupling (halo neighbors act through the fixed boundary
  /// factors).
  std::vector<int> window_neighbors(int site_idx) const {
    std::vector<int> out;
    const Site self = window_.site_at(site_idx);
    for (const Site& j : neighbors(self, model_.D, model_.range()))
      if (window_.contains(j) && model_.couplings.beta(self, j) != 0.0)
        out.push_back(window_.index_of(j));
    std::sort(out.begin(), out.end());
    return out;
  }

  /// E_i applied to a factored grid function. The result no longer depends
  /// on site i but picks up the kernel's dependence on i's neighbors.
  SiteTensor eliminate(const SiteTensor& f, int site_idx) const {
    if (!f.depends_on(site_idx)) return f;  // E_i is the identity there
    std::vector<int> res_deps;
    for (int d : f.deps)
      if (d != site_idx) res_deps.push_back(d);
    for (int nb : window_neighbors(site_idx))
      if (!std::count(res_deps.begin(), res_deps.end(), nb))
        res_deps.push_back(nb);
    std::sort(res_deps.begin(), res_deps.end());

    const long G = grid_.size();
    double total = 1.0;
    for (std::size_t k = 0; k < res_deps.size(); ++k) total *= double(G);
    if (total > double(max_tensor_elems_))
      throw NumericalError(
          "eliminate: result tensor over " + std::to_string(res_deps.size()) +
          " sites exceeds the memory cap; shrink the window or the grid");

    SiteTensor out;
    out.deps = res_deps;
    out.values.assign(static_cast<std::size_t>(total), 0.0);

    // Precomputed access plans: where each input axis reads from the result
    // multi-index (or from the eliminated site).
    const int nres = static_cast<int>(res_deps.size());
    std::vector<int> f_axis_src(f.deps.size());  // index into res_deps, or -1 for site i
    for (std::size_t a = 0; a < f.deps.size(); ++a) {
      if (f.deps[a] == site_idx) {
        f_axis_src[a] = -1;
      } else {
        f_axis_src[a] = int(std::lower_bound(res_deps.begin(), res_deps.end(),
                                             f.deps[a]) -
                            res_deps.begin());
      }
    }
    std::vector<int> nb_src;  // indices into res_deps for the kernel neighbors
    const std::vector<int> nbs = window_neighbors(site_idx);
    nb_src.reserve(nbs.size());
    std::vector<double> nb_beta;
    for (int nb : nbs) {
      nb_src.push_back(int(std::lower_bound(res_deps.begin(), res_deps.end(), nb) -
                           res_deps.begin()));
      nb_beta.push_back(
          model_.couplings.beta(window_.site_at(site_idx), window_.site_at(nb)));
    }

    if (nres > 8)
      throw NumericalError("eliminate: dependence set too large");
    const std::vector<double>& base = site_base_[site_idx];  // w * exp(-phi - halo)
    const std::size_t entries = out.values.size();
    parallel_for(entries, [&](std::size_t e) {
      // decode result multi-index
      int idx[8] = {0};
      std::size_t rem = e;
      for (int a = 0; a < nres; ++a) {
        idx[a] = int(rem % G);
        rem /= G;
      }
      double num = 0.0, den = 0.0;
      for (int x = 0; x < G; ++x) {
        double kernel = base[x];
        if (kernel == 0.0) continue;
        for (std::size_t t = 0; t < nb_src.size(); ++t)
          kernel *= pair_factor(nb_beta[t], x, idx[nb_src[t]]);
        // f value at (x at site i, passengers at result indices)
        std::size_t foff = 0, stride = 1;
        for (std::size_t a = 0; a < f.deps.size(); ++a) {
          foff += stride * std::size_t(f_axis_src[a] < 0 ? x : idx[f_axis_src[a]]);
          stride *= G;
        }
        num += kernel * f.values[foff];
        den += kernel;
      }
      out.values[e] = den > 0.0 ? num / den : 0.0;
    });
    return out;
  }

  /// E over one partition component (restricted to the window): the product
  /// of the component's single-site operators. Sites are eliminated in an
  /// order that keeps the intermediate dependence sets small.
  SiteTensor sublattice_expectation(SiteTensor f, int component) const {
    std::vector<int> pending;
    for (const Site& s : partition_.sites_in_component(window_, component))
      pending.push_back(window_.index_of(s));
    while (!pending.empty()) {
      std::size_t best = 0, best_size = SIZE_MAX;
      for (std::size_t k = 0; k < pending.size(); ++k) {
        std::size_t sz = result_dep_count(f, pending[k]);
        if (sz < best_size) {
          best_size = sz;
          best = k;
        }
      }
      int site = pending[best];
      pending.erase(pending.begin() + best);
      f = eliminate(f, site);
    }
    return f;
  }

  /// The sweep operator: E_{Gamma_0} twice, then the remaining components in
  /// ascending order (the composition read right to left).
  SiteTensor sweep(SiteTensor f) const {
    f = sublattice_expectation(std::move(f), 0);
    f = sublattice_expectation(std::move(f), 0);
    for (int n = 1; n < partition_.count(); ++n)
      f = sublattice_expectation(std::move(f), n);
    return f;
  }

  struct SweepIteration {
    std::vector<SiteTensor> iterates;  // P f, ..., P^m f
    std::vector<double> spreads;
    double nu_estimate = 0.0;
    bool non_contraction = false;
  };

  /// P f, ..., P^m f with spread diagnostics (max - min over the remaining
  /// coordinates). Three consecutive spread increases are flagged as a
  /// non-contraction report instead of failing.
  SweepIteration iterate_sweep(const SiteTensor& f, int m) const {
    SweepIteration res;
    SiteTensor cur = f;
    int growing = 0;
    for (int k = 1; k <= m; ++k) {
      cur = sweep(cur);
      res.iterates.push_back(cur);
      res.spreads.push_back(cur.spread());
      std::size_t n = res.spreads.size();
      if (n >= 2 && res.spreads[n - 1] > res.spreads[n - 2] * (1.0 + 1e-12)) {
        if (++growing >= 3) res.non_contraction = true;
      } else {
        growing = 0;
      }
    }
    res.nu_estimate = window_expectation(res.iterates.back());
    return res;
  }

  // -- window (nu surrogate) expectation -------------------------------------

  /// E_window^omega(g) for a factored grid function g, by exact contraction
  /// of the window's factor graph (site weights and pair factors).
  double window_expectation(const SiteTensor& g) const {
    if (g.scalar()) return g.scalar_value();
    auto [sg, lg] = contract(&g);
    auto [sz, lz] = contract(nullptr);
    return sg / sz * std::exp(lg - lz);
  }

  // -- direct nested quadrature ----------------------------------------------

  struct DirectResult {
    double value = 0.0;       // the expectation
    double z = 0.0;           // quadrature mass of exp(-U)
    double shell_ratio = 0.0; // boundary-shell share of the mass
  };

  /// E_Lambda^chi(f) by direct summation over the product grid of Lambda.
  /// Context: other window sites pinned to grid nodes via `fixed_nodes`, the
  /// halo fixed at the engine's boundary configuration. `f` receives one
  /// node index per Lambda site (in the given order).
  DirectResult direct_expectation(
      const std::vector<int>& lambda, const std::map<int, int>& fixed_nodes,
      const std::function<double(const std::vector<int>&)>& f) const {
    const long G = grid_.size();
    const int m = static_cast<int>(lambda.size());
    if (m < 1 || m > 3)
      throw EvaluationError("direct_expectation: |Lambda| must be 1..3");
    double total = 1.0;
    for (int k = 0; k < m; ++k) total *= double(G);
    if (total > 4e9)
      throw NumericalError("direct_expectation: product grid too large");

    // Per-Lambda-site context energy: halo factors plus pinned window sites.
    std::vector<std::vector<double>> ctx(m);
    for (int k = 0; k < m; ++k) {
      ctx[k] = site_ctx_energy_(lambda[k]);
      for (const auto& [other, node] : fixed_nodes) {
        double beta = model_.couplings.beta(window_.site_at(lambda[k]),
                                            window_.site_at(other));
        if (beta == 0.0) continue;
        for (int x = 0; x < G; ++x)
          ctx[k][x] += pair_energy(beta, x, node);
      }
    }
    // In-Lambda unordered pairs.
    struct Pair { int a, b; double beta; };
    std::vector<Pair> pairs;
    for (int a = 0; a < m; ++a)
      for (int b = a + 1; b < m; ++b) {
        double beta = model_.couplings.beta(window_.site_at(lambda[a]),
                                            window_.site_at(lambda[b]));
        if (beta != 0.0) pairs.push_back({a, b, beta});
      }

    double num = 0.0, den = 0.0, shell = 0.0;
    std::vector<int> idx(m, 0);
    std::vector<int> fidx(m, 0);
    const long count = static_cast<long>(total);
    for (long e = 0; e < count; ++e) {
      long rem = e;
      bool on_shell = false;
      double energy = 0.0, wprod = 1.0;
      for (int k = 0; k < m; ++k) {
        idx[k] = int(rem % G);
        rem /= G;
        energy += phi_[idx[k]] + ctx[k][idx[k]];
        wprod *= grid_.weights[idx[k]];
        on_shell = on_shell || grid_.on_boundary_shell(idx[k]);
      }
      for (const Pair& p : pairs)
        energy += pair_energy(p.beta, idx[p.a], idx[p.b]);
      const double kern = wprod * std::exp(-energy);
      if (kern == 0.0) continue;
      den += kern;
      num += kern * f(idx);
      if (on_shell) shell += kern;
    }
    if (den <= 0.0)
      throw NumericalError("direct_expectation: zero quadrature mass");
    return {num / den, den, shell / den};
  }

  // -- gradients of grid functions -------------------------------------------

  /// |grad_site f|^q tabulated over f's dependence set (finite differences
  /// along the site's node axes; requires a uniform grid).
  SiteTensor grad_norm_pow_q(const SiteTensor& f, int site_idx, double q) const {
    if (!f.depends_on(site_idx)) {
      SiteTensor zero = f;
      std::fill(zero.values.begin(), zero.values.end(), 0.0);
      return zero;
    }
    if (grid_.spec.rule != QuadratureRule::Trapezoid)
      throw EvaluationError("grad_norm_pow_q: needs a uniform (trapezoid) grid");
    const long G = grid_.size();
    const double h = grid_.step();
    const int dim = model_.space.dim();
    const int n = grid_.per_axis();
    const int axis = int(std::find(f.deps.begin(), f.deps.end(), site_idx) -
                         f.deps.begin());
    long stride = 1;
    for (int a = 0; a < axis; ++a) stride *= G;
    long axstep[3] = {stride, stride * n, stride * n * n};

    SiteTensor out = f;
    parallel_for(f.values.size(), [&](std::size_t e) {
      const int node = int((long(e) / stride) % G);
      double d[3] = {0.0, 0.0, 0.0};
      for (int a = 0; a < dim; ++a) {
        const int ia = grid_.axis_index(node, a);
        const double *lo = nullptr, *hi = nullptr;
        double denom = 2.0 * h;
        if (ia > 0 && ia < n - 1) {
          lo = &f.values[e - axstep[a]];
          hi = &f.values[e + axstep[a]];
        } else if (ia == 0) {
          lo = &f.values[e];
          hi = &f.values[e + axstep[a]];
          denom = h;
        } else {
          lo = &f.values[e - axstep[a]];
          hi = &f.values[e];
          denom = h;
        }
        d[a] = (*hi - *lo) / denom;
      }
      double g2 = 0.0;
      if (model_.space.is_heisenberg()) {
        const Spin& s = grid_.nodes[node];
        const double g1 = d[0] + 2.0 * s[1] * d[2];
        const double gg2 = d[1] - 2.0 * s[0] * d[2];
        g2 = g1 * g1 + gg2 * gg2;
      } else {
        for (int a = 0; a < dim; ++a) g2 += d[a] * d[a];
      }
      out.values[e] = std::pow(g2, 0.5 * q);
    });
    return out;
  }

  /// nu sum_{k in window} |grad_k f|^q (sites outside f's dependence set
  /// contribute zero).
  double dirichlet_q(const SiteTensor& f, double q) const {
    double total = 0.0;
    for (int d : f.deps)
      total += window_expectation(grad_norm_pow_q(f, d, q));
    return total;
  }

  // -- shared node tables -----------------------------------------------------

  double phi_at(int node) const { return phi_[node]; }

  double pair_energy(double beta, int x, int y) const {
    double v = 0.0;
    for (const auto& feat : features_)
      v += feat.c * (feat.A[x] * feat.B[y] + feat.A[y] * feat.B[x]);
    return beta * v;
  }

 private:
  struct Feature {
    double c;
    std::vector<double> A, B;  // rho^alpha and delta^beta_exp per node
  };

  void precompute() {
    const int G = grid_.size();
    phi_.resize(G);
    for (int x = 0; x < G; ++x)
      phi_[x] = model_.phase.value(model_.space, grid_.nodes[x]);
    for (const auto& mono : model_.interaction.monomials()) {
      Feature f;
      f.c = mono.c;
      f.A.resize(G);
      f.B.resize(G);
      for (int x = 0; x < G; ++x) {
        f.A[x] = std::pow(mono.rho.value(model_.space, grid_.nodes[x]), mono.alpha);
        f.B[x] =
            std::pow(mono.delta.value(model_.space, grid_.nodes[x]), mono.beta_exp);
      }
      features_.push_back(std::move(f));
    }
    // Halo context energies and the combined per-site base factor.
    site_base_.resize(window_.size());
    ctx_energy_.resize(window_.size());
    for (int i = 0; i < window_.size(); ++i) {
      ctx_energy_[i] = compute_ctx_energy(i);
      site_base_[i].resize(G);
      for (int x = 0; x < G; ++x)
        site_base_[i][x] =
            grid_.weights[x] * std::exp(-(phi_[x] + ctx_energy_[i][x]));
    }
    // Pair factor cache by coupling value (small grids only).
    if (long(G) * G <= 6'000'000) {
      std::vector<double> betas;
      for (const auto& [o, v] : model_.couplings.entries())
        if (v != 0.0) betas.push_back(v);
      std::sort(betas.begin(), betas.end());
      betas.erase(std::unique(betas.begin(), betas.end()), betas.end());
      for (double b : betas) {
        auto mat = std::make_shared<std::vector<double>>(std::size_t(G) * G);
        parallel_for(std::size_t(G), [&](std::size_t x) {
          for (int y = 0; y < G; ++y)
            (*mat)[x * G + y] = std::exp(-pair_energy(b, int(x), y));
        });
        pair_cache_[b] = std::move(mat);
      }
    }
  }

  std::vector<double> compute_ctx_energy(int site_idx) const {
    const int G = grid_.size();
    std::vector<double> ctx(G, 0.0);
    const Site self = window_.site_at(site_idx);
    for (const Site& j : neighbors(self, model_.D, model_.range())) {
      if (window_.contains(j)) continue;
      const double beta = model_.couplings.beta(self, j);
      if (beta == 0.0) continue;
      auto w = omega_.find(j);
      if (w == omega_.end())
        throw EvaluationError("gibbs: missing boundary value at site " +
                              site_name(j, model_.D));
      for (int x = 0; x < G; ++x) {
        const Spin& node = grid_.nodes[x];
        ctx[x] += beta * model_.interaction.value(model_.space, node, w->second) +
                  model_.couplings.beta(j, self) *
                      model_.interaction.value(model_.space, w->second, node);
      }
    }
    return ctx;
  }

  const std::vector<double>& site_ctx_energy_(int site_idx) const {
    return ctx_energy_[site_idx];
  }

  double pair_factor(double beta, int x, int y) const {
    auto it = pair_cache_.find(beta);
    if (it != pair_cache_.end())
      return (*it->second)[std::size_t(x) * grid_.size() + y];
    return std::exp(-pair_energy(beta, x, y));
  }

  std::size_t result_dep_count(const SiteTensor& f, int site_idx) const {
    if (!f.depends_on(site_idx)) return 0;  // free: elimination is a no-op
    std::vector<int> res;
    for (int d : f.deps)
      if (d != site_idx) res.push_back(d);
    for (int nb : window_neighbors(site_idx))
      if (!std::count(res.begin(), res.end(), nb)) res.push_back(nb);
    return res.size();
  }

  // Factor-graph contraction of the full window measure, optionally with an
  // extra factor g; returns (scalar, log-scale).
  std::pair<double, double> contract(const SiteTensor* g) const {
    struct Factor {
      std::vector<int> deps;
      std::vector<double> values;
    };
    const long G = grid_.size();
    std::vector<Factor> factors;
    for (int i = 0; i < window_.size(); ++i) {
      Factor f;
      f.deps = {i};
      f.values = site_base_[i];
      factors.push_back(std::move(f));
    }
    for (int i = 0; i < window_.size(); ++i)
      for (int j : window_neighbors(i)) {
        if (j <= i) continue;
        const double beta =
            model_.couplings.beta(window_.site_at(i), window_.site_at(j));
        if (beta == 0.0) continue;
        Factor f;
        f.deps = {i, j};
        f.values.resize(std::size_t(G) * G);
        parallel_for(std::size_t(G), [&](std::size_t x) {
          for (long y = 0; y < G; ++y)
            f.values[x * G + y] = pair_factor(beta, int(x), int(y));
        });
        factors.push_back(std::move(f));
      }
    if (g) factors.push_back(Factor{g->deps, g->values});

    double log_scale = 0.0;
    std::vector<int> vars;
    for (int i = 0; i < window_.size(); ++i) vars.push_back(i);

    auto scope_after = [&](int v) {
      std::vector<int> u;
      for (const auto& f : factors)
        if (std::count(f.deps.begin(), f.deps.end(), v))
          for (int d : f.deps)
            if (d != v && !std::count(u.begin(), u.end(), d)) u.push_back(d);
      return u;
    };

    while (!vars.empty()) {
      // greedy: eliminate the variable with the smallest resulting scope
      std::size_t best = 0, best_size = SIZE_MAX;
      for (std::size_t k = 0; k < vars.size(); ++k) {
        std::size_t sz = scope_after(vars[k]).size();
        if (sz < best_size) {
          best_size = sz;
          best = k;
        }
      }
      const int v = vars[best];
      vars.erase(vars.begin() + best);

      std::vector<Factor> touching, rest;
      for (auto& f : factors)
        (std::count(f.deps.begin(), f.deps.end(), v) ? touching : rest)
            .push_back(std::move(f));
      factors = std::move(rest);

      std::vector<int> u = {};  // union scope of touching factors minus v
      for (const auto& f : touching)
        for (int d : f.deps)
          if (d != v && !std::count(u.begin(), u.end(), d)) u.push_back(d);
      std::sort(u.begin(), u.end());
      double total = 1.0;
      for (std::size_t k = 0; k < u.size(); ++k) total *= double(G);
      if (total > double(max_tensor_elems_))
        throw NumericalError("window_expectation: contraction exceeds memory cap");

      if (u.size() > 8)
        throw NumericalError("window_expectation: contraction scope too large");
      Factor out;
      out.deps = u;
      out.values.assign(std::size_t(total), 0.0);
      // per-factor strides against (u, v)
      struct Plan {
        const Factor* f;
        std::vector<int> src;  // per axis: index into u, or -1 for v
      };
      std::vector<Plan> plans;
      for (const auto& f : touching) {
        Plan p{&f, {}};
        for (int d : f.deps)
          p.src.push_back(d == v ? -1
                                 : int(std::lower_bound(u.begin(), u.end(), d) -
                                       u.begin()));
        plans.push_back(std::move(p));
      }
      parallel_for(out.values.size(), [&](std::size_t e) {
        int idx[8] = {0};
        std::size_t rem = e;
        for (std::size_t a = 0; a < u.size(); ++a) {
          idx[a] = int(rem % G);
          rem /= G;
        }
        double acc = 0.0;
        for (long x = 0; x < G; ++x) {
          double prod = 1.0;
          for (const Plan& p : plans) {
            std::size_t off = 0, stride = 1;
            for (std::size_t a = 0; a < p.src.size(); ++a) {
              off += stride * std::size_t(p.src[a] < 0 ? x : idx[p.src[a]]);
              stride *= G;
            }
            prod *= p.f->values[off];
          }
          acc += prod;
        }
        out.values[e] = acc;
      });
      const double m = out.values.empty() ? 0.0 : *std::max_element(
                                                      out.values.begin(),
                                                      out.values.end(),
                                                      [](double a, double b) {
                                                        return std::abs(a) <
                                                               std::abs(b);
                                                      });
      const double mag = std::abs(m);
      if (mag > 0.0 && (mag > 1e100 || mag < 1e-100)) {
        for (double& x : out.values) x /= mag;
        log_scale += std::log(mag);
      }
      factors.push_back(std::move(out));
    }
    double prod = 1.0;
    for (const auto& f : factors) prod *= f.values.at(0);
    return {prod, log_scale};
  }

  SpinModel model_;
  LatticeWindow window_;
  SpinGrid grid_;
  BoundaryConfig omega_;
  SublatticePartition partition_;
  long max_tensor_elems_;

  std::vector<double> phi_;
  std::vector<Feature> features_;
  std::vector<std::vector<double>> ctx_energy_;  // halo energies per site/node
  std::vector<std::vector<double>> site_base_;   // w * exp(-(phi + halo))
  std::map<double, std::shared_ptr<std::vector<double>>> pair_cache_;
};

// ---------------------------------------------------------------------------
// Standalone single-site partition function with truncation check

struct PartitionResult {
  double z = 0.0;
  double shell_ratio = 0.0;
};

/// Z_i^omega = integral of exp(-U_i^omega) over one spin, with an
/// a-posteriori check that the boundary shell of the truncation box carries
/// less than `tol` of the total mass.
inline PartitionResult partition_function(const SpinModel& model,
                                          const QuadratureGrid& spec,
                                          const BoundaryConfig& omega,
                                          const Site& i = {0, 0, 0},
                                          double tol = 1e-8) {
  const SpinGrid grid = make_spin_grid(model.space, spec);
  double z = 0.0, shell = 0.0;
  for (int x = 0; x < grid.size(); ++x) {
    double u = model.phase.value(model.space, grid.nodes[x]);
    for (const Site& j : neighbors(i, model.D, model.range())) {
      const double beta = model.couplings.beta(i, j);
      if (beta == 0.0) continue;
      auto w = omega.find(j);
      if (w == omega.end())
        throw EvaluationError("partition_function: missing boundary value at site " +
                              site_name(j, model.D));
      u += beta * model.interaction.value(model.space, grid.nodes[x], w->second) +
           model.couplings.beta(j, i) *
               model.interaction.value(model.space, w->second, grid.nodes[x]);
    }
    const double k = grid.weights[x] * std::exp(-u);
    z += k;
    if (grid.on_boundary_shell(x)) shell += k;
  }
  if (z <= 0.0) throw NumericalError("partition_function: zero mass");
  const double ratio = shell / z;
  if (ratio >= tol)
    throw NumericalError(
        "partition_function: truncation box too small (boundary shell mass " +
        std::to_string(ratio) + " >= " + std::to_string(tol) +
        "); enlarge L (currently " + std::to_string(spec.L) + ")");
  return {z, ratio};
}

// ---------------------------------------------------------------------------
// DLR compatibility

struct DlrResult {
  double residual = 0.0;
  double outer = 0.0;        // E_{Lambda2} f
  double composed = 0.0;     // E_{Lambda2} (E_{Lambda1} f)
};

/// |E_{L2}(E_{L1} f) - E_{L2} f| by direct quadrature. `f` gets one grid
/// node index per Lambda2 site, in lambda2 order.
inline DlrResult dlr_compatibility_check(
    const GibbsEngine& eng, const std::vector<int>& lambda1,
    const std::vector<int>& lambda2,
    const std::function<double(const std::vector<int>&)>& f) {
  for (int s : lambda1)
    if (!std::count(lambda2.begin(), lambda2.end(), s))
      throw EvaluationError("dlr: Lambda1 must be contained in Lambda2");

  const auto outer = eng.direct_expectation(lambda2, {}, f);

  // Tabulate h = E_{Lambda1}^{x ∨ omega} f over the complement sites.
  std::vector<int> rest;
  for (int s : lambda2)
    if (!std::count(lambda1.begin(), lambda1.end(), s)) rest.push_back(s);

  const long G = eng.nodes();
  std::vector<int> l1pos, restpos;
  for (std::size_t k = 0; k < lambda2.size(); ++k) {
    if (std::count(lambda1.begin(), lambda1.end(), lambda2[k]))
      l1pos.push_back(int(k));
    else
      restpos.push_back(int(k));
  }

  long rest_count = 1;
  for (std::size_t k = 0; k < rest.size(); ++k) rest_count *= G;
  std::vector<double> h(rest_count);
  std::vector<int> full(lambda2.size(), 0);
  for (long e = 0; e < rest_count; ++e) {
    long rem = e;
    std::map<int, int> fixed;
    for (std::size_t k = 0; k < rest.size(); ++k) {
      int node = int(rem % G);
      rem /= G;
      fixed[rest[k]] = node;
      full[restpos[k]] = node;
    }
    auto inner = eng.direct_expectation(
        lambda1, fixed, [&](const std::vector<int>& nodes) {
          std::vector<int> cfg = full;
          for (std::size_t k = 0; k < l1pos.size(); ++k) cfg[l1pos[k]] = nodes[k];
          return f(cfg);
        });
    h[e] = inner.value;
  }

  const auto composed =
      eng.direct_expectation(lambda2, {}, [&](const std::vector<int>& nodes) {
        long e = 0, stride = 1;
        for (std::size_t k = 0; k < rest.size(); ++k) {
          e += stride * nodes[restpos[k]];
          stride *= G;
        }
        return h[e];
      });

  return {std::abs(composed.value - outer.value), outer.value, composed.value};
}

}  // namespace carnot_gibbs
