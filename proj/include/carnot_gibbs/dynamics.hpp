#pragma once

// Sweep-operator dynamics: the geometric contraction rate of
// nu |grad(P^m f)|^q, the single-site sweeping-out inequality, and the
// boundary-sensitivity uniqueness surrogate.

#include <cmath>
#include <string>
#include <vector>

#include "carnot_gibbs/gibbs.hpp"
#include "carnot_gibbs/report.hpp"

namespace carnot_gibbs {

// ---------------------------------------------------------------------------
// Contraction rate of the sweep operator

struct ContractionOptions {
  int m_max = 6;
  double q = 2.0;
  double zero_floor = 1e-14;
};

struct ContractionResult {
  std::vector<double> g;  // g_m = nu sum_k |grad_k P^m f|^q, family-aggregated
  double xi_hat = 0.0;
  double r2 = 0.0;
  bool exact_zero = false;  // gradient energy vanished: one sweep mixed fully
  int skipped_functions = 0;
  EstimateReport report;
};

/// g_m for m = 0..m_max and the fitted geometric rate xi over the tail
/// m >= 1 (m = 0 carries the transient of the doubled E_{Gamma_0}).
inline ContractionResult contraction_rate(const GibbsEngine& eng,
                                          const std::vector<SiteTensor>& family,
                                          const ContractionOptions& opt) {
  ContractionResult res;
  res.g.assign(opt.m_max + 1, 0.0);
  for (const SiteTensor& f0 : family) {
    const double g0 = eng.dirichlet_q(f0, opt.q);
    if (g0 < opt.zero_floor) {
      ++res.skipped_functions;  // (near-)constant test function
      continue;
    }
    res.g[0] += g0;
    SiteTensor cur = f0;
    for (int m = 1; m <= opt.m_max; ++m) {
      cur = eng.sweep(std::move(cur));
      res.g[m] += eng.dirichlet_q(cur, opt.q);
    }
  }

  bool all_zero = true;
  for (int m = 1; m <= opt.m_max; ++m)
    if (res.g[m] >= opt.zero_floor) all_zero = false;
  if (all_zero || res.g[0] < opt.zero_floor) {
    res.exact_zero = true;
    res.xi_hat = 0.0;
    res.r2 = 1.0;
  } else {
    // least squares of log g_m against m over the tail
    std::vector<double> ms, ls;
    for (int m = 1; m <= opt.m_max; ++m) {
      if (res.g[m] < 1e-300) break;
      ms.push_back(double(m));
      ls.push_back(std::log(res.g[m]));
    }
    double mx = 0.0, my = 0.0;
    for (std::size_t k = 0; k < ms.size(); ++k) {
      mx += ms[k];
      my += ls[k];
    }
    mx /= double(ms.size());
    my /= double(ms.size());
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t k = 0; k < ms.size(); ++k) {
      sxx += (ms[k] - mx) * (ms[k] - mx);
      sxy += (ms[k] - mx) * (ls[k] - my);
      syy += (ls[k] - my) * (ls[k] - my);
    }
    const double slope = sxx > 0.0 ? sxy / sxx : 0.0;
    res.xi_hat = std::exp(slope);
    res.r2 = (syy > 0.0 && sxx > 0.0) ? (sxy * sxy) / (sxx * syy) : 1.0;
  }

  res.report.constant = "xi";
  res.report.value = res.xi_hat;
  res.report.method = res.exact_zero ? "exact-convergence" : "log-linear-fit";
  res.report.uncertainty = res.exact_zero ? 0.0 : 1.0 - res.r2;
  res.report.metadata["r2"] = res.r2;
  res.report.metadata["m_max"] = opt.m_max;
  res.report.metadata["q"] = opt.q;
  res.report.metadata["family_size"] = double(family.size());
  res.report.metadata["skipped"] = double(res.skipped_functions);
  for (int m = 0; m <= opt.m_max && m < 16; ++m)
    res.report.metadata["g" + std::to_string(m)] = res.g[m];
  return res;
}

// ---------------------------------------------------------------------------
// Single-site sweeping-out inequality

struct SweepoutOptions {
  double q = 2.0;
  double K_max = 8.0;
  double K_step = 0.25;
  double c_max = 1.0;
  double c_step = 0.02;
  double rel_tol = 1e-6;
};

struct SweepoutResult {
  bool feasible = false;
  double K = 0.0;
  double c = 0.0;
  // per test function: lhs, own-gradient term, decay-weighted sum
  std::vector<double> lhs, own, decayed;
  EstimateReport report;
};

/// For each f, compares nu|grad_j(E_i f)|^q against K nu|grad_j f|^q +
/// c sum_k M_ki nu|grad_k f|^q and reports the smallest grid candidate
/// (minimizing c, then K) feasible across the family.
inline SweepoutResult sweepout_check(const GibbsEngine& eng, int site_i,
                                     int site_j,
                                     const std::vector<SiteTensor>& family,
                                     const DecayMatrix& M,
                                     const SweepoutOptions& opt) {
  SweepoutResult res;
  const auto& win = eng.window();
  for (const SiteTensor& f : family) {
    const SiteTensor eif = eng.eliminate(f, site_i);
    res.lhs.push_back(
        eng.window_expectation(eng.grad_norm_pow_q(eif, site_j, opt.q)));
    res.own.push_back(
        eng.window_expectation(eng.grad_norm_pow_q(f, site_j, opt.q)));
    double s = 0.0;
    for (int k : f.deps)
      s += M.entry(win.site_at(k), win.site_at(site_i)) *
           eng.window_expectation(eng.grad_norm_pow_q(f, k, opt.q));
    res.decayed.push_back(s);
  }

  double scale = 0.0;
  for (double v : res.lhs) scale = std::max(scale, v);
  const double tol = opt.rel_tol * std::max(scale, 1e-30);
  for (double c = 0.0; c <= opt.c_max + 1e-12 && !res.feasible;
       c += opt.c_step) {
    for (double K = 0.0; K <= opt.K_max + 1e-12; K += opt.K_step) {
      bool ok = true;
      for (std::size_t t = 0; t < res.lhs.size(); ++t)
        if (res.lhs[t] > K * res.own[t] + c * res.decayed[t] + tol) {
          ok = false;
          break;
        }
      if (ok) {
        res.feasible = true;
        res.K = K;
        res.c = c;
        break;
      }
    }
  }

  res.report.constant = "sweepout_c";
  res.report.value = res.c;
  res.report.method = "feasibility-grid";
  res.report.pass = res.feasible;
  res.report.metadata["K"] = res.K;
  res.report.metadata["q"] = opt.q;
  res.report.metadata["site_i"] = site_i;
  res.report.metadata["site_j"] = site_j;
  res.report.metadata["family_size"] = double(family.size());
  return res;
}

// ---------------------------------------------------------------------------
// Boundary sensitivity (uniqueness surrogate)

struct BoundarySensitivityOptions {
  int m_max = 6;
  double tolerance = 1e-6;
  double zero_floor = 1e-14;
};

struct BoundarySensitivityResult {
  std::vector<double> delta;  // Delta_m, m = 0..m_max
  bool decays = false;        // ratio < 1 between consecutive m >= 1
  bool unique_at_tolerance = false;
  bool divergence = false;    // growth: non-uniqueness evidence, not an error
  EstimateReport report;
};

/// Delta_m = |(P^m f)(omega) - (P^m f)(omega')| for two spin configurations
/// on the window (DLR boundary conditions), with the sweep operator's halo
/// pinned to the engine's fixed exterior configuration. The iterates of P
/// forget the configuration geometrically, so the sequence decaying to zero
/// is the finite-window surrogate for the uniqueness of the Gibbs measure.
/// Configurations are snapped to the nearest grid nodes.
inline BoundarySensitivityResult boundary_sensitivity(
    const GibbsEngine& eng, const SiteTensor& f, const std::vector<Spin>& omega,
    const std::vector<Spin>& omega_prime, const BoundarySensitivityOptions& opt) {
  const SpinGrid& g = eng.grid();
  const int dim = eng.model().space.dim();
  if (int(omega.size()) != eng.window().size() ||
      int(omega_prime.size()) != eng.window().size())
    throw EvaluationError("boundary_sensitivity: configuration size mismatch");

  auto nearest_node = [&](const Spin& s) {
    int best = 0;
    double best_r = 1e300;
    for (int x = 0; x < g.size(); ++x) {
      double r = 0.0;
      for (int a = 0; a < dim; ++a)
        r += (g.nodes[x][a] - s[a]) * (g.nodes[x][a] - s[a]);
      if (r < best_r) {
        best_r = r;
        best = x;
      }
    }
    return best;
  };
  std::vector<int> na, nb;
  for (const Spin& s : omega) na.push_back(nearest_node(s));
  for (const Spin& s : omega_prime) nb.push_back(nearest_node(s));

  auto eval_at = [&](const SiteTensor& t, const std::vector<int>& nodes) {
    std::size_t off = 0, stride = 1;
    for (int d : t.deps) {
      off += stride * std::size_t(nodes[d]);
      stride *= std::size_t(g.size());
    }
    return t.values[off];
  };

  BoundarySensitivityResult res;
  res.delta.push_back(std::abs(eval_at(f, na) - eval_at(f, nb)));
  SiteTensor cur = f;
  for (int m = 1; m <= opt.m_max; ++m) {
    cur = eng.sweep(std::move(cur));
    res.delta.push_back(std::abs(eval_at(cur, na) - eval_at(cur, nb)));
  }

  res.decays = true;
  for (int m = 1; m + 1 <= opt.m_max; ++m) {
    if (res.delta[m] < opt.zero_floor && res.delta[m + 1] < opt.zero_floor)
      continue;  // already at zero
    if (res.delta[m + 1] >= res.delta[m]) {
      res.decays = false;
      if (res.delta[m + 1] > res.delta[m] * 1.5) res.divergence = true;
    }
  }
  res.unique_at_tolerance = res.delta.back() < opt.tolerance;

  res.report.constant = "delta_decay";
  res.report.value = res.delta.back();
  res.report.method = "boundary-sensitivity";
  res.report.pass = res.decays;
  res.report.metadata["m_max"] = opt.m_max;
  res.report.metadata["tolerance"] = opt.tolerance;
  res.report.metadata["divergence"] = res.divergence ? 1.0 : 0.0;
  for (std::size_t m = 0; m < res.delta.size() && m < 16; ++m)
    res.report.metadata["delta" + std::to_string(m)] = res.delta[m];
  return res;
}

}  // namespace carnot_gibbs
