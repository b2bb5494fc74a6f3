// Acceptance suite: one criterion per test case, one PASS/FAIL line each.
// Tolerances and runtime budgets are pinned in code.

#include <catch2/catch_amalgamated.hpp>

#include <chrono>
#include <cstdio>
#include <random>

#include "carnot_gibbs/dynamics.hpp"
#include "carnot_gibbs/estimators.hpp"
#include "carnot_gibbs/mcmc.hpp"
#include "carnot_gibbs/presets.hpp"

using namespace carnot_gibbs;

namespace {

struct Stopwatch {
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
        .count();
  }
};

void report(int criterion, const char* what, bool ok) {
  std::printf("ACCEPTANCE %2d %s: %s\n", criterion, ok ? "PASS" : "FAIL", what);
  std::fflush(stdout);
  REQUIRE(ok);
}

std::mt19937_64 rng(20260809);
GroupPoint random_point(double scale = 1.5) {
  std::normal_distribution<double> g(0.0, scale);
  return {g(rng), g(rng), g(rng)};
}

}  // namespace

TEST_CASE("criterion 1: group and norm suite") {
  Stopwatch sw;
  bool ok = true;
  auto close = [](const GroupPoint& a, const GroupPoint& b, double tol) {
    return std::abs(a.x1 - b.x1) <= tol && std::abs(a.x2 - b.x2) <= tol &&
           std::abs(a.x3 - b.x3) <= tol;
  };
  for (int k = 0; k < 10000 && ok; ++k) {
    const GroupPoint a = random_point(), b = random_point(), c = random_point();
    ok = ok && close(compose(compose(a, b), c), compose(a, compose(b, c)), 1e-12);
    ok = ok && close(compose(a, inverse(a)), identity(), 1e-12);
    ok = ok && close(dilate(2.0, compose(a, b)),
                     compose(dilate(2.0, a), dilate(2.0, b)), 1e-12);
    for (double lam : {0.5, 2.0, 3.0})
      ok = ok &&
           std::abs(kaplan_norm(dilate(lam, a)) - lam * kaplan_norm(a)) <= 1e-9;
    ok = ok && std::abs(kaplan_norm(inverse(a)) - kaplan_norm(a)) <= 1e-9;
  }
  const bool in_time = sw.seconds() < 5.0;
  report(1, "group/norm invariants at 1e-12/1e-9 on 10^4 points, < 5 s",
         ok && in_time);
}

TEST_CASE("criterion 2: eikonal property and CC homogeneity") {
  Stopwatch sw;
  bool eik = true, hom = true;
  ScalarField d = [](const GroupPoint& p) { return cc_distance(p); };
  int tested = 0;
  while (tested < 500) {
    const GroupPoint p = random_point(1.2);
    if (horizontal_norm(p) < 0.1) continue;
    ++tested;
    eik = eik && std::abs(apply_subgradient(d, p, 1e-4).length() - 1.0) <= 1e-2;
    hom = hom &&
          std::abs(cc_distance(dilate(3.0, p)) - 3.0 * cc_distance(p)) <= 1e-6;
  }
  const bool in_time = sw.seconds() < 60.0;
  report(2, "|grad d| = 1 +- 1e-2 at 500 points, homogeneity 1e-6, < 60 s",
         eik && hom && in_time);
}

TEST_CASE("criterion 3: Kaplan gradient identity") {
  bool ok = true;
  ScalarField N = [](const GroupPoint& p) { return kaplan_norm(p); };
  int tested = 0;
  while (tested < 500) {
    const GroupPoint p = random_point();
    if (kaplan_norm(p) < 1e-2) continue;
    ++tested;
    const double lhs = apply_subgradient(N, p, 1e-5).length();
    const double rhs = horizontal_norm(p) / kaplan_norm(p);
    ok = ok && std::abs(lhs - rhs) <= 1e-4;
  }
  report(3, "|grad N| = |w|/N +- 1e-4 at 500 points", ok);
}

TEST_CASE("criterion 4: Gaussian oracle under grid refinement") {
  Stopwatch sw;
  ModelPreset preset = preset_euclidean(1, 0.5, 2.0, {{1.0, 1.0}}, 0.0);
  SGIParams params;
  params.q = 2.0;
  bool ok = true;
  for (int n : {201, 401}) {
    ProductMeasure pm(preset.model.space, preset.model.phase,
                      {8.0, n, QuadratureRule::Trapezoid});
    SgiResult res =
        estimate_sgi_constant(pm, HomogeneousNorm::euclidean(), params);
    ok = ok && res.generator_ok;  // the eigenvalue oracle must take part
    ok = ok && res.report.value >= 0.95 && res.report.value <= 1.05;
  }
  const bool in_time = sw.seconds() < 30.0;
  report(4, "OU constant in [0.95, 1.05] at n = 201 and 401, < 30 s",
         ok && in_time);
}

TEST_CASE("criterion 5: tensorisation at beta = 0") {
  ModelPreset preset = preset_euclidean(1, 0.5, 2.0, {{1.0, 1.0}}, 0.0);
  SGIParams params;
  params.q = 2.0;
  params.family.random_bumps = 8;
  ProductMeasure one(preset.model.space, preset.model.phase,
                     {8.0, 121, QuadratureRule::Trapezoid}, 1);
  ProductMeasure two(preset.model.space, preset.model.phase,
                     {8.0, 121, QuadratureRule::Trapezoid}, 2);
  SgiResult r1 = estimate_sgi_constant(one, HomogeneousNorm::euclidean(), params);
  SgiResult r2 = estimate_sgi_constant(two, HomogeneousNorm::euclidean(), params);
  const bool ok =
      std::abs(r2.report.value - r1.report.value) <= 0.10 * r1.report.value;
  report(5, "two-site product constant within 10% of the single site", ok);
}

TEST_CASE("criterion 6: DLR compatibility on a two-site window") {
  ModelPreset preset = preset_kaplan(1.0, 4.0, 0.05);
  LatticeWindow w = LatticeWindow::chain(2);
  BoundaryConfig omega = constant_boundary(w, 1, Spin{0.3, -0.1, 0.4});
  GibbsEngine eng(preset.model, w, {4.5, 17, QuadratureRule::Trapezoid}, omega);
  auto f = [&](const std::vector<int>& x) {
    const Spin& a = eng.grid().nodes[x[0]];
    const Spin& b = eng.grid().nodes[x[1]];
    return std::exp(-0.2 * kaplan_norm(to_group_point(a))) +
           0.5 * std::tanh(b[0]);
  };
  bool ok = true;
  for (const std::vector<int>& l1 :
       std::vector<std::vector<int>>{{0}, {1}, {0, 1}}) {
    DlrResult r = dlr_compatibility_check(eng, l1, {0, 1}, f);
    ok = ok && r.residual < 1e-5;
  }
  report(6, "DLR residual < 1e-5 on all nested pairs, 17 nodes/axis", ok);
}

TEST_CASE("criterion 7: U-bound presets and negative control") {
  const SpinSpace h = SpinSpace::heisenberg();
  bool ok = true;

  {  // phi = d^2, eta = d^2, q = 2
    Phase phase({{1.0, 2.0, HomogeneousNorm::carnot_caratheodory()}});
    UBoundFunction eta{"d^2", HomogeneousNorm::carnot_caratheodory(), 2.0};
    C1Options opt;
    opt.L = 8.0;
    opt.family.random_bumps = 6;
    EstimateReport rep = verify_ubound_C1(h, phase, eta, 2.0, opt);
    ok = ok && rep.pass.value_or(false);
  }
  {  // phi = N^4, eta = N, q = 2 (the p = 4 Kaplan preset)
    ModelPreset preset = preset_kaplan(1.0, 4.0, 0.0);
    C1Options opt;
    opt.L = 5.0;
    opt.family.random_bumps = 6;
    EstimateReport rep = verify_ubound_C1(h, preset.model.phase, preset.eta,
                                          2.0, opt);
    ok = ok && rep.pass.value_or(false);
  }
  bool neg = true;
  {  // negative control: eta = d^4 against phi = d^2
    Phase phase({{1.0, 2.0, HomogeneousNorm::carnot_caratheodory()}});
    UBoundFunction eta{"d^4", HomogeneousNorm::carnot_caratheodory(), 4.0};
    C1Options opt;
    opt.family.random_bumps = 4;
    auto sweep = c1_radius_sweep(h, phase, eta, 2.0, {8.0, 12.0, 16.0}, opt);
    neg = neg && sweep[1].second >= 1.25 * sweep[0].second;
    neg = neg && sweep[2].second >= 1.25 * sweep[1].second;
  }
  report(7, "C1 stable within 10% for both presets; eta = d^4 grows >= 25%/step",
         ok && neg);
}

TEST_CASE("criterion 8: gradient bound presets and negative control") {
  const SpinSpace h = SpinSpace::heisenberg();
  const HomogeneousNorm d = HomogeneousNorm::carnot_caratheodory();
  Interaction Vdd({{1.0, d, 1.0, d, 1.0}});
  UBoundFunction eta{"d^2", d, 2.0};
  C2Options opt;
  opt.L = 6.0;
  opt.n = 20;
  EstimateReport rep = verify_gradient_bound_C2(h, Vdd, eta, 2.0, opt);
  const bool ok = rep.value <= 1.05;

  Interaction V33({{1.0, d, 3.0, d, 3.0}});
  auto sweep = c2_radius_sweep(h, V33, eta, 2.0, {6.0, 9.0, 12.0}, 14);
  const bool neg = sweep[1].second >= 1.25 * sweep[0].second &&
                   sweep[2].second >= 1.25 * sweep[1].second;
  report(8, "B_C2(d*d) <= 1.05; degree-violating d^3*d^3 diverges with radius",
         ok && neg);
}

TEST_CASE("criterion 9: Dobrushin closed form and empirical sweep") {
  Stopwatch sw;
  auto cf = dobrushin_closed_form(1.0, 2.0, 0.1);
  const bool exact = cf.valid && std::abs(cf.K1 - 2.5) <= 1e-12 &&
                     std::abs(cf.c1 - 2.5) <= 1e-12;

  DobrushinOptions opt;
  opt.grid = {4.5, 21, QuadratureRule::Trapezoid};
  opt.seed = 17;
  bool monotone = true, have_threshold = false;
  double beta0_hat = -1.0, prev = -1.0;
  bool still = true;
  for (int k = 0; k < 21; ++k) {
    const double beta = 0.2 * k / 20.0;
    double sum_c = 0.0;
    if (beta > 0.0) {
      ModelPreset preset = preset_kaplan(1.0, 4.0, beta);
      DobrushinResult res = dobrushin_check(preset.model, preset.eta, opt);
      sum_c = res.sum_c;
    }
    monotone = monotone && sum_c >= prev - 1e-9;
    prev = sum_c;
    if (still && sum_c < 1.0) beta0_hat = beta;
    if (sum_c >= 1.0) still = false;
  }
  have_threshold = beta0_hat >= 0.0;
  const bool in_time = sw.seconds() < 600.0;
  report(9,
         "K1 = c1 = 2.5 exactly; sum_c monotone over 21 betas with a reported "
         "threshold, < 10 min",
         exact && monotone && have_threshold && in_time);
}

TEST_CASE("criterion 10: sweep contraction on a four-site chain") {
  Stopwatch sw;
  LatticeWindow w = LatticeWindow::chain(4);
  QuadratureGrid grid{4.0, 9, QuadratureRule::Trapezoid};

  auto family = [&](const GibbsEngine& eng) {
    std::vector<SiteTensor> fam;
    fam.push_back(eng.tabulate_site_function(0, [](const Spin& s) {
      return kaplan_norm(to_group_point(s));
    }));
    fam.push_back(eng.tabulate_site_function(1, [](const Spin& s) {
      return s[0];
    }));
    fam.push_back(eng.tabulate_site_function(2, [](const Spin& s) {
      const double n = kaplan_norm(to_group_point(s));
      return n * n;
    }));
    return fam;
  };

  ModelPreset coupled = preset_kaplan(1.0, 4.0, 0.05);
  BoundaryConfig omega = constant_boundary(w, 1, Spin{0.2, -0.1, 0.3});
  GibbsEngine eng(coupled.model, w, grid, omega);
  ContractionOptions opt;
  opt.m_max = 6;
  ContractionResult res = contraction_rate(eng, family(eng), opt);
  const bool contracting =
      !res.exact_zero && res.xi_hat < 1.0 && res.r2 >= 0.95;

  ModelPreset free = preset_kaplan(1.0, 4.0, 0.0);
  GibbsEngine eng0(free.model, w, grid, omega);
  ContractionOptions opt0;
  opt0.m_max = 2;
  ContractionResult res0 = contraction_rate(eng0, family(eng0), opt0);
  const bool exact_zero = res0.exact_zero && res0.xi_hat == 0.0;

  const bool in_time = sw.seconds() < 900.0;
  report(10, "xi < 1 with R^2 >= 0.95 at small beta; xi = 0 at beta = 0, < 15 min",
         contracting && exact_zero && in_time);
}

TEST_CASE("criterion 11: uniqueness surrogate") {
  LatticeWindow w = LatticeWindow::chain(4);
  QuadratureGrid grid{4.0, 9, QuadratureRule::Trapezoid};
  BoundaryConfig halo = constant_boundary(w, 1, Spin{});

  // dilation-separated window configurations (DLR boundary conditions)
  std::vector<Spin> cfg_a(w.size(), Spin{0.5, 0.4, 0.3});
  std::vector<Spin> cfg_b;
  for (const Spin& s : cfg_a)
    cfg_b.push_back(to_spin(dilate(3.0, to_group_point(s))));

  ModelPreset coupled = preset_kaplan(1.0, 4.0, 0.04);
  GibbsEngine eng(coupled.model, w, grid, halo);
  SiteTensor f = eng.tabulate_site_function(0, [](const Spin& s) {
    return kaplan_norm(to_group_point(s));
  });
  BoundarySensitivityOptions opt;
  opt.m_max = 6;
  auto res = boundary_sensitivity(eng, f, cfg_a, cfg_b, opt);
  const bool decay = res.decays && res.delta[1] > 0.0 && !res.divergence;

  ModelPreset free = preset_kaplan(1.0, 4.0, 0.0);
  GibbsEngine eng0(free.model, w, grid, halo);
  auto res0 = boundary_sensitivity(eng0, f, cfg_a, cfg_b, opt);
  bool zero = true;
  for (std::size_t m = 1; m < res0.delta.size(); ++m)
    zero = zero && res0.delta[m] == 0.0;

  report(11, "Delta_m decays geometrically at small beta; Delta = 0 at beta = 0",
         decay && zero);
}

TEST_CASE("criterion 12: MCMC and quadrature agree on ten observables") {
  ModelPreset preset = preset_kaplan(1.0, 4.0, 0.0);
  ProductMeasure pm(preset.model.space, preset.model.phase,
                    {4.0, 41, QuadratureRule::Trapezoid});

  std::vector<std::pair<const char*, std::function<double(const Spin&)>>> obs = {
      {"N", [](const Spin& s) { return kaplan_norm(to_group_point(s)); }},
      {"N^2", [](const Spin& s) { const double n = kaplan_norm(to_group_point(s)); return n * n; }},
      {"N^4", [](const Spin& s) { const double n = kaplan_norm(to_group_point(s)); return n * n * n * n; }},
      {"|w|", [](const Spin& s) { return std::hypot(s[0], s[1]); }},
      {"|w|^2", [](const Spin& s) { return s[0] * s[0] + s[1] * s[1]; }},
      {"x1^2", [](const Spin& s) { return s[0] * s[0]; }},
      {"x3^2", [](const Spin& s) { return s[2] * s[2]; }},
      {"cos x1", [](const Spin& s) { return std::cos(s[0]); }},
      {"exp(-N^2)", [](const Spin& s) { const double n = kaplan_norm(to_group_point(s)); return std::exp(-n * n); }},
      {"|z|", [](const Spin& s) { return std::abs(s[2]); }},
  };

  LatticeWindow w = LatticeWindow::chain(1);
  BoundaryConfig omega = constant_boundary(w, 1, Spin{});
  MCMCParams params;
  params.steps = 220000;
  params.burn_in = 20000;
  params.proposal_scale = 0.7;
  params.seed = 424242;
  MetropolisWithinGibbs chain(preset.model, w, omega, params);
  std::vector<std::function<double(const std::vector<Spin>&)>> lifted;
  for (auto& [name, fn] : obs)
    lifted.push_back([f = fn](const std::vector<Spin>& s) { return f(s[0]); });
  auto stats = chain.run(lifted);

  bool ok = true;
  for (std::size_t k = 0; k < obs.size(); ++k) {
    const double target = pm.expectation(obs[k].second);
    const double dev = std::abs(stats[k].mean - target);
    const bool within = dev <= 3.0 * stats[k].std_error;
    if (!within)
      std::printf("  observable %s: mcmc %.6f quad %.6f se %.2g\n",
                  obs[k].first, stats[k].mean, target, stats[k].std_error);
    ok = ok && within;
  }
  report(12, "ten observables within three standard errors", ok);
}
