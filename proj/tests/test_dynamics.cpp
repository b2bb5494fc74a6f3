#include <catch2/catch_amalgamated.hpp>

#include "carnot_gibbs/dynamics.hpp"
#include "carnot_gibbs/presets.hpp"

using namespace carnot_gibbs;

namespace {

GibbsEngine chain_engine(double beta, int length, int n = 7, double L = 3.5) {
  ModelPreset preset = preset_kaplan(1.0, 4.0, beta);
  LatticeWindow w = LatticeWindow::chain(length);
  BoundaryConfig omega = constant_boundary(w, 1, Spin{0.2, 0.1, -0.3});
  return GibbsEngine(preset.model, w, {L, n, QuadratureRule::Trapezoid}, omega);
}

std::vector<SiteTensor> norm_family(const GibbsEngine& eng) {
  std::vector<SiteTensor> fam;
  fam.push_back(eng.tabulate_site_function(0, [](const Spin& s) {
    return kaplan_norm(to_group_point(s));
  }));
  fam.push_back(eng.tabulate_site_function(1, [](const Spin& s) { return s[0]; }));
  return fam;
}

}  // namespace

TEST_CASE("contraction rate vanishes exactly without couplings") {
  GibbsEngine eng = chain_engine(0.0, 4);
  ContractionOptions opt;
  opt.m_max = 3;
  ContractionResult res = contraction_rate(eng, norm_family(eng), opt);
  REQUIRE(res.exact_zero);
  REQUIRE(res.xi_hat == 0.0);
  REQUIRE(res.g[1] < 1e-14);
}

TEST_CASE("constant test functions are skipped") {
  GibbsEngine eng = chain_engine(0.05, 3);
  std::vector<SiteTensor> fam{
      eng.tabulate_site_function(0, [](const Spin&) { return 1.0; })};
  ContractionOptions opt;
  opt.m_max = 2;
  ContractionResult res = contraction_rate(eng, fam, opt);
  REQUIRE(res.skipped_functions == 1);
  REQUIRE(res.exact_zero);
  REQUIRE(res.xi_hat == 0.0);
}

TEST_CASE("small couplings give a contracting sweep") {
  GibbsEngine eng = chain_engine(0.05, 3);
  ContractionOptions opt;
  opt.m_max = 4;
  ContractionResult res = contraction_rate(eng, norm_family(eng), opt);
  REQUIRE_FALSE(res.exact_zero);
  REQUIRE(res.xi_hat < 1.0);
  REQUIRE(res.xi_hat > 0.0);
  for (int m = 1; m < opt.m_max; ++m) REQUIRE(res.g[m + 1] <= res.g[m]);
}

TEST_CASE("sweeping-out inequality for a non-interacting pair") {
  GibbsEngine eng = chain_engine(0.05, 4);
  DecayMatrix M{0.3, 1, 1};
  SweepoutOptions opt;
  // j = 2 is not a neighbor of i = 0: E_i commutes with grad_j and Jensen
  // gives the bound with K = 1, c = 0
  SweepoutResult res = sweepout_check(eng, 0, 2, norm_family(eng), M, opt);
  REQUIRE(res.feasible);
  REQUIRE(res.c == 0.0);
  REQUIRE(res.K <= 1.0 + 1e-12);
  for (std::size_t t = 0; t < res.lhs.size(); ++t)
    REQUIRE(res.lhs[t] <= res.own[t] * (1.0 + 1e-6) + 1e-12);
}

TEST_CASE("sweeping-out inequality decouples at beta = 0") {
  GibbsEngine eng = chain_engine(0.0, 3);
  DecayMatrix M{0.3, 1, 1};
  SweepoutOptions opt;
  SweepoutResult res = sweepout_check(eng, 0, 1, norm_family(eng), M, opt);
  REQUIRE(res.feasible);
  REQUIRE(res.c == 0.0);
  REQUIRE(res.K <= 1.0 + 1e-12);
}

TEST_CASE("sweeping-out constant c shrinks with the coupling") {
  DecayMatrix M{0.3, 1, 1};
  SweepoutOptions opt;
  opt.c_step = 0.01;
  std::vector<double> cs;
  for (double beta : {0.12, 0.06, 0.02}) {
    GibbsEngine eng = chain_engine(beta, 3);
    SweepoutResult res = sweepout_check(eng, 0, 1, norm_family(eng), M, opt);
    REQUIRE(res.feasible);
    cs.push_back(res.c);
  }
  REQUIRE(cs[1] <= cs[0] + 1e-12);
  REQUIRE(cs[2] <= cs[1] + 1e-12);
}

TEST_CASE("boundary sensitivity vanishes for equal configurations") {
  GibbsEngine eng = chain_engine(0.06, 3);
  SiteTensor f = eng.tabulate_site_function(0, [](const Spin& s) {
    return kaplan_norm(to_group_point(s));
  });
  std::vector<Spin> cfg(3, Spin{0.5, -0.5, 1.0});
  BoundarySensitivityOptions opt;
  opt.m_max = 3;
  auto res = boundary_sensitivity(eng, f, cfg, cfg, opt);
  for (double d : res.delta) REQUIRE(d == 0.0);
  REQUIRE(res.decays);
  REQUIRE(res.unique_at_tolerance);
}

TEST_CASE("boundary sensitivity vanishes at beta = 0 after one sweep") {
  GibbsEngine eng = chain_engine(0.0, 3);
  SiteTensor f = eng.tabulate_site_function(0, [](const Spin& s) {
    return kaplan_norm(to_group_point(s));
  });
  std::vector<Spin> a(3, Spin{});
  std::vector<Spin> b(3, Spin{1.0, -0.5, 2.0});
  BoundarySensitivityOptions opt;
  opt.m_max = 3;
  auto res = boundary_sensitivity(eng, f, a, b, opt);
  REQUIRE(res.delta[0] > 0.0);  // the raw function does separate them
  REQUIRE(res.delta[1] == 0.0);
  REQUIRE(res.delta[2] == 0.0);
  REQUIRE(res.unique_at_tolerance);
}

TEST_CASE("boundary sensitivity decays geometrically at small coupling") {
  GibbsEngine eng = chain_engine(0.04, 3);
  SiteTensor f = eng.tabulate_site_function(0, [](const Spin& s) {
    return kaplan_norm(to_group_point(s));
  });
  // dilation-separated configurations
  std::vector<Spin> a(3, Spin{0.5, 0.4, 0.3});
  std::vector<Spin> b;
  for (const Spin& s : a) b.push_back(to_spin(dilate(3.0, to_group_point(s))));
  BoundarySensitivityOptions opt;
  opt.m_max = 4;
  auto res = boundary_sensitivity(eng, f, a, b, opt);
  REQUIRE(res.delta[1] > 0.0);
  REQUIRE(res.decays);
  REQUIRE_FALSE(res.divergence);
}
