#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "carnot_gibbs/gibbs.hpp"
#include "carnot_gibbs/presets.hpp"

using namespace carnot_gibbs;

namespace {

SpinModel kaplan_chain(double beta, double phase_exp = 4.0) {
  SpinModel m;
  m.space = SpinSpace::heisenberg();
  m.D = 1;
  m.p = phase_exp;
  m.q = 2.0;
  const HomogeneousNorm N = HomogeneousNorm::kaplan();
  m.phase = Phase({{1.0, phase_exp, N}});
  m.interaction = Interaction({{1.0, N, 1.0, N, 1.0}});
  m.couplings = CouplingMatrix::uniform(1, 1, beta);
  return m;
}

GibbsEngine make_engine(double beta, int length, int n = 7, double L = 3.5) {
  SpinModel m = kaplan_chain(beta);
  LatticeWindow w = LatticeWindow::chain(length);
  BoundaryConfig omega = constant_boundary(w, 1, Spin{0.3, -0.2, 0.5});
  return GibbsEngine(m, w, {L, n, QuadratureRule::Trapezoid}, omega);
}

}  // namespace

TEST_CASE("conditional expectations preserve constants and positivity") {
  GibbsEngine eng = make_engine(0.08, 2);
  auto one = eng.direct_expectation({0}, {}, [](const std::vector<int>&) {
    return 1.0;
  });
  REQUIRE(one.value == Catch::Approx(1.0).margin(1e-12));

  // E of the constant grid function is the constant
  SiteTensor c = eng.tabulate_site_function(0, [](const Spin&) { return 3.25; });
  SiteTensor ec = eng.eliminate(c, 0);
  for (double v : ec.values) REQUIRE(v == Catch::Approx(3.25).margin(1e-12));

  auto nonneg = eng.direct_expectation({0}, {}, [&](const std::vector<int>& x) {
    const Spin& s = eng.grid().nodes[x[0]];
    return s[0] * s[0] + 0.1;
  });
  REQUIRE(nonneg.value > 0.0);
}

TEST_CASE("decoupled sites: single-site mean ignores the boundary") {
  SpinModel m = kaplan_chain(0.0);
  LatticeWindow w = LatticeWindow::chain(1);
  QuadratureGrid spec{3.5, 9, QuadratureRule::Trapezoid};
  BoundaryConfig o1 = constant_boundary(w, 1, Spin{});
  BoundaryConfig o2 = constant_boundary(w, 1, Spin{1.5, -0.5, 2.0});
  GibbsEngine e1(m, w, spec, o1), e2(m, w, spec, o2);
  auto f = [&](const std::vector<int>& x) {
    return kaplan_norm(to_group_point(e1.grid().nodes[x[0]]));
  };
  REQUIRE(e1.direct_expectation({0}, {}, f).value ==
          Catch::Approx(e2.direct_expectation({0}, {}, f).value).margin(1e-14));
}

TEST_CASE("odd observables of a symmetric single-site measure vanish") {
  GibbsEngine eng = make_engine(0.0, 1);
  auto odd = eng.direct_expectation({0}, {}, [&](const std::vector<int>& x) {
    return eng.grid().nodes[x[0]][0];
  });
  REQUIRE(std::abs(odd.value) < 1e-13);
}

TEST_CASE("Jensen contraction for q in (1,2]") {
  GibbsEngine eng = make_engine(0.06, 2);
  std::mt19937_64 rng(7);
  std::normal_distribution<double> g(0.0, 1.0);
  for (double q : {1.3, 1.7, 2.0}) {
    for (int rep = 0; rep < 10; ++rep) {
      const double a = g(rng), b = g(rng), c = g(rng);
      auto f = [&](const std::vector<int>& x) {
        const Spin& s = eng.grid().nodes[x[0]];
        return std::sin(a * s[0]) + b * s[1] + 0.2 * c * s[2];
      };
      const double ef =
          eng.direct_expectation({0}, {}, f).value;
      const double eabs =
          eng.direct_expectation({0}, {}, [&](const std::vector<int>& x) {
               return std::pow(std::abs(f(x)), q);
             }).value;
      REQUIRE(std::pow(std::abs(ef), q) <= eabs + 1e-8);
    }
  }
}

TEST_CASE("DLR compatibility") {
  SECTION("projection: Lambda1 = Lambda2") {
    GibbsEngine eng = make_engine(0.08, 2);
    auto f = [&](const std::vector<int>& x) {
      return kaplan_norm(to_group_point(eng.grid().nodes[x[0]])) +
             0.5 * eng.grid().nodes[x[1]][0];
    };
    DlrResult r = dlr_compatibility_check(eng, {0, 1}, {0, 1}, f);
    REQUIRE(r.residual < 1e-12);
  }
  SECTION("product measure at beta = 0") {
    GibbsEngine eng = make_engine(0.0, 2);
    auto f = [&](const std::vector<int>& x) {
      const Spin& a = eng.grid().nodes[x[0]];
      const Spin& b = eng.grid().nodes[x[1]];
      return std::exp(-0.2 * (a[0] * a[0] + b[2] * b[2]));
    };
    for (const std::vector<int>& l1 :
         std::vector<std::vector<int>>{{0}, {1}}) {
      DlrResult r = dlr_compatibility_check(eng, l1, {0, 1}, f);
      REQUIRE(r.residual < 1e-12);
    }
  }
  SECTION("interacting two-site window at moderate nodes") {
    GibbsEngine eng = make_engine(0.08, 2, 9);
    auto f = [&](const std::vector<int>& x) {
      const Spin& a = eng.grid().nodes[x[0]];
      const Spin& b = eng.grid().nodes[x[1]];
      return std::exp(-0.1 * kaplan_norm(to_group_point(a))) + 0.3 * b[1];
    };
    for (const std::vector<int>& l1 :
         std::vector<std::vector<int>>{{0}, {1}, {0, 1}}) {
      DlrResult r = dlr_compatibility_check(eng, l1, {0, 1}, f);
      REQUIRE(r.residual < 1e-5);
    }
  }
}

TEST_CASE("sweep operator at beta = 0 reaches the product mean in one pass") {
  GibbsEngine eng = make_engine(0.0, 4);
  SiteTensor f = eng.tabulate_site_function(1, [](const Spin& s) {
    return kaplan_norm(to_group_point(s));
  });
  SiteTensor pf = eng.sweep(f);
  REQUIRE(pf.deps.empty());
  const double mean = eng.direct_expectation({1}, {}, [&](const std::vector<int>& x) {
                           return kaplan_norm(to_group_point(eng.grid().nodes[x[0]]));
                         }).value;
  REQUIRE(pf.scalar_value() == Catch::Approx(mean).margin(1e-10));

  auto it = eng.iterate_sweep(f, 1);
  REQUIRE(it.spreads[0] == 0.0);
  REQUIRE(it.nu_estimate == Catch::Approx(mean).margin(1e-10));
  REQUIRE_FALSE(it.non_contraction);
}

TEST_CASE("sweep operator fixes constants") {
  GibbsEngine eng = make_engine(0.07, 4);
  SiteTensor one = eng.tabulate_site_function(2, [](const Spin&) { return 1.0; });
  SiteTensor p1 = eng.sweep(one);
  for (double v : p1.values) REQUIRE(v == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("after the sweep no dependence on the last component remains") {
  GibbsEngine eng = make_engine(0.07, 4);
  // Gamma_1 holds the odd window sites {1, 3}; P f may not depend on them
  SiteTensor f = eng.tabulate_site_function(1, [](const Spin& s) {
    return s[0] + 0.2 * s[2];
  });
  SiteTensor pf = eng.sweep(f);
  for (int d : pf.deps) {
    REQUIRE(eng.partition().component_of(eng.window().site_at(d)) !=
            eng.partition().count() - 1);
  }
}

TEST_CASE("iterated sweeps contract the spread at small coupling") {
  GibbsEngine eng = make_engine(0.05, 4);
  SiteTensor f = eng.tabulate_site_function(0, [](const Spin& s) {
    return kaplan_norm(to_group_point(s));
  });
  auto it = eng.iterate_sweep(f, 4);
  for (std::size_t m = 1; m < it.spreads.size(); ++m)
    REQUIRE(it.spreads[m] <= it.spreads[m - 1] * (1.0 + 1e-9));
  REQUIRE_FALSE(it.non_contraction);
}

TEST_CASE("window expectation agrees with direct quadrature on two sites") {
  GibbsEngine eng = make_engine(0.09, 2);
  SiteTensor f = eng.tabulate_site_function(0, [](const Spin& s) {
    return s[0] * s[0] + 0.3 * s[2];
  });
  const double via_contraction = eng.window_expectation(f);
  const double via_direct =
      eng.direct_expectation({0, 1}, {}, [&](const std::vector<int>& x) {
           const Spin& s = eng.grid().nodes[x[0]];
           return s[0] * s[0] + 0.3 * s[2];
         }).value;
  REQUIRE(via_contraction == Catch::Approx(via_direct).margin(1e-10));
}

TEST_CASE("grid-function gradients match closed forms") {
  GibbsEngine eng = make_engine(0.05, 2);
  SECTION("coordinate x1 has unit horizontal gradient") {
    SiteTensor f = eng.tabulate_site_function(0, [](const Spin& s) { return s[0]; });
    SiteTensor g = eng.grad_norm_pow_q(f, 0, 2.0);
    for (double v : g.values) REQUIRE(v == Catch::Approx(1.0).margin(1e-9));
  }
  SECTION("vertical coordinate picks up the drift coefficients") {
    SiteTensor f = eng.tabulate_site_function(0, [](const Spin& s) { return s[2]; });
    SiteTensor g = eng.grad_norm_pow_q(f, 0, 2.0);
    for (int x = 0; x < eng.grid().size(); ++x) {
      const Spin& s = eng.grid().nodes[x];
      REQUIRE(g.values[x] ==
              Catch::Approx(4.0 * (s[0] * s[0] + s[1] * s[1])).margin(1e-9));
    }
  }
  SECTION("gradient in an absent site vanishes") {
    SiteTensor f = eng.tabulate_site_function(0, [](const Spin& s) { return s[0]; });
    SiteTensor g = eng.grad_norm_pow_q(f, 1, 2.0);
    for (double v : g.values) REQUIRE(v == 0.0);
  }
}

TEST_CASE("memory cap rejects oversized elimination targets") {
  SpinModel m = kaplan_chain(0.05);
  LatticeWindow w = LatticeWindow::chain(4);
  BoundaryConfig omega = constant_boundary(w, 1, Spin{});
  GibbsEngine eng(m, w, {3.5, 7, QuadratureRule::Trapezoid}, omega,
                  /*max_tensor_elems=*/1000);
  SiteTensor f = eng.tabulate_site_function(1, [](const Spin& s) { return s[0]; });
  REQUIRE_THROWS_AS(eng.eliminate(f, 1), NumericalError);
}
