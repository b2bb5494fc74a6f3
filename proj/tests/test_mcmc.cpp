#include <catch2/catch_amalgamated.hpp>

#include "carnot_gibbs/estimators.hpp"
#include "carnot_gibbs/mcmc.hpp"

using namespace carnot_gibbs;

namespace {

SpinModel gaussian_model() {
  SpinModel m;
  m.space = SpinSpace::euclidean(1);
  m.D = 1;
  m.p = 2.0;
  m.q = 2.0;
  m.phase = Phase({{0.5, 2.0, HomogeneousNorm::euclidean()}});
  m.interaction = Interaction({{1.0, HomogeneousNorm::euclidean(), 1.0,
                                HomogeneousNorm::euclidean(), 1.0}});
  m.couplings = CouplingMatrix::uniform(1, 1, 0.0);
  return m;
}

SpinModel kaplan_model() {
  SpinModel m;
  m.space = SpinSpace::heisenberg();
  m.D = 1;
  m.p = 4.0;
  m.q = 2.0;
  const HomogeneousNorm N = HomogeneousNorm::kaplan();
  m.phase = Phase({{1.0, 4.0, N}});
  m.interaction = Interaction({{1.0, N, 1.0, N, 1.0}});
  m.couplings = CouplingMatrix::uniform(1, 1, 0.0);
  return m;
}

}  // namespace

TEST_CASE("identical seeds reproduce identical chains") {
  SpinModel m = kaplan_model();
  LatticeWindow w = LatticeWindow::chain(2);
  BoundaryConfig omega = constant_boundary(w, 1, Spin{});
  MCMCParams p;
  p.steps = 2000;
  p.burn_in = 100;
  p.seed = 12345;
  MetropolisWithinGibbs a(m, w, omega, p), b(m, w, omega, p);
  for (int t = 0; t < 500; ++t) {
    a.step();
    b.step();
  }
  for (int i = 0; i < w.size(); ++i)
    for (int c = 0; c < 3; ++c) REQUIRE(a.state()[i][c] == b.state()[i][c]);

  MCMCParams p2 = p;
  p2.seed = 54321;
  MetropolisWithinGibbs c2(m, w, omega, p2);
  for (int t = 0; t < 500; ++t) c2.step();
  bool differs = false;
  for (int i = 0; i < w.size(); ++i)
    for (int c = 0; c < 3; ++c)
      if (a.state()[i][c] != c2.state()[i][c]) differs = true;
  REQUIRE(differs);
}

TEST_CASE("decoupled Gaussian: sample moments match the law") {
  SpinModel m = gaussian_model();
  LatticeWindow w = LatticeWindow::chain(1);
  BoundaryConfig omega = constant_boundary(w, 1, Spin{});
  MCMCParams p;
  p.steps = 120000;
  p.burn_in = 20000;
  p.proposal_scale = 1.2;
  p.seed = 2024;
  MetropolisWithinGibbs chain(m, w, omega, p);
  auto stats = chain.run({[](const std::vector<Spin>& s) { return s[0][0]; },
                          [](const std::vector<Spin>& s) {
                            return s[0][0] * s[0][0];
                          }});
  REQUIRE(std::abs(stats[0].mean - 0.0) <= 3.0 * stats[0].std_error);
  REQUIRE(std::abs(stats[1].mean - 1.0) <= 3.0 * stats[1].std_error);
  REQUIRE_FALSE(chain.tuning_warning());
}

TEST_CASE("MCMC agrees with quadrature for the Kaplan single-site measure") {
  SpinModel m = kaplan_model();
  ProductMeasure pm(m.space, m.phase, {4.0, 41, QuadratureRule::Trapezoid});
  const double target = pm.expectation([](const Spin& s) {
    const double n = kaplan_norm(to_group_point(s));
    return n * n;
  });

  LatticeWindow w = LatticeWindow::chain(1);
  BoundaryConfig omega = constant_boundary(w, 1, Spin{});
  MCMCParams p;
  p.steps = 150000;
  p.burn_in = 30000;
  p.proposal_scale = 0.7;
  p.seed = 99;
  MetropolisWithinGibbs chain(m, w, omega, p);
  auto stats = chain.run({[](const std::vector<Spin>& s) {
    const double n = kaplan_norm(to_group_point(s[0]));
    return n * n;
  }});
  REQUIRE(std::abs(stats[0].mean - target) <= 3.0 * stats[0].std_error);
}

TEST_CASE("acceptance-rate tuning warning") {
  SpinModel m = gaussian_model();
  LatticeWindow w = LatticeWindow::chain(1);
  BoundaryConfig omega = constant_boundary(w, 1, Spin{});
  MCMCParams p;
  p.steps = 4000;
  p.burn_in = 500;
  p.proposal_scale = 60.0;  // nearly every proposal lands far in the tail
  p.seed = 5;
  MetropolisWithinGibbs chain(m, w, omega, p);
  for (int t = 0; t < 4000; ++t) chain.step();
  REQUIRE(chain.acceptance_rate() < 0.1);
  REQUIRE(chain.tuning_warning());
}

TEST_CASE("parameter validation") {
  MCMCParams p;
  p.steps = 100;
  p.burn_in = 100;
  REQUIRE_THROWS_AS(p.validate(), EvaluationError);
  p.burn_in = 10;
  p.proposal_scale = -1.0;
  REQUIRE_THROWS_AS(p.validate(), EvaluationError);
}

TEST_CASE("batch means give sane errors on iid input") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g(2.0, 1.0);
  std::vector<double> xs(20000);
  for (auto& x : xs) x = g(rng);
  ChainStats st = batch_means(xs);
  REQUIRE(std::abs(st.mean - 2.0) < 5.0 * st.std_error);
  REQUIRE(st.std_error == Catch::Approx(1.0 / std::sqrt(20000.0)).epsilon(0.35));
}
