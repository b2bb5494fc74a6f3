#pragma once

// The carnot-gibbs experiment runner. Every estimator is a subcommand with a
// reproducible seed and machine-readable output: a JSON report array and an
// RFC 4180 CSV for sweeps. Exit codes: 0 on completion, 2 on validation
// errors, 3 on numerical failures.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "carnot_gibbs/dynamics.hpp"
#include "carnot_gibbs/estimators.hpp"
#include "carnot_gibbs/gibbs.hpp"
#include "carnot_gibbs/mcmc.hpp"
#include "carnot_gibbs/model_json.hpp"
#include "carnot_gibbs/presets.hpp"

namespace carnot_gibbs {

struct ExperimentConfig {
  std::string preset = "kaplan";
  std::string model_file;  // inline model JSON overrides the preset
  std::string config_file;
  int D = 1;
  int window = 4;  // chain length for the dynamics subcommand
  double L = 5.0;
  int n = 9;
  double beta = 0.05;
  std::string beta_sweep;  // "start:stop:count"
  double q = 0.0;          // 0: use the preset's q
  std::uint64_t seed = 1;
  int m_max = 6;
  long mcmc_steps = 60000;
  long mcmc_burn_in = 10000;
  double mcmc_scale = 0.6;
  int threads = 0;
  std::string out_json;
  std::string out_csv;
  bool self_test = false;
  bool closed_form = false;
  double closed_form_B = 1.0;
  double closed_form_beta_q = 0.1;
};

namespace cli_detail {

inline void apply_config_file(ExperimentConfig& cfg) {
  if (cfg.config_file.empty()) return;
  std::ifstream in(cfg.config_file);
  if (!in) throw EvaluationError("cannot open config file " + cfg.config_file);
  json j = json::parse(in);
  // flags override file fields, so only fill the ones left at defaults
  if (j.contains("preset")) cfg.preset = j["preset"].get<std::string>();
  if (j.contains("model_file")) cfg.model_file = j["model_file"];
  if (j.contains("D")) cfg.D = j["D"];
  if (j.contains("window")) cfg.window = j["window"];
  if (j.contains("L")) cfg.L = j["L"];
  if (j.contains("n")) cfg.n = j["n"];
  if (j.contains("beta")) cfg.beta = j["beta"];
  if (j.contains("beta_sweep")) cfg.beta_sweep = j["beta_sweep"];
  if (j.contains("q")) cfg.q = j["q"];
  if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("m_max")) cfg.m_max = j["m_max"];
  if (j.contains("out_json")) cfg.out_json = j["out_json"];
  if (j.contains("out_csv")) cfg.out_csv = j["out_csv"];
  if (j.contains("threads")) cfg.threads = j["threads"];
}

inline ModelPreset load_preset(const ExperimentConfig& cfg, double beta) {
  if (!cfg.model_file.empty()) {
    std::ifstream in(cfg.model_file);
    if (!in) throw EvaluationError("cannot open model file " + cfg.model_file);
    ModelPreset preset;
    preset.name = "custom";
    preset.model = model_from_json(json::parse(in));
    preset.model.couplings = preset.model.couplings.scaled_to(beta);
    const HomogeneousNorm base = preset.model.space.is_heisenberg()
                                     ? HomogeneousNorm::carnot_caratheodory()
                                     : HomogeneousNorm::euclidean();
    const double e = preset.model.q * (preset.model.p - 1.0);
    preset.eta = {"norm^" + std::to_string(e), base, e};
    preset.hypothesis = {preset.model.p, preset.model.q,
                         preset.model.interaction.max_degree(), 1.0, beta};
    return preset;
  }
  return preset_by_name(cfg.preset, beta, cfg.D);
}

inline std::vector<double> parse_sweep(const std::string& spec) {
  double start = 0.0, stop = 0.0;
  int count = 0;
  if (std::sscanf(spec.c_str(), "%lf:%lf:%d", &start, &stop, &count) != 3 ||
      count < 2)
    throw EvaluationError("bad sweep spec '" + spec + "': want start:stop:count");
  std::vector<double> out;
  for (int k = 0; k < count; ++k)
    out.push_back(start + (stop - start) * k / (count - 1));
  return out;
}

struct Outputs {
  json reports = json::array();
  CsvWriter csv{{"beta", "constant_name", "value", "uncertainty", "pass",
                 "seed", "preset", "grid_L", "grid_n", "version"}};

  void add(const ExperimentConfig& cfg, const std::string& preset, double beta,
           const EstimateReport& r) {
    reports.push_back(report_to_json(r));
    csv.row({format_double(beta), r.constant, format_double(r.value),
             format_double(r.uncertainty),
             r.pass.has_value() ? (*r.pass ? "true" : "false") : "",
             std::to_string(cfg.seed), preset, format_double(cfg.L),
             std::to_string(cfg.n), kVersion});
  }

  void flush(const ExperimentConfig& cfg) {
    if (!cfg.out_json.empty()) {
      std::ofstream out(cfg.out_json, std::ios::binary);
      out << reports.dump(2) << "\n";
    }
    if (!cfg.out_csv.empty()) csv.write(cfg.out_csv);
  }
};

// ---- norms self-test --------------------------------------------------------

inline int run_norms(const ExperimentConfig& cfg, Outputs& out) {
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> gauss(0.0, 1.5);
  auto rnd = [&] { return GroupPoint{gauss(rng), gauss(rng), gauss(rng)}; };
  auto close = [](const GroupPoint& a, const GroupPoint& b, double tol) {
    return std::abs(a.x1 - b.x1) <= tol && std::abs(a.x2 - b.x2) <= tol &&
           std::abs(a.x3 - b.x3) <= tol;
  };

  int failures = 0;
  auto check = [&](const std::string& name, bool ok) {
    std::cout << (ok ? "PASS " : "FAIL ") << name << "\n";
    if (!ok) ++failures;
  };

  bool assoc = true, inv = true, autom = true, homog = true, symm = true;
  for (int k = 0; k < 10000; ++k) {
    const GroupPoint a = rnd(), b = rnd(), c = rnd();
    if (!close(compose(compose(a, b), c), compose(a, compose(b, c)), 1e-12))
      assoc = false;
    if (!close(compose(a, inverse(a)), identity(), 1e-12)) inv = false;
    if (!close(dilate(2.0, compose(a, b)),
               compose(dilate(2.0, a), dilate(2.0, b)), 1e-12))
      autom = false;
    for (double lam : {0.5, 2.0, 3.0})
      if (std::abs(kaplan_norm(dilate(lam, a)) - lam * kaplan_norm(a)) > 1e-9)
        homog = false;
    if (std::abs(kaplan_norm(inverse(a)) - kaplan_norm(a)) > 1e-9) symm = false;
  }
  check("group associativity (1e-12, 10^4 points)", assoc);
  check("group inverse (1e-12)", inv);
  check("dilation automorphism (1e-12)", autom);
  check("kaplan homogeneity (1e-9)", homog);
  check("kaplan symmetry (1e-9)", symm);

  bool grad_ok = true;
  const HomogeneousNorm N = HomogeneousNorm::kaplan();
  for (int k = 0; k < 500; ++k) {
    GroupPoint a = rnd();
    if (kaplan_norm(a) < 1e-3) continue;
    auto g = N.subgradient(a);
    if (!g || std::abs(g->length() - horizontal_norm(a) / kaplan_norm(a)) > 1e-4)
      grad_ok = false;
  }
  check("kaplan gradient identity |grad N| = |w|/N (1e-4)", grad_ok);

  bool eik = true, cc_hom = true;
  ScalarField d = [](const GroupPoint& p) { return cc_distance(p); };
  for (int k = 0; k < 200; ++k) {
    GroupPoint a = rnd();
    if (horizontal_norm(a) < 0.1) continue;
    if (std::abs(apply_subgradient(d, a, 1e-4).length() - 1.0) > 1e-2) eik = false;
    if (std::abs(cc_distance(dilate(3.0, a)) - 3.0 * cc_distance(a)) > 1e-6)
      cc_hom = false;
  }
  check("eikonal |grad d| = 1 (1e-2)", eik);
  check("cc homogeneity (1e-6)", cc_hom);

  EstimateReport rep;
  rep.constant = "norm_suite";
  rep.value = failures == 0 ? 1.0 : 0.0;
  rep.method = "invariant-suite";
  rep.pass = failures == 0;
  rep.seed = cfg.seed;
  out.add(cfg, "norms", 0.0, rep);
  return failures == 0 ? 0 : 3;
}

// ---- estimator subcommands ----------------------------------------------------

inline int run_sgi(const ExperimentConfig& cfg, Outputs& out) {
  ModelPreset preset = load_preset(cfg, 0.0);
  SGIParams params;
  params.q = cfg.q > 0.0 ? cfg.q : preset.model.q;
  params.family.seed = cfg.seed;
  const HomogeneousNorm base = preset.model.space.is_heisenberg()
                                   ? HomogeneousNorm::kaplan()
                                   : HomogeneousNorm::euclidean();
  ProductMeasure pm(preset.model.space, preset.model.phase,
                    {cfg.L, cfg.n, QuadratureRule::Trapezoid}, 1);
  SgiResult res = estimate_sgi_constant(pm, base, params);
  out.add(cfg, preset.name, 0.0, res.report);
  std::cout << "C_SG estimate: " << res.report.value
            << " (rayleigh " << res.rayleigh << ", generator " << res.generator
            << ")\n";
  return 0;
}

inline int run_ubound(const ExperimentConfig& cfg, Outputs& out) {
  ModelPreset preset = load_preset(cfg, cfg.beta);
  C1Options opt;
  opt.L = cfg.L;
  opt.q = cfg.q > 0.0 ? cfg.q : preset.model.q;
  opt.family.seed = cfg.seed;
  opt.support_outside_unit_ball = false;
  EstimateReport rep = verify_ubound_C1(preset.model.space, preset.model.phase,
                                        preset.eta, opt.q, opt);
  out.add(cfg, preset.name, cfg.beta, rep);
  std::cout << "B_C1 estimate: " << rep.value
            << (rep.pass.value_or(false) ? " (stable)" : " (unstable)") << "\n";
  return 0;
}

inline int run_c2(const ExperimentConfig& cfg, Outputs& out) {
  ModelPreset preset = load_preset(cfg, cfg.beta);
  C2Options opt;
  opt.L = cfg.L;
  opt.q = cfg.q > 0.0 ? cfg.q : preset.model.q;
  EstimateReport rep = verify_gradient_bound_C2(
      preset.model.space, preset.model.interaction, preset.eta, opt.q, opt);
  out.add(cfg, preset.name, cfg.beta, rep);
  std::cout << "B_C2 estimate: " << rep.value << "\n";
  return 0;
}

inline int run_dobrushin(const ExperimentConfig& cfg, Outputs& out) {
  if (cfg.closed_form) {
    const double q = cfg.q > 0.0 ? cfg.q : 2.0;
    auto cf = dobrushin_closed_form(cfg.closed_form_B, q, cfg.closed_form_beta_q);
    EstimateReport k1{"K1", cf.K1, "closed-form", 0.0, cf.valid, cfg.seed};
    EstimateReport c1{"c1", cf.c1, "closed-form", 0.0, cf.valid, cfg.seed};
    out.add(cfg, "closed-form", 0.0, k1);
    out.add(cfg, "closed-form", 0.0, c1);
    std::cout << "closed form: K1 = " << cf.K1 << ", c1 = " << cf.c1 << "\n";
    return 0;
  }
  std::vector<double> betas =
      cfg.beta_sweep.empty() ? std::vector<double>{cfg.beta}
                             : parse_sweep(cfg.beta_sweep);
  DobrushinOptions opt;
  opt.grid = {cfg.L, cfg.n % 2 ? cfg.n : cfg.n + 1, QuadratureRule::Trapezoid};
  opt.seed = cfg.seed;
  double beta0_hat = -1.0;
  bool still_contracting = true;
  for (double beta : betas) {
    ModelPreset preset = load_preset(cfg, beta);
    if (beta == 0.0) {
      EstimateReport rep;
      rep.constant = "sum_c";
      rep.value = 0.0;
      rep.method = "decoupled";
      rep.pass = true;
      rep.seed = cfg.seed;
      out.add(cfg, preset.name, beta, rep);
      beta0_hat = 0.0;
      continue;
    }
    DobrushinResult res = dobrushin_check(preset.model, preset.eta, opt);
    out.add(cfg, preset.name, beta, res.report);
    if (still_contracting && res.contraction) beta0_hat = beta;
    if (!res.contraction) still_contracting = false;
  }
  EstimateReport thr;
  thr.constant = "beta0_hat";
  thr.value = beta0_hat;
  thr.method = still_contracting ? "sweep-censored" : "sweep-crossing";
  thr.pass = beta0_hat >= 0.0;
  thr.seed = cfg.seed;
  thr.notes["meaning"] =
      still_contracting
          ? "contraction held for every swept beta; threshold is at least this"
          : "largest swept beta with contraction below it";
  out.add(cfg, cfg.preset, betas.back(), thr);
  std::cout << "empirical contraction threshold beta0_hat = " << beta0_hat
            << (still_contracting ? " (censored)" : "") << "\n";
  return 0;
}

inline int run_dynamics(const ExperimentConfig& cfg, Outputs& out) {
  ModelPreset preset = load_preset(cfg, cfg.beta);
  LatticeWindow window = LatticeWindow::chain(cfg.window);
  QuadratureGrid grid{cfg.L, cfg.n, QuadratureRule::Trapezoid};
  BoundaryConfig omega =
      constant_boundary(window, preset.model.range(), Spin{});
  GibbsEngine eng(preset.model, window, grid, omega);

  const HomogeneousNorm base = preset.model.space.is_heisenberg()
                                   ? HomogeneousNorm::kaplan()
                                   : HomogeneousNorm::euclidean();
  std::vector<SiteTensor> family;
  for (int s = 0; s < std::min(2, window.size()); ++s) {
    family.push_back(eng.tabulate_site_function(
        s, [&](const Spin& x) { return base.value(preset.model.space, x); }));
    family.push_back(eng.tabulate_site_function(s, [](const Spin& x) {
      return x[0];
    }));
  }
  ContractionOptions copt;
  copt.m_max = cfg.m_max;
  copt.q = cfg.q > 0.0 ? cfg.q : preset.model.q;
  ContractionResult cres = contraction_rate(eng, family, copt);
  out.add(cfg, preset.name, cfg.beta, cres.report);
  std::cout << "xi_hat = " << cres.xi_hat << " (R^2 " << cres.r2 << ")\n";

  // boundary sensitivity between dilation-separated configurations
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> gauss(0.0, 0.5);
  std::vector<Spin> cfg_a, cfg_b;
  for (int s = 0; s < window.size(); ++s) {
    Spin u{gauss(rng), gauss(rng), gauss(rng)};
    if (!preset.model.space.is_heisenberg())
      for (int a = preset.model.space.n; a < 3; ++a) u[a] = 0.0;
    cfg_a.push_back(u);
    cfg_b.push_back(preset.model.space.scale(3.0, u));
  }
  BoundarySensitivityOptions bopt;
  bopt.m_max = cfg.m_max;
  BoundarySensitivityResult bres =
      boundary_sensitivity(eng, family.front(), cfg_a, cfg_b, bopt);
  out.add(cfg, preset.name, cfg.beta, bres.report);
  std::cout << "boundary sensitivity: "
            << (bres.decays ? "geometric decay" : "no decay") << ", Delta_last = "
            << bres.delta.back() << "\n";
  return 0;
}

inline int run_dlr(const ExperimentConfig& cfg, Outputs& out) {
  ModelPreset preset = load_preset(cfg, cfg.beta);
  LatticeWindow window = LatticeWindow::chain(2);
  QuadratureGrid grid{cfg.L, cfg.n, QuadratureRule::Trapezoid};
  BoundaryConfig omega = constant_boundary(window, preset.model.range(), Spin{});
  GibbsEngine eng(preset.model, window, grid, omega);

  const HomogeneousNorm base = preset.model.space.is_heisenberg()
                                   ? HomogeneousNorm::kaplan()
                                   : HomogeneousNorm::euclidean();
  auto f = [&](const std::vector<int>& nodes) {
    double v = 0.0;
    for (std::size_t k = 0; k < nodes.size(); ++k)
      v += base.value(preset.model.space, eng.grid().nodes[nodes[k]]) *
           double(k + 1);
    return std::exp(-0.1 * v);
  };

  double worst = 0.0;
  for (const std::vector<int>& l1 :
       std::vector<std::vector<int>>{{0}, {1}, {0, 1}}) {
    DlrResult r = dlr_compatibility_check(eng, l1, {0, 1}, f);
    worst = std::max(worst, r.residual);
    EstimateReport rep;
    rep.constant = "dlr_residual";
    rep.value = r.residual;
    rep.method = "direct-quadrature";
    rep.pass = r.residual < 1e-5;
    rep.seed = cfg.seed;
    rep.metadata["lambda1_size"] = double(l1.size());
    out.add(cfg, preset.name, cfg.beta, rep);
  }
  std::cout << "worst DLR residual: " << worst << "\n";
  return worst < 1e-5 ? 0 : 3;
}

}  // namespace cli_detail

inline int run_cli(std::vector<std::string> args) {
  using namespace cli_detail;
  CLI::App app{"carnot-gibbs: lattice spin systems over the Heisenberg group"};
  app.require_subcommand(1);
  app.fallthrough();  // global options may follow the subcommand name

  ExperimentConfig cfg;
  app.add_option("--config", cfg.config_file, "JSON config file (flags override)");
  app.add_option("--preset", cfg.preset, "cc-poly | kaplan | euclidean");
  app.add_option("--model-file", cfg.model_file, "inline model JSON path");
  app.add_option("--D", cfg.D, "lattice dimension");
  app.add_option("--window", cfg.window, "chain length for dynamics");
  app.add_option("--L", cfg.L, "truncation half-width");
  app.add_option("--n", cfg.n, "quadrature nodes per axis");
  app.add_option("--beta", cfg.beta, "coupling strength");
  app.add_option("--beta-sweep", cfg.beta_sweep, "start:stop:count");
  app.add_option("--q", cfg.q, "q exponent override");
  app.add_option("--seed", cfg.seed, "master seed");
  app.add_option("--m-max", cfg.m_max, "sweep iterations");
  app.add_option("--threads", cfg.threads, "worker pool size");
  app.add_option("--out-json", cfg.out_json, "JSON report path");
  app.add_option("--out-csv", cfg.out_csv, "CSV sweep path");

  auto* norms = app.add_subcommand("norms", "group and norm invariant suite");
  norms->add_flag("--self-test", cfg.self_test, "run the invariant suite");
  auto* sgi = app.add_subcommand("sgi", "q-spectral-gap constant");
  auto* ubound = app.add_subcommand("ubound", "U-bound (C1) verification");
  auto* c2 = app.add_subcommand("c2", "interaction gradient bound (C2)");
  auto* dob = app.add_subcommand("dobrushin", "Dobrushin coefficients");
  dob->add_flag("--closed-form", cfg.closed_form, "evaluate the closed form");
  dob->add_option("--B", cfg.closed_form_B, "U-bound constant for the closed form");
  dob->add_option("--beta-q", cfg.closed_form_beta_q,
                  "sum_j |beta_ij|^q for the closed form");
  auto* dyn = app.add_subcommand("dynamics", "sweep contraction and sensitivity");
  auto* dlr = app.add_subcommand("dlr", "compatibility residuals");

  std::vector<const char*> argv;
  argv.push_back("carnot-gibbs");
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(int(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    apply_config_file(cfg);
    if (cfg.threads > 0)
      setenv("CARNOT_GIBBS_THREADS", std::to_string(cfg.threads).c_str(), 1);
    Outputs out;
    int rc = 0;
    if (norms->parsed()) rc = run_norms(cfg, out);
    else if (sgi->parsed()) rc = run_sgi(cfg, out);
    else if (ubound->parsed()) rc = run_ubound(cfg, out);
    else if (c2->parsed()) rc = run_c2(cfg, out);
    else if (dob->parsed()) rc = run_dobrushin(cfg, out);
    else if (dyn->parsed()) rc = run_dynamics(cfg, out);
    else if (dlr->parsed()) rc = run_dlr(cfg, out);
    out.flush(cfg);
    return rc;
  } catch (const EvaluationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}

}  // namespace carnot_gibbs
