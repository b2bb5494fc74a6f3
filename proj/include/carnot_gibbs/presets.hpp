#pragma once

// Preset models: the Carnot-Caratheodory polynomial family, the Kaplan-norm
// family, and the Euclidean family, each carrying its hypothesis record and
// the expected verdicts for the integrability (C1) and gradient (C2) checks.
// Invalid combinations are constructed on purpose, tagged fail-expected, and
// serve as negative controls.

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "carnot_gibbs/estimators.hpp"
#include "carnot_gibbs/lattice.hpp"

namespace carnot_gibbs {

struct HypothesisRecord {
  double p = 2.0;
  double q = 2.0;
  double r = 0.0;      // interaction degree
  double alpha = 1.0;  // leading phase coefficient
  double beta = 0.0;   // coupling bound
};

struct ModelPreset {
  std::string name;
  SpinModel model;
  HypothesisRecord hypothesis;
  UBoundFunction eta;
  bool expect_c1_pass = true;
  bool expect_c2_pass = true;
  bool eta_degenerate = false;  // eta fails to diverge in all directions

  std::vector<std::string> consistency_notes() const {
    std::vector<std::string> notes = model.validity_notes();
    if (!eta_degenerate && !eta.diverges(model.space))
      notes.push_back("eta unexpectedly fails to diverge");
    return notes;
  }
};

/// phi = alpha d^p with a degree-r polynomial interaction in (d(x), d(y)) and
/// eta = d^{q(p-1)}; valid when r <= p.
inline ModelPreset preset_cc_polynomial(double alpha, double p, double r,
                                        double beta, int D = 1, int R = 1) {
  if (!(alpha > 0.0) || !(p > 1.0) || !(r >= 1.0))
    throw EvaluationError("preset_cc_polynomial: need alpha > 0, p > 1, r >= 1");
  ModelPreset preset;
  preset.name = "cc-poly";
  const double q = p / (p - 1.0);
  const HomogeneousNorm d = HomogeneousNorm::carnot_caratheodory();

  SpinModel m;
  m.space = SpinSpace::heisenberg();
  m.D = D;
  m.p = p;
  m.q = q;
  m.phase = Phase({{alpha, p, d}});
  std::vector<InteractionMonomial> monos;
  if (std::abs(r - 2.0) < 1e-12) {
    monos.push_back({1.0, d, 1.0, d, 1.0});
  } else {
    // split the degree across the two slots, exponents in {0} u [1, inf)
    const double a = std::max(1.0, r - 1.0);
    monos.push_back({1.0, d, a, d, r - a});
    monos.push_back({1.0, d, r - a, d, a});
  }
  m.interaction = Interaction(monos);
  m.couplings = CouplingMatrix::uniform(D, R, beta);
  m.validate();

  preset.model = m;
  preset.hypothesis = {p, q, r, alpha, beta};
  preset.eta = {"d^" + std::to_string(q * (p - 1.0)), d, q * (p - 1.0)};
  preset.expect_c2_pass = r <= p + 1e-12;
  return preset;
}

/// phi = a semibounded generalized polynomial in the Kaplan norm of order p
/// (leading term alpha N^p), eta = N^{p-3}, q fixed to 2; valid when p > 3.
inline ModelPreset preset_kaplan(double alpha, double p, double beta,
                                 std::vector<InteractionMonomial> interaction = {},
                                 std::vector<PhaseTerm> lower_order = {},
                                 int D = 1, int R = 1) {
  if (!(alpha > 0.0)) throw EvaluationError("preset_kaplan: need alpha > 0");
  ModelPreset preset;
  preset.name = "kaplan";
  const HomogeneousNorm N = HomogeneousNorm::kaplan();

  SpinModel m;
  m.space = SpinSpace::heisenberg();
  m.D = D;
  m.p = p;
  m.q = 2.0;
  std::vector<PhaseTerm> terms = {{alpha, p, N}};
  for (auto& t : lower_order) {
    if (t.exponent >= p)
      throw EvaluationError("preset_kaplan: lower-order exponents must be < p");
    terms.push_back(t);
  }
  m.phase = Phase(std::move(terms));
  if (interaction.empty()) interaction.push_back({1.0, N, 1.0, N, 1.0});
  m.interaction = Interaction(std::move(interaction));
  m.couplings = CouplingMatrix::uniform(D, R, beta);
  m.validate();

  preset.model = m;
  preset.hypothesis = {p, 2.0, preset.model.interaction.max_degree(), alpha, beta};
  preset.eta = {"N^" + std::to_string(p - 3.0), N, p - 3.0};
  preset.eta_degenerate = p <= 3.0;
  preset.expect_c1_pass = p > 3.0;
  return preset;
}

/// Euclidean spin space R^n with phi = alpha |x|^p and monomial interactions
/// |x|^{r_k} |y|^{s_k}, r_k + s_k <= p, exponents in {0} u [1, inf).
inline ModelPreset preset_euclidean(int n, double alpha, double p,
                                    std::vector<std::pair<double, double>> monomials,
                                    double beta, int D = 1, int R = 1) {
  if (!(alpha > 0.0) || !(p >= 2.0))
    throw EvaluationError("preset_euclidean: need alpha > 0, p >= 2");
  ModelPreset preset;
  preset.name = "euclidean";
  const HomogeneousNorm e = HomogeneousNorm::euclidean();

  SpinModel m;
  m.space = SpinSpace::euclidean(n);
  m.D = D;
  m.p = p;
  m.q = p / (p - 1.0);
  m.phase = Phase({{alpha, p, e}});
  std::vector<InteractionMonomial> monos;
  double degree = 0.0;
  for (auto [r, s] : monomials) {
    if (!Interaction::exponent_ok(r) || !Interaction::exponent_ok(s))
      throw EvaluationError(
          "preset_euclidean: exponents must lie in {0} u [1, inf)");
    if (r + s > p + 1e-12)
      throw EvaluationError("preset_euclidean: monomial degree exceeds p");
    monos.push_back({1.0, e, r, e, s});
    degree = std::max(degree, r + s);
  }
  if (monos.empty()) {
    monos.push_back({1.0, e, 1.0, e, 1.0});
    degree = 2.0;
  }
  m.interaction = Interaction(std::move(monos));
  m.couplings = CouplingMatrix::uniform(D, R, beta);
  m.validate();

  preset.model = m;
  preset.hypothesis = {p, m.q, degree, alpha, beta};
  preset.eta = {"|x|^" + std::to_string(m.q * (p - 1.0)), e, m.q * (p - 1.0)};
  return preset;
}

/// CLI-facing lookup: "cc-poly", "kaplan", "euclidean" with default shapes.
inline ModelPreset preset_by_name(const std::string& name, double beta,
                                  int D = 1) {
  if (name == "cc-poly") return preset_cc_polynomial(1.0, 2.0, 2.0, beta, D);
  if (name == "kaplan") return preset_kaplan(1.0, 4.0, beta, {}, {}, D);
  if (name == "euclidean")
    return preset_euclidean(1, 0.5, 2.0, {{1.0, 1.0}}, beta, D);
  throw EvaluationError("unknown preset: " + name +
                        " (expected cc-poly, kaplan, or euclidean)");
}

}  // namespace carnot_gibbs
