#pragma once

// Lattice geometry and the finite-range model definition: couplings beta_ij,
// phase phi, interaction V, and the potential U_Lambda^omega collecting every
// term of the formal Hamiltonian
//   sum_i phi(x_i) + sum_{ordered pairs i != j} beta_ij V(x_i, x_j)
// that touches Lambda, with x_j = omega_j outside Lambda. Cross terms
// therefore enter in both orders, beta_ij V(x_i, omega_j) and
// beta_ji V(omega_j, x_i); this is the unique bookkeeping for which the
// local specification is compatible under nesting for arbitrary V.
// Also the sublattice partition into (R+1)^D congruence classes of
// ((R+1)Z)^D, no two sites of a class within interaction range.

#include <array>
#include <cmath>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "carnot_gibbs/norms.hpp"
#include "carnot_gibbs/spin_space.hpp"
#include "carnot_gibbs/util.hpp"

namespace carnot_gibbs {

using Site = std::array<int, 3>;  // unused trailing axes stay 0

inline int l1_distance(const Site& a, const Site& b) {
  return std::abs(a[0] - b[0]) + std::abs(a[1] - b[1]) + std::abs(a[2] - b[2]);
}

inline std::string site_name(const Site& s, int D) {
  std::ostringstream os;
  os << "(";
  for (int d = 0; d < D; ++d) os << (d ? "," : "") << s[d];
  os << ")";
  return os.str();
}

/// All sites at l1 distance in [1, R] from i, in lexicographic order.
inline std::vector<Site> neighbors(const Site& i, int D, int R) {
  std::vector<Site> out;
  std::array<int, 3> lo{}, hi{};
  for (int d = 0; d < 3; ++d) {
    lo[d] = d < D ? i[d] - R : i[d];
    hi[d] = d < D ? i[d] + R : i[d];
  }
  for (int a = lo[0]; a <= hi[0]; ++a)
    for (int b = lo[1]; b <= hi[1]; ++b)
      for (int c = lo[2]; c <= hi[2]; ++c) {
        Site s{a, b, c};
        int dist = l1_distance(s, i);
        if (dist >= 1 && dist <= R) out.push_back(s);
      }
  return out;
}

// ---------------------------------------------------------------------------
// Couplings

/// Translation-invariant symmetric couplings: beta_ij = entry(j - i),
/// zero beyond l1 range R, |entry| <= beta_bound.
class CouplingMatrix {
 public:
  CouplingMatrix() = default;

  /// beta_ij = value for all 0 < |i-j|_1 <= R.
  static CouplingMatrix uniform(int D, int R, double value) {
    CouplingMatrix m;
    m.range_ = R;
    m.beta_bound_ = std::abs(value);
    for (const Site& o : neighbors(Site{0, 0, 0}, D, R)) m.entries_[o] = value;
    m.validate();
    return m;
  }

  static CouplingMatrix by_offset(int D, int R, std::map<Site, double> entries) {
    CouplingMatrix m;
    m.range_ = R;
    m.entries_ = std::move(entries);
    for (auto& [o, v] : m.entries_)
      m.beta_bound_ = std::max(m.beta_bound_, std::abs(v));
    m.validate();
    return m;
  }

  int range() const { return range_; }
  double beta_bound() const { return beta_bound_; }
  const std::map<Site, double>& entries() const { return entries_; }

  double beta(const Site& i, const Site& j) const {
    if (i == j) return 0.0;  // self-pairs belong to the phase
    Site o{j[0] - i[0], j[1] - i[1], j[2] - i[2]};
    auto it = entries_.find(o);
    return it == entries_.end() ? 0.0 : it->second;
  }

  /// sup_i sum_{j != i} |beta_ij|^q  (translation invariant, so one row).
  double row_sum_pow(double q) const {
    double s = 0.0;
    for (const auto& [o, v] : entries_) s += std::pow(std::abs(v), q);
    return s;
  }

  CouplingMatrix scaled_to(double value) const {
    CouplingMatrix m = *this;
    double old = beta_bound_ > 0 ? beta_bound_ : 1.0;
    m.beta_bound_ = std::abs(value);
    for (auto& [o, v] : m.entries_) v = v / old * value;
    return m;
  }

 private:
  void validate() const {
    for (const auto& [o, v] : entries_) {
      Site neg{-o[0], -o[1], -o[2]};
      if (l1_distance(o, Site{0, 0, 0}) > range_)
        throw EvaluationError("couplings: offset beyond range");
      auto it = entries_.find(neg);
      if (it == entries_.end() || std::abs(it->second - v) > 0.0)
        throw EvaluationError("couplings: entries must be symmetric");
      if (std::abs(v) > beta_bound_ + 1e-15)
        throw EvaluationError("couplings: |beta_ij| exceeds the bound");
    }
  }

  int range_ = 1;
  double beta_bound_ = 0.0;
  std::map<Site, double> entries_;
};

// ---------------------------------------------------------------------------
// Phase and interaction

struct PhaseTerm {
  double coefficient = 1.0;
  double exponent = 2.0;  // >= 0
  HomogeneousNorm norm;
};

/// phi(x) = sum_k c_k norm_k(x)^{e_k}; the leading (largest-exponent) term
/// must have a positive coefficient so the phase is semibounded below.
class Phase {
 public:
  Phase() = default;
  explicit Phase(std::vector<PhaseTerm> terms) : terms_(std::move(terms)) {
    if (terms_.empty()) throw EvaluationError("phase: needs at least one term");
    double pmax = -1.0;
    for (const auto& t : terms_) {
      if (t.exponent < 0.0)
        throw EvaluationError("phase: exponents must be >= 0");
      pmax = std::max(pmax, t.exponent);
    }
    order_ = pmax;
    for (const auto& t : terms_)
      if (t.exponent == pmax && t.coefficient <= 0.0)
        throw EvaluationError("phase: leading term must have positive coefficient");
  }

  const std::vector<PhaseTerm>& terms() const { return terms_; }
  double order() const { return order_; }

  double value(const SpinSpace& space, const Spin& s) const {
    double v = 0.0;
    for (const auto& t : terms_)
      v += t.coefficient * std::pow(t.norm.value(space, s), t.exponent);
    return v;
  }

  /// Numeric check on a radial grid: finite below, growing along every
  /// sampled ray.
  bool semibounded(const SpinSpace& space, double rmax = 16.0) const {
    static const std::vector<Spin> dirs = {
        {1, 0, 0}, {0, 1, 0}, {0, 0, 1},  {1, 1, 0},
        {1, 0, 1}, {0, 1, 1}, {1, 1, 1},  {-1, 1, 0.5}};
    for (Spin dir : dirs) {
      double minval = 0.0, last = 0.0;
      for (int k = 0; k <= 64; ++k) {
        double r = rmax * k / 64.0;
        Spin s{};
        for (int i = 0; i < space.dim(); ++i) s[i] = r * dir[i];
        last = value(space, s);
        if (!std::isfinite(last) || last < -1e12) return false;
        minval = std::min(minval, last);
      }
      if (last < minval) return false;  // still descending at the edge
    }
    return true;
  }

 private:
  std::vector<PhaseTerm> terms_;
  double order_ = 0.0;
};

struct InteractionMonomial {
  double c = 1.0;
  HomogeneousNorm rho;
  double alpha = 1.0;  // in {0} u [1, inf)
  HomogeneousNorm delta;
  double beta_exp = 1.0;  // in {0} u [1, inf)
};

/// V(x, y) = sum_k c_k rho_k(x)^{alpha_k} delta_k(y)^{beta_k}. Exponents are
/// restricted to {0} u [1, inf) to keep the slot gradients free of
/// singularities away from the norms' own singular sets.
class Interaction {
 public:
  Interaction() = default;
  explicit Interaction(std::vector<InteractionMonomial> monomials)
      : monomials_(std::move(monomials)) {
    for (const auto& m : monomials_) {
      if (!exponent_ok(m.alpha) || !exponent_ok(m.beta_exp))
        throw EvaluationError(
            "interaction: exponents must lie in {0} u [1, inf)");
    }
  }

  static bool exponent_ok(double e) { return e == 0.0 || e >= 1.0; }

  const std::vector<InteractionMonomial>& monomials() const { return monomials_; }
  bool empty() const { return monomials_.empty(); }

  double max_degree() const {
    double d = 0.0;
    for (const auto& m : monomials_) d = std::max(d, m.alpha + m.beta_exp);
    return d;
  }

  double value(const SpinSpace& space, const Spin& x, const Spin& y) const {
    double v = 0.0;
    for (const auto& m : monomials_)
      v += m.c * std::pow(m.rho.value(space, x), m.alpha) *
           std::pow(m.delta.value(space, y), m.beta_exp);
    return v;
  }

  /// Subgradient in the first slot; nullopt at non-differentiable points.
  std::optional<SpinGradient> grad_first(const SpinSpace& space, const Spin& x,
                                         const Spin& y) const {
    SpinGradient acc;
    acc.m = space.grad_dim();
    for (const auto& m : monomials_) {
      if (m.alpha == 0.0) continue;
      auto g = m.rho.subgradient(space, x);
      if (!g) return std::nullopt;
      const double f = m.c * m.alpha *
                       std::pow(m.rho.value(space, x), m.alpha - 1.0) *
                       std::pow(m.delta.value(space, y), m.beta_exp);
      for (int i = 0; i < acc.m; ++i) acc.comp[i] += f * g->comp[i];
    }
    return acc;
  }

  std::optional<SpinGradient> grad_second(const SpinSpace& space, const Spin& x,
                                          const Spin& y) const {
    SpinGradient acc;
    acc.m = space.grad_dim();
    for (const auto& m : monomials_) {
      if (m.beta_exp == 0.0) continue;
      auto g = m.delta.subgradient(space, y);
      if (!g) return std::nullopt;
      const double f = m.c * m.beta_exp *
                       std::pow(m.rho.value(space, x), m.alpha) *
                       std::pow(m.delta.value(space, y), m.beta_exp - 1.0);
      for (int i = 0; i < acc.m; ++i) acc.comp[i] += f * g->comp[i];
    }
    return acc;
  }

 private:
  std::vector<InteractionMonomial> monomials_;
};

/// Slot subgradients of V on H; nullopt marks a singular point.
inline std::optional<std::pair<HorizontalVector, HorizontalVector>>
interaction_gradients(const Interaction& V, const GroupPoint& x,
                      const GroupPoint& y) {
  const SpinSpace space = SpinSpace::heisenberg();
  auto g1 = V.grad_first(space, to_spin(x), to_spin(y));
  auto g2 = V.grad_second(space, to_spin(x), to_spin(y));
  if (!g1 || !g2) return std::nullopt;
  return std::make_pair(to_horizontal(*g1), to_horizontal(*g2));
}

// ---------------------------------------------------------------------------
// Model

struct SpinModel {
  SpinSpace space = SpinSpace::heisenberg();
  int D = 1;
  Phase phase;
  Interaction interaction;
  CouplingMatrix couplings;
  double p = 2.0;  // phase growth order
  double q = 2.0;  // dual exponent, 1/p + 1/q = 1 where the model demands it

  int range() const { return couplings.range(); }

  /// Hard errors only; hypothesis-level violations (e.g. interaction degree
  /// beyond p) are preset-level expectations, reported by validity_notes().
  void validate() const {
    if (D < 1 || D > 3) throw EvaluationError("model: D must be in [1,3]");
    if (!(p > 1.0)) throw EvaluationError("model: p must exceed 1");
    if (!(q > 1.0) || q > 2.0 + 1e-12)
      throw EvaluationError("model: q must lie in (1, 2]");
  }

  std::vector<std::string> validity_notes() const {
    std::vector<std::string> notes;
    if (std::abs(1.0 / p + 1.0 / q - 1.0) > 1e-12)
      notes.push_back("p and q are not dual");
    if (interaction.max_degree() > p + 1e-12)
      notes.push_back("interaction degree exceeds phase order");
    if (!phase.semibounded(space)) notes.push_back("phase not semibounded");
    return notes;
  }
};

// ---------------------------------------------------------------------------
// Window and boundary

/// A finite box of sites with an explicit boundary configuration on the
/// interaction halo.
class LatticeWindow {
 public:
  LatticeWindow(int D, std::array<int, 3> extent) : D_(D), extent_(extent) {
    for (int d = D; d < 3; ++d) extent_[d] = 1;
    count_ = 1;
    for (int d = 0; d < 3; ++d) count_ *= extent_[d];
    sites_.reserve(count_);
    for (int c = 0; c < extent_[2]; ++c)
      for (int b = 0; b < extent_[1]; ++b)
        for (int a = 0; a < extent_[0]; ++a) sites_.push_back(Site{a, b, c});
  }

  static LatticeWindow chain(int length) {
    return LatticeWindow(1, {length, 1, 1});
  }

  int D() const { return D_; }
  int size() const { return count_; }
  const std::vector<Site>& sites() const { return sites_; }

  bool contains(const Site& s) const {
    for (int d = 0; d < 3; ++d)
      if (s[d] < 0 || s[d] >= extent_[d]) return false;
    return true;
  }

  int index_of(const Site& s) const {
    return s[0] + extent_[0] * (s[1] + extent_[1] * s[2]);
  }
  const Site& site_at(int idx) const { return sites_[idx]; }

  /// Exterior sites within l1 distance R of the window.
  std::vector<Site> halo(int R) const {
    std::vector<Site> out;
    std::array<int, 3> lo{}, hi{};
    for (int d = 0; d < 3; ++d) {
      lo[d] = d < D_ ? -R : 0;
      hi[d] = d < D_ ? extent_[d] - 1 + R : 0;
    }
    for (int c = lo[2]; c <= hi[2]; ++c)
      for (int b = lo[1]; b <= hi[1]; ++b)
        for (int a = lo[0]; a <= hi[0]; ++a) {
          Site s{a, b, c};
          if (contains(s)) continue;
          bool near = false;
          for (const Site& w : sites_)
            if (l1_distance(s, w) <= R) { near = true; break; }
          if (near) out.push_back(s);
        }
    return out;
  }

 private:
  int D_;
  std::array<int, 3> extent_;
  int count_ = 0;
  std::vector<Site> sites_;
};

/// Boundary configuration omega: values on (at least) the halo sites.
using BoundaryConfig = std::map<Site, Spin>;

inline BoundaryConfig constant_boundary(const LatticeWindow& window, int R,
                                        const Spin& value) {
  BoundaryConfig omega;
  for (const Site& s : window.halo(R)) omega[s] = value;
  return omega;
}

/// U_Lambda^omega for an explicit site set. In-window pairs run over ordered
/// (i, j); cross pairs to the exterior contribute both orders,
/// beta_ij V(x_i, omega_j) + beta_ji V(omega_j, x_i).
inline double potential_energy(const std::vector<Site>& lambda,
                               const std::vector<Spin>& configuration,
                               const BoundaryConfig& omega,
                               const SpinModel& model) {
  if (lambda.size() != configuration.size())
    throw EvaluationError("potential_energy: configuration size mismatch");
  const int R = model.range();
  std::map<Site, int> pos;
  for (std::size_t k = 0; k < lambda.size(); ++k) pos[lambda[k]] = int(k);

  double u = 0.0;
  for (std::size_t k = 0; k < lambda.size(); ++k)
    u += model.phase.value(model.space, configuration[k]);

  for (std::size_t a = 0; a < lambda.size(); ++a) {
    for (const Site& j : neighbors(lambda[a], model.D, R)) {
      const double beta = model.couplings.beta(lambda[a], j);
      if (beta == 0.0) continue;
      auto it = pos.find(j);
      if (it != pos.end()) {
        u += beta * model.interaction.value(model.space, configuration[a],
                                            configuration[it->second]);
      } else {
        auto w = omega.find(j);
        if (w == omega.end())
          throw EvaluationError("potential_energy: missing boundary value at site " +
                                site_name(j, model.D));
        u += beta *
             model.interaction.value(model.space, configuration[a], w->second);
        u += model.couplings.beta(j, lambda[a]) *
             model.interaction.value(model.space, w->second, configuration[a]);
      }
    }
  }
  return u;
}

// ---------------------------------------------------------------------------
// Sublattice partition

/// The (R+1)^D congruence classes of ((R+1)Z)^D; within one class any two
/// distinct sites are more than R apart, so a class carries no interaction.
class SublatticePartition {
 public:
  SublatticePartition(int D, int R) : D_(D), R_(R) {
    if (D < 1 || R < 1) throw EvaluationError("partition: need D >= 1, R >= 1");
    int n = 1;
    for (int d = 0; d < D; ++d) n *= (R + 1);
    count_ = n;
    offsets_.reserve(n);
    Site o{0, 0, 0};
    for (int k = 0; k < n; ++k) {
      offsets_.push_back(o);
      for (int d = 0; d < D; ++d) {
        if (++o[d] <= R) break;
        o[d] = 0;
      }
    }
  }

  int D() const { return D_; }
  int R() const { return R_; }
  int count() const { return count_; }
  const std::vector<Site>& offsets() const { return offsets_; }

  int component_of(const Site& s) const {
    int idx = 0, stride = 1;
    for (int d = 0; d < D_; ++d) {
      int m = ((s[d] % (R_ + 1)) + (R_ + 1)) % (R_ + 1);
      idx += stride * m;
      stride *= (R_ + 1);
    }
    return idx;
  }

  std::vector<Site> sites_in_component(const LatticeWindow& window, int n) const {
    std::vector<Site> out;
    for (const Site& s : window.sites())
      if (component_of(s) == n) out.push_back(s);
    return out;
  }

 private:
  int D_, R_;
  int count_ = 0;
  std::vector<Site> offsets_;
};

inline SublatticePartition build_partition(int D, int R) {
  return SublatticePartition(D, R);
}

}  // namespace carnot_gibbs
