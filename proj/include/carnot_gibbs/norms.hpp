#pragma once

// Homogeneous norms on the Heisenberg group (plus the Euclidean norm for
// R^n spin spaces): Kaplan, Carnot-Caratheodory, horizontal quasinorm, and
// the composite constructions (geometric means as power products, linear
// combinations). All are 1-homogeneous under the dilations and symmetric
// under inversion.
//
// The Kaplan norm is N = (|w|^4 + z^2)^{1/4}. The vertical coefficient is
// pinned by the frame X1 = d_1 + 2 x2 d_3, X2 = d_2 - 2 x1 d_3: it is the
// unique scaling for which |grad N| = |w| / N holds, mirroring the eikonal
// identity |grad d| = 1 of the Carnot-Caratheodory norm.

#include <cmath>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "carnot_gibbs/cc_distance.hpp"
#include "carnot_gibbs/heisenberg.hpp"
#include "carnot_gibbs/spin_space.hpp"
#include "carnot_gibbs/util.hpp"

namespace carnot_gibbs {

inline double kaplan_norm(const GroupPoint& a) {
  const double w2 = a.x1 * a.x1 + a.x2 * a.x2;
  return std::pow(w2 * w2 + a.x3 * a.x3, 0.25);
}

enum class NormKind {
  Kaplan,
  CarnotCaratheodory,
  Horizontal,
  PowerProduct,
  LinearCombination,
  Euclidean,
};

struct GradientMode {
  bool analytic = true;
  double fd_step = 1e-4;

  static GradientMode fd(double step = 1e-4) { return {false, step}; }
};

class HomogeneousNorm {
 public:
  HomogeneousNorm() : kind_(NormKind::Kaplan) {}

  static HomogeneousNorm kaplan() { return HomogeneousNorm(NormKind::Kaplan); }
  static HomogeneousNorm carnot_caratheodory() {
    return HomogeneousNorm(NormKind::CarnotCaratheodory);
  }
  static HomogeneousNorm horizontal() {
    return HomogeneousNorm(NormKind::Horizontal);
  }
  static HomogeneousNorm euclidean() {
    return HomogeneousNorm(NormKind::Euclidean);
  }

  /// prod_k base_k^{e_k} with exponents renormalized to sum to one, so the
  /// composite stays 1-homogeneous.
  static HomogeneousNorm power_product(
      std::vector<std::pair<HomogeneousNorm, double>> factors) {
    if (factors.empty())
      throw EvaluationError("power_product: needs at least one factor");
    double total = 0.0;
    for (auto& [n, e] : factors) {
      if (!(e > 0.0)) throw EvaluationError("power_product: exponents must be > 0");
      total += e;
    }
    HomogeneousNorm out(NormKind::PowerProduct);
    for (auto& [n, e] : factors)
      out.children_.push_back({std::make_shared<HomogeneousNorm>(n), e / total});
    return out;
  }

  /// sum_k c_k base_k with nonnegative coefficients.
  static HomogeneousNorm linear_combination(
      std::vector<std::pair<double, HomogeneousNorm>> terms) {
    if (terms.empty())
      throw EvaluationError("linear_combination: needs at least one term");
    HomogeneousNorm out(NormKind::LinearCombination);
    for (auto& [c, n] : terms) {
      if (c < 0.0)
        throw EvaluationError("linear_combination: coefficients must be >= 0");
      out.children_.push_back({std::make_shared<HomogeneousNorm>(n), c});
    }
    return out;
  }

  NormKind kind() const { return kind_; }
  const GradientMode& mode() const { return mode_; }
  HomogeneousNorm with_mode(GradientMode m) const {
    HomogeneousNorm copy = *this;
    copy.mode_ = m;
    return copy;
  }
  /// (base, weight) pairs: exponents for PowerProduct, coefficients for
  /// LinearCombination.
  const std::vector<std::pair<std::shared_ptr<HomogeneousNorm>, double>>&
  children() const {
    return children_;
  }

  double value(const GroupPoint& p) const {
    switch (kind_) {
      case NormKind::Kaplan:
        return kaplan_norm(p);
      case NormKind::CarnotCaratheodory:
        return cc_distance(p);
      case NormKind::Horizontal:
        return horizontal_norm(p);
      case NormKind::Euclidean:
        return euclidean_norm(p);
      case NormKind::PowerProduct: {
        double v = 1.0;
        for (const auto& [n, e] : children_) v *= std::pow(n->value(p), e);
        return v;
      }
      case NormKind::LinearCombination: {
        double v = 0.0;
        for (const auto& [n, c] : children_) v += c * n->value(p);
        return v;
      }
    }
    return 0.0;
  }

  double value(const SpinSpace& space, const Spin& s) const {
    if (space.is_heisenberg()) return value(to_group_point(s));
    if (kind_ != NormKind::Euclidean)
      throw EvaluationError("norm: kind requires a Heisenberg spin space");
    double t = 0.0;
    for (int i = 0; i < space.n; ++i) t += s[i] * s[i];
    return std::sqrt(t);
  }

  /// True where the norm is not differentiable (gradients are refused there).
  bool singular_at(const GroupPoint& p, double eps = 1e-9) const {
    switch (kind_) {
      case NormKind::Kaplan:
      case NormKind::Euclidean:
        return euclidean_norm(p) < eps;
      case NormKind::CarnotCaratheodory:
      case NormKind::Horizontal:
        return horizontal_norm(p) < eps;  // non-smooth on the whole center
      case NormKind::PowerProduct: {
        for (const auto& [n, e] : children_)
          if (n->singular_at(p, eps) || n->value(p) < eps) return true;
        return false;
      }
      case NormKind::LinearCombination: {
        for (const auto& [n, c] : children_)
          if (c > 0.0 && n->singular_at(p, eps)) return true;
        return false;
      }
    }
    return false;
  }

  /// Horizontal subgradient; std::nullopt marks a non-differentiable point.
  std::optional<HorizontalVector> subgradient(const GroupPoint& p) const {
    if (singular_at(p)) return std::nullopt;
    if (!mode_.analytic || kind_ == NormKind::CarnotCaratheodory) {
      // CC has no closed-form gradient; composites inherit the request.
      ScalarField f = [this](const GroupPoint& q) { return value(q); };
      return apply_subgradient(f, p, mode_.fd_step);
    }
    return analytic_subgradient(p);
  }

  std::optional<SpinGradient> subgradient(const SpinSpace& space,
                                          const Spin& s) const {
    if (space.is_heisenberg()) {
      auto g = subgradient(to_group_point(s));
      if (!g) return std::nullopt;
      return SpinGradient{{g->v1, g->v2, 0.0}, 2};
    }
    double v = value(space, s);
    if (v < 1e-9) return std::nullopt;
    SpinGradient out;
    out.m = space.n;
    for (int i = 0; i < space.n; ++i) out.comp[i] = s[i] / v;
    return out;
  }

  std::string name() const {
    switch (kind_) {
      case NormKind::Kaplan: return "kaplan";
      case NormKind::CarnotCaratheodory: return "cc";
      case NormKind::Horizontal: return "horizontal";
      case NormKind::Euclidean: return "euclidean";
      case NormKind::PowerProduct: return "power_product";
      case NormKind::LinearCombination: return "linear_combination";
    }
    return "?";
  }

 private:
  explicit HomogeneousNorm(NormKind k) : kind_(k) {}

  std::optional<HorizontalVector> analytic_subgradient(const GroupPoint& p) const {
    switch (kind_) {
      case NormKind::Kaplan: {
        const double rho2 = p.x1 * p.x1 + p.x2 * p.x2;
        const double n = kaplan_norm(p);
        const double n3 = n * n * n;
        return HorizontalVector{(p.x1 * rho2 + p.x2 * p.x3) / n3,
                                (p.x2 * rho2 - p.x1 * p.x3) / n3};
      }
      case NormKind::Horizontal: {
        const double r = horizontal_norm(p);
        return HorizontalVector{p.x1 / r, p.x2 / r};
      }
      case NormKind::Euclidean: {
        const double r = euclidean_norm(p);
        // horizontal part of the Euclidean norm's subgradient on H
        const double d3 = p.x3 / r;
        return HorizontalVector{p.x1 / r + 2.0 * p.x2 * d3,
                                p.x2 / r - 2.0 * p.x1 * d3};
      }
      case NormKind::PowerProduct: {
        // log-derivative: grad = value * sum_k e_k grad(n_k) / n_k
        const double v = value(p);
        HorizontalVector acc{0.0, 0.0};
        for (const auto& [n, e] : children_) {
          auto g = n->subgradient(p);
          if (!g) return std::nullopt;
          const double nv = n->value(p);
          acc.v1 += e * g->v1 / nv;
          acc.v2 += e * g->v2 / nv;
        }
        return HorizontalVector{v * acc.v1, v * acc.v2};
      }
      case NormKind::LinearCombination: {
        HorizontalVector acc{0.0, 0.0};
        for (const auto& [n, c] : children_) {
          if (c == 0.0) continue;
          auto g = n->subgradient(p);
          if (!g) return std::nullopt;
          acc.v1 += c * g->v1;
          acc.v2 += c * g->v2;
        }
        return acc;
      }
      default:
        return std::nullopt;
    }
  }

  NormKind kind_;
  GradientMode mode_;
  std::vector<std::pair<std::shared_ptr<HomogeneousNorm>, double>> children_;
};

}  // namespace carnot_gibbs
