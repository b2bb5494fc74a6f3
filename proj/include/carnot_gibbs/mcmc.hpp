#pragma once

// Metropolis-within-Gibbs sampler for the window measure exp(-U_window^omega).
// On H the proposal is a group-law left translation x_i <- x_i o g with g
// drawn componentwise Gaussian and the vertical step scale equal to the
// horizontal scale squared (consistent with the dilations); the proposal
// density is even under g -> g^{-1}, so detailed balance needs no Hastings
// correction. On R^n the proposal is additive Gaussian.

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "carnot_gibbs/lattice.hpp"
#include "carnot_gibbs/util.hpp"

namespace carnot_gibbs {

struct MCMCParams {
  double proposal_scale = 0.5;
  long steps = 100'000;
  long burn_in = 10'000;
  std::uint64_t seed = 1;
  int thinning = 1;

  void validate() const {
    if (!(proposal_scale > 0.0)) throw EvaluationError("mcmc: scale must be > 0");
    if (steps <= burn_in || burn_in < 0)
      throw EvaluationError("mcmc: need steps > burn_in >= 0");
    if (thinning < 1) throw EvaluationError("mcmc: thinning must be >= 1");
  }
};

struct ChainSnapshot {
  long step;
  int site;
  Spin value;
  double potential;  // U of the full window configuration at this step
};

struct ChainStats {
  double mean = 0.0;
  double std_error = 0.0;  // batch-means standard error
  long samples = 0;
};

inline ChainStats batch_means(const std::vector<double>& xs) {
  ChainStats st;
  st.samples = static_cast<long>(xs.size());
  if (xs.empty()) return st;
  double m = 0.0;
  for (double x : xs) m += x;
  m /= double(xs.size());
  st.mean = m;
  const long nb = std::max<long>(10, long(std::sqrt(double(xs.size()))));
  const long bl = std::max<long>(1, long(xs.size()) / nb);
  std::vector<double> bm;
  for (long b = 0; (b + 1) * bl <= long(xs.size()); ++b) {
    double s = 0.0;
    for (long k = b * bl; k < (b + 1) * bl; ++k) s += xs[k];
    bm.push_back(s / double(bl));
  }
  double var = 0.0;
  for (double x : bm) var += (x - m) * (x - m);
  if (bm.size() > 1) var /= double(bm.size() - 1);
  st.std_error = std::sqrt(var / double(bm.size()));
  return st;
}

class MetropolisWithinGibbs {
 public:
  MetropolisWithinGibbs(SpinModel model, LatticeWindow window,
                        BoundaryConfig omega, MCMCParams params)
      : model_(std::move(model)),
        window_(std::move(window)),
        omega_(std::move(omega)),
        params_(params),
        rng_(params.seed) {
    params_.validate();
    state_.assign(window_.size(), Spin{});
    accepted_ = proposed_ = 0;
  }

  const std::vector<Spin>& state() const { return state_; }
  double acceptance_rate() const {
    return proposed_ ? double(accepted_) / double(proposed_) : 0.0;
  }
  bool tuning_warning() const {
    const double a = acceptance_rate();
    return a < 0.1 || a > 0.7;
  }

  /// One full sweep over the window sites.
  void step() {
    for (int i = 0; i < window_.size(); ++i) {
      const Spin cur = state_[i];
      const Spin prop = propose(cur);
      const double dU = local_energy(i, prop) - local_energy(i, cur);
      ++proposed_;
      if (dU <= 0.0 || unif_(rng_) < std::exp(-dU)) {
        state_[i] = prop;
        ++accepted_;
      }
    }
  }

  /// Run the chain; returns averages of the given observables over the
  /// post-burn-in, thinned samples.
  std::vector<ChainStats> run(
      const std::vector<std::function<double(const std::vector<Spin>&)>>& obs,
      std::vector<ChainSnapshot>* snapshots = nullptr, int snapshot_every = 0) {
    std::vector<std::vector<double>> samples(obs.size());
    for (long t = 0; t < params_.steps; ++t) {
      step();
      if (t < params_.burn_in) continue;
      if ((t - params_.burn_in) % params_.thinning != 0) continue;
      for (std::size_t k = 0; k < obs.size(); ++k)
        samples[k].push_back(obs[k](state_));
      if (snapshots && snapshot_every > 0 && t % snapshot_every == 0) {
        const double u = window_energy();
        for (int i = 0; i < window_.size(); ++i)
          snapshots->push_back({t, i, state_[i], u});
      }
    }
    std::vector<ChainStats> out;
    out.reserve(obs.size());
    for (auto& s : samples) out.push_back(batch_means(s));
    return out;
  }

  double window_energy() const {
    return potential_energy(window_.sites(), state_, omega_, model_);
  }

 private:
  Spin propose(const Spin& x) {
    const double s = params_.proposal_scale;
    if (model_.space.is_heisenberg()) {
      Spin g{s * normal_(rng_), s * normal_(rng_), s * s * normal_(rng_)};
      return model_.space.combine(x, g);
    }
    Spin y = x;
    for (int d = 0; d < model_.space.dim(); ++d) y[d] += s * normal_(rng_);
    return y;
  }

  /// Terms of U_window touching site i, with x_i set to `v`.
  double local_energy(int i, const Spin& v) const {
    double u = model_.phase.value(model_.space, v);
    const Site self = window_.site_at(i);
    for (const Site& j : neighbors(self, model_.D, model_.range())) {
      const double bij = model_.couplings.beta(self, j);
      const double bji = model_.couplings.beta(j, self);
      if (bij == 0.0 && bji == 0.0) continue;
      const Spin* other = nullptr;
      if (window_.contains(j)) {
        other = &state_[window_.index_of(j)];
      } else {
        auto w = omega_.find(j);
        if (w == omega_.end())
          throw EvaluationError("mcmc: missing boundary value at site " +
                                site_name(j, model_.D));
        other = &w->second;
      }
      u += bij * model_.interaction.value(model_.space, v, *other) +
           bji * model_.interaction.value(model_.space, *other, v);
    }
    return u;
  }

  SpinModel model_;
  LatticeWindow window_;
  BoundaryConfig omega_;
  MCMCParams params_;
  std::mt19937_64 rng_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> unif_{0.0, 1.0};
  std::vector<Spin> state_;
  long accepted_ = 0, proposed_ = 0;
};

}  // namespace carnot_gibbs
