#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>

#include "carnot_gibbs/lattice.hpp"
#include "carnot_gibbs/util.hpp"

namespace carnot_gibbs {

/// One named constant estimate with method metadata and an error bar.
/// All constants are obtained by maximization over finite families and are
/// lower bounds flagged by refinement stability, not certified bounds.
struct EstimateReport {
  std::string constant;  // "C_SG", "B_C1", "B_C2", "K1", "c1", "xi", "sum_c"
  double value = 0.0;
  std::string method;
  double uncertainty = 0.0;
  std::optional<bool> pass;
  std::uint64_t seed = 0;
  std::map<std::string, double> metadata;
  std::map<std::string, std::string> notes;
};

/// M_ki = c2^{dist(k, i1)} with i1 = {i} u {~i}; entries in [0, 1], row sums
/// uniformly bounded for c2 < 1.
struct DecayMatrix {
  double c2 = 0.25;
  int D = 1;
  int R = 1;

  double entry(const Site& k, const Site& i) const {
    const int d = l1_distance(k, i);
    const int dist_to_i1 = std::max(0, d - R);
    return std::pow(c2, dist_to_i1);
  }

  /// Row sum over the l1 ball of the given radius around i.
  double row_sum(const Site& i, int radius) const {
    double s = 0.0;
    std::array<int, 3> lo{}, hi{};
    for (int d = 0; d < 3; ++d) {
      lo[d] = d < D ? i[d] - radius : i[d];
      hi[d] = d < D ? i[d] + radius : i[d];
    }
    for (int a = lo[0]; a <= hi[0]; ++a)
      for (int b = lo[1]; b <= hi[1]; ++b)
        for (int c = lo[2]; c <= hi[2]; ++c) {
          Site k{a, b, c};
          if (l1_distance(k, i) <= radius) s += entry(k, i);
        }
    return s;
  }

  /// Closed form of the truncated row sum for D = 1, R = 1:
  /// 3 ones (dist 0) plus two geometric tails of length radius - 1.
  double closed_form_row_sum_1d(int radius) const {
    if (D != 1 || R != 1)
      throw EvaluationError("closed_form_row_sum_1d: needs D = 1, R = 1");
    double tail = 0.0;
    if (c2 != 1.0)
      tail = c2 * (1.0 - std::pow(c2, radius - 1)) / (1.0 - c2);
    else
      tail = double(radius - 1);
    return 3.0 + 2.0 * tail;
  }
};

}  // namespace carnot_gibbs
