#pragma once

// Exhaustive search over stopping times for a single deterministic path.

#include <cmath>
#include <stdexcept>
#include <vector>

namespace oracle {

struct BruteForceResult {
  int best_step = 0;
  double best_value = 0.0;
  bool unique = true;
};

// prices[0] is s0; candidate stopping steps are 1..N. Values are put payoffs
// discounted at e^{-r t dt}. Ties keep the earliest step and clear `unique`.
inline BruteForceResult brute_force_put(const std::vector<double>& prices, double strike, double rate, double dt) {
  if (prices.size() < 2) throw std::invalid_argument("brute_force_put: need at least one step");
  BruteForceResult r;
  r.best_value = -1.0;
  for (std::size_t t = 1; t < prices.size(); ++t) {
    const double v = std::max(strike - prices[t], 0.0) * std::exp(-rate * static_cast<double>(t) * dt);
    if (v > r.best_value) {
      r.best_value = v;
      r.best_step = static_cast<int>(t);
      r.unique = true;
    } else if (v == r.best_value) {
      r.unique = false;
    }
  }
  return r;
}

}  // namespace oracle
