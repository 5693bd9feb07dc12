#pragma once

#include "stopdeck/market.hpp"

#include <cstddef>
#include <span>

namespace stopdeck {

// Payoff statistics of a stopping rule over a path set. std is the sample
// standard deviation; ci95 is mean +- 1.96 std / sqrt(n).
struct EvalStats {
  double mean = 0.0;
  double std = 0.0;
  std::size_t n = 0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;

  double standard_error() const;
};

EvalStats make_stats(std::span<const double> payoffs);
EvalStats make_stats(double mean, double std, std::size_t n);

// Maturity-only rule: every path collects its terminal payoff.
EvalStats terminal_policy_stats(const RowMatrix& payoffs);

// Path-wise hindsight maximum over exercise dates 1..N, an upper bound for
// any non-anticipative rule.
EvalStats clairvoyant_stats(const RowMatrix& payoffs);

// Collects payoffs(i, stop[i]) for every path.
EvalStats stopped_stats(const RowMatrix& payoffs, std::span<const int> stop);

}  // namespace stopdeck
