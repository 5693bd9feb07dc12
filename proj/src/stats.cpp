#include "stopdeck/stats.hpp"

#include "stopdeck/error.hpp"

#include <cmath>
#include <vector>

namespace stopdeck {

double EvalStats::standard_error() const {
  return n == 0 ? 0.0 : std / std::sqrt(static_cast<double>(n));
}

EvalStats make_stats(double mean, double std, std::size_t n) {
  EvalStats s{mean, std, n, mean, mean};
  const double half = 1.96 * s.standard_error();
  s.ci_lo = mean - half;
  s.ci_hi = mean + half;
  return s;
}

EvalStats make_stats(std::span<const double> payoffs) {
  if (payoffs.empty()) return make_stats(0.0, 0.0, 0);
  double sum = 0.0;
  for (double p : payoffs) sum += p;
  const double mean = sum / static_cast<double>(payoffs.size());
  double ss = 0.0;
  for (double p : payoffs) ss += (p - mean) * (p - mean);
  const double var = payoffs.size() > 1 ? ss / static_cast<double>(payoffs.size() - 1) : 0.0;
  return make_stats(mean, std::sqrt(var), payoffs.size());
}

EvalStats terminal_policy_stats(const RowMatrix& payoffs) {
  std::vector<double> v(static_cast<std::size_t>(payoffs.rows()));
  for (Eigen::Index i = 0; i < payoffs.rows(); ++i) v[static_cast<std::size_t>(i)] = payoffs(i, payoffs.cols() - 1);
  return make_stats(v);
}

EvalStats clairvoyant_stats(const RowMatrix& payoffs) {
  std::vector<double> v(static_cast<std::size_t>(payoffs.rows()));
  for (Eigen::Index i = 0; i < payoffs.rows(); ++i) {
    double best = 0.0;
    for (Eigen::Index t = 1; t < payoffs.cols(); ++t) best = std::max(best, payoffs(i, t));
    v[static_cast<std::size_t>(i)] = best;
  }
  return make_stats(v);
}

EvalStats stopped_stats(const RowMatrix& payoffs, std::span<const int> stop) {
  if (stop.size() != static_cast<std::size_t>(payoffs.rows())) {
    throw ConfigError("stopped_stats: one stopping step per path required");
  }
  std::vector<double> v(stop.size());
  for (std::size_t i = 0; i < stop.size(); ++i) {
    v[i] = payoffs(static_cast<Eigen::Index>(i), stop[i]);
  }
  return make_stats(v);
}

}  // namespace stopdeck
