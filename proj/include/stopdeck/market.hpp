#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace stopdeck {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class OptionKind { put, call };

std::string to_string(OptionKind kind);
OptionKind parse_option_kind(const std::string& text);

// Contract and market constants. Rates are continuously compounded per year.
struct MarketParams {
  double s0 = 100.0;
  double strike = 100.0;
  double maturity = 1.0;
  double rate = 0.0;
  double dividend = 0.0;
  double sigma = 0.0;
  int steps = 2;
  OptionKind option_kind = OptionKind::put;

  double dt() const { return maturity / static_cast<double>(steps); }

  // Throws ConfigError naming the first violated invariant.
  void validate() const;
};

struct SeedInfo {
  std::uint64_t base_seed = 0;
  std::string generator;
};

// A batch of price paths on the exercise grid. Row i is path i, column t is
// time t * dt; column 0 holds s0.
struct PathBatch {
  RowMatrix prices;
  double dt = 0.0;
  SeedInfo seed_info;
  // Bootstrap generator only: first return index of each path's window.
  std::vector<std::size_t> window_start;

  std::size_t batch() const { return static_cast<std::size_t>(prices.rows()); }
  int steps() const { return static_cast<int>(prices.cols()) - 1; }
  std::span<const double> row(std::size_t i) const {
    return {prices.data() + i * static_cast<std::size_t>(prices.cols()),
            static_cast<std::size_t>(prices.cols())};
  }
};

double put_payoff(double s, double k);
double call_payoff(double s, double k);
double intrinsic(OptionKind kind, double s, double k);

// x * exp(-r t); t must be non-negative.
double discount(double x, double r, double t);

// Entry (i, t) is the intrinsic payoff of path i at step t, discounted to
// time 0 when `discounted` is set.
RowMatrix payoff_matrix(const PathBatch& paths, const MarketParams& params, bool discounted = true);

}  // namespace stopdeck
