#pragma once

#include "stopdeck/market.hpp"
#include "stopdeck/stats.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace stopdeck {

// Regression coefficients for one interior exercise date. An empty beta is
// the "always continue" marker (no in-the-money paths at fit time).
struct LsmcStep {
  std::optional<std::vector<double>> beta;
  bool rank_deficient = false;
};

// Longstaff-Schwartz exercise rule: monomials 1, x, .., x^degree of
// x = S_t / K regressed on realised continuation cashflows.
struct LsmcModel {
  int degree = 3;
  int steps = 0;
  double strike = 0.0;
  bool discounted = true;
  std::vector<LsmcStep> coefficients;  // index t - 1 for t = 1..steps-1
  std::size_t fitted_paths = 0;
  std::uint64_t fitted_seed = 0;
  std::string fitted_generator;

  // Fitted continuation value at step t for price s (time-0 units when
  // discounted); nullopt when the step is "always continue".
  std::optional<double> continuation(int t, double s) const;
  bool exercise(int t, double s, double payoff) const;
};

struct LsmcFit {
  LsmcModel model;
  std::vector<int> stop_step;  // fit-time stopping step per path
  EvalStats in_sample;
};

LsmcFit lsmc_fit_detailed(const PathBatch& paths, const MarketParams& params, int degree = 3,
                          bool discounted = true);
LsmcModel lsmc_fit(const PathBatch& paths, const MarketParams& params, int degree = 3, bool discounted = true);

struct LsmcApplication {
  std::vector<int> stop_step;
  EvalStats stats;
};

LsmcApplication lsmc_apply_detailed(const LsmcModel& model, const PathBatch& paths, const MarketParams& params);
EvalStats lsmc_apply(const LsmcModel& model, const PathBatch& paths, const MarketParams& params);

// Text container; see docs/formats.md.
std::string serialize_lsmc(const LsmcModel& model);
LsmcModel deserialize_lsmc(const std::string& text);
void save_lsmc(const std::string& path, const LsmcModel& model);
LsmcModel load_lsmc(const std::string& path);

}  // namespace stopdeck
