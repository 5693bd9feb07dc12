#pragma once

#include "stopdeck/deepstop.hpp"
#include "stopdeck/lsmc.hpp"
#include "stopdeck/simulate.hpp"
#include "stopdeck/stats.hpp"

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace stopdeck {

// 100 * cnn / lsmc. Undefined (nullopt) when lsmc_mean <= 0.
std::optional<double> improvement_pct(double cnn_mean, double lsmc_mean);

// Integer shown in reports.
long display_pct(double pct);

struct ComparisonRow {
  std::string sector;
  std::string label;
  double mean_return = 0.0;
  double return_std = 0.0;
  EvalStats cnn;
  EvalStats lsmc;
  std::optional<double> improvement;
};

ComparisonRow make_row(std::string sector, std::string label, double mean_return, double return_std,
                       const EvalStats& cnn, const EvalStats& lsmc);

struct SectorRow {
  ComparisonRow mean;             // column-wise arithmetic means
  double improvement_std = 0.0;   // sample std of per-row improvements
  std::size_t members = 0;
};

// Column-wise mean over rows, including the per-row improvement values.
SectorRow aggregate_sector(std::span<const ComparisonRow> rows);

// Groups rows by sector, preserving first-appearance order.
std::vector<SectorRow> aggregate_by_sector(std::span<const ComparisonRow> rows);

struct StepPoint {
  int steps = 0;
  EvalStats stats;
};

// Refits/retrains for the given market parameters (steps already set) and
// returns held-out evaluation stats.
using StepEvaluator = std::function<EvalStats(const MarketParams&)>;

std::vector<StepPoint> payoff_vs_steps(const StepEvaluator& evaluator, MarketParams params,
                                       std::span<const int> grid);

// Fit/train paths come from fit_gen, evaluation paths from eval_gen (the
// same spec for simulated data; train and test segments for bootstrap).
StepEvaluator lsmc_step_evaluator(GeneratorSpec fit_gen, GeneratorSpec eval_gen, int degree,
                                  std::size_t fit_paths, std::size_t eval_paths, std::uint64_t seed);
StepEvaluator cnn_step_evaluator(GeneratorSpec fit_gen, GeneratorSpec eval_gen, TrainingConfig hyper,
                                 std::size_t eval_paths, std::uint64_t seed);

struct PlotSeries {
  std::string name;  // file stem, written as <name>.dat
  std::vector<StepPoint> points;
};

struct ReportFormats {
  bool csv = true;
  bool json = true;
  bool dat = true;
};

// Writes comparison.csv, sectors.csv, summary.json and <series>.dat into
// out_dir (created if missing). Returns the written paths.
std::vector<std::string> emit_report(std::span<const ComparisonRow> rows, std::span<const PlotSeries> series,
                                     const std::string& out_dir, ReportFormats formats = {});

inline constexpr const char* kComparisonHeader =
    "sector,asset,mean_return,return_std,cnn_mean,cnn_std,lsmc_mean,lsmc_std,improvement_pct";
inline constexpr const char* kSectorHeader =
    "sector,assets,mean_return,return_std,cnn_mean,cnn_std,lsmc_mean,lsmc_std,improvement_pct,improvement_std";

std::string comparison_csv(std::span<const ComparisonRow> rows);
std::string sectors_csv(std::span<const SectorRow> sectors);

// Parses comparison.csv text. Stats other than mean/std are unknown in the
// file, so n is 0 and the confidence interval collapses to the mean.
std::vector<ComparisonRow> parse_comparison_csv(const std::string& text, const std::string& source = "<memory>");
std::vector<ComparisonRow> read_comparison_csv(const std::string& path);

}  // namespace stopdeck
