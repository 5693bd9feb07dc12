#include "stopdeck/bench.hpp"
#include "stopdeck/error.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace stopdeck;

namespace {

ComparisonRow with_improvement(const std::string& sector, double pct) {
  ComparisonRow r;
  r.sector = sector;
  r.label = sector + "-" + std::to_string(static_cast<int>(pct));
  r.improvement = pct;
  return r;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST_CASE("improvement is the payoff ratio in percent") {
  CHECK(display_pct(*improvement_pct(6.67, 0.64)) == 1042);
  CHECK(display_pct(*improvement_pct(6.07, 1.19)) == 510);
  CHECK(*improvement_pct(3.3, 3.3) == 100.0);
  CHECK_FALSE(improvement_pct(1.0, 0.0).has_value());
  CHECK_FALSE(improvement_pct(1.0, -2.0).has_value());
  // Full precision is kept internally.
  CHECK(*improvement_pct(6.67, 0.64) == doctest::Approx(1042.1875));
}

TEST_CASE("improvement is scale invariant") {
  for (double c : {0.001, 0.5, 3.0, 1e4}) {
    CHECK(*improvement_pct(c * 6.67, c * 0.64) == doctest::Approx(*improvement_pct(6.67, 0.64)).epsilon(1e-14));
  }
}

TEST_CASE("sector means of per-asset improvements") {
  std::vector<ComparisonRow> comm, disc;
  for (double v : {826, 424, 539, 1042, 510}) comm.push_back(with_improvement("Communications", v));
  for (double v : {433, 1310, 1078, 687, 1212}) disc.push_back(with_improvement("Consumer Discretionary", v));
  CHECK(display_pct(*aggregate_sector(comm).mean.improvement) == 668);
  CHECK(display_pct(*aggregate_sector(disc).mean.improvement) == 944);
  CHECK(aggregate_sector(comm).members == 5);

  std::vector<ComparisonRow> both = comm;
  both.insert(both.end(), disc.begin(), disc.end());
  const auto groups = aggregate_by_sector(both);
  REQUIRE(groups.size() == 2);
  CHECK(groups[0].mean.sector == "Communications");
  CHECK(display_pct(*groups[1].mean.improvement) == 944);
  CHECK_THROWS_AS(aggregate_sector(std::vector<ComparisonRow>{}), ConfigError);
}

TEST_CASE("aggregation of identical rows and single rows") {
  const auto r = make_row("Energy", "XOM", 0.001, 0.02, make_stats(5.0, 2.0, 1000), make_stats(4.0, 1.5, 1000));
  const auto one = aggregate_sector(std::vector<ComparisonRow>{r});
  CHECK(one.mean.label == "XOM");
  CHECK(one.mean.cnn.mean == r.cnn.mean);
  CHECK(*one.mean.improvement == *r.improvement);
  const auto many = aggregate_sector(std::vector<ComparisonRow>(4, r));
  CHECK(many.mean.cnn.mean == doctest::Approx(5.0));
  CHECK(many.mean.lsmc.std == doctest::Approx(1.5));
  CHECK(*many.mean.improvement == doctest::Approx(125.0));
  CHECK(many.improvement_std == doctest::Approx(0.0));
}

TEST_CASE("confidence intervals") {
  const auto s = make_stats(10.0, 4.0, 100);
  CHECK(s.ci_lo == doctest::Approx(10.0 - 1.96 * 0.4));
  CHECK(s.ci_hi == doctest::Approx(10.0 + 1.96 * 0.4));
  const auto q = make_stats(10.0, 4.0, 400);
  CHECK(std::abs((q.ci_hi - q.ci_lo) / (s.ci_hi - s.ci_lo) - 0.5) < 1e-12);
  const std::vector<double> v{1, 2, 3, 4};
  const auto e = make_stats(v);
  CHECK(e.mean == 2.5);
  CHECK(e.std == doctest::Approx(std::sqrt(5.0 / 3.0)));
  CHECK(e.ci_lo <= e.mean);
  CHECK(e.mean <= e.ci_hi);
}

TEST_CASE("payoff series over a step grid") {
  int calls = 0;
  const StepEvaluator eval = [&](const MarketParams& p) {
    ++calls;
    return make_stats(static_cast<double>(p.steps), 1.0, 10);
  };
  const std::vector<int> grid{5};
  const auto one = payoff_vs_steps(eval, MarketParams{}, grid);
  REQUIRE(one.size() == 1);
  CHECK(one[0].stats.mean == 5.0);
  const std::vector<int> bad{3, 1};
  CHECK_THROWS_AS(payoff_vs_steps(eval, MarketParams{}, bad), ConfigError);
}

TEST_CASE("lsmc payoff is non-decreasing in the number of exercise dates") {
  const MarketParams p{36, 40, 1, 0.06, 0, 0.2, 2, OptionKind::put};
  const std::vector<int> grid{2, 4, 8, 16};
  const auto series = payoff_vs_steps(lsmc_step_evaluator({}, {}, 3, 40000, 40000, 5), p, grid);
  REQUIRE(series.size() == grid.size());
  for (std::size_t i = 1; i < series.size(); ++i) {
    const double se = std::hypot(series[i].stats.standard_error(), series[i - 1].stats.standard_error());
    CHECK(series[i].stats.mean >= series[i - 1].stats.mean - 2 * se);
  }
}

TEST_CASE("empty report has headers only") {
  const auto dir = std::filesystem::temp_directory_path() / "stopdeck_bench_empty";
  std::filesystem::remove_all(dir);
  emit_report({}, {}, dir.string());
  CHECK(slurp(dir / "comparison.csv") == std::string(kComparisonHeader) + "\n");
  CHECK(slurp(dir / "sectors.csv") == std::string(kSectorHeader) + "\n");
  CHECK(slurp(dir / "summary.json").find("\"rows\": 0") != std::string::npos);
  std::filesystem::remove_all(dir);
}

TEST_CASE("report round trip") {
  const auto dir = std::filesystem::temp_directory_path() / "stopdeck_bench_rt";
  std::filesystem::remove_all(dir);
  std::vector<ComparisonRow> rows{
      make_row("Communications", "IPG", 0.0004, 0.021, make_stats(6.67, 3.1, 1915), make_stats(0.64, 1.2, 1915)),
      make_row("Communications", "DISH", 0.0007, 0.03, make_stats(6.07, 2.9, 1915), make_stats(1.19, 1.7, 1915)),
      make_row("Odd, \"quoted\"", "X", 0, 0, make_stats(1, 0, 10), make_stats(0, 0, 10)),
  };
  const std::vector<PlotSeries> series{{"payoff_vs_steps_cnn", {{10, make_stats(1, 1, 100)}, {20, make_stats(2, 1, 100)}}}};
  const auto files = emit_report(rows, series, dir.string());
  CHECK(files.size() == 4);

  const auto back = read_comparison_csv((dir / "comparison.csv").string());
  REQUIRE(back.size() == 3);
  CHECK(back[0].label == "IPG");
  CHECK(back[0].cnn.mean == 6.67);
  CHECK(back[1].lsmc.std == 1.7);
  CHECK(back[2].sector == "Odd, \"quoted\"");
  CHECK_FALSE(back[2].improvement.has_value());
  for (int i = 0; i < 2; ++i) {
    const auto recomputed = improvement_pct(back[i].cnn.mean, back[i].lsmc.mean);
    CHECK(std::abs(display_pct(*recomputed) - display_pct(*back[i].improvement)) <= 1);
  }

  const std::string dat = slurp(dir / "payoff_vs_steps_cnn.dat");
  CHECK(dat.rfind("# x mean lo hi\n", 0) == 0);
  CHECK(std::count(dat.begin(), dat.end(), '\n') == 3);
  const std::string sectors = slurp(dir / "sectors.csv");
  CHECK(sectors.find("Communications,2,") != std::string::npos);
  std::filesystem::remove_all(dir);

  CHECK_THROWS_AS(parse_comparison_csv("wrong,header\n"), RuntimeError);
}
