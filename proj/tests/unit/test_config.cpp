#include "stopdeck/config.hpp"
#include "stopdeck/error.hpp"

#include <doctest.h>

using namespace stopdeck;

namespace {

const char* kTable1 = R"(# Table I GBM block
market.s0 = 120
market.strike = 100
market.maturity = 3
market.rate = 0.05
market.dividend = 0.1   # continuous yield
market.sigma = 0.1
generator.kind = gbm
)";

}  // namespace

TEST_CASE("table I block parses") {
  const auto c = parse_config_string(kTable1);
  CHECK(c.market.s0 == 120);
  CHECK(c.market.strike == 100);
  CHECK(c.market.maturity == 3);
  CHECK(c.market.rate == 0.05);
  CHECK(c.market.dividend == 0.1);
  CHECK(c.market.sigma == 0.1);
  CHECK(c.market.steps == 50);
  CHECK(c.generator.kind == GeneratorKind::gbm);
  CHECK(c.training.epochs == 300);
  CHECK(c.training.batch == 8192);
  CHECK(c.training.window == 25);
  CHECK(c.lsmc.degree == 3);
  CHECK(c.discounted);
  CHECK_FALSE(c.evaluation.seed.has_value());
}

TEST_CASE("invariant violations cite key and bound") {
  CHECK_THROWS_WITH_AS(parse_config_string(std::string(kTable1) + "generator.hurst = 1.5\n"),
                       doctest::Contains("generator.hurst = 1.5: must lie strictly inside (0,1)"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_config_string(std::string(kTable1) + "market.steps = 1\n"),
                       doctest::Contains("market.steps"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_config_string(std::string(kTable1) + "training.batch = 0\n"),
                       doctest::Contains("training.batch"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_config_string(std::string(kTable1) + "market.sigma = abc\n"),
                       doctest::Contains("market.sigma"), ConfigError);
  CHECK_THROWS_AS(parse_config_string(std::string(kTable1) + "generator.kind = bootstrap\n"), ConfigError);
}

TEST_CASE("unknown keys get a suggestion") {
  CHECK_THROWS_WITH_AS(parse_config_string("market.stirke = 100\n"),
                       doctest::Contains("did you mean 'market.strike'"), ConfigError);
  CHECK(suggest_key("market.stirke") == "market.strike");
  CHECK_FALSE(suggest_key("completely.unrelated.words").has_value());
  CHECK_THROWS_AS(parse_config_string("no equals sign\n"), ConfigError);
}

TEST_CASE("mandatory keys") {
  CHECK_THROWS_WITH_AS(parse_config_string("market.s0 = 1\nmarket.strike = 1\n"),
                       doctest::Contains("generator.kind"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_config_string("market.s0 = 1\ngenerator.kind = gbm\n"),
                       doctest::Contains("market.strike"), ConfigError);
}

TEST_CASE("overrides are last-wins and logged") {
  const auto c = parse_config_string(kTable1, {{"market.steps", "10"}, {"market.steps", "12"}, {"evaluation.seed", "7"}});
  CHECK(c.market.steps == 12);
  CHECK(*c.evaluation.seed == 7);
  const std::string text = resolved_config_text(c);
  CHECK(text.find("market.steps = 12\n") != std::string::npos);
  CHECK(text.find("evaluation.seed = 7\n") != std::string::npos);
  CHECK_THROWS_AS(parse_config_string(kTable1, {{"market.bogus", "1"}}), ConfigError);
}

TEST_CASE("resolved config reparses to the same config") {
  const auto c = parse_config_string(kTable1, {{"sweep.steps", "10, 20,40"}, {"training.optimizer", "momentum"}});
  CHECK(c.sweep_steps == std::vector<int>{10, 20, 40});
  const std::string text = resolved_config_text(c);
  const auto again = parse_config_string(text);
  CHECK(resolved_config_text(again) == text);
  // Every known key appears exactly once.
  for (const auto& k : config_keys()) CHECK(text.find(k.name + " = ") != std::string::npos);
}

TEST_CASE("missing config file") {
  CHECK_THROWS_AS(parse_config("/nonexistent/stopdeck.conf"), ConfigError);
}
