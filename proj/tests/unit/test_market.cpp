#include "stopdeck/error.hpp"
#include "stopdeck/market.hpp"

#include <doctest.h>

#include <cmath>

using namespace stopdeck;

namespace {

MarketParams table1() {
  MarketParams p;
  p.s0 = 120;
  p.strike = 100;
  p.maturity = 3;
  p.rate = 0.05;
  p.dividend = 0.1;
  p.sigma = 0.1;
  p.steps = 50;
  return p;
}

}  // namespace

TEST_CASE("intrinsic payoffs") {
  CHECK(put_payoff(90, 100) == 10.0);
  CHECK(put_payoff(110, 100) == 0.0);
  CHECK(call_payoff(110, 100) == 10.0);
  CHECK(call_payoff(90, 100) == 0.0);
  CHECK(put_payoff(100, 100) == 0.0);
  CHECK_THROWS_AS(put_payoff(0, 100), ConfigError);
  CHECK_THROWS_AS(call_payoff(-1, 100), ConfigError);
  CHECK_THROWS_AS(put_payoff(1, 0), ConfigError);
}

TEST_CASE("put-call payoff parity holds pointwise") {
  for (double s : {1.0, 50.0, 99.5, 100.0, 100.5, 250.0}) {
    CHECK(call_payoff(s, 100) - put_payoff(s, 100) == doctest::Approx(s - 100).epsilon(1e-15));
  }
}

TEST_CASE("discount") {
  CHECK(discount(10, 0.05, 0) == 10.0);
  CHECK(discount(10, 0.05, 1) == doctest::Approx(10 * std::exp(-0.05)).epsilon(1e-15));
  CHECK(discount(10, 0.0, 7) == 10.0);
  CHECK_THROWS_AS(discount(10, 0.05, -1), ConfigError);
}

TEST_CASE("market parameter validation") {
  CHECK_NOTHROW(table1().validate());
  CHECK(table1().dt() == doctest::Approx(0.06));
  auto p = table1();
  p.strike = 0;
  CHECK_THROWS_AS(p.validate(), ConfigError);
  p = table1();
  p.sigma = -0.1;
  CHECK_THROWS_AS(p.validate(), ConfigError);
  p = table1();
  p.steps = 0;
  CHECK_THROWS_AS(p.validate(), ConfigError);
  p = table1();
  p.maturity = std::nan("");
  CHECK_THROWS_AS(p.validate(), ConfigError);
  CHECK(parse_option_kind("call") == OptionKind::call);
  CHECK_THROWS_AS(parse_option_kind("straddle"), ConfigError);
}

TEST_CASE("payoff matrix applies discount per column") {
  auto p = table1();
  p.steps = 3;
  PathBatch paths;
  paths.prices.resize(2, 4);
  paths.prices << 120, 110, 95, 90,  //
      120, 130, 140, 101;
  paths.dt = p.dt();
  const RowMatrix raw = payoff_matrix(paths, p, false);
  const RowMatrix disc = payoff_matrix(paths, p, true);
  CHECK(raw(0, 2) == 5.0);
  CHECK(raw(0, 3) == 10.0);
  CHECK(raw(1, 3) == 0.0);
  for (int t = 0; t < 4; ++t) {
    CHECK(disc(0, t) == doctest::Approx(raw(0, t) * std::exp(-0.05 * t * 1.0)).epsilon(1e-14));
  }
  // Undiscounted entries are never below their discounted counterparts.
  CHECK((raw.array() >= disc.array()).all());
  p.steps = 4;
  CHECK_THROWS_AS(payoff_matrix(paths, p), ConfigError);
}

TEST_CASE("discount closed-form values and composition") {
  CHECK(discount(100, 0, 1) == 100.0);
  CHECK(discount(100, 0.05, 0) == 100.0);
  CHECK(discount(100, 0.05, 1) == doctest::Approx(95.1229).epsilon(1e-6));
  for (double a : {0.0, 0.3, 1.7}) {
    for (double b : {0.1, 2.0}) {
      const double once = discount(37.0, 0.07, a + b);
      const double twice = discount(discount(37.0, 0.07, a), 0.07, b);
      CHECK(std::abs(once - twice) / once < 1e-12);
      CHECK(discount(37.0, 0.07, a + b) < discount(37.0, 0.07, a));
    }
  }
}

TEST_CASE("put and call payoffs sum to the absolute spread") {
  for (double s : {0.5, 80.0, 100.0, 123.25, 400.0}) {
    for (double k : {1.0, 100.0, 150.0}) CHECK(put_payoff(s, k) + call_payoff(s, k) == std::abs(s - k));
  }
}

TEST_CASE("constant path payoff matrix") {
  MarketParams p;
  p.s0 = 90;
  p.strike = 100;
  p.maturity = 1;
  p.steps = 1;
  PathBatch paths;
  paths.prices = RowMatrix::Constant(1, 2, 90.0);
  CHECK((payoff_matrix(paths, p, true).array() == 10.0).all());
  p.rate = 0.05;
  CHECK(payoff_matrix(paths, p, true)(0, 1) == doctest::Approx(9.5123).epsilon(1e-5));
  p.option_kind = OptionKind::call;
  CHECK((payoff_matrix(paths, p, true).array() == 0.0).all());
}

TEST_CASE("put payoff matrix is bounded by the strike") {
  MarketParams p;
  p.steps = 4;
  PathBatch paths;
  paths.prices = RowMatrix::Constant(3, 5, 1e-9);
  paths.prices(1, 2) = 250.0;
  CHECK((payoff_matrix(paths, p, false).array() <= p.strike).all());
}
