#include "stopdeck/datafeed.hpp"
#include "stopdeck/error.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

using namespace stopdeck;

TEST_CASE("parse prices") {
  const auto s = parse_prices("date,close\n2020-01-01,100\n# holiday note\n2020-01-02,101\n2020-01-03,99\n");
  REQUIRE(s.closes.size() == 3);
  CHECK(s.closes[0] == 100.0);
  CHECK(s.closes[1] == 101.0);
  CHECK(s.closes[2] == 99.0);
  CHECK(s.dates[2] == "2020-01-03");
}

TEST_CASE("price file errors name the row") {
  try {
    parse_prices("date,close\n2020-01-01,100\n2020-01-02,0\n", "p.csv");
    FAIL("expected an error");
  } catch (const RuntimeError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("p.csv:3") != std::string::npos);
    CHECK(msg.find("non-positive") != std::string::npos);
  }
  CHECK_THROWS_WITH_AS(parse_prices("date,close\n"), doctest::Contains("no data rows"), RuntimeError);
  CHECK_THROWS_WITH_AS(parse_prices(""), doctest::Contains("no data rows"), RuntimeError);
  CHECK_THROWS_AS(parse_prices("date,close\n2020-01-01,abc\n"), RuntimeError);
  CHECK_THROWS_AS(parse_prices("date,close\n2020-01-02,1\n2020-01-01,2\n"), RuntimeError);
  CHECK_THROWS_AS(parse_prices("date,close\nnot-a-date,1\n"), RuntimeError);
}

TEST_CASE("load prices from disk") {
  const auto path = std::filesystem::temp_directory_path() / "stopdeck_datafeed_test.csv";
  {
    std::ofstream f(path);
    f << "date,close\n2021-03-01,10.5\n2021-03-02,11\n";
  }
  const auto s = load_prices(path.string());
  CHECK(s.closes == std::vector<double>{10.5, 11});
  std::filesystem::remove(path);
  CHECK_THROWS_AS(load_prices(path.string()), RuntimeError);
}

TEST_CASE("returns are direct ratios") {
  const std::vector<double> p{100, 101, 99};
  const auto r = to_returns(p);
  REQUIRE(r.size() == 2);
  CHECK(r.returns[0] == 101.0 / 100.0);
  CHECK(r.returns[1] == doctest::Approx(0.9801980198019802).epsilon(1e-15));
  CHECK(to_returns(std::vector<double>{100, 200}).returns == std::vector<double>{2.0});
  for (double x : to_returns(std::vector<double>(7, 42.0)).returns) CHECK(x == 1.0);
  CHECK_THROWS_AS(to_returns(std::vector<double>{100}), ConfigError);
}

TEST_CASE("compounding returns reconstructs prices") {
  std::vector<double> p{100};
  for (int i = 1; i < 500; ++i) p.push_back(p.back() * (1.0 + 0.01 * std::sin(0.7 * i)));
  const auto r = to_returns(p);
  double s = p[0];
  for (std::size_t i = 0; i < r.size(); ++i) {
    s *= r.returns[i];
    CHECK(std::abs(s - p[i + 1]) / p[i + 1] < 1e-10);
  }
}

TEST_CASE("chronological split") {
  ReturnSeries s;
  for (int i = 0; i < 10; ++i) s.returns.push_back(1.0 + i * 0.001);
  const auto parts = split(s, {0.8, 0.5});
  CHECK(parts.train.size() == 4);
  CHECK(parts.validation.size() == 4);
  CHECK(parts.test.size() == 2);

  std::vector<double> joined = parts.train.returns;
  joined.insert(joined.end(), parts.validation.returns.begin(), parts.validation.returns.end());
  joined.insert(joined.end(), parts.test.returns.begin(), parts.test.returns.end());
  CHECK(joined == s.returns);

  ReturnSeries tiny;
  tiny.returns = {1.0, 1.0, 1.0};
  CHECK_THROWS_AS(split(tiny, {0.9, 0.9}), ConfigError);
  CHECK_THROWS_AS(split(s, {1.0, 0.5}), ConfigError);
  CHECK_THROWS_AS(split(s, {0.5, 0.0}), ConfigError);
}

TEST_CASE("split reproduces the reported out-of-sample size") {
  ReturnSeries s;
  s.returns.assign(9573, 1.0);
  const auto parts = split(s, {7658.0 / 9573.0, 0.7});
  CHECK(parts.test.size() == 1915);
  CHECK(parts.train.size() + parts.validation.size() == 7658);
}

TEST_CASE("split concatenation property over many lengths") {
  for (std::size_t n = 5; n < 200; n += 7) {
    ReturnSeries s;
    for (std::size_t i = 0; i < n; ++i) s.returns.push_back(1.0 + static_cast<double>(i));
    const auto parts = split(s, {0.75, 0.6});
    CHECK(parts.train.size() + parts.validation.size() + parts.test.size() == n);
    CHECK(parts.train.returns.front() == s.returns.front());
    CHECK(parts.test.returns.back() == s.returns.back());
    CHECK(parts.validation.returns.front() == s.returns[parts.train.size()]);
  }
}
