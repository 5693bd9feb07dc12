#include "oracles/brute_force.hpp"
#include "oracles/kink_margin.hpp"

#include "stopdeck/deepstop.hpp"
#include "stopdeck/error.hpp"
#include "stopdeck/parallel.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

using namespace stopdeck;

namespace {

MarketParams decreasing_market() {
  MarketParams p;
  p.s0 = 100;
  p.strike = 100;
  p.maturity = 16;
  p.rate = 0.05;
  p.dividend = 0.2;
  p.sigma = 0;
  p.steps = 10;
  return p;
}

PathSampler fixed_sampler(PathBatch paths) {
  return [paths = std::move(paths)](std::size_t, std::uint64_t) { return paths; };
}

PathBatch rows_of(const std::vector<std::vector<double>>& rows) {
  PathBatch b;
  b.prices.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows[0].size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t t = 0; t < rows[i].size(); ++t) b.prices(i, t) = rows[i][t];
  return b;
}

// Zero-weight sigmoid head: every probability is exactly 0.5.
TrainedPolicy neutral_policy(std::size_t window) {
  TrainedPolicy p;
  p.spec.window = window;
  p.network = build_policy_network(p.spec, 1);
  auto params = p.network.parameters();
  std::fill(params[params.size() - 2].begin(), params[params.size() - 2].end(), 0.0);
  std::fill(params.back().begin(), params.back().end(), 0.0);
  return p;
}

// Pushes the head bias far to one side so the policy always (or never) stops.
TrainedPolicy constant_policy(bool stop) {
  TrainedPolicy p = neutral_policy(25);
  auto params = p.network.parameters();
  params.back()[0] = stop ? 50.0 : -50.0;
  return p;
}

}  // namespace

TEST_CASE("policy spec validation and shape") {
  PolicySpec s;
  CHECK_NOTHROW(s.validate());
  s.window = 4;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s.window = 25;
  const auto net = build_policy_network(s, 3);
  // Conv(5->6,k3) 96, Conv(6->6,k3) 114, Dense(126->50) 6350, Dense(50->50) 2550, Dense(50->1) 51.
  CHECK(net.parameter_count() == 96 + 114 + 6350 + 2550 + 51);
  const auto out = nn::forward(net, nn::Tensor({2, 5, 25}));
  CHECK(out.shape() == std::vector<std::size_t>{2, 1});
}

TEST_CASE("state at the first step is maximally padded") {
  auto p = decreasing_market();
  PathBatch b = rows_of({{100, 110, 99, 98, 97, 96, 95, 94, 93, 92, 91}});
  const auto s = build_state(b, 1, p, 25);
  for (std::size_t j = 0; j < 24; ++j) CHECK(s[j] == 1.0);
  CHECK(s[24] == 110.0 / 100.0);
  CHECK(s[25] == 0.0);  // out of the money at t=1
  CHECK(s[2 * 25] == doctest::Approx(0.1));
  CHECK(s[3 * 25] == 0.05);
  CHECK(s[4 * 25] == 1.0);
  CHECK_THROWS_AS(build_state(b, 0, p, 25), ConfigError);
  CHECK_THROWS_AS(build_state(b, 11, p, 25), ConfigError);
}

TEST_CASE("constant path state") {
  auto p = decreasing_market();
  p.s0 = 80;
  PathBatch b = rows_of({std::vector<double>(11, 80.0)});
  for (int t = 1; t <= 10; ++t) {
    const auto s = build_state(b, t, p, 6, false);
    for (std::size_t j = 0; j < 6; ++j) {
      CHECK(s[j] == 1.0);
      CHECK(s[6 + j] == 0.2);
      CHECK(s[4 * 6 + j] == 1.25);
    }
  }
}

TEST_CASE("state returns at t = W are the hand ratios") {
  auto p = decreasing_market();
  p.steps = 12;
  std::vector<double> row{100};
  for (int i = 1; i <= 12; ++i) row.push_back(100 + 3 * std::sin(i) + i);
  PathBatch b = rows_of({row});
  const std::size_t w = 7;
  const auto s = build_state(b, 7, p, w);
  for (std::size_t j = 0; j < w; ++j) CHECK(s[j] == row[j + 1] / row[j]);
  // Padding only before the first observed return.
  const auto s5 = build_state(b, 5, p, w);
  CHECK(s5[0] == 1.0);
  CHECK(s5[1] == 1.0);
  CHECK(s5[2] == row[1] / row[0]);
}

TEST_CASE("neutral head continues and is pure") {
  const TrainedPolicy pol = neutral_policy(25);
  auto p = decreasing_market();
  const PathBatch b = gen_gbm(MarketParams{100, 100, 1, 0.05, 0, 0.2, 10, OptionKind::put}, 50, 3);
  const auto probs = stop_probability(pol, build_state(b, 4, p, 25));
  for (double x : probs) CHECK(x == 0.5);
  const auto r = evaluate_detailed(pol, b, p);
  for (int s : r.stop_step) CHECK(s == 10);
}

TEST_CASE("evaluation of constant policies") {
  MarketParams p{100, 100, 1, 0.05, 0, 0.3, 12, OptionKind::put};
  const PathBatch b = gen_gbm(p, 2000, 17);
  const RowMatrix pay = payoff_matrix(b, p);

  const auto never = evaluate(constant_policy(false), b, p);
  CHECK(never.mean == doctest::Approx(pay.col(12).mean()).epsilon(1e-12));
  CHECK(never.mean == doctest::Approx(terminal_policy_stats(pay).mean).epsilon(1e-12));

  const auto always = evaluate(constant_policy(true), b, p);
  CHECK(always.mean == doctest::Approx(pay.col(1).mean()).epsilon(1e-12));

  const auto neutral = evaluate(neutral_policy(25), b, p);
  CHECK(neutral.mean >= 0.0);
  CHECK(neutral.mean <= pay.maxCoeff());
  CHECK(neutral.n == 2000);
}

TEST_CASE("no early value means no early stopping") {
  // Call paths that stay below the strike until maturity.
  MarketParams p{100, 100, 1, 0.0, 0, 0, 5, OptionKind::call};
  PathBatch b = rows_of({{100, 95, 90, 96, 99, 120}, {100, 97, 98, 91, 92, 105}});
  TrainingConfig hyper;
  hyper.epochs = 150;
  hyper.batch = 2;
  hyper.window = 5;
  hyper.optimizer.learning_rate = 1e-2;
  const auto pol = train(fixed_sampler(b), p, hyper, 1);
  // Objective can never exceed the sum of per-step maxima (4 steps x 12.5).
  for (const auto& rec : pol.trace) CHECK(rec.loss >= -50.0);
  CHECK(pol.trace.back().mean_payoff == 12.5);
  CHECK(pol.trace.back().loss == doctest::Approx(-50.0).epsilon(0.01));
  for (int s : evaluate_detailed(pol, b, p).stop_step) CHECK(s == 5);
}

TEST_CASE("training objective gradient matches finite differences") {
  MarketParams p{100, 100, 1, 0.05, 0, 0.4, 5, OptionKind::put};
  TrainingConfig hyper;
  hyper.batch = 8;
  hyper.window = 5;
  hyper.optimizer.kind = nn::OptimizerKind::momentum;
  hyper.optimizer.learning_rate = 1.0;
  hyper.optimizer.momentum = 0.0;

  // Kink-free point: every ReLU pre-activation and every stop probability
  // keeps a clear margin, so decisions cannot flip under the probe step.
  PathBatch b;
  TrainedPolicy start;
  std::uint64_t seed = 1;
  for (;; ++seed) {
    REQUIRE(seed < 300);
    b = gen_gbm(p, 8, seed);
    hyper.epochs = 0;
    start = train(fixed_sampler(b), p, hyper, seed);
    double margin = 1.0;
    for (int t = 1; t <= 4; ++t) {
      const auto s = build_state(b, t, p, 5);
      margin = std::min(margin, oracle::relu_margin(start.network, s));
      for (double a : stop_probability(start, s)) margin = std::min(margin, std::abs(a - 0.5));
    }
    if (margin > 1e-3) break;
  }
  hyper.epochs = 1;
  const auto stepped = train(fixed_sampler(b), p, hyper, seed);

  const RowMatrix pay = payoff_matrix(b, p);
  // Test-side loss with the continuation decisions frozen at the start point.
  std::vector<std::vector<bool>> decide(p.steps + 1, std::vector<bool>(8));
  {
    std::vector<double> g(8);
    for (int i = 0; i < 8; ++i) g[i] = pay(i, 5);
    for (int t = 4; t >= 1; --t) {
      const auto a = nn::forward(start.network, build_state(b, t, p, 5));
      for (int i = 0; i < 8; ++i) {
        decide[t][i] = a[i] > 0.5;
        if (decide[t][i]) g[i] = pay(i, t);
      }
    }
  }
  auto loss = [&](const nn::Network& net) {
    std::vector<double> g(8);
    for (int i = 0; i < 8; ++i) g[i] = pay(i, 5);
    double obj = 0;
    for (int t = 4; t >= 1; --t) {
      const auto a = nn::forward(net, build_state(b, t, p, 5));
      double s = 0;
      for (int i = 0; i < 8; ++i) s += pay(i, t) * a[i] + g[i] * (1 - a[i]);
      obj += s / 8;
      for (int i = 0; i < 8; ++i)
        if (decide[t][i]) g[i] = pay(i, t);
    }
    return -obj;
  };
  CHECK(stepped.trace[0].loss == doctest::Approx(loss(start.network)).epsilon(1e-12));

  nn::Network probe = start.network;
  auto params = probe.parameters();
  const auto before = std::as_const(start.network).parameters();
  const auto after = std::as_const(stepped.network).parameters();
  double worst = 0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    for (std::size_t i = 0; i < params[k].size(); ++i) {
      const double analytic = before[k][i] - after[k][i];  // lr 1, no momentum
      const double saved = params[k][i];
      params[k][i] = saved + 1e-5;
      const double up = loss(probe);
      params[k][i] = saved - 1e-5;
      const double down = loss(probe);
      params[k][i] = saved;
      const double numeric = (up - down) / 2e-5;
      worst = std::max(worst, std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-6}));
    }
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("trained policy finds the unique best step on deterministic paths") {
  const auto p = decreasing_market();
  const PathBatch one = gen_gbm(p, 1, 0);
  std::vector<double> prices(one.prices.data(), one.prices.data() + 11);
  const auto brute = oracle::brute_force_put(prices, p.strike, p.rate, p.dt());
  REQUIRE(brute.unique);
  CHECK(brute.best_step == 6);

  TrainingConfig hyper;
  hyper.epochs = 400;
  hyper.batch = 16;
  hyper.optimizer.learning_rate = 3e-3;
  const auto pol = train([&](std::size_t n, std::uint64_t s) { return gen_gbm(p, n, s); }, p, hyper, 4);
  const PathBatch test = gen_gbm(p, 8, 99);
  const auto res = evaluate_detailed(pol, test, p);
  for (int s : res.stop_step) CHECK(s == brute.best_step);
  CHECK(std::abs(res.stats.mean - brute.best_value) <= 0.01 * brute.best_value);
}

TEST_CASE("checkpoint round trip reproduces probabilities") {
  MarketParams p{100, 100, 1, 0.05, 0, 0.2, 12, OptionKind::put};
  TrainingConfig hyper;
  hyper.epochs = 3;
  hyper.batch = 64;
  hyper.window = 8;
  const auto pol = train(GeneratorSpec{}, p, hyper, 5);
  const auto path = std::filesystem::temp_directory_path() / "stopdeck_policy_test.ckpt";
  save_policy(path.string(), pol);
  const auto back = load_policy(path.string());
  std::filesystem::remove(path);
  CHECK(back.spec.window == 8);
  CHECK(back.config_hash == pol.config_hash);
  const PathBatch b = gen_gbm(p, 300, 8);
  const auto s = build_state(b, 5, p, 8);
  CHECK(stop_probability(pol, s) == stop_probability(back, s));
  CHECK(evaluate_detailed(pol, b, p).stop_step == evaluate_detailed(back, b, p).stop_step);
}

TEST_CASE("training is deterministic and thread independent") {
  MarketParams p{100, 100, 1, 0.05, 0, 0.2, 12, OptionKind::put};
  TrainingConfig hyper;
  hyper.epochs = 3;
  hyper.batch = 300;
  hyper.window = 6;
  set_thread_count(1);
  const auto a = train(GeneratorSpec{}, p, hyper, 5);
  set_thread_count(3);
  const auto b = train(GeneratorSpec{}, p, hyper, 5);
  set_thread_count(0);
  const auto pa = std::as_const(a.network).parameters();
  const auto pb = std::as_const(b.network).parameters();
  for (std::size_t k = 0; k < pa.size(); ++k) CHECK(std::equal(pa[k].begin(), pa[k].end(), pb[k].begin()));
  for (std::size_t e = 0; e < a.trace.size(); ++e) CHECK(a.trace[e].loss == b.trace[e].loss);
}

TEST_CASE("epoch trace csv") {
  const auto path = std::filesystem::temp_directory_path() / "stopdeck_trace_test.csv";
  write_epoch_trace(path.string(), {{0, 1.5, -2.0}, {1, 1.75, -2.5}});
  std::ifstream in(path);
  std::string header, first;
  std::getline(in, header);
  std::getline(in, first);
  CHECK(header == "epoch,mean_payoff,loss");
  CHECK(first == "0,1.5,-2");
  std::filesystem::remove(path);
}
