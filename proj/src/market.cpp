#include "stopdeck/market.hpp"

#include "stopdeck/error.hpp"

#include <algorithm>
#include <cmath>

namespace stopdeck {

std::string to_string(OptionKind kind) { return kind == OptionKind::put ? "put" : "call"; }

OptionKind parse_option_kind(const std::string& text) {
  if (text == "put") return OptionKind::put;
  if (text == "call") return OptionKind::call;
  throw ConfigError("option kind must be 'put' or 'call', got '" + text + "'");
}

void MarketParams::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw ConfigError(what);
  };
  require(std::isfinite(s0) && s0 > 0.0, "s0 must be finite and > 0");
  require(std::isfinite(strike) && strike > 0.0, "strike must be finite and > 0");
  require(std::isfinite(maturity) && maturity > 0.0, "maturity must be finite and > 0");
  require(std::isfinite(rate) && rate >= 0.0, "rate must be finite and >= 0");
  require(std::isfinite(dividend) && dividend >= 0.0, "dividend must be finite and >= 0");
  require(std::isfinite(sigma) && sigma >= 0.0, "sigma must be finite and >= 0");
  require(steps >= 1, "steps must be >= 1");
}

double put_payoff(double s, double k) {
  if (!(s > 0.0) || !(k > 0.0)) throw ConfigError("put_payoff: price and strike must be > 0");
  return std::max(k - s, 0.0);
}

double call_payoff(double s, double k) {
  if (!(s > 0.0) || !(k > 0.0)) throw ConfigError("call_payoff: price and strike must be > 0");
  return std::max(s - k, 0.0);
}

double intrinsic(OptionKind kind, double s, double k) {
  return kind == OptionKind::put ? put_payoff(s, k) : call_payoff(s, k);
}

double discount(double x, double r, double t) {
  if (!(t >= 0.0)) throw ConfigError("discount: horizon must be >= 0");
  return x * std::exp(-r * t);
}

RowMatrix payoff_matrix(const PathBatch& paths, const MarketParams& params, bool discounted) {
  if (paths.steps() != params.steps) {
    throw ConfigError("payoff_matrix: path batch has " + std::to_string(paths.steps()) +
                      " steps, market expects " + std::to_string(params.steps));
  }
  const Eigen::Index rows = paths.prices.rows();
  const Eigen::Index cols = paths.prices.cols();
  const double dt = params.dt();
  std::vector<double> factor(static_cast<std::size_t>(cols), 1.0);
  if (discounted) {
    for (Eigen::Index t = 0; t < cols; ++t) {
      factor[static_cast<std::size_t>(t)] = std::exp(-params.rate * static_cast<double>(t) * dt);
    }
  }
  RowMatrix out(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index t = 0; t < cols; ++t) {
      out(i, t) = intrinsic(params.option_kind, paths.prices(i, t), params.strike) *
                  factor[static_cast<std::size_t>(t)];
    }
  }
  return out;
}

}  // namespace stopdeck
