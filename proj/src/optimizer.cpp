#include "stopdeck/error.hpp"
#include "stopdeck/tensornet.hpp"

#include <cmath>

namespace stopdeck::nn {

namespace {

void check_layout(const Network& net, const Gradients& grads) {
  const auto params = net.parameters();
  if (params.size() != grads.size()) throw ConfigError("optimizer: gradient layout does not match network");
  for (std::size_t p = 0; p < params.size(); ++p) {
    if (params[p].size() != grads[p].size()) throw ConfigError("optimizer: gradient layout does not match network");
  }
}

}  // namespace

std::string to_string(OptimizerKind kind) { return kind == OptimizerKind::adam ? "adam" : "momentum"; }

OptimizerKind parse_optimizer_kind(const std::string& text) {
  if (text == "adam") return OptimizerKind::adam;
  if (text == "momentum" || text == "sgd") return OptimizerKind::momentum;
  throw ConfigError("optimizer must be 'adam' or 'momentum', got '" + text + "'");
}

void AdamState::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ConfigError("beta1 must lie in [0,1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("beta2 must lie in [0,1)");
  if (!(epsilon > 0.0)) throw ConfigError("epsilon must be > 0");
}

void MomentumState::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must lie in [0,1)");
}

void adam_step(Network& net, const Gradients& grads, AdamState& state) {
  check_layout(net, grads);
  if (state.first_moment.empty()) {
    state.first_moment = net.zero_gradients();
    state.second_moment = net.zero_gradients();
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  auto params = net.parameters();
  for (std::size_t p = 0; p < params.size(); ++p) {
    auto& m = state.first_moment[p];
    auto& v = state.second_moment[p];
    for (std::size_t i = 0; i < params[p].size(); ++i) {
      const double g = grads[p][i];
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g;
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g * g;
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      params[p][i] -= state.learning_rate * m_hat / (std::sqrt(v_hat) + state.epsilon);
    }
  }
}

void momentum_step(Network& net, const Gradients& grads, MomentumState& state) {
  check_layout(net, grads);
  if (state.velocity.empty()) state.velocity = net.zero_gradients();
  ++state.step;
  auto params = net.parameters();
  for (std::size_t p = 0; p < params.size(); ++p) {
    for (std::size_t i = 0; i < params[p].size(); ++i) {
      double& dw = state.velocity[p][i];
      dw = state.momentum * dw - state.learning_rate * grads[p][i];
      params[p][i] += dw;
    }
  }
}

void optimizer_step(Network& net, const Gradients& grads, OptimizerState& state) {
  std::visit(
      [&](auto& s) {
        if constexpr (std::is_same_v<std::decay_t<decltype(s)>, AdamState>) {
          adam_step(net, grads, s);
        } else {
          momentum_step(net, grads, s);
        }
      },
      state);
}

}  // namespace stopdeck::nn
