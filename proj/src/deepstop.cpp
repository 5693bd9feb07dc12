#include "stopdeck/deepstop.hpp"

#include "stopdeck/error.hpp"
#include "stopdeck/numtext.hpp"
#include "stopdeck/parallel.hpp"
#include "stopdeck/rng.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace stopdeck {

namespace {

// Rows per forward/backward chunk. Fixed so gradient reduction order never
// depends on the thread count.
constexpr std::size_t kRowGrain = 64;

std::string join_trace(const std::vector<EpochRecord>& trace) {
  std::string out;
  for (const auto& r : trace) {
    if (!out.empty()) out += ';';
    out += std::to_string(r.epoch) + ',' + format_double(r.mean_payoff) + ',' + format_double(r.loss);
  }
  return out;
}

std::vector<EpochRecord> split_trace(const std::string& text) {
  std::vector<EpochRecord> trace;
  std::istringstream in(text);
  std::string item;
  while (std::getline(in, item, ';')) {
    const auto c1 = item.find(',');
    const auto c2 = item.find(',', c1 + 1);
    if (c1 == std::string::npos || c2 == std::string::npos) throw RuntimeError("policy: malformed trace entry");
    trace.push_back({static_cast<int>(parse_int(item.substr(0, c1))),
                     parse_double(item.substr(c1 + 1, c2 - c1 - 1)), parse_double(item.substr(c2 + 1))});
  }
  return trace;
}

void check_paths(const PathBatch& paths, const MarketParams& params) {
  if (paths.steps() != params.steps) {
    throw ConfigError("paths have " + std::to_string(paths.steps()) + " steps, market expects " +
                      std::to_string(params.steps));
  }
}

}  // namespace

void PolicySpec::validate() const {
  if (window < 5) throw ConfigError("policy window must be >= 5");
  if (channels != kStateChannels) throw ConfigError("policy expects " + std::to_string(kStateChannels) + " channels");
  if (feature_maps == 0 || hidden == 0 || kernel == 0) throw ConfigError("policy layer sizes must be positive");
  if (window < 2 * (kernel - 1) + 1) throw ConfigError("policy window too short for two convolutions");
}

nn::Network build_policy_network(const PolicySpec& spec, std::uint64_t seed) {
  spec.validate();
  using nn::Activation;
  const std::size_t conv_len = spec.window - 2 * (spec.kernel - 1);
  nn::Network net;
  net.add(nn::Conv1dLayer(spec.channels, spec.feature_maps, spec.kernel, Activation::relu));
  net.add(nn::Conv1dLayer(spec.feature_maps, spec.feature_maps, spec.kernel, Activation::relu));
  net.add(nn::FlattenLayer{});
  net.add(nn::DenseLayer(spec.feature_maps * conv_len, spec.hidden, Activation::relu));
  net.add(nn::DenseLayer(spec.hidden, spec.hidden, Activation::relu));
  net.add(nn::DenseLayer(spec.hidden, 1, Activation::sigmoid));
  net.xavier_init(seed);
  return net;
}

nn::Tensor build_state(const PathBatch& paths, const RowMatrix& payoffs, int t, const MarketParams& params,
                       std::size_t window, std::span<const std::size_t> rows) {
  const int n = paths.steps();
  if (t < 1 || t > n) {
    throw ConfigError("build_state: step " + std::to_string(t) + " outside 1.." + std::to_string(n));
  }
  if (window == 0) throw ConfigError("build_state: window must be positive");
  const std::size_t w = window;
  nn::Tensor state({rows.size(), kStateChannels, w});
  const double time_feature = static_cast<double>(t) / static_cast<double>(n);
  const double moneyness = params.strike / params.s0;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const auto i = static_cast<Eigen::Index>(rows[k]);
    double* base = state.data() + k * kStateChannels * w;
    double* returns = base;
    for (std::size_t j = 0; j < w; ++j) {
      const long u = static_cast<long>(t) - static_cast<long>(w) + 1 + static_cast<long>(j);
      returns[j] = u >= 1 ? paths.prices(i, u) / paths.prices(i, u - 1) : 1.0;
    }
    std::fill(base + w, base + 2 * w, payoffs(i, t) / params.strike);
    std::fill(base + 2 * w, base + 3 * w, time_feature);
    std::fill(base + 3 * w, base + 4 * w, params.rate);
    std::fill(base + 4 * w, base + 5 * w, moneyness);
  }
  return state;
}

nn::Tensor build_state(const PathBatch& paths, int t, const MarketParams& params, std::size_t window,
                       bool discounted) {
  const RowMatrix payoffs = payoff_matrix(paths, params, discounted);
  std::vector<std::size_t> rows(paths.batch());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  return build_state(paths, payoffs, t, params, window, rows);
}

nn::OptimizerState OptimizerSettings::make_state() const {
  if (kind == nn::OptimizerKind::adam) {
    nn::AdamState s;
    s.learning_rate = learning_rate;
    s.beta1 = beta1;
    s.beta2 = beta2;
    s.epsilon = epsilon;
    s.validate();
    return s;
  }
  nn::MomentumState s;
  s.learning_rate = learning_rate;
  s.momentum = momentum;
  s.validate();
  return s;
}

void TrainingConfig::validate() const {
  if (epochs < 0) throw ConfigError("training.epochs must be >= 0");
  if (batch == 0) throw ConfigError("training.batch must be >= 1");
  PolicySpec spec;
  spec.window = window;
  spec.validate();
  (void)optimizer.make_state();
}

std::uint64_t training_config_hash(const MarketParams& params, const TrainingConfig& hyper,
                                   const std::string& source_tag) {
  std::ostringstream s;
  s << "s0=" << format_double(params.s0) << ";K=" << format_double(params.strike)
    << ";T=" << format_double(params.maturity) << ";r=" << format_double(params.rate)
    << ";q=" << format_double(params.dividend) << ";sigma=" << format_double(params.sigma)
    << ";N=" << params.steps << ";kind=" << to_string(params.option_kind) << ";epochs=" << hyper.epochs
    << ";batch=" << hyper.batch << ";window=" << hyper.window << ";discounted=" << hyper.discounted
    << ";opt=" << nn::to_string(hyper.optimizer.kind) << ";lr=" << format_double(hyper.optimizer.learning_rate)
    << ";b1=" << format_double(hyper.optimizer.beta1) << ";b2=" << format_double(hyper.optimizer.beta2)
    << ";eps=" << format_double(hyper.optimizer.epsilon) << ";mom=" << format_double(hyper.optimizer.momentum)
    << ";source=" << source_tag;
  return fnv1a(s.str());
}

TrainedPolicy train(const PathSampler& sampler, const MarketParams& params, const TrainingConfig& hyper,
                    std::uint64_t seed, const EpochCallback& on_epoch, const std::string& source_tag) {
  params.validate();
  hyper.validate();
  TrainedPolicy policy;
  policy.spec.window = hyper.window;
  policy.network = build_policy_network(policy.spec, mix_seed(seed, static_cast<std::uint64_t>(Stream::init)));
  policy.optimizer = hyper.optimizer.make_state();
  policy.discounted = hyper.discounted;
  policy.config_hash = training_config_hash(params, hyper, source_tag);

  const int n = params.steps;
  const std::uint64_t path_seed = mix_seed(seed, static_cast<std::uint64_t>(Stream::training));
  std::vector<std::size_t> active;
  std::vector<double> probs;

  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    const PathBatch paths = sampler(hyper.batch, mix_seed(path_seed, static_cast<std::uint64_t>(epoch)));
    check_paths(paths, params);
    const RowMatrix p = payoff_matrix(paths, params, hyper.discounted);
    const std::size_t batch = paths.batch();
    const double inv_batch = 1.0 / static_cast<double>(batch);

    std::vector<double> g(batch);
    for (std::size_t i = 0; i < batch; ++i) g[i] = p(static_cast<Eigen::Index>(i), n);

    const nn::Network& net = policy.network;
    nn::Gradients total = net.zero_gradients();
    double objective = 0.0;

    for (int t = n - 1; t >= 1; --t) {
      // Where p_t == g the objective term equals p_t whatever the policy says
      // and the g update is a no-op, so only the other rows need the network.
      active.clear();
      double step_objective = 0.0;
      for (std::size_t i = 0; i < batch; ++i) {
        const double pt = p(static_cast<Eigen::Index>(i), t);
        if (pt != g[i]) {
          active.push_back(i);
        } else {
          step_objective += pt;
        }
      }
      probs.assign(active.size(), 0.0);
      const std::size_t chunks = chunk_count(active.size(), kRowGrain);
      std::vector<nn::Gradients> partial(chunks);
      std::vector<double> partial_objective(chunks, 0.0);

      parallel_chunks(active.size(), kRowGrain, [&](std::size_t c, std::size_t begin, std::size_t end) {
        const std::span<const std::size_t> rows(active.data() + begin, end - begin);
        const nn::Tensor state = build_state(paths, p, t, params, hyper.window, rows);
        nn::ForwardCache cache;
        const nn::Tensor a = nn::forward(net, state, &cache);
        nn::Tensor upstream(a.shape());
        double obj = 0.0;
        for (std::size_t k = 0; k < rows.size(); ++k) {
          const double pt = p(static_cast<Eigen::Index>(rows[k]), t);
          const double gk = g[rows[k]];
          obj += pt * a[k] + gk * (1.0 - a[k]);
          // loss = -objective / batch
          upstream[k] = -(pt - gk) * inv_batch;
          probs[begin + k] = a[k];
        }
        partial[c] = nn::backward(net, cache, upstream);
        partial_objective[c] = obj;
      });

      for (std::size_t c = 0; c < chunks; ++c) {
        nn::accumulate(total, partial[c]);
        step_objective += partial_objective[c];
      }
      objective += step_objective * inv_batch;
      if (!std::isfinite(objective)) {
        throw RuntimeError("training diverged: non-finite loss at epoch " + std::to_string(epoch) + ", step " +
                           std::to_string(t));
      }
      for (std::size_t k = 0; k < active.size(); ++k) {
        if (probs[k] > 0.5) g[active[k]] = p(static_cast<Eigen::Index>(active[k]), t);
      }
    }

    for (const auto& tensor : total) {
      for (double v : tensor) {
        if (!std::isfinite(v)) {
          throw RuntimeError("training diverged: non-finite gradient at epoch " + std::to_string(epoch));
        }
      }
    }

    EpochRecord record;
    record.epoch = epoch;
    record.mean_payoff = std::accumulate(g.begin(), g.end(), 0.0) * inv_batch;
    record.loss = -objective;
    nn::optimizer_step(policy.network, total, policy.optimizer);
    policy.trace.push_back(record);
    if (on_epoch) on_epoch(record);
  }
  return policy;
}

TrainedPolicy train(const GeneratorSpec& gen, const MarketParams& params, const TrainingConfig& hyper,
                    std::uint64_t seed, const EpochCallback& on_epoch) {
  gen.validate();
  PathSampler sampler = [&gen, &params](std::size_t batch, std::uint64_t s) {
    return generate(gen, params, batch, s);
  };
  return train(sampler, params, hyper, seed, on_epoch, to_string(gen.kind));
}

std::vector<double> stop_probability(const TrainedPolicy& policy, const nn::Tensor& states) {
  if (states.rank() != 3 || states.dim(1) != policy.spec.channels || states.dim(2) != policy.spec.window) {
    throw ConfigError("stop_probability: expected state shape (batch, " + std::to_string(policy.spec.channels) +
                      ", " + std::to_string(policy.spec.window) + "), got " + nn::shape_string(states.shape()));
  }
  const nn::Tensor out = nn::forward(policy.network, states);
  return {out.values().begin(), out.values().end()};
}

StoppingResult evaluate_detailed(const TrainedPolicy& policy, const PathBatch& paths, const MarketParams& params) {
  params.validate();
  check_paths(paths, params);
  const int n = params.steps;
  const RowMatrix p = payoff_matrix(paths, params, policy.discounted);
  const std::size_t batch = paths.batch();

  StoppingResult result;
  result.stop_step.assign(batch, n);
  std::vector<std::size_t> alive(batch);
  std::iota(alive.begin(), alive.end(), std::size_t{0});
  std::vector<std::uint8_t> stop;

  for (int t = 1; t < n && !alive.empty(); ++t) {
    stop.assign(alive.size(), 0);
    parallel_chunks(alive.size(), kRowGrain, [&](std::size_t, std::size_t begin, std::size_t end) {
      const std::span<const std::size_t> rows(alive.data() + begin, end - begin);
      const nn::Tensor state = build_state(paths, p, t, params, policy.spec.window, rows);
      const nn::Tensor a = nn::forward(policy.network, state);
      for (std::size_t k = 0; k < rows.size(); ++k) stop[begin + k] = a[k] > 0.5 ? 1 : 0;
    });
    std::size_t kept = 0;
    for (std::size_t k = 0; k < alive.size(); ++k) {
      if (stop[k]) {
        result.stop_step[alive[k]] = t;
      } else {
        alive[kept++] = alive[k];
      }
    }
    alive.resize(kept);
  }

  result.payoff.resize(batch);
  for (std::size_t i = 0; i < batch; ++i) {
    result.payoff[i] = p(static_cast<Eigen::Index>(i), result.stop_step[i]);
  }
  result.stats = make_stats(result.payoff);
  return result;
}

EvalStats evaluate(const TrainedPolicy& policy, const PathBatch& paths, const MarketParams& params) {
  return evaluate_detailed(policy, paths, params).stats;
}

nn::Checkpoint to_checkpoint(const TrainedPolicy& policy) {
  nn::Checkpoint cp;
  cp.network = policy.network;
  cp.optimizer = policy.optimizer;
  cp.config_hash = policy.config_hash;
  cp.metadata = {
      {"format", "stopdeck-policy"},
      {"window", std::to_string(policy.spec.window)},
      {"channels", std::to_string(policy.spec.channels)},
      {"feature_maps", std::to_string(policy.spec.feature_maps)},
      {"kernel", std::to_string(policy.spec.kernel)},
      {"hidden", std::to_string(policy.spec.hidden)},
      {"discounted", policy.discounted ? "1" : "0"},
      {"trace", join_trace(policy.trace)},
  };
  return cp;
}

TrainedPolicy from_checkpoint(nn::Checkpoint cp) {
  const auto require = [&](const char* key) -> const std::string& {
    const std::string* v = cp.find(key);
    if (!v) throw RuntimeError(std::string("policy checkpoint missing '") + key + "'");
    return *v;
  };
  if (require("format") != "stopdeck-policy") throw RuntimeError("checkpoint does not hold a stopping policy");
  TrainedPolicy policy;
  policy.spec.window = parse_uint(require("window"));
  policy.spec.channels = parse_uint(require("channels"));
  policy.spec.feature_maps = parse_uint(require("feature_maps"));
  policy.spec.kernel = parse_uint(require("kernel"));
  policy.spec.hidden = parse_uint(require("hidden"));
  policy.spec.validate();
  policy.discounted = parse_bool(require("discounted"));
  policy.trace = split_trace(require("trace"));
  policy.config_hash = cp.config_hash;
  policy.optimizer = std::move(cp.optimizer);
  policy.network = std::move(cp.network);

  // The stored layer stack must be the one the spec describes.
  const nn::Network expected = build_policy_network(policy.spec, 0);
  const auto got = policy.network.parameters();
  const auto want = std::as_const(expected).parameters();
  if (got.size() != want.size()) throw RuntimeError("policy checkpoint layers do not match its spec");
  for (std::size_t i = 0; i < got.size(); ++i) {
    if (got[i].size() != want[i].size()) throw RuntimeError("policy checkpoint layers do not match its spec");
  }
  return policy;
}

void save_policy(const std::string& path, const TrainedPolicy& policy) {
  nn::save_checkpoint(path, to_checkpoint(policy));
}

TrainedPolicy load_policy(const std::string& path) { return from_checkpoint(nn::load_checkpoint(path)); }

void write_epoch_trace(const std::string& path, const std::vector<EpochRecord>& trace) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw RuntimeError(path + ": cannot open for writing");
  out << "epoch,mean_payoff,loss\n";
  for (const auto& r : trace) {
    out << r.epoch << ',' << format_double(r.mean_payoff) << ',' << format_double(r.loss) << '\n';
  }
  if (!out) throw RuntimeError(path + ": write failed");
}

}  // namespace stopdeck
