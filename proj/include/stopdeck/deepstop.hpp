#pragma once

#include "stopdeck/market.hpp"
#include "stopdeck/simulate.hpp"
#include "stopdeck/stats.hpp"
#include "stopdeck/tensornet.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace stopdeck {

// Input channels of the policy state, in order.
inline constexpr std::size_t kStateChannels = 5;

// Convolutional stopping policy: two valid kernel-3 convolutions with six
// ReLU maps each, flatten, two 50-unit ReLU dense layers and a sigmoid head.
struct PolicySpec {
  std::size_t window = 25;
  std::size_t channels = kStateChannels;
  std::size_t feature_maps = 6;
  std::size_t kernel = 3;
  std::size_t hidden = 50;

  void validate() const;
};

nn::Network build_policy_network(const PolicySpec& spec, std::uint64_t seed);

// Policy input for paths (rows) at step t, shape (rows, 5, window):
//   0: the last `window` relative returns S_u / S_{u-1} ending at u = t,
//      left-padded with 1.0 where u < 1
//   1: payoff(i, t) / K
//   2: t / N
//   3: rate
//   4: K / s0
// `payoffs` is the (possibly discounted) payoff matrix of the same paths.
nn::Tensor build_state(const PathBatch& paths, const RowMatrix& payoffs, int t, const MarketParams& params,
                       std::size_t window, std::span<const std::size_t> rows);
nn::Tensor build_state(const PathBatch& paths, int t, const MarketParams& params, std::size_t window,
                       bool discounted = true);

struct OptimizerSettings {
  nn::OptimizerKind kind = nn::OptimizerKind::adam;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double momentum = 0.9;

  nn::OptimizerState make_state() const;
};

struct TrainingConfig {
  int epochs = 300;
  std::size_t batch = 8192;
  std::size_t window = 25;
  bool discounted = true;
  OptimizerSettings optimizer;

  void validate() const;
};

struct EpochRecord {
  int epoch = 0;
  double mean_payoff = 0.0;  // mean of the backward-composed payoff g over the batch
  double loss = 0.0;
};

struct TrainedPolicy {
  PolicySpec spec;
  nn::Network network;
  nn::OptimizerState optimizer;
  bool discounted = true;
  std::uint64_t config_hash = 0;
  std::vector<EpochRecord> trace;
};

// Draws a fresh batch of paths for one training epoch.
using PathSampler = std::function<PathBatch(std::size_t batch, std::uint64_t seed)>;
using EpochCallback = std::function<void(const EpochRecord&)>;

std::uint64_t training_config_hash(const MarketParams& params, const TrainingConfig& hyper,
                                   const std::string& source_tag);

// Backward-recursive policy training. Each epoch draws paths, seeds the
// continuation payoff g with the terminal payoff, then walks t = N-1 .. 1:
// the policy's stop probability a_t enters the objective
// mean(p_t * a_t + g * (1 - a_t)) and g takes p_t on paths where a_t > 0.5.
// One optimizer step per epoch maximises the summed objective.
TrainedPolicy train(const PathSampler& sampler, const MarketParams& params, const TrainingConfig& hyper,
                    std::uint64_t seed, const EpochCallback& on_epoch = {}, const std::string& source_tag = "custom");
TrainedPolicy train(const GeneratorSpec& gen, const MarketParams& params, const TrainingConfig& hyper,
                    std::uint64_t seed, const EpochCallback& on_epoch = {});

// Sigmoid head output for each state row.
std::vector<double> stop_probability(const TrainedPolicy& policy, const nn::Tensor& states);

struct StoppingResult {
  std::vector<int> stop_step;  // N when the policy never stopped early
  std::vector<double> payoff;
  EvalStats stats;
};

// Forward scan t = 1..N-1, stopping at the first step whose probability
// exceeds 0.5; otherwise the terminal payoff is collected.
StoppingResult evaluate_detailed(const TrainedPolicy& policy, const PathBatch& paths, const MarketParams& params);
EvalStats evaluate(const TrainedPolicy& policy, const PathBatch& paths, const MarketParams& params);

void save_policy(const std::string& path, const TrainedPolicy& policy);
TrainedPolicy load_policy(const std::string& path);
nn::Checkpoint to_checkpoint(const TrainedPolicy& policy);
TrainedPolicy from_checkpoint(nn::Checkpoint checkpoint);

void write_epoch_trace(const std::string& path, const std::vector<EpochRecord>& trace);

}  // namespace stopdeck
