#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace stopdeck::nn {

// Dense row-major tensor of doubles.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape, double fill = 0.0);
  Tensor(std::vector<std::size_t> shape, std::vector<double> values);

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const { return values_.size(); }

  double* data() { return values_.data(); }
  const double* data() const { return values_.data(); }
  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  // Same buffer, new shape with identical element count.
  void reshape(std::vector<std::size_t> shape);

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> values_;
};

std::string shape_string(const std::vector<std::size_t>& shape);

enum class Activation : std::uint8_t { identity = 0, relu = 1, sigmoid = 2 };

std::string to_string(Activation a);

// Valid (no padding), stride-1 convolution over (batch, channels, length).
struct Conv1dLayer {
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t kernel = 0;
  Activation activation = Activation::relu;
  std::vector<double> weights;  // out x in x kernel
  std::vector<double> bias;     // out

  Conv1dLayer() = default;
  Conv1dLayer(std::size_t in, std::size_t out, std::size_t k, Activation act);
};

// (batch, in) -> (batch, out).
struct DenseLayer {
  std::size_t in_features = 0;
  std::size_t out_features = 0;
  Activation activation = Activation::identity;
  std::vector<double> weights;  // out x in
  std::vector<double> bias;     // out

  DenseLayer() = default;
  DenseLayer(std::size_t in, std::size_t out, Activation act);
};

// (batch, d1, d2, ...) -> (batch, d1 * d2 * ...).
struct FlattenLayer {};

using Layer = std::variant<Conv1dLayer, DenseLayer, FlattenLayer>;

// Per-parameter-tensor gradients in Network::parameters() order.
using Gradients = std::vector<std::vector<double>>;

class Network {
 public:
  Network() = default;
  explicit Network(std::vector<Layer> layers) : layers_(std::move(layers)) {}

  void add(Layer layer);
  const std::vector<Layer>& layers() const { return layers_; }

  // Weights then bias for every parameterised layer, in layer order. Taking
  // mutable views invalidates outstanding forward caches.
  std::vector<std::span<double>> parameters();
  std::vector<std::span<const double>> parameters() const;
  std::size_t parameter_count() const;

  Gradients zero_gradients() const;

  // Xavier-uniform weights, zero biases.
  void xavier_init(std::uint64_t seed);

  std::uint64_t version() const { return version_; }

 private:
  std::vector<Layer> layers_;
  std::uint64_t version_ = 0;
};

struct ForwardCache {
  const Network* network = nullptr;
  std::uint64_t version = 0;
  // activations[0] is the input; activations[l + 1] the output of layer l.
  std::vector<Tensor> activations;
};

// Shape mismatches throw ConfigError naming the layer index.
Tensor forward(const Network& net, const Tensor& input, ForwardCache* cache = nullptr);

// Reverse pass for a scalar loss given dLoss/dOutput. Gradients are summed
// over the batch. A cache from another network, or taken before the
// parameters changed, is rejected.
Gradients backward(const Network& net, const ForwardCache& cache, const Tensor& upstream,
                   Tensor* input_gradient = nullptr);

void accumulate(Gradients& into, const Gradients& add);

enum class OptimizerKind : std::uint8_t { adam = 0, momentum = 1 };

std::string to_string(OptimizerKind kind);
OptimizerKind parse_optimizer_kind(const std::string& text);

struct AdamState {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t step = 0;
  Gradients first_moment;
  Gradients second_moment;

  void validate() const;
};

// Classical momentum update: dw(n) = momentum * dw(n-1) - lr * grad,
// w(n+1) = w(n) + dw(n).
struct MomentumState {
  double learning_rate = 1e-3;
  double momentum = 0.9;
  std::uint64_t step = 0;
  Gradients velocity;

  void validate() const;
};

using OptimizerState = std::variant<AdamState, MomentumState>;

// Both minimise: parameters move against the gradient.
void adam_step(Network& net, const Gradients& grads, AdamState& state);
void momentum_step(Network& net, const Gradients& grads, MomentumState& state);
void optimizer_step(Network& net, const Gradients& grads, OptimizerState& state);

// Scalar loss of the network output; fills dLoss/dOutput when asked.
using LossFn = std::function<double(const Tensor& output, Tensor* output_gradient)>;

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::size_t checked = 0;
  std::size_t worst_parameter = 0;  // flat index over parameters()
};

// Compares backward() against central differences with step eps. When
// max_params is non-zero, an evenly strided subset of that size is checked.
// Relative error is |analytic - numeric| / max(|analytic|, |numeric|, 1e-6).
GradCheckReport grad_check(Network net, const Tensor& input, const LossFn& loss, double eps,
                           std::size_t max_params = 0);

// Versioned little-endian binary container; see docs/formats.md.
struct Checkpoint {
  Network network;
  OptimizerState optimizer;
  std::uint64_t config_hash = 0;
  std::vector<std::pair<std::string, std::string>> metadata;

  const std::string* find(const std::string& key) const;
};

void save_checkpoint(std::ostream& out, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(std::istream& in);
void save_checkpoint(const std::string& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace stopdeck::nn
