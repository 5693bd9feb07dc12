#include "stopdeck/tensornet.hpp"

#include "stopdeck/error.hpp"
#include "stopdeck/rng.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <numeric>
#include <type_traits>

namespace stopdeck::nn {

namespace {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const Mat>;
using MutMap = Eigen::Map<Mat>;

std::size_t product(const std::vector<std::size_t>& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

[[noreturn]] void shape_error(std::size_t layer, const std::string& what) {
  throw ConfigError("layer " + std::to_string(layer) + ": " + what);
}

constexpr double kSigmoidHi = 1.0 - 0x1.0p-53;

double sigmoid(double x) {
  double y;
  if (x >= 0.0) {
    y = 1.0 / (1.0 + std::exp(-x));
  } else {
    const double e = std::exp(x);
    y = e / (1.0 + e);
  }
  return std::clamp(y, DBL_MIN, kSigmoidHi);
}

void apply_activation(Activation a, std::span<double> v) {
  switch (a) {
    case Activation::identity: return;
    case Activation::relu:
      for (double& x : v) x = x > 0.0 ? x : 0.0;
      return;
    case Activation::sigmoid:
      for (double& x : v) x = sigmoid(x);
      return;
  }
}

// Turns dL/dy into dL/d(pre-activation) in place, using the cached outputs.
void activation_backward(Activation a, std::span<const double> y, std::span<double> grad) {
  switch (a) {
    case Activation::identity: return;
    case Activation::relu:
      for (std::size_t i = 0; i < grad.size(); ++i) {
        if (!(y[i] > 0.0)) grad[i] = 0.0;
      }
      return;
    case Activation::sigmoid:
      for (std::size_t i = 0; i < grad.size(); ++i) grad[i] *= y[i] * (1.0 - y[i]);
      return;
  }
}

// The convolution kernels work on kTile-wide position tiles held in vector
// registers and keep several independent accumulators in flight, which is
// where nearly all of the training time goes.
constexpr std::size_t kTile = 8;
constexpr std::size_t kGroup = 3;
using Lane = Eigen::Array<double, kTile, 1>;
using LaneMap = Eigen::Map<const Lane>;

// Start of the tile following the one at `s`. The last tile is shifted left
// to end at n (n >= kTile); positions it recomputes go through the same
// operation sequence, so outputs do not depend on the tiling.
inline std::size_t tile_start(std::size_t s, std::size_t n) { return s + kTile >= n ? n - kTile : s; }

// y[g][l0 .. l0+kTile) for G consecutive output channels starting at w/bias.
template <std::size_t G>
void conv_tile(const double* xb, const double* w, const double* bias, double* yb, std::size_t cin, std::size_t k,
               std::size_t lin, std::size_t lout, std::size_t l0) {
  Lane acc[G];
  for (std::size_t g = 0; g < G; ++g) acc[g] = Lane::Constant(bias[g]);
  const std::size_t wstride = cin * k;
  for (std::size_t c = 0; c < cin; ++c) {
    for (std::size_t j = 0; j < k; ++j) {
      const LaneMap x(xb + c * lin + l0 + j);
      for (std::size_t g = 0; g < G; ++g) acc[g] += w[g * wstride + c * k + j] * x;
    }
  }
  for (std::size_t g = 0; g < G; ++g) Eigen::Map<Lane>(yb + g * lout + l0) = acc[g];
}

// gx[g][m0 .. m0+kTile) for G consecutive input channels; dpad holds each
// output-gradient row with k - 1 zeros on both sides.
template <std::size_t G>
void conv_input_tile(const double* dpad, std::size_t padded, const double* w, double* gxb, std::size_t cin,
                     std::size_t cout, std::size_t k, std::size_t lin, std::size_t m0) {
  Lane acc[G];
  for (std::size_t g = 0; g < G; ++g) acc[g] = Lane::Zero();
  for (std::size_t o = 0; o < cout; ++o) {
    for (std::size_t j = 0; j < k; ++j) {
      const LaneMap d(dpad + o * padded + (k - 1) + m0 - j);
      for (std::size_t g = 0; g < G; ++g) acc[g] += w[(o * cin + g) * k + j] * d;
    }
  }
  for (std::size_t g = 0; g < G; ++g) Eigen::Map<Lane>(gxb + g * lin + m0) = acc[g];
}

// Lane sums over the batch of d[b][l0..] * x[b][off_g + l0..] for G weight
// taps, with lanes below `from` masked out (used for the shifted last tile).
template <std::size_t G>
void conv_weight_tile(const double* d0, std::size_t d_stride, const double* x0, std::size_t x_stride,
                      const std::size_t* off, std::size_t batch, std::size_t l0, const Lane& mask, Lane* acc) {
  for (std::size_t g = 0; g < G; ++g) acc[g] = Lane::Zero();
  for (std::size_t b = 0; b < batch; ++b) {
    const Lane d = LaneMap(d0 + b * d_stride + l0) * mask;
    const double* xb = x0 + b * x_stride + l0;
    for (std::size_t g = 0; g < G; ++g) acc[g] += d * LaneMap(xb + off[g]);
  }
}

template <class F>
void for_groups(std::size_t n, F&& f) {
  std::size_t i = 0;
  for (; i + kGroup <= n; i += kGroup) f(i, std::integral_constant<std::size_t, kGroup>{});
  for (; i + 2 <= n; i += 2) f(i, std::integral_constant<std::size_t, 2>{});
  for (; i < n; ++i) f(i, std::integral_constant<std::size_t, 1>{});
}

Tensor conv_forward(const Conv1dLayer& layer, const Tensor& in, std::size_t index) {
  if (in.rank() != 3) shape_error(index, "conv1d expects (batch, channels, length), got " + shape_string(in.shape()));
  if (in.dim(1) != layer.in_channels) {
    shape_error(index, "conv1d expects " + std::to_string(layer.in_channels) + " channels, got " +
                           std::to_string(in.dim(1)));
  }
  if (in.dim(2) < layer.kernel) {
    shape_error(index, "conv1d input length " + std::to_string(in.dim(2)) + " shorter than kernel " +
                           std::to_string(layer.kernel));
  }
  const std::size_t batch = in.dim(0);
  const std::size_t cin = layer.in_channels;
  const std::size_t cout = layer.out_channels;
  const std::size_t k = layer.kernel;
  const std::size_t lin = in.dim(2);
  const std::size_t lout = lin - k + 1;
  Tensor out({batch, cout, lout});
  for (std::size_t b = 0; b < batch; ++b) {
    const double* xb = in.data() + b * cin * lin;
    double* yb = out.data() + b * cout * lout;
    if (lout < kTile) {
      for (std::size_t o = 0; o < cout; ++o) {
        for (std::size_t l = 0; l < lout; ++l) {
          double acc = layer.bias[o];
          for (std::size_t c = 0; c < cin; ++c) {
            for (std::size_t j = 0; j < k; ++j) acc += layer.weights[(o * cin + c) * k + j] * xb[c * lin + l + j];
          }
          yb[o * lout + l] = acc;
        }
      }
      continue;
    }
    for (std::size_t s = 0;; s += kTile) {
      const std::size_t l0 = tile_start(s, lout);
      for_groups(cout, [&](std::size_t o, auto g) {
        conv_tile<decltype(g)::value>(xb, layer.weights.data() + o * cin * k, layer.bias.data() + o,
                                      yb + o * lout, cin, k, lin, lout, l0);
      });
      if (l0 + kTile == lout) break;
    }
  }
  apply_activation(layer.activation, out.values());
  return out;
}

void conv_backward(const Conv1dLayer& layer, const Tensor& in, const Tensor& out, Tensor& grad_out,
                   std::vector<double>& dw, std::vector<double>& db, Tensor* grad_in) {
  activation_backward(layer.activation, out.values(), grad_out.values());
  const std::size_t batch = in.dim(0);
  const std::size_t cin = layer.in_channels;
  const std::size_t cout = layer.out_channels;
  const std::size_t k = layer.kernel;
  const std::size_t lin = in.dim(2);
  const std::size_t lout = lin - k + 1;
  const std::size_t x_stride = cin * lin;
  const std::size_t d_stride = cout * lout;

  // Bias and weight gradients. Each tap sums lane-wise over the batch; lanes,
  // then tiles are added in a fixed order.
  std::vector<std::size_t> offsets(cin * k);
  for (std::size_t c = 0; c < cin; ++c) {
    for (std::size_t j = 0; j < k; ++j) offsets[c * k + j] = c * lin + j;
  }
  if (lout < kTile) {
    for (std::size_t o = 0; o < cout; ++o) {
      const double* d0 = grad_out.data() + o * lout;
      double bias_total = 0.0;
      for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t l = 0; l < lout; ++l) bias_total += d0[b * d_stride + l];
      }
      db[o] += bias_total;
      for (std::size_t q = 0; q < cin * k; ++q) {
        double total = 0.0;
        for (std::size_t b = 0; b < batch; ++b) {
          for (std::size_t l = 0; l < lout; ++l) total += d0[b * d_stride + l] * in.data()[b * x_stride + offsets[q] + l];
        }
        dw[o * cin * k + q] += total;
      }
    }
  } else {
    std::vector<double> wsum(cout * cin * k, 0.0);
    std::vector<double> bsum(cout, 0.0);
    for (std::size_t s = 0;; s += kTile) {
      const std::size_t l0 = tile_start(s, lout);
      Lane mask = Lane::Ones();
      for (std::size_t v = 0; v < kTile; ++v) {
        if (l0 + v < s) mask[v] = 0.0;  // already covered by the previous tile
      }
      for (std::size_t o = 0; o < cout; ++o) {
        const double* d0 = grad_out.data() + o * lout;
        Lane bacc = Lane::Zero();
        for (std::size_t b = 0; b < batch; ++b) bacc += LaneMap(d0 + b * d_stride + l0) * mask;
        bsum[o] += bacc.sum();
        for_groups(cin * k, [&](std::size_t q, auto g) {
          constexpr std::size_t G = decltype(g)::value;
          Lane acc[G];
          conv_weight_tile<G>(d0, d_stride, in.data(), x_stride, offsets.data() + q, batch, l0, mask, acc);
          for (std::size_t i = 0; i < G; ++i) wsum[o * cin * k + q + i] += acc[i].sum();
        });
      }
      if (l0 + kTile == lout) break;
    }
    for (std::size_t i = 0; i < wsum.size(); ++i) dw[i] += wsum[i];
    for (std::size_t o = 0; o < cout; ++o) db[o] += bsum[o];
  }

  if (!grad_in) return;
  *grad_in = Tensor(in.shape());
  const std::size_t padded = lout + 2 * (k - 1);
  std::vector<double> dpad(cout * padded, 0.0);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t o = 0; o < cout; ++o) {
      const double* d = grad_out.data() + (b * cout + o) * lout;
      std::copy(d, d + lout, dpad.data() + o * padded + (k - 1));
    }
    double* gxb = grad_in->data() + b * cin * lin;
    // gx[c][m] = sum_o sum_j w[o][c][j] * d[o][m - j]
    if (lin < kTile) {
      for (std::size_t c = 0; c < cin; ++c) {
        for (std::size_t m = 0; m < lin; ++m) {
          double acc = 0.0;
          for (std::size_t o = 0; o < cout; ++o) {
            for (std::size_t j = 0; j < k; ++j) {
              acc += layer.weights[(o * cin + c) * k + j] * dpad[o * padded + (k - 1) + m - j];
            }
          }
          gxb[c * lin + m] = acc;
        }
      }
      continue;
    }
    for (std::size_t s = 0;; s += kTile) {
      const std::size_t m0 = tile_start(s, lin);
      for_groups(cin, [&](std::size_t c, auto g) {
        conv_input_tile<decltype(g)::value>(dpad.data(), padded, layer.weights.data() + c * k, gxb + c * lin, cin,
                                            cout, k, lin, m0);
      });
      if (m0 + kTile == lin) break;
    }
  }
}

Tensor dense_forward(const DenseLayer& layer, const Tensor& in, std::size_t index) {
  if (in.rank() != 2) shape_error(index, "dense expects (batch, features), got " + shape_string(in.shape()));
  if (in.dim(1) != layer.in_features) {
    shape_error(index, "dense expects " + std::to_string(layer.in_features) + " features, got " +
                           std::to_string(in.dim(1)));
  }
  const auto batch = static_cast<Eigen::Index>(in.dim(0));
  const auto fin = static_cast<Eigen::Index>(layer.in_features);
  const auto fout = static_cast<Eigen::Index>(layer.out_features);
  Tensor out({in.dim(0), layer.out_features});
  ConstMap x(in.data(), batch, fin);
  ConstMap w(layer.weights.data(), fout, fin);
  MutMap y(out.data(), batch, fout);
  y.noalias() = x * w.transpose();
  y.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(layer.bias.data(), fout);
  apply_activation(layer.activation, out.values());
  return out;
}

void dense_backward(const DenseLayer& layer, const Tensor& in, const Tensor& out, Tensor& grad_out,
                    std::vector<double>& dw, std::vector<double>& db, Tensor* grad_in) {
  activation_backward(layer.activation, out.values(), grad_out.values());
  const auto batch = static_cast<Eigen::Index>(in.dim(0));
  const auto fin = static_cast<Eigen::Index>(layer.in_features);
  const auto fout = static_cast<Eigen::Index>(layer.out_features);
  ConstMap x(in.data(), batch, fin);
  ConstMap d(grad_out.data(), batch, fout);
  MutMap gw(dw.data(), fout, fin);
  gw.noalias() += d.transpose() * x;
  // Plain loop: Eigen's vectorized column sums depend on buffer alignment,
  // which differs between threads.
  for (Eigen::Index b = 0; b < batch; ++b) {
    for (Eigen::Index j = 0; j < fout; ++j) db[static_cast<std::size_t>(j)] += d(b, j);
  }
  if (grad_in) {
    *grad_in = Tensor(in.shape());
    ConstMap w(layer.weights.data(), fout, fin);
    MutMap gx(grad_in->data(), batch, fin);
    gx.noalias() = d * w;
  }
}

template <class L>
void init_uniform(L& layer, std::size_t fan_in, std::size_t fan_out, const CounterRng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (std::size_t i = 0; i < layer.weights.size(); ++i) {
    layer.weights[i] = limit * (2.0 * rng.uniform(i) - 1.0);
  }
  std::fill(layer.bias.begin(), layer.bias.end(), 0.0);
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape, double fill)
    : shape_(std::move(shape)), values_(product(shape_), fill) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
  if (product(shape_) != values_.size()) {
    throw ConfigError("tensor shape " + shape_string(shape_) + " does not match " +
                      std::to_string(values_.size()) + " values");
  }
}

void Tensor::reshape(std::vector<std::size_t> shape) {
  if (product(shape) != values_.size()) {
    throw ConfigError("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
  }
  shape_ = std::move(shape);
}

std::string shape_string(const std::vector<std::size_t>& shape) {
  std::string s = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(shape[i]);
  }
  return s + ")";
}

std::string to_string(Activation a) {
  switch (a) {
    case Activation::identity: return "identity";
    case Activation::relu: return "relu";
    case Activation::sigmoid: return "sigmoid";
  }
  return "unknown";
}

Conv1dLayer::Conv1dLayer(std::size_t in, std::size_t out, std::size_t k, Activation act)
    : in_channels(in), out_channels(out), kernel(k), activation(act), weights(out * in * k, 0.0), bias(out, 0.0) {
  if (in == 0 || out == 0 || k == 0) throw ConfigError("conv1d dimensions must be positive");
}

DenseLayer::DenseLayer(std::size_t in, std::size_t out, Activation act)
    : in_features(in), out_features(out), activation(act), weights(out * in, 0.0), bias(out, 0.0) {
  if (in == 0 || out == 0) throw ConfigError("dense dimensions must be positive");
}

void Network::add(Layer layer) {
  layers_.push_back(std::move(layer));
  ++version_;
}

std::vector<std::span<double>> Network::parameters() {
  ++version_;
  std::vector<std::span<double>> out;
  for (auto& layer : layers_) {
    std::visit(
        [&](auto& l) {
          if constexpr (!std::is_same_v<std::decay_t<decltype(l)>, FlattenLayer>) {
            out.emplace_back(l.weights);
            out.emplace_back(l.bias);
          }
        },
        layer);
  }
  return out;
}

std::vector<std::span<const double>> Network::parameters() const {
  std::vector<std::span<const double>> out;
  for (const auto& layer : layers_) {
    std::visit(
        [&](const auto& l) {
          if constexpr (!std::is_same_v<std::decay_t<decltype(l)>, FlattenLayer>) {
            out.emplace_back(l.weights);
            out.emplace_back(l.bias);
          }
        },
        layer);
  }
  return out;
}

std::size_t Network::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : parameters()) n += p.size();
  return n;
}

Gradients Network::zero_gradients() const {
  Gradients g;
  for (const auto& p : parameters()) g.emplace_back(p.size(), 0.0);
  return g;
}

void Network::xavier_init(std::uint64_t seed) {
  ++version_;
  std::uint64_t tensor = 0;
  for (auto& layer : layers_) {
    if (auto* conv = std::get_if<Conv1dLayer>(&layer)) {
      init_uniform(*conv, conv->in_channels * conv->kernel, conv->out_channels * conv->kernel,
                   CounterRng(seed, Stream::init, tensor));
    } else if (auto* dense = std::get_if<DenseLayer>(&layer)) {
      init_uniform(*dense, dense->in_features, dense->out_features, CounterRng(seed, Stream::init, tensor));
    }
    ++tensor;
  }
}

Tensor forward(const Network& net, const Tensor& input, ForwardCache* cache) {
  if (input.rank() < 2) throw ConfigError("network input must have a batch axis, got " + shape_string(input.shape()));
  const auto& layers = net.layers();
  if (cache) {
    cache->network = &net;
    cache->version = net.version();
    cache->activations.clear();
    cache->activations.reserve(layers.size() + 1);
    cache->activations.push_back(input);
  }
  Tensor current;
  const Tensor* in = &input;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const Layer& layer = layers[i];
    Tensor next;
    if (const auto* conv = std::get_if<Conv1dLayer>(&layer)) {
      next = conv_forward(*conv, *in, i);
    } else if (const auto* dense = std::get_if<DenseLayer>(&layer)) {
      next = dense_forward(*dense, *in, i);
    } else {
      const std::size_t batch = in->dim(0);
      next = (in == &current) ? std::move(current) : *in;
      next.reshape({batch, next.size() / std::max<std::size_t>(batch, 1)});
    }
    if (cache) {
      cache->activations.push_back(std::move(next));
      in = &cache->activations.back();
    } else {
      current = std::move(next);
      in = &current;
    }
  }
  return in == &current ? std::move(current) : *in;
}

Gradients backward(const Network& net, const ForwardCache& cache, const Tensor& upstream, Tensor* input_gradient) {
  if (cache.network != &net || cache.version != net.version() ||
      cache.activations.size() != net.layers().size() + 1) {
    throw ConfigError("backward: forward cache is stale or belongs to a different network");
  }
  if (upstream.shape() != cache.activations.back().shape()) {
    throw ConfigError("backward: upstream gradient shape " + shape_string(upstream.shape()) +
                      " does not match output shape " + shape_string(cache.activations.back().shape()));
  }
  Gradients grads = net.zero_gradients();
  // Parameter tensors are numbered from the back while walking in reverse.
  std::size_t slot = grads.size();
  Tensor grad = upstream;
  for (std::size_t i = net.layers().size(); i-- > 0;) {
    const Tensor& in = cache.activations[i];
    const Tensor& out = cache.activations[i + 1];
    const Layer& layer = net.layers()[i];
    const bool need_input = i > 0 || input_gradient != nullptr;
    Tensor grad_in;
    if (const auto* conv = std::get_if<Conv1dLayer>(&layer)) {
      slot -= 2;
      conv_backward(*conv, in, out, grad, grads[slot], grads[slot + 1], need_input ? &grad_in : nullptr);
    } else if (const auto* dense = std::get_if<DenseLayer>(&layer)) {
      slot -= 2;
      dense_backward(*dense, in, out, grad, grads[slot], grads[slot + 1], need_input ? &grad_in : nullptr);
    } else {
      grad_in = std::move(grad);
      grad_in.reshape(in.shape());
    }
    grad = std::move(grad_in);
  }
  if (input_gradient) *input_gradient = std::move(grad);
  return grads;
}

void accumulate(Gradients& into, const Gradients& add) {
  if (into.size() != add.size()) throw ConfigError("accumulate: gradient layouts differ");
  for (std::size_t p = 0; p < into.size(); ++p) {
    if (into[p].size() != add[p].size()) throw ConfigError("accumulate: gradient layouts differ");
    for (std::size_t i = 0; i < into[p].size(); ++i) into[p][i] += add[p][i];
  }
}

}  // namespace stopdeck::nn
