#include "stopdeck/error.hpp"
#include "stopdeck/tensornet.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace stopdeck::nn {

namespace {

constexpr std::array<char, 8> kMagic = {'S', 'T', 'O', 'P', 'D', 'E', 'C', 'K'};
constexpr std::uint32_t kFormatVersion = 1;

enum class LayerTag : std::uint8_t { conv1d = 0, dense = 1, flatten = 2 };

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}

  void u8(std::uint8_t v) { out_.put(static_cast<char>(v)); }
  void u32(std::uint32_t v) { le(v, 4); }
  void u64(std::uint64_t v) { le(v, 8); }
  void f64(double v) { le(std::bit_cast<std::uint64_t>(v), 8); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    out_.write(s.data(), static_cast<std::streamsize>(s.size()));
  }
  void doubles(std::span<const double> v) {
    for (double x : v) f64(x);
  }

 private:
  void le(std::uint64_t v, int bytes) {
    for (int i = 0; i < bytes; ++i) out_.put(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  std::ostream& out_;
};

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  std::uint8_t u8() { return static_cast<std::uint8_t>(le(1)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(le(4)); }
  std::uint64_t u64() { return le(8); }
  double f64() { return std::bit_cast<double>(le(8)); }
  std::string str() {
    const std::uint32_t n = u32();
    if (n > (1u << 28)) throw RuntimeError("checkpoint: implausible string length");
    std::string s(n, '\0');
    in_.read(s.data(), n);
    if (!in_) throw RuntimeError("checkpoint: truncated file");
    return s;
  }
  void doubles(std::vector<double>& v) {
    for (double& x : v) x = f64();
  }

 private:
  std::uint64_t le(int bytes) {
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i) {
      const int c = in_.get();
      if (c == std::char_traits<char>::eof()) throw RuntimeError("checkpoint: truncated file");
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(c)) << (8 * i);
    }
    return v;
  }
  std::istream& in_;
};

void write_gradients(Writer& w, const Gradients& g) {
  w.u8(g.empty() ? 0 : 1);
  for (const auto& t : g) w.doubles(t);
}

void read_gradients(Reader& r, const Network& net, Gradients& g) {
  if (r.u8() == 0) {
    g.clear();
    return;
  }
  g = net.zero_gradients();
  for (auto& t : g) r.doubles(t);
}

Activation read_activation(std::uint8_t v) {
  if (v > 2) throw RuntimeError("checkpoint: unknown activation tag " + std::to_string(v));
  return static_cast<Activation>(v);
}

}  // namespace

const std::string* Checkpoint::find(const std::string& key) const {
  for (const auto& [k, v] : metadata) {
    if (k == key) return &v;
  }
  return nullptr;
}

void save_checkpoint(std::ostream& out, const Checkpoint& cp) {
  Writer w(out);
  out.write(kMagic.data(), kMagic.size());
  w.u32(kFormatVersion);
  w.u64(cp.config_hash);
  w.u32(static_cast<std::uint32_t>(cp.metadata.size()));
  for (const auto& [k, v] : cp.metadata) {
    w.str(k);
    w.str(v);
  }
  const auto& layers = cp.network.layers();
  w.u32(static_cast<std::uint32_t>(layers.size()));
  for (const auto& layer : layers) {
    if (const auto* c = std::get_if<Conv1dLayer>(&layer)) {
      w.u8(static_cast<std::uint8_t>(LayerTag::conv1d));
      w.u8(static_cast<std::uint8_t>(c->activation));
      w.u64(c->in_channels);
      w.u64(c->out_channels);
      w.u64(c->kernel);
      w.doubles(c->weights);
      w.doubles(c->bias);
    } else if (const auto* d = std::get_if<DenseLayer>(&layer)) {
      w.u8(static_cast<std::uint8_t>(LayerTag::dense));
      w.u8(static_cast<std::uint8_t>(d->activation));
      w.u64(d->in_features);
      w.u64(d->out_features);
      w.u64(0);
      w.doubles(d->weights);
      w.doubles(d->bias);
    } else {
      w.u8(static_cast<std::uint8_t>(LayerTag::flatten));
      w.u8(0);
      w.u64(0);
      w.u64(0);
      w.u64(0);
    }
  }
  if (const auto* adam = std::get_if<AdamState>(&cp.optimizer)) {
    w.u8(static_cast<std::uint8_t>(OptimizerKind::adam));
    w.f64(adam->learning_rate);
    w.f64(adam->beta1);
    w.f64(adam->beta2);
    w.f64(adam->epsilon);
    w.u64(adam->step);
    write_gradients(w, adam->first_moment);
    write_gradients(w, adam->second_moment);
  } else {
    const auto& m = std::get<MomentumState>(cp.optimizer);
    w.u8(static_cast<std::uint8_t>(OptimizerKind::momentum));
    w.f64(m.learning_rate);
    w.f64(m.momentum);
    w.u64(m.step);
    write_gradients(w, m.velocity);
  }
  if (!out) throw RuntimeError("checkpoint: write failed");
}

Checkpoint load_checkpoint(std::istream& in) {
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) throw RuntimeError("checkpoint: bad magic, not a stopdeck checkpoint");
  Reader r(in);
  const std::uint32_t version = r.u32();
  if (version != kFormatVersion) {
    throw RuntimeError("checkpoint: unsupported format version " + std::to_string(version));
  }
  Checkpoint cp;
  cp.config_hash = r.u64();
  const std::uint32_t n_meta = r.u32();
  for (std::uint32_t i = 0; i < n_meta; ++i) {
    std::string k = r.str();
    std::string v = r.str();
    cp.metadata.emplace_back(std::move(k), std::move(v));
  }
  const std::uint32_t n_layers = r.u32();
  std::vector<Layer> layers;
  for (std::uint32_t i = 0; i < n_layers; ++i) {
    const auto tag = r.u8();
    const Activation act = read_activation(r.u8());
    const std::uint64_t a = r.u64();
    const std::uint64_t b = r.u64();
    const std::uint64_t c = r.u64();
    if (a > (1u << 24) || b > (1u << 24) || c > (1u << 24)) throw RuntimeError("checkpoint: implausible layer size");
    switch (static_cast<LayerTag>(tag)) {
      case LayerTag::conv1d: {
        Conv1dLayer layer(a, b, c, act);
        r.doubles(layer.weights);
        r.doubles(layer.bias);
        layers.emplace_back(std::move(layer));
        break;
      }
      case LayerTag::dense: {
        DenseLayer layer(a, b, act);
        r.doubles(layer.weights);
        r.doubles(layer.bias);
        layers.emplace_back(std::move(layer));
        break;
      }
      case LayerTag::flatten: layers.emplace_back(FlattenLayer{}); break;
      default: throw RuntimeError("checkpoint: unknown layer tag " + std::to_string(tag));
    }
  }
  cp.network = Network(std::move(layers));
  const auto kind = r.u8();
  if (kind == static_cast<std::uint8_t>(OptimizerKind::adam)) {
    AdamState s;
    s.learning_rate = r.f64();
    s.beta1 = r.f64();
    s.beta2 = r.f64();
    s.epsilon = r.f64();
    s.step = r.u64();
    read_gradients(r, cp.network, s.first_moment);
    read_gradients(r, cp.network, s.second_moment);
    cp.optimizer = std::move(s);
  } else if (kind == static_cast<std::uint8_t>(OptimizerKind::momentum)) {
    MomentumState s;
    s.learning_rate = r.f64();
    s.momentum = r.f64();
    s.step = r.u64();
    read_gradients(r, cp.network, s.velocity);
    cp.optimizer = std::move(s);
  } else {
    throw RuntimeError("checkpoint: unknown optimizer tag " + std::to_string(kind));
  }
  return cp;
}

void save_checkpoint(const std::string& path, const Checkpoint& checkpoint) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw RuntimeError(path + ": cannot open for writing");
  save_checkpoint(out, checkpoint);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw RuntimeError(path + ": cannot open checkpoint");
  try {
    return load_checkpoint(in);
  } catch (const RuntimeError& e) {
    throw RuntimeError(path + ": " + e.what());
  }
}

}  // namespace stopdeck::nn
