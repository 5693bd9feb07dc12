#include "stopdeck/simulate.hpp"

#include "stopdeck/error.hpp"
#include "stopdeck/parallel.hpp"
#include "stopdeck/rng.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>

namespace stopdeck {

namespace {

constexpr std::size_t kPathGrain = 1024;

PathBatch make_batch(const MarketParams& params, std::size_t batch, std::uint64_t seed,
                     GeneratorKind kind) {
  params.validate();
  if (batch == 0) throw ConfigError("batch must be >= 1");
  PathBatch out;
  out.prices.resize(static_cast<Eigen::Index>(batch), params.steps + 1);
  out.dt = params.dt();
  out.seed_info = {seed, to_string(kind)};
  return out;
}

}  // namespace

std::string to_string(GeneratorKind kind) {
  switch (kind) {
    case GeneratorKind::gbm: return "gbm";
    case GeneratorKind::fbm: return "fbm";
    case GeneratorKind::harmonic: return "harmonic";
    case GeneratorKind::bootstrap: return "bootstrap";
  }
  return "unknown";
}

GeneratorKind parse_generator_kind(const std::string& text) {
  if (text == "gbm") return GeneratorKind::gbm;
  if (text == "fbm") return GeneratorKind::fbm;
  if (text == "harmonic") return GeneratorKind::harmonic;
  if (text == "bootstrap") return GeneratorKind::bootstrap;
  throw ConfigError("generator kind must be one of gbm|fbm|harmonic|bootstrap, got '" + text + "'");
}

void GeneratorSpec::validate() const {
  if (kind == GeneratorKind::fbm && !(hurst > 0.0 && hurst < 1.0)) {
    throw ConfigError("hurst must lie strictly inside (0,1)");
  }
  if (kind == GeneratorKind::harmonic) {
    if (!(freq1 > 0.0) || !(freq2 > 0.0)) throw ConfigError("harmonic frequencies must be > 0");
    if (!(ampl >= 0.0)) throw ConfigError("harmonic amplitude must be >= 0");
    if (!(noise_std >= 0.0)) throw ConfigError("noise_std must be >= 0");
  }
  if (kind == GeneratorKind::bootstrap && !source) {
    throw ConfigError("bootstrap generator requires a return series");
  }
}

double fbm_covariance(double ti, double tj, double h) {
  if (!(h > 0.0 && h < 1.0)) throw ConfigError("fbm_covariance: hurst must lie strictly inside (0,1)");
  if (!(ti >= 0.0) || !(tj >= 0.0)) throw ConfigError("fbm_covariance: times must be >= 0");
  const double e = 2.0 * h;
  return 0.5 * (std::pow(ti, e) + std::pow(tj, e) - std::pow(std::abs(ti - tj), e));
}

FbmFactor::FbmFactor(int steps, double hurst) : steps_(steps), hurst_(hurst) {
  if (steps < 1) throw ConfigError("FbmFactor: steps must be >= 1");
  if (!(hurst > 0.0 && hurst < 1.0)) throw ConfigError("FbmFactor: hurst must lie strictly inside (0,1)");
  RowMatrix cov(steps, steps);
  for (int i = 0; i < steps; ++i) {
    for (int j = 0; j <= i; ++j) {
      const double c = fbm_covariance(i + 1.0, j + 1.0, hurst);
      cov(i, j) = c;
      cov(j, i) = c;
    }
  }
  Eigen::LLT<RowMatrix> llt(cov);
  if (llt.info() != Eigen::Success) {
    throw RuntimeError("fBm covariance factorization failed for grid size " + std::to_string(steps) +
                       " (hurst " + std::to_string(hurst) + "): matrix not positive definite");
  }
  factor_ = llt.matrixL();
}

std::shared_ptr<const FbmFactor> FbmFactor::cached(int steps, double hurst) {
  static std::mutex mutex;
  static std::map<std::pair<int, double>, std::shared_ptr<const FbmFactor>> cache;
  std::lock_guard lock(mutex);
  auto& slot = cache[{steps, hurst}];
  if (!slot) slot = std::make_shared<const FbmFactor>(steps, hurst);
  return slot;
}

PathBatch gen_gbm(const MarketParams& params, std::size_t batch, std::uint64_t seed) {
  PathBatch out = make_batch(params, batch, seed, GeneratorKind::gbm);
  const int n = params.steps;
  const double dt = params.dt();
  const double drift = (params.rate - params.dividend - 0.5 * params.sigma * params.sigma) * dt;
  const double vol = params.sigma * std::sqrt(dt);
  parallel_chunks(batch, kPathGrain, [&](std::size_t, std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const CounterRng rng(seed, Stream::gbm, i);
      const auto r = static_cast<Eigen::Index>(i);
      double log_s = std::log(params.s0);
      out.prices(r, 0) = params.s0;
      for (int t = 1; t <= n; ++t) {
        log_s += drift + vol * rng.normal(static_cast<std::uint64_t>(t));
        out.prices(r, t) = std::exp(log_s);
      }
    }
  });
  return out;
}

RowMatrix fbm_sample(int steps, double dt, double h, std::size_t batch, std::uint64_t seed) {
  const auto factor = FbmFactor::cached(steps, h);
  const RowMatrix& L = factor->factor();
  const double scale = std::pow(dt, h);
  RowMatrix out = RowMatrix::Zero(static_cast<Eigen::Index>(batch), steps + 1);
  parallel_chunks(batch, kPathGrain, [&](std::size_t, std::size_t begin, std::size_t end) {
    Eigen::VectorXd z(steps);
    for (std::size_t i = begin; i < end; ++i) {
      const CounterRng rng(seed, Stream::fbm, i);
      for (int j = 0; j < steps; ++j) z[j] = rng.normal(static_cast<std::uint64_t>(j + 1));
      const auto r = static_cast<Eigen::Index>(i);
      for (int t = 0; t < steps; ++t) {
        // Explicit loop over the lower triangle keeps the summation order fixed.
        double acc = 0.0;
        for (int j = 0; j <= t; ++j) acc += L(t, j) * z[j];
        out(r, t + 1) = scale * acc;
      }
    }
  });
  return out;
}

PathBatch gen_fbm(const MarketParams& params, double h, std::size_t batch, std::uint64_t seed) {
  if (!(h > 0.0 && h < 1.0)) throw ConfigError("hurst must lie strictly inside (0,1)");
  PathBatch out = make_batch(params, batch, seed, GeneratorKind::fbm);
  const RowMatrix bh = fbm_sample(params.steps, params.dt(), h, batch, seed);
  out.prices = (params.sigma * bh).array().exp() * params.s0;
  out.prices.col(0).setConstant(params.s0);
  return out;
}

PathBatch gen_harmonic(const MarketParams& params, const GeneratorSpec& spec, std::size_t batch,
                       std::uint64_t seed) {
  GeneratorSpec checked = spec;
  checked.kind = GeneratorKind::harmonic;
  checked.validate();
  PathBatch out = make_batch(params, batch, seed, GeneratorKind::harmonic);
  const int n = params.steps;
  const double dt = params.dt();
  const double two_pi = 2.0 * std::numbers::pi;
  const double floor_price = 1e-6 * params.s0;
  const double noise = spec.noise_std * params.s0;
  parallel_chunks(batch, kPathGrain, [&](std::size_t, std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const CounterRng phase_rng(seed, Stream::harmonic_phase, i);
      const CounterRng noise_rng(seed, Stream::harmonic_noise, i);
      const double phi1 = spec.random_phase ? two_pi * phase_rng.uniform(0) : 0.0;
      const double phi2 = spec.random_phase ? two_pi * phase_rng.uniform(1) : 0.0;
      const auto r = static_cast<Eigen::Index>(i);
      out.prices(r, 0) = params.s0;
      for (int t = 1; t <= n; ++t) {
        const double time = t * dt;
        const double wave = 1.0 + spec.ampl * std::sin(two_pi * spec.freq1 * time + phi1) +
                            spec.ampl * std::sin(two_pi * spec.freq2 * time + phi2);
        double s = params.s0 * wave;
        if (noise > 0.0) s += noise * noise_rng.normal(static_cast<std::uint64_t>(t));
        out.prices(r, t) = std::max(s, floor_price);
      }
    }
  });
  return out;
}

PathBatch gen_bootstrap(const ReturnSeries& source, const MarketParams& params, std::size_t batch,
                        std::uint64_t seed) {
  const auto n = static_cast<std::size_t>(params.steps);
  if (source.size() < n) {
    throw ConfigError("bootstrap source too short: need at least " + std::to_string(n) +
                      " returns, have " + std::to_string(source.size()));
  }
  __extension__ using Wide = unsigned __int128;
  PathBatch out = make_batch(params, batch, seed, GeneratorKind::bootstrap);
  out.window_start.resize(batch);
  const std::uint64_t windows = source.size() - n + 1;
  parallel_chunks(batch, kPathGrain, [&](std::size_t, std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const CounterRng rng(seed, Stream::bootstrap, i);
      // Multiply-shift maps 64 random bits onto [0, windows) without modulo bias
      // beyond 2^-64.
      const auto start = static_cast<std::size_t>((static_cast<Wide>(rng.bits(0)) * windows) >> 64);
      out.window_start[i] = start;
      const auto r = static_cast<Eigen::Index>(i);
      double s = params.s0;
      out.prices(r, 0) = s;
      for (std::size_t t = 1; t <= n; ++t) {
        s *= source.returns[start + t - 1];
        out.prices(r, static_cast<Eigen::Index>(t)) = s;
      }
    }
  });
  return out;
}

PathBatch generate(const GeneratorSpec& spec, const MarketParams& params, std::size_t batch,
                   std::uint64_t seed) {
  spec.validate();
  switch (spec.kind) {
    case GeneratorKind::gbm: return gen_gbm(params, batch, seed);
    case GeneratorKind::fbm: return gen_fbm(params, spec.hurst, batch, seed);
    case GeneratorKind::harmonic: return gen_harmonic(params, spec, batch, seed);
    case GeneratorKind::bootstrap: return gen_bootstrap(*spec.source, params, batch, seed);
  }
  throw ConfigError("unknown generator kind");
}

}  // namespace stopdeck
