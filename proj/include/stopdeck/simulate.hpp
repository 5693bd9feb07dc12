#pragma once

#include "stopdeck/datafeed.hpp"
#include "stopdeck/market.hpp"

#include <cstdint>
#include <memory>
#include <string>

namespace stopdeck {

enum class GeneratorKind { gbm, fbm, harmonic, bootstrap };

std::string to_string(GeneratorKind kind);
GeneratorKind parse_generator_kind(const std::string& text);

struct GeneratorSpec {
  GeneratorKind kind = GeneratorKind::gbm;
  double hurst = 0.7;
  double ampl = 0.2;
  double freq1 = 0.3;  // cycles per year
  double freq2 = 2.0;
  double noise_std = 0.01;  // fraction of s0 per step
  bool random_phase = true;
  std::shared_ptr<const ReturnSeries> source;  // bootstrap only

  void validate() const;
};

// Cholesky factor of the fractional Brownian motion covariance on the unit
// grid t_i = i, i = 1..steps. Covariances on a grid of spacing dt follow by
// scaling with dt^hurst.
class FbmFactor {
 public:
  FbmFactor(int steps, double hurst);

  int steps() const { return steps_; }
  double hurst() const { return hurst_; }
  const RowMatrix& factor() const { return factor_; }

  // Shared instance for (steps, hurst); constructed once, then read-only.
  static std::shared_ptr<const FbmFactor> cached(int steps, double hurst);

 private:
  int steps_;
  double hurst_;
  RowMatrix factor_;
};

double fbm_covariance(double ti, double tj, double h);

PathBatch gen_gbm(const MarketParams& params, std::size_t batch, std::uint64_t seed);

// Fractional Brownian motion B_H on the exercise grid only (column 0 is 0).
RowMatrix fbm_sample(int steps, double dt, double h, std::size_t batch, std::uint64_t seed);

PathBatch gen_fbm(const MarketParams& params, double h, std::size_t batch, std::uint64_t seed);
PathBatch gen_harmonic(const MarketParams& params, const GeneratorSpec& spec, std::size_t batch,
                       std::uint64_t seed);
PathBatch gen_bootstrap(const ReturnSeries& source, const MarketParams& params, std::size_t batch,
                        std::uint64_t seed);

// Dispatches on spec.kind.
PathBatch generate(const GeneratorSpec& spec, const MarketParams& params, std::size_t batch,
                   std::uint64_t seed);

}  // namespace stopdeck
