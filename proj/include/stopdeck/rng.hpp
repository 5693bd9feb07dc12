#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace stopdeck {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline constexpr std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) noexcept {
  return splitmix64(a ^ splitmix64(b + 0x632be59bd9b4e019ULL));
}

// Stream tags keep the draws of different consumers independent.
enum class Stream : std::uint64_t {
  gbm = 1,
  fbm = 2,
  harmonic_noise = 3,
  harmonic_phase = 4,
  bootstrap = 5,
  init = 6,
  training = 7,
  evaluation = 8,
  lsmc = 9,
};

// Counter-based generator: every draw is a pure function of
// (seed, stream, path, counter), so a path does not depend on how many other
// paths were generated or on which thread generated it.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, Stream stream, std::uint64_t path) noexcept
      : key_(mix_seed(mix_seed(seed, static_cast<std::uint64_t>(stream)), path)) {}

  std::uint64_t bits(std::uint64_t counter) const noexcept {
    return splitmix64(key_ ^ splitmix64(counter));
  }

  // Uniform on the open interval (0, 1).
  double uniform(std::uint64_t counter) const noexcept {
    return (static_cast<double>(bits(counter) >> 11) + 0.5) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller on two counter-derived uniforms.
  double normal(std::uint64_t counter) const noexcept {
    const double u1 = uniform(2 * counter);
    const double u2 = uniform(2 * counter + 1);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::uint64_t key_;
};

}  // namespace stopdeck
