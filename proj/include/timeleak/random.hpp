#ifndef TIMELEAK_RANDOM_HPP
#define TIMELEAK_RANDOM_HPP

#include <cmath>
#include <cstdint>
#include <numbers>

namespace timeleak {

// Counter-friendly splitmix64 stream. Deterministic for a given seed, cheap
// to construct, so every Monte Carlo event can own an independent substream
// derived from (seed, index); chunked or parallel generation then produces
// the same values as a sequential pass.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    return mix(state_);
  }

  // Uniform in [0, 1), 53-bit resolution.
  double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Standard normal via Box-Muller (always consumes two uniforms).
  double next_normal() {
    const double u1 = 1.0 - next_unit();  // (0, 1]
    const double u2 = next_unit();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  // Exponential with unit mean.
  double next_exponential() { return -std::log(1.0 - next_unit()); }

  // Substream seed for event `index`; the double mix decorrelates
  // neighbouring indices.
  static std::uint64_t derive(std::uint64_t seed, std::uint64_t index) {
    return mix(mix(seed + 0x9e3779b97f4a7c15ULL) + index);
  }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t state_;
};

}  // namespace timeleak

#endif
