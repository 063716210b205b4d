#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace probekit {

// Deterministic random source. The std:: distributions are
// implementation-defined, so uniform/normal draws are derived directly from
// the mt19937_64 bit stream to keep fixtures identical across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n). Rejection sampling, no modulo bias.
  std::uint64_t below(std::uint64_t n);

  // Standard normal via Box-Muller (no cached second value).
  double normal();

 private:
  std::mt19937_64 engine_;
};

// SplitMix64 mixing of a base seed with a stream index; used to give each
// sample, cell and variant its own independent stream.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);
std::uint64_t derive_seed(std::uint64_t seed, std::string_view stream);

}  // namespace probekit
