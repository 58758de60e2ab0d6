#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace aoi {

/// SplitMix64 step. Used only to derive independent stream seeds.
inline std::uint64_t splitmix64(std::uint64_t& state) noexcept {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Seed of replication `stream` under `base`: SplitMix64 applied once to
/// base XOR (golden-ratio constant * (stream + 1)).
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) noexcept {
  std::uint64_t state = base ^ (0x9E3779B97F4A7C15ULL * (stream + 1));
  return splitmix64(state);
}

/// Repo-wide generator: std::mt19937_64 (fully specified by the standard) with
/// hand-written transforms so that draws are identical across standard
/// library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed), seed_(seed) {}

  std::uint64_t seed() const noexcept { return seed_; }

  /// Uniform on the open interval (0, 1), 53 bits of resolution.
  double uniform() noexcept {
    return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
  }

  double exponential(double rate) noexcept { return -std::log(uniform()) / rate; }

  /// Child generator for an independent stream.
  Rng split(std::uint64_t stream) const noexcept { return Rng(derive_seed(seed_, stream)); }

 private:
  std::mt19937_64 engine_;
  std::uint64_t seed_;
};

}  // namespace aoi
