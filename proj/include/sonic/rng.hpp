#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace sonic::rng {

// SplitMix64 step; used only to derive stream seeds, never to draw samples.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9E3779B97F4A7C15ull;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

// Deterministic substream derivation: stream 0, 1, 2, ... of a master seed.
// Innovations and masks use distinct streams so that changing the observation
// probabilities never perturbs the underlying sample path.
inline std::uint64_t derive_stream(std::uint64_t master, std::uint64_t stream) {
  std::uint64_t s = master ^ (0xD1B54A32D192ED03ull * (stream + 1));
  splitmix64(s);
  return splitmix64(s);
}

// Fixed-algorithm uniform/normal sampler on top of mt19937_64.
//
// uniform01 maps the top 53 bits of the generator output to the open interval
// (0, 1); normals come from the basic Box-Muller transform, consuming exactly
// two uniforms per pair. Both transforms are pinned here so that seeded output
// is reproducible run to run.
class Sampler {
 public:
  explicit Sampler(std::uint64_t seed) : gen_(seed) {}

  double uniform01() { return (static_cast<double>(gen_() >> 11) + 0.5) * 0x1.0p-53; }

  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = uniform01();
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * M_PI * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  bool bernoulli(double p) { return uniform01() < p; }

 private:
  std::mt19937_64 gen_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace sonic::rng
