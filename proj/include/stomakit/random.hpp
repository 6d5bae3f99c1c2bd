#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace stomakit {

// Deterministic random source. std::mt19937_64 has a fully specified output
// sequence, but the standard <random> distributions do not, so every draw
// here is derived directly from the raw engine stream. Outputs are therefore
// reproducible byte-for-byte across platforms and standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Uniform in [0, 1), 53-bit resolution.
  double u01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * u01(); }

  // Box-Muller; the second deviate of each pair is cached.
  double normal(double mean = 0.0, double sigma = 1.0) {
    if (have_spare_) {
      have_spare_ = false;
      return mean + sigma * spare_;
    }
    double u1 = 0.0;
    do {
      u1 = u01();
    } while (u1 <= 0.0);
    const double u2 = u01();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(theta);
    have_spare_ = true;
    return mean + sigma * radius * std::cos(theta);
  }

  // Uniform integer in [0, n). Modulo bias is irrelevant for the scales
  // used here; determinism is what matters.
  std::uint64_t below(std::uint64_t n) { return engine_() % n; }

  // Derive an independent stream seed (splitmix64 finalizer).
  static std::uint64_t mix(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace stomakit
