#pragma once

#include <cstdint>
#include <random>

#include "fdsim/common.hpp"

namespace fdsim {

// splitmix64 finalizer. Used to derive independent per-realization stream
// seeds from (base seed, realization index, attempt); realizations filled in
// parallel stay bit-reproducible regardless of scheduling.
inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9e3779b97f4a7c15ull * (b + 0x632be59bd9b4e019ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b,
                              std::uint64_t c) {
  return mix_seed(mix_seed(a, b), c);
}

// Gaussian source on top of mt19937_64 with an explicit Box-Muller transform.
// std::normal_distribution is implementation-defined, so it cannot back a
// byte-reproducibility contract; the engine itself is fully specified.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  // Uniform on (0, 1]; never returns 0 so log() below is safe.
  double uniform_oc() {
    return static_cast<double>((eng_() >> 11) + 1ull) * 0x1.0p-53;
  }

  double gauss() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = uniform_oc();
    const double u2 = uniform_oc();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double t = 2.0 * kPi * u2;
    spare_ = r * std::sin(t);
    have_spare_ = true;
    return r * std::cos(t);
  }

  // Circular-symmetric complex Gaussian with the given variance.
  Complex cgauss(double variance) {
    const double s = std::sqrt(variance / 2.0);
    const double re = gauss();
    const double im = gauss();
    return {s * re, s * im};
  }

 private:
  std::mt19937_64 eng_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace fdsim
