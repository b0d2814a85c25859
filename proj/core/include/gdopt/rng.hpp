#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace gdopt {

/// Counter-hash random stream (splitmix64). One instance per Monte Carlo
/// stream; results do not depend on the platform's <random> distributions,
/// so identical seeds give identical draws everywhere.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  /// Uniform on (0, 1]; never returns 0 so log() below is safe.
  double uniform() {
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  }

  /// Standard normal via Box-Muller, one spare cached.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  /// Stream id for (seed, index): each trajectory gets its own generator,
  /// making parallel and serial execution identical.
  static std::uint64_t stream(std::uint64_t seed, std::uint64_t index) {
    Rng mix(seed ^ (0xD1B54A32D192ED03ull * (index + 1)));
    return mix.next_u64();
  }

 private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace gdopt
