#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace vbspca {

// Seeded generator with a fully specified output mapping, so streams are
// reproducible across platforms and standard-library versions. The raw
// source is std::mt19937_64 (bit-exact by the C++ standard); uniform and
// normal variates are derived here instead of through std::*_distribution,
// whose algorithms are implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  /// Uniform on (0,1): top 53 bits of the 64-bit word, offset by half an ulp.
  double uniform01() {
    const std::uint64_t bits = gen_() >> 11;
    return (static_cast<double>(bits) + 0.5) * 0x1p-53;
  }

  /// Standard normal via Box-Muller; generates pairs, caches the second.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform01();
    const double u2 = uniform01();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

 private:
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace vbspca
