#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "cjl/linalg.hpp"

namespace cjl {

// mt19937_64 with explicitly defined conversions, so sequences do not depend on the
// standard library's distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : g_(seed) {}
  double uniform() { return static_cast<double>(g_() >> 11) * 0x1.0p-53; }
  double uniform(double a, double b) { return a + (b - a) * uniform(); }
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }
  Vec3 normal3() { return {normal(), normal(), normal()}; }
  Vec3 unit_vector() {
    Vec3 v = normal3();
    while (v.norm() < 1e-12) v = normal3();
    return v.normalized();
  }
  std::uint64_t next() { return g_(); }

 private:
  std::mt19937_64 g_;
};

}  // namespace cjl
