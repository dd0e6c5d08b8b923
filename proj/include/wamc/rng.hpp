#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include <Eigen/Dense>

namespace wamc {

// Seeded RNG with fixed-algorithm uniform/normal draws. std::*_distribution is
// implementation-defined, so the draw logic lives here to keep runs bit-exact.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Uniform in [0, 1).
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Standard normal via Box-Muller; caches the second draw.
  double normal() {
    if (has_cached_) {
      has_cached_ = false;
      return cached_;
    }
    double u1 = uniform01();
    double u2 = uniform01();
    while (u1 <= 0.0) u1 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * M_PI * u2;
    cached_ = r * std::sin(a);
    has_cached_ = true;
    return r * std::cos(a);
  }

  double normal(double mean, double std) { return mean + std * normal(); }

  // Uniform inside a ball of given radius.
  Eigen::Vector3d inBall(double radius) {
    Eigen::Vector3d dir(normal(), normal(), normal());
    const double n = dir.norm();
    if (n < 1e-300) dir = Eigen::Vector3d::UnitX();
    else dir /= n;
    return dir * (radius * std::cbrt(uniform01()));
  }

  std::uint64_t raw() { return engine_(); }

 private:
  std::mt19937_64 engine_;
  bool has_cached_ = false;
  double cached_ = 0.0;
};

}  // namespace wamc
