#pragma once

// Seeded random streams.
//
// All randomness derives from one 64-bit master seed. A named or numbered
// substream is obtained with derive_seed(), which mixes the parent seed with
// the stream key through splitmix64. Each stream drives a std::mt19937_64,
// whose output sequence is fixed by the standard; the conversions to doubles
// below are written out so results do not depend on the standard library's
// distribution implementations.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string_view>

#include <Eigen/Core>

namespace conelab {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t key) {
  return splitmix64(parent ^ splitmix64(key + 0x632BE59BD9B4E019ull));
}

inline std::uint64_t derive_seed(std::uint64_t parent, std::string_view name) {
  return derive_seed(parent, fnv1a64(name));
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(splitmix64(seed)) {}

  std::uint64_t bits() { return engine_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double rad = std::sqrt(-2.0 * std::log(u1));
    const double ang = 2.0 * std::numbers::pi * u2;
    spare_ = rad * std::sin(ang);
    has_spare_ = true;
    return rad * std::cos(ang);
  }

  // Uniform direction on the unit sphere of R^dim (dim 1..3); unused
  // trailing components are zero.
  Eigen::Vector3d unit_vector(int dim) {
    Eigen::Vector3d v = Eigen::Vector3d::Zero();
    if (dim == 1) {
      v[0] = uniform() < 0.5 ? -1.0 : 1.0;
      return v;
    }
    if (dim == 2) {
      const double a = 2.0 * std::numbers::pi * uniform();
      v << std::cos(a), std::sin(a), 0.0;
      return v;
    }
    double n2 = 0.0;
    while (n2 < 1e-24) {
      v << normal(), normal(), normal();
      n2 = v.squaredNorm();
    }
    return v / std::sqrt(n2);
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace conelab
