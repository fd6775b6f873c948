#pragma once

// Walk-on-Spheres for harmonic Dirichlet problems in 3D.
//
// Each step jumps to a uniform point on a sphere inscribed in the domain,
// with radius the conservative distance bound to the Dirichlet pieces. A
// Neumann bounding sphere is handled by inversion: a point that leaves the
// ball is mapped to c + R^2 (x - c) / |x - c|^2. Walks stop within eps of a
// Dirichlet piece and score g at the projected point.

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "conelab/domain.hpp"

namespace conelab {

struct WosConfig {
  DomainSpec domain;
  long walkers = 10000;
  double shrink_tolerance = 0.0;  // eps_wos; zero means 1e-4 * radius
  long max_steps = 100000;
  std::uint64_t seed = 0;
  int workers = 0;
};

struct WosResult {
  Vec3 point = Vec3::Zero();
  double mean = 0.0;
  double std_error = 0.0;
  double mean_steps = 0.0;
  long used = 0;      // walks that terminated
  long excluded = 0;  // walks that hit max_steps
  bool flagged = false;  // excluded > 1% of walkers
};

struct WosGradient {
  Vec3 point = Vec3::Zero();
  Vec3 value = Vec3::Zero();
  Vec3 std_error = Vec3::Zero();
  long excluded = 0;
  bool low_confidence = false;  // some component has stderr > 0.5 |component|
  bool flagged = false;
};

class WosSolver {
 public:
  // Throws ValidationError for configurations the method does not cover:
  // non-3D domains, A != I, f != 0, Neumann data on constraint pieces, or
  // a Dirichlet part that is empty.
  explicit WosSolver(WosConfig cfg);

  const WosConfig& config() const { return cfg_; }
  double epsilon() const { return eps_; }

  // Conservative lower bound on the distance from x to the Dirichlet
  // boundary; the Neumann sphere is not counted.
  double distance_bound(const Vec3& x) const;

  WosResult estimate(const Vec3& x) const;
  std::vector<WosResult> estimate_batch(const std::vector<Vec3>& points) const;

  // Central differences along the axes; both walks of a pair share their
  // random stream.
  WosGradient gradient(const Vec3& x, double h) const;

 private:
  struct Walk {
    double value = 0.0;
    long steps = 0;
    bool done = false;
  };
  struct Piece {
    int constraint = -1;  // -1 for the sphere
    std::vector<DistanceBound> atoms;
    std::vector<int> atom_index;
  };

  Walk walk(Vec3 x, std::uint64_t walker_seed) const;
  std::uint64_t point_seed(const Vec3& x) const;
  void check_interior(const Vec3& x) const;

  WosConfig cfg_;
  double eps_ = 0.0;
  bool reflect_ = false;
  bool sphere_dirichlet_ = false;
  std::vector<Piece> pieces_;
};

}  // namespace conelab
