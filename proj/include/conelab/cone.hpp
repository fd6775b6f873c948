#pragma once

// Sampled tangent cones. The link of the cone of X at t is approximated by
// the rescaled slices (X ∩ S(t, r) - t) / r at decreasing dyadic radii r,
// stopping once two consecutive clouds agree in Hausdorff distance.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "conelab/domain.hpp"

namespace conelab {

inline constexpr double kEpsStab = 0.02;

// A closed set, sampled either as a full-dimensional region (membership
// test on directions) or as a hypersurface-like set (sign changes of a
// polynomial along circles, kept when accept() agrees).
class SampledSet {
 public:
  enum class Kind { Region, Surface };
  using Member = std::function<bool(const Vec3&)>;
  // accept(x, k, a, b): x is a zero of polys()[k] bracketed by a and b.
  using Accept = std::function<bool(const Vec3&, std::size_t, const Vec3&, const Vec3&)>;

  static SampledSet region(int dim, Member member);
  static SampledSet variety(const Polynomial& p);
  static SampledSet surface(int dim, std::vector<Polynomial> polys, Accept accept);
  // Closure of the complement of the domain.
  static SampledSet complement(const DomainSpec& d);
  // Topological boundary of the domain, cracks included.
  static SampledSet boundary(const DomainSpec& d);

  Kind kind() const { return kind_; }
  int dimension() const { return dim_; }
  bool member(const Vec3& x) const { return member_(x); }
  const std::vector<Polynomial>& polys() const { return polys_; }
  bool accept(const Vec3& x, std::size_t k, const Vec3& a, const Vec3& b) const { return accept_(x, k, a, b); }

 private:
  Kind kind_ = Kind::Region;
  int dim_ = 3;
  Member member_;
  std::vector<Polynomial> polys_;
  Accept accept_;
};

// An affine stratum through t: a point (k = 0) or a flat spanned by an
// orthonormal tangent basis. The closest-point map is the orthogonal
// projection.
struct StratumSpec {
  int dim = 0;
  Vec3 point = Vec3::Zero();
  std::vector<Vec3> tangent;

  static StratumSpec point_stratum(const Vec3& p);
  static StratumSpec line(const Vec3& p, const Vec3& direction);

  Vec3 project(const Vec3& x) const;
  double distance(const Vec3& x) const { return (x - project(x)).norm(); }
  // Orthonormal basis of the normal space in R^ambient.
  std::vector<Vec3> normal_basis(int ambient) const;
};

struct LinkOptions {
  // Strictly decreasing; empty means 10 dyadic radii from 0.05 * scale.
  std::vector<double> radii;
  double scale = 1.0;
  // Directions per radius (region sets), great circles per radius (surface
  // sets in 3D) or circle steps (surface sets on a circle).
  int samples = 10000;
  // Region sets in 3D use region_factor * samples lattice directions so the
  // direction spacing stays below eps_stab.
  int region_factor = 16;
  // Marching steps per great circle for surface sets in 3D.
  int circle_steps = 256;
  double eps_stab = kEpsStab;
  std::uint64_t seed = 1;
  int workers = 0;  // 0: hardware concurrency

  std::vector<double> radius_sequence() const;
};

struct ConeLink {
  int ambient_dim = 3;
  Vec3 center = Vec3::Zero();
  std::vector<Vec3> points;
  // Orthonormal basis of the subspace holding the link: the whole space,
  // or the normal space of a stratum.
  std::vector<Vec3> frame;
  double radius_used = 0.0;
  double stabilization_gap = 0.0;
  bool stabilized = false;
  int levels_used = 0;
  // 1: measured as H^{n-1} (area of a region); 2: H^{n-2}.
  int target_codim = 1;
  // Number of uniform directions behind a region cloud; sets the fill
  // radius of the area estimate.
  int direction_budget = 0;
  // Spacing of the direction set (region clouds).
  double resolution = 0.0;
  double measure_estimate = 0.0;
};

ConeLink sample_link(const SampledSet& x, const Vec3& t, const LinkOptions& opt);
ConeLink sample_normal_link(const SampledSet& x, const StratumSpec& s, const Vec3& t, const LinkOptions& opt);

// Exact Hausdorff distance between finite clouds; throws on empty input.
double hausdorff_distance(const std::vector<Vec3>& a, const std::vector<Vec3>& b);

// Hausdorff measure of a link: spherical area for codim 1, polyline length
// (n = 3) or cluster count (n = 2) for codim 2. Empty links measure 0.
double link_measure(const ConeLink& link);

// Measure of the full unit sphere S^{n-1} and of S^{n-2}.
double sphere_area(int n);
double equator_measure(int n);

struct CriterionReport {
  Vec3 point = Vec3::Zero();
  double clause1 = 0.0;
  double clause2 = 0.0;
  double alpha1 = 0.0;
  double alpha2 = 0.0;
  bool holds = false;
  bool confident = true;
  ConeLink complement_link;
  ConeLink boundary_link;
};

// Default thresholds: 5% of the full sphere measure for each clause.
double default_alpha(int n, int clause);

// alpha applies to both clauses when given; otherwise default_alpha().
CriterionReport check_criterion(const DomainSpec& d, const Vec3& t, std::optional<double> alpha,
                                const LinkOptions& opt);

struct ProductReport {
  double distance = 0.0;
  bool confident = true;
  ConeLink link;
  ConeLink normal_link;
  std::vector<Vec3> product;
};

// Compares the link of X at t with the normalized product of the normal
// link and the tangent space of the stratum.
ProductReport check_product_decomposition(const SampledSet& x, const StratumSpec& s, const Vec3& t,
                                          const LinkOptions& opt);

}  // namespace conelab
