#pragma once

// Semialgebraic domains: a bounding ball intersected with polynomial sign
// conditions, the elliptic operator living on it, and the boundary data.

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "conelab/polynomial.hpp"
#include "conelab/scalar_field.hpp"

namespace conelab {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

inline constexpr double kEpsVal = 1e-10;
inline constexpr double kEpsGrad = 1e-8;
inline constexpr double kEpsMergeRel = 1e-6;

struct Ball {
  Vec3 center = Vec3::Zero();
  double radius = 1.0;
};

// Coefficient matrix A(x) of L u = div(A grad u) with its ellipticity floor.
class CoefficientField {
 public:
  CoefficientField() = default;
  // Identity matrix with floor lambda0.
  static CoefficientField identity(int dim, double lambda0 = 1e-6);
  CoefficientField(int dim, std::vector<ScalarField> entries, double lambda0);

  int dimension() const { return dim_; }
  double lambda0() const { return lambda0_; }
  const std::vector<ScalarField>& entries() const { return entries_; }
  bool is_identity() const;

  Mat3 operator()(const Vec3& x) const;
  // Smallest eigenvalue of the symmetric part of A(x).
  double min_eigenvalue(const Vec3& x) const;
  bool elliptic_at(const Vec3& x) const { return min_eigenvalue(x) >= lambda0_; }

 private:
  int dim_ = 2;
  std::vector<ScalarField> entries_;  // row major, dim x dim
  double lambda0_ = 1e-6;
};

enum class Sign { Less, Greater, NotEqual, Equal };

std::string to_string(Sign s);

// One sign condition p <sign> 0.
struct Atom {
  Polynomial poly;
  Sign sign = Sign::Greater;

  bool holds(const Vec3& x) const;
};

// Disjunction of atoms; a domain is the conjunction of its constraints.
struct Constraint {
  std::vector<Atom> any_of;

  bool holds(const Vec3& x) const;
};

// A boundary piece: the bounding sphere or the zero set of one constraint.
struct BoundaryPiece {
  enum class Kind { Sphere, Constraint };
  Kind kind = Kind::Sphere;
  int index = -1;

  bool operator==(const BoundaryPiece&) const = default;
  std::string to_string() const;
};

// Names a set of boundary pieces.
struct BoundarySelector {
  bool sphere = false;
  bool all_constraints = false;
  std::vector<int> constraints;

  bool selects(const BoundaryPiece& piece) const;
  bool empty() const { return !sphere && !all_constraints && constraints.empty(); }
  static BoundarySelector parse(const std::string& text);
  std::string to_string() const;
};

// Level value for meshing: positive inside, zero on the boundary.
struct LevelSample {
  double value = 0.0;
  // Piece whose condition is the binding one at x.
  BoundaryPiece piece;
  int atom = -1;
};

class DomainSpec {
 public:
  int dim = 2;
  Ball ball;
  std::vector<Constraint> constraints;
  std::optional<Vec3> component_seed;
  BoundarySelector dirichlet;
  BoundarySelector neumann;
  CoefficientField op = CoefficientField::identity(2);
  ScalarField source = ScalarField::constant(0.0, 2);
  ScalarField dirichlet_data = ScalarField::constant(0.0, 2);
  ScalarField neumann_data = ScalarField::constant(0.0, 2);

  // Strictly inside the bounding ball and every constraint satisfied.
  bool contains(const Vec3& x) const;

  // Replaces every != atom by the strict sign taken at the seed point, which
  // picks one connected component family {p > 0} or {p < 0}.
  DomainSpec select_component(const Vec3& seed) const;

  // Throws ValidationError when the selectors overlap, the Dirichlet part is
  // empty, or the dimension is unsupported.
  void validate() const;

  // Composite level: min over conjunctions, max over disjunctions, each atom
  // contributing its signed polynomial value (|p| for !=). The bounding ball
  // contributes radius^2 - |x - center|^2.
  LevelSample level(const Vec3& x) const;
  // Same with != atoms treated as always satisfied: the level of the
  // closure, cracks filled in.
  LevelSample closure_level(const Vec3& x) const;

  // Distinct polynomials whose zero sets may carry boundary: every atom
  // polynomial, listed with the constraint it belongs to.
  std::vector<std::pair<int, const Polynomial*>> boundary_polynomials() const;

  // Estimated distance |p| / |grad p| from x to a piece.
  double piece_distance(const Vec3& x, const BoundaryPiece& piece) const;

  // All pieces present: the sphere followed by each constraint.
  std::vector<BoundaryPiece> pieces() const;

 private:
  LevelSample level_impl(const Vec3& x, bool closure) const;
};

// Approximate singular points of {p = 0} inside a ball: Gauss-Newton on the
// system p = 0, grad p = 0 from grid seeds, filtered by |p| <= kEpsVal and
// |grad p| <= kEpsGrad, merged at kEpsMergeRel * radius.
std::vector<Vec3> singular_points(const Polynomial& p, const Ball& region, int seeds_per_axis = 0);

// Conservative lower bounds on the distance to the zero set of p.
class DistanceBound {
 public:
  DistanceBound(const Polynomial& p, const Ball& region);

  // |p(x)| / L with L an upper bound of |grad p| over the region.
  double lower_bound(const Vec3& x) const;
  // Largest r with |p(x)| >= r (|grad p(x)| + r H), H bounding the Hessian
  // norm near the region; combined with lower_bound() by max.
  double local_lower_bound(const Vec3& x) const;

  double lipschitz() const { return lipschitz_; }
  double hessian_bound() const { return hessian_; }
  const Polynomial& polynomial() const { return p_; }

 private:
  Polynomial p_;
  Ball region_;
  double lipschitz_ = 0.0;
  double hessian_ = 0.0;
};

// Newton projection onto {p = 0} along the gradient. Returns the final point;
// `converged` reports |p| <= tol within the iteration budget.
Vec3 project_to_zero_set(const Polynomial& p, const Vec3& x, double tol, bool* converged = nullptr,
                         int max_iter = 60);

}  // namespace conelab
