#pragma once

// P1 finite elements for div(A grad u) = f with mixed boundary conditions:
// find u with u = g on Dirichlet edges and
//   (A grad u, grad phi) = (theta, phi)_{Neumann} - (f, phi)
// for every test function phi vanishing on the Dirichlet part.

#include <iosfwd>
#include <memory>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "conelab/domain.hpp"
#include "conelab/mesh2d.hpp"
#include "conelab/scalar_field.hpp"

namespace conelab {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

struct SparseSystem {
  std::shared_ptr<const TriMesh> mesh;
  SparseMatrix matrix;  // full stiffness matrix, Dirichlet rows included
  Eigen::VectorXd rhs;
  std::vector<char> dirichlet_mask;
  Eigen::VectorXd dirichlet_values;  // meaningful where the mask is set
};

struct CgOptions {
  double tolerance = 1e-10;   // relative residual
  int max_iter_factor = 20;   // iteration cap: factor * unknowns
  int stagnation_window = 500;
};

struct CgReport {
  int iterations = 0;
  double relative_residual = 0.0;
  double condition_estimate = 0.0;
};

struct SolutionField {
  std::shared_ptr<const TriMesh> mesh;
  Eigen::VectorXd values;
  std::vector<Vec2> gradients;  // one per triangle
  CgReport solver;

  // Squared energy norm: integral of |grad u|^2.
  double energy() const;
  // Integrals of u^2 and |grad u|^2 (the squared W^{1,2} norm).
  double w12_norm_squared() const;
  double value_at(std::size_t triangle, const Vec2& x) const;
};

// Builds the stiffness matrix and load vector. Throws ValidationError when A
// is not symmetric or fails the ellipticity floor at a quadrature point.
SparseSystem assemble(std::shared_ptr<const TriMesh> mesh, const DomainSpec& domain, int workers = 0);

// Diagonally preconditioned conjugate gradients on the free nodes. Throws
// NumericalError on stagnation or when the iteration cap is hit.
SolutionField solve(const SparseSystem& sys, const CgOptions& opt = {});

// Exact P1 gradients of nodal values.
std::vector<Vec2> p1_gradients(const TriMesh& m, const Eigen::VectorXd& values);

// |(beta, grad u) + (div beta, u) - (beta . nu, u)_{boundary}| by
// three-point triangle and two-point Gauss edge quadrature.
double green_identity_residual(const VectorField& beta, const SolutionField& u);

// L2 norm of u - exact, and of exact, by three-point quadrature.
double l2_error(const SolutionField& u, const ScalarField& exact);
double l2_norm(const TriMesh& m, const ScalarField& f);

// Minimizer of the Dirichlet energy on the ball among functions equal to g
// on {P = 0}: the domain's != constraints are the cracks carrying the data,
// the sphere gets the natural condition. Rejects varieties missing the ball.
DomainSpec argmin_domain(const DomainSpec& domain, const ScalarField& g);
SolutionField solve_argmin(const DomainSpec& domain, const ScalarField& g, double h, int workers = 0);

// "x y u" per node, then "i j k gx gy" per triangle.
void write_solution(std::ostream& os, const SolutionField& u);

}  // namespace conelab
