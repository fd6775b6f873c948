#pragma once

// Closed-form scalar fields over R^n used for source terms, boundary data and
// test fields: polynomials in x, y, z plus radial powers (`r`), the polar
// angle (`theta`, measured in [0, 2*pi) from the positive x axis) and
// elementary functions (sin, cos, tan, exp, log, sqrt, abs, atan2).
//
// Gradients are exact: the expression tree is evaluated once more over dual
// numbers carrying the three partial derivatives.

#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "conelab/polynomial.hpp"

namespace conelab {

namespace detail {
struct FieldNode;
}

class ScalarField {
 public:
  ScalarField();  // the zero field in 3 variables

  static ScalarField parse(std::string_view text, int dim);
  static ScalarField constant(double c, int dim);
  static ScalarField from_polynomial(const Polynomial& p);

  double operator()(const Eigen::Vector3d& x) const;
  Eigen::Vector3d gradient(const Eigen::Vector3d& x) const;
  double value_and_gradient(const Eigen::Vector3d& x, Eigen::Vector3d& grad) const;

  int dimension() const { return dim_; }
  const std::string& source() const { return source_; }

  // Set when the expression is a polynomial in x, y, z (no r, theta, or
  // transcendental atoms).
  const std::optional<Polynomial>& polynomial() const { return poly_; }
  std::optional<double> constant_value() const;

 private:
  std::shared_ptr<const detail::FieldNode> root_;
  std::string source_;
  int dim_ = 3;
  std::optional<Polynomial> poly_;
};

// A vector field given by one ScalarField per component.
struct VectorField {
  std::vector<ScalarField> components;

  Eigen::Vector3d operator()(const Eigen::Vector3d& x) const;
  double divergence(const Eigen::Vector3d& x) const;
};

}  // namespace conelab
