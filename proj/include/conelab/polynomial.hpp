#pragma once

// Multivariate polynomials with real coefficients.
//
// Coefficients are doubles; example polynomials are built from small
// rationals, which are exactly representable or rounded once at parse time.
// A Polynomial is immutable once built: the arithmetic operators return new
// values.

#include <climits>
#include <initializer_list>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace conelab {

using Exponent = std::vector<int>;

class Polynomial {
 public:
  // Degree reported for the zero polynomial.
  static constexpr int kZeroDegree = INT_MIN;

  explicit Polynomial(int dim = 1);
  Polynomial(int dim, std::initializer_list<std::pair<Exponent, double>> terms);

  static Polynomial constant(int dim, double c);
  static Polynomial variable(int dim, int index);

  // Parses an expression in the variables x, y, z (the first `dim` of them).
  // Grammar: sums and products of numbers, variables, parenthesised
  // expressions, integer powers `^k`, and division by constants.
  // Throws ValidationError naming the offending token.
  static Polynomial parse(std::string_view text, int dim);

  int dimension() const { return dim_; }
  int degree() const;
  bool is_zero() const { return terms_.empty(); }
  bool is_homogeneous() const;
  std::size_t term_count() const { return terms_.size(); }
  const std::map<Exponent, double>& terms() const { return terms_; }
  double coefficient(const Exponent& e) const;

  double eval(std::span<const double> x) const;
  double eval(const Eigen::Vector3d& x) const;
  // Value and gradient in one pass; grad receives dimension() entries.
  double eval_with_gradient(const Eigen::Vector3d& x, Eigen::Vector3d& grad) const;

  Polynomial derivative(int index) const;
  std::vector<Polynomial> gradient() const;
  // The polynomial x -> p(t + x).
  Polynomial translate(std::span<const double> t) const;
  Polynomial homogeneous_part(int d) const;
  // Lowest total degree among stored terms (kZeroDegree for zero).
  int order() const;

  // Sum over terms of |c| * prod_j B_j^{e_j}, an upper bound of |p| on the
  // box |x_j| <= B_j.
  double abs_bound(std::span<const double> box) const;

  Polynomial operator+(const Polynomial& o) const;
  Polynomial operator-(const Polynomial& o) const;
  Polynomial operator*(const Polynomial& o) const;
  Polynomial operator*(double s) const;
  Polynomial operator-() const { return *this * -1.0; }
  Polynomial pow(int k) const;
  bool operator==(const Polynomial& o) const = default;

  std::string to_string() const;

 private:
  void add_term(const Exponent& e, double c);
  void rebuild_cache();
  void check_point(std::size_t n) const;

  int dim_;
  std::map<Exponent, double> terms_;
  // Flat copy of terms_ for evaluation: exps_[k * dim_ + j], coeffs_[k].
  std::vector<int> exps_;
  std::vector<double> coeffs_;
  int max_exp_ = 0;
};

inline Polynomial operator*(double s, const Polynomial& p) { return p * s; }

// Lowest-degree homogeneous part of x -> p(t + x). Requires p(t) == 0 up to
// a tolerance relative to the coefficient scale; throws ValidationError if t
// is not on the variety.
Polynomial initial_form(const Polynomial& p, std::span<const double> t);

}  // namespace conelab
