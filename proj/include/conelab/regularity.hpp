#pragma once

// Local gradient integrability near boundary points: dyadic annulus masses
// of |grad u|^p, their scaling exponents and the critical exponent p*, slice
// Poincare ratios near strata, and distance-weighted gradient norms.

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "conelab/cone.hpp"
#include "conelab/domain.hpp"
#include "conelab/fem.hpp"
#include "conelab/wos.hpp"

namespace conelab {

// {2, 2.25, ..., 8}
std::vector<double> default_p_grid();

struct ProfileOptions {
  double r0 = 0.0;  // zero means 0.25 * domain radius
  int levels = 8;
  std::vector<double> p_values = default_p_grid();
  int discard_inner = 2;
};

struct AnnulusProfile {
  Vec3 center = Vec3::Zero();
  // radii[j] = r0 2^-j for j = 0..levels; annulus j is B(t, radii[j]) minus
  // B(t, radii[j + 1]).
  std::vector<double> radii;
  std::vector<double> p_values;
  std::vector<std::vector<double>> mass;  // mass[j][k] for p_values[k]
  std::vector<char> missing;              // annulus has no quadrature support
  std::vector<char> excluded;             // dropped from fits
  int annuli() const { return static_cast<int>(missing.size()); }
};

// Exact per-triangle integration of the piecewise constant |grad u|^p.
AnnulusProfile annulus_profile(const SolutionField& u, const Vec3& t, const ProfileOptions& opt = {});

struct WosProfileOptions {
  ProfileOptions base;
  int samples = 16;  // stratified samples per annulus
  // When set, annuli live in the plane normal to this line through t and
  // masses are per unit length along the line.
  std::optional<Vec3> axis;
};

// Stratified Monte-Carlo with walk-on-spheres gradients; annuli where more
// than 20% of the gradient samples are low-confidence are excluded.
AnnulusProfile annulus_profile(const WosSolver& solver, const Vec3& t, const WosProfileOptions& opt = {});

struct ScalingFit {
  double slope = 0.0;
  double r2 = 0.0;
  int points = 0;
  bool low_confidence = false;
};

// Least-squares slope of log m[j][p] against log r_j over the annuli kept
// for fitting. Throws NumericalError with fewer than 4 usable annuli.
ScalingFit fit_scaling_exponent(const AnnulusProfile& profile, std::size_t p_index);

struct CriticalExponent {
  Vec3 center = Vec3::Zero();
  std::optional<double> p_star;  // empty: unbounded
  double margin = 0.1;
  bool confident = true;
  std::vector<ScalingFit> fits;  // one per p value
};

// Zero crossing of beta(p) by linear interpolation; unbounded when
// beta(p_max) > margin. Throws NumericalError when every fit is
// low-confidence.
CriticalExponent critical_exponent(const AnnulusProfile& profile, double margin = 0.1);

std::string format_p_star(const CriticalExponent& c);

// A field sampled pointwise: returns false outside the domain, otherwise
// writes the value and gradient.
using FieldSampler = std::function<bool(const Vec3& x, double& value, Vec3& gradient)>;

FieldSampler sample_field(const ScalarField& u, const DomainSpec& domain);
FieldSampler sample_field(const SolutionField& u);

struct SliceSpec {
  StratumSpec stratum;
  int ambient_dim = 2;
  double delta = 0.25;
  std::vector<double> etas;  // each below delta
  double p = 2.0;
  // Half-length of the part of a line or hyperplane stratum that is used.
  double extent = 0.5;
  int samples = 64;  // per axis of the slice parametrization
};

struct SliceRow {
  double eta = 0.0;
  double num = 0.0;  // ||u||_{L^p(V_eta)}
  double den = 0.0;  // ||grad u||_{L^p} over V_eta, or over the tube of width eta for hypersurface strata
  double ratio = 0.0;
  bool degenerate = false;  // den == 0
};

// Rows for every eta whose slice meets the domain.
std::vector<SliceRow> slice_poincare_ratio(const FieldSampler& u, const SliceSpec& spec);

// Least-squares slope of log ratio against log eta over non-degenerate rows.
double slice_slope(const std::vector<SliceRow>& rows);

struct WeightSpec {
  std::vector<Vec3> singular_set;
  double kappa = 1.0;
  double power = 1.0;  // N
};

// Integral of (d(x, X)^(kappa N) |grad u|)^p over the mesh.
double weighted_gradient_norm(const SolutionField& u, const WeightSpec& w, double p);

}  // namespace conelab
