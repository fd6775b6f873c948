#include <cmath>
#include <memory>
#include <numbers>
#include <random>

#include "conelab/errors.hpp"
#include "conelab/regularity.hpp"
#include "doctest.h"
#include "domains.hpp"

using namespace conelab;
namespace td = conelab::testdomains;

namespace {

constexpr double kPi = std::numbers::pi;

ScalarField field(const char* s, int dim = 2) { return ScalarField::parse(s, dim); }

SolutionField fem(DomainSpec d, const char* g, double h) {
  d.dirichlet_data = field(g);
  auto mesh = std::make_shared<const TriMesh>(build_mesh(d, h, detect_grading_centers(d)));
  return solve(assemble(mesh, d));
}

// Area of a triangle clipped to a disk, with the disk replaced by a regular
// polygon of many sides (Sutherland-Hodgman).
double clipped_area(std::vector<Vec2> poly, const Vec2& c, double r) {
  const int sides = 2048;
  static std::vector<Vec2> unit;
  if (unit.empty())
    for (int k = 0; k <= sides; ++k) unit.emplace_back(std::cos(2.0 * kPi * k / sides), std::sin(2.0 * kPi * k / sides));
  // Polygon radius chosen so its area equals the disk area.
  const double rp = r * std::sqrt(2.0 * kPi / (sides * std::sin(2.0 * kPi / sides)));
  std::vector<Vec2> out;
  for (int k = 0; k < sides && !poly.empty(); ++k) {
    const Vec2 p = c + rp * unit[static_cast<std::size_t>(k)], q = c + rp * unit[static_cast<std::size_t>(k) + 1];
    auto side = [&](const Vec2& x) { return (q - p).x() * (x - p).y() - (q - p).y() * (x - p).x(); };
    out.clear();
    for (std::size_t i = 0; i < poly.size(); ++i) {
      const Vec2 a = poly[i], b = poly[(i + 1) % poly.size()];
      const double sa = side(a), sb = side(b);
      if (sa >= 0) out.push_back(a);
      if ((sa >= 0) != (sb >= 0)) out.push_back(a + sa / (sa - sb) * (b - a));
    }
    poly.swap(out);
  }
  double s = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Vec2 a = poly[i], b = poly[(i + 1) % poly.size()];
    s += a.x() * b.y() - a.y() * b.x();
  }
  return 0.5 * std::abs(s);
}

AnnulusProfile synthetic(const std::function<double(double r, double p)>& mass) {
  AnnulusProfile prof;
  prof.p_values = default_p_grid();
  for (int j = 0; j <= 8; ++j) prof.radii.push_back(std::ldexp(0.25, -j));
  for (int j = 0; j < 8; ++j) {
    std::vector<double> row;
    for (double p : prof.p_values) row.push_back(mass(prof.radii[static_cast<std::size_t>(j)], p));
    prof.mass.push_back(row);
  }
  prof.missing.assign(8, 0);
  prof.excluded.assign(8, 0);
  prof.excluded[6] = prof.excluded[7] = 1;
  return prof;
}

}  // namespace

TEST_CASE("profile of a unit gradient measures annulus areas") {
  const auto u = fem(td::square(), "x", 0.1);
  const auto centred = annulus_profile(u, Vec3(0.1, -0.2, 0));
  CHECK(centred.radii[0] == doctest::Approx(0.375));
  for (int j = 0; j < 8; ++j) {
    const double ro = centred.radii[static_cast<std::size_t>(j)], ri = centred.radii[static_cast<std::size_t>(j) + 1];
    CHECK(centred.mass[static_cast<std::size_t>(j)][0] == doctest::Approx(kPi * (ro * ro - ri * ri)).epsilon(1e-9));
  }
  // At a corner only a quarter of each annulus is inside.
  const auto corner = annulus_profile(u, Vec3(1, 1, 0));
  for (int j = 0; j < 8; ++j) {
    const double ro = corner.radii[static_cast<std::size_t>(j)], ri = corner.radii[static_cast<std::size_t>(j) + 1];
    CHECK(corner.mass[static_cast<std::size_t>(j)][0] == doctest::Approx(kPi * (ro * ro - ri * ri) / 4).epsilon(1e-9));
    CHECK(corner.mass[static_cast<std::size_t>(j)][12] == doctest::Approx(corner.mass[static_cast<std::size_t>(j)][0]));
  }
}

TEST_CASE("property: exact triangle and disk intersection") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> coord(-1.0, 1.0);
  for (int c = 0; c < 100; ++c) {
    TriMesh m;
    m.vertices = {Vec2(coord(rng), coord(rng)), Vec2(coord(rng), coord(rng)), Vec2(coord(rng), coord(rng))};
    if ((m.vertices[1] - m.vertices[0]).x() * (m.vertices[2] - m.vertices[0]).y() -
            (m.vertices[1] - m.vertices[0]).y() * (m.vertices[2] - m.vertices[0]).x() <
        0)
      std::swap(m.vertices[1], m.vertices[2]);
    m.triangles = {{0, 1, 2}};
    m.radius = 2.0;
    SolutionField u;
    u.mesh = std::make_shared<const TriMesh>(m);
    u.values = Eigen::VectorXd::Zero(3);
    u.gradients = {Vec2(0.6, 0.8)};
    const Vec3 t(0.5 * coord(rng), 0.5 * coord(rng), 0);
    ProfileOptions opt;
    opt.r0 = 1.2;
    opt.levels = 3;
    const auto prof = annulus_profile(u, t, opt);
    for (int j = 0; j < 3; ++j) {
      const double ro = prof.radii[static_cast<std::size_t>(j)], ri = prof.radii[static_cast<std::size_t>(j) + 1];
      const double expect = clipped_area(m.vertices, t.head<2>(), ro) - clipped_area(m.vertices, t.head<2>(), ri);
      CHECK(prof.mass[static_cast<std::size_t>(j)][0] == doctest::Approx(expect).epsilon(2e-5).scale(1.0));
    }
  }
}

TEST_CASE("slit corner solution profile") {
  const auto u = fem(td::slit(), "sqrt(r) * sin(theta / 2)", 0.05);
  const auto prof = annulus_profile(u, Vec3::Zero());
  // Exact: integral of |grad u|^2 = 1 / (4 r) over annulus j is pi (r_j - r_{j+1}) / 2.
  for (int j = 0; j < 6; ++j) {
    const double ro = prof.radii[static_cast<std::size_t>(j)], ri = prof.radii[static_cast<std::size_t>(j) + 1];
    CHECK(prof.mass[static_cast<std::size_t>(j)][0] == doctest::Approx(kPi * (ro - ri) / 2).epsilon(0.03));
  }
  const auto fit = fit_scaling_exponent(prof, 0);
  CHECK(fit.slope == doctest::Approx(1.0).epsilon(0.1));
  CHECK(!fit.low_confidence);
  const auto ce = critical_exponent(prof);
  REQUIRE(ce.p_star);
  CHECK(*ce.p_star >= 3.6);
  CHECK(*ce.p_star <= 4.4);
  CHECK(ce.confident);
  // beta(p) nonincreasing
  for (std::size_t k = 1; k < ce.fits.size(); ++k) CHECK(ce.fits[k].slope <= ce.fits[k - 1].slope + 0.05);
}

TEST_CASE("smooth solution has unbounded exponent") {
  const auto u = fem(td::disk(), "x * y + x", 0.05);
  const auto ce = critical_exponent(annulus_profile(u, Vec3(0.2, 0.1, 0)));
  CHECK(!ce.p_star);
  CHECK(format_p_star(ce) == "unbounded");
  for (const auto& f : ce.fits) CHECK(f.slope == doctest::Approx(2.0).epsilon(0.05));
}

TEST_CASE("zero field profile") {
  const auto u = fem(td::disk(), "0", 0.1);
  const auto prof = annulus_profile(u, Vec3::Zero());
  for (const auto& row : prof.mass)
    for (double m : row) CHECK(m == 0.0);
  CHECK_THROWS_AS(critical_exponent(prof), NumericalError);
  CHECK_THROWS_AS(fit_scaling_exponent(prof, 0), NumericalError);
}

TEST_CASE("scaling fits of analytic profiles") {
  const auto corner = synthetic([](double r, double p) { return std::pow(r, 2.0 - p / 2.0); });
  for (std::size_t k = 0; k < corner.p_values.size(); ++k)
    CHECK(fit_scaling_exponent(corner, k).slope == doctest::Approx(2.0 - corner.p_values[k] / 2.0).epsilon(1e-12));
  CHECK(*critical_exponent(corner).p_star == doctest::Approx(4.0));
  const auto axis = synthetic([](double r, double p) { return 3.0 * std::pow(r, 2.0 - p / 3.0); });
  CHECK(*critical_exponent(axis).p_star == doctest::Approx(6.0));
  const auto bounded = synthetic([](double r, double) { return r * r; });
  CHECK(!critical_exponent(bounded).p_star);
}

TEST_CASE("property: critical exponent recovers the zero crossing") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> crossing(2.3, 7.7), amp(0.2, 3.0), noise(-0.02, 0.02);
  for (int c = 0; c < 100; ++c) {
    const double ps = crossing(rng), a = amp(rng);
    std::vector<double> jitter(8);
    for (auto& j : jitter) j = noise(rng);
    int j = 0;
    auto prof = synthetic([&](double r, double p) {
      const double m = a * std::pow(r, 2.0 * (1.0 - p / ps)) * std::exp(jitter[static_cast<std::size_t>(j / 25)]);
      ++j;
      return m;
    });
    const auto ce = critical_exponent(prof);
    REQUIRE(ce.p_star);
    CHECK(*ce.p_star == doctest::Approx(ps).epsilon(0.05));
    for (std::size_t k = 1; k < ce.fits.size(); ++k) CHECK(ce.fits[k].slope <= ce.fits[k - 1].slope + 0.05);
  }
}

TEST_CASE("slice poincare ratios") {
  SUBCASE("slit corner solution") {
    const DomainSpec d = td::slit();
    SliceSpec spec;
    spec.stratum = StratumSpec::point_stratum(Vec3::Zero());
    for (int k = 3; k <= 8; ++k) spec.etas.push_back(std::ldexp(1.0, -k));
    const auto rows = slice_poincare_ratio(sample_field(field("sqrt(r) * sin(theta / 2)"), d), spec);
    REQUIRE(rows.size() == 6);
    // On the circle r = eta: ||u||^2 = pi eta^2 / 2... so ratio = eta sqrt(2).
    for (const auto& r : rows) CHECK(r.ratio == doctest::Approx(std::sqrt(2.0) * r.eta).epsilon(1e-3));
    CHECK(slice_slope(rows) == doctest::Approx(1.0).epsilon(0.15));

    const auto u = fem(d, "sqrt(r) * sin(theta / 2)", 0.05);
    const auto fr = slice_poincare_ratio(sample_field(u), spec);
    REQUIRE(fr.size() == 6);
    CHECK(slice_slope(fr) >= 0.85);
  }
  SUBCASE("product with a bump in the cusp domain") {
    DomainSpec d;
    d.dim = 3;
    d.constraints.push_back({{Atom{Polynomial::parse("x^3 + y^2 - z^2 * x^2", 3), Sign::NotEqual}}});
    const auto u = sample_field(field("(x^3 + y^2 - z^2 * x^2) * (1 - x^2 - y^2 - z^2)^2", 3), d);
    SliceSpec spec;
    spec.ambient_dim = 3;
    spec.stratum = StratumSpec::line(Vec3::Zero(), Vec3::UnitZ());
    for (int k = 3; k <= 8; ++k) spec.etas.push_back(std::ldexp(1.0, -k));
    const auto rows = slice_poincare_ratio(u, spec);
    REQUIRE(rows.size() == 6);
    CHECK(slice_slope(rows) >= 0.85);
    double max6 = 0.0;
    for (const auto& r : rows) max6 = std::max(max6, r.ratio / r.eta);
    spec.etas.push_back(std::ldexp(1.0, -9));
    spec.etas.push_back(std::ldexp(1.0, -10));
    double max8 = 0.0;
    for (const auto& r : slice_poincare_ratio(u, spec)) max8 = std::max(max8, r.ratio / r.eta);
    CHECK(max8 <= 1.1 * max6);
  }
  SUBCASE("zero field is degenerate") {
    SliceSpec spec;
    spec.stratum = StratumSpec::point_stratum(Vec3::Zero());
    spec.etas = {0.1, 0.05};
    const auto rows = slice_poincare_ratio(sample_field(field("0"), td::disk()), spec);
    REQUIRE(rows.size() == 2);
    for (const auto& r : rows) CHECK(r.degenerate);
    CHECK_THROWS_AS(slice_slope(rows), NumericalError);
  }
  SUBCASE("hypersurface stratum uses the tube") {
    // u = y near {y = 0}: ||u|| on the two lines is (2 * 2 ext eta^p)^(1/p),
    // ||grad u|| over the tube is (2 ext 2 eta)^(1/p).
    DomainSpec d = td::square();
    SliceSpec spec;
    spec.stratum = StratumSpec::line(Vec3::Zero(), Vec3::UnitX());
    spec.etas = {0.2, 0.1, 0.05};
    spec.p = 3.0;
    const auto rows = slice_poincare_ratio(sample_field(field("y"), d), spec);
    for (const auto& r : rows) CHECK(r.ratio == doctest::Approx(std::pow(r.eta, 1.0 - 1.0 / 3.0)));
  }
  SUBCASE("levels must be below delta") {
    SliceSpec spec;
    spec.stratum = StratumSpec::point_stratum(Vec3::Zero());
    spec.etas = {0.5};
    CHECK_THROWS_AS(slice_poincare_ratio(sample_field(field("x"), td::disk()), spec), ValidationError);
  }
}

TEST_CASE("weighted gradient norms") {
  const auto u = fem(td::disk(), "x", 0.1);
  WeightSpec none;
  none.kappa = 0.0;
  CHECK(weighted_gradient_norm(u, none, 3.0) == doctest::Approx(u.mesh->area()));
  const auto zero = fem(td::disk(), "0", 0.1);
  WeightSpec w;
  w.singular_set = {Vec3::Zero()};
  CHECK(weighted_gradient_norm(zero, w, 2.0) == 0.0);

  // Weighted p = 4 mass at the slit tip settles, unweighted p = 4.5 grows.
  std::vector<double> weighted, plain;
  for (double h : {0.1, 0.05, 0.025}) {
    const auto s = fem(td::slit(), "sqrt(r) * sin(theta / 2)", h);
    weighted.push_back(weighted_gradient_norm(s, w, 4.0));
    plain.push_back(weighted_gradient_norm(s, none, 4.5));
  }
  // Exact weighted value: integral of r^4 / (16 r^2) over the unit disk = pi / 32.
  CHECK(weighted[2] == doctest::Approx(kPi / 32).epsilon(0.02));
  CHECK(std::abs(weighted[2] / weighted[1] - 1.0) < 0.02);
  CHECK(plain[1] > 1.1 * plain[0]);
  CHECK(plain[2] > 1.1 * plain[1]);
}

TEST_CASE("walk-on-spheres profile") {
  DomainSpec d;
  d.dim = 3;
  d.op = CoefficientField::identity(3);
  d.source = ScalarField::constant(0.0, 3);
  d.constraints.push_back({{Atom{Polynomial::parse("z", 3), Sign::Greater}}});
  d.dirichlet = BoundarySelector::parse("all");
  d.dirichlet_data = field("x", 3);
  WosConfig cfg;
  cfg.domain = d;
  cfg.walkers = 1000;
  cfg.seed = 3;
  const WosSolver s(cfg);
  WosProfileOptions opt;
  opt.base.levels = 3;
  opt.base.p_values = {2.0};
  opt.samples = 6;
  const auto prof = annulus_profile(s, Vec3(0, 0, 0.5), opt);
  for (int j = 0; j < 3; ++j) {
    const double ro = prof.radii[static_cast<std::size_t>(j)], ri = prof.radii[static_cast<std::size_t>(j) + 1];
    CHECK(!prof.excluded[static_cast<std::size_t>(j)]);
    CHECK(prof.mass[static_cast<std::size_t>(j)][0] == doctest::Approx(4.0 / 3.0 * kPi * (ro * ro * ro - ri * ri * ri)).epsilon(0.25));
  }
}
