#include <cmath>

#include "conelab/errors.hpp"
#include "conelab/wos.hpp"
#include "doctest.h"

using namespace conelab;

namespace {

Atom atom3(const char* p, Sign s) { return Atom{Polynomial::parse(p, 3), s}; }
ScalarField field3(const char* s) { return ScalarField::parse(s, 3); }

DomainSpec ball3() {
  DomainSpec d;
  d.dim = 3;
  d.op = CoefficientField::identity(3);
  d.source = ScalarField::constant(0.0, 3);
  d.neumann_data = ScalarField::constant(0.0, 3);
  d.dirichlet = BoundarySelector::parse("constraints");
  d.neumann = BoundarySelector::parse("sphere");
  return d;
}

// Ball of radius 1 with P != 0 removed; data on {P = 0}, reflection on the sphere.
DomainSpec variety(const char* p, const char* g) {
  DomainSpec d = ball3();
  d.constraints.push_back({{atom3(p, Sign::NotEqual)}});
  d.dirichlet_data = field3(g);
  return d;
}

// 0.5 < |x| < 1 with Dirichlet data 1/|x| on both spheres.
DomainSpec shell() {
  DomainSpec d = ball3();
  d.constraints.push_back({{atom3("x^2 + y^2 + z^2 - 0.25", Sign::Greater)}});
  d.dirichlet = BoundarySelector::parse("all");
  d.neumann = BoundarySelector{};
  d.dirichlet_data = field3("1 / r");
  return d;
}

WosConfig config(DomainSpec d, long walkers, std::uint64_t seed = 7) {
  WosConfig c;
  c.domain = std::move(d);
  c.walkers = walkers;
  c.seed = seed;
  return c;
}

}  // namespace

TEST_CASE("constant data on a plane") {
  const WosSolver s(config(variety("z", "5"), 2000));
  for (const Vec3& x : {Vec3(0.1, 0.2, 0.3), Vec3(-0.5, 0.5, -0.4)}) {
    const auto r = s.estimate(x);
    CHECK(r.mean == 5.0);
    CHECK(r.std_error == 0.0);
    CHECK(r.excluded == 0);
    CHECK(r.used == 2000);
  }
}

TEST_CASE("shell with the exact harmonic 1/r") {
  const WosSolver s(config(shell(), 20000));
  for (const Vec3& x : {Vec3(0.75, 0, 0), Vec3(0, -0.6, 0.2), Vec3(0.5, 0.4, 0.5)}) {
    const auto r = s.estimate(x);
    CHECK(std::abs(r.mean - 1.0 / x.norm()) <= 3.0 * r.std_error);
    CHECK(r.std_error > 0.0);
    CHECK(!r.flagged);
  }
}

TEST_CASE("shell gradient") {
  const WosSolver s(config(shell(), 20000));
  const Vec3 x(0.75, 0, 0);
  const auto g = s.gradient(x, 0.05);
  // Central difference of 1/r at r = 0.75 with step 0.05.
  const double exact = (1.0 / 0.8 - 1.0 / 0.7) / 0.1;
  CHECK(std::abs(g.value.x() - exact) <= 3.0 * g.std_error.x());
  CHECK(std::abs(g.value.x() + 1.0 / (0.75 * 0.75)) <= 3.0 * g.std_error.x() + 0.01);
  CHECK(std::abs(g.value.y()) <= 3.0 * g.std_error.y());
  CHECK(std::abs(g.value.z()) <= 3.0 * g.std_error.z());
  CHECK(g.low_confidence);  // tangential components are pure noise
}

TEST_CASE("gradients of linear and constant data") {
  DomainSpec half = ball3();
  half.constraints.push_back({{atom3("z", Sign::Greater)}});
  half.dirichlet = BoundarySelector::parse("all");
  half.neumann = BoundarySelector{};
  half.dirichlet_data = field3("x");
  const WosSolver s(config(half, 5000));
  const auto g = s.gradient(Vec3(0.1, 0.0, 0.4), 0.05);
  CHECK(std::abs(g.value.x() - 1.0) <= 3.0 * g.std_error.x());
  CHECK(std::abs(g.value.y()) <= 3.0 * g.std_error.y());
  CHECK(std::abs(g.value.z()) <= 3.0 * g.std_error.z());

  const WosSolver c(config(variety("z", "2"), 1000));
  const auto g0 = c.gradient(Vec3(0.1, 0.0, 0.4), 0.05);
  CHECK(g0.value.norm() == 0.0);
}

TEST_CASE("nearby points in the cusp domain agree") {
  const WosSolver s(config(variety("x^3 + y^2 - z^2 * x^2", "x^2 + y"), 20000));
  const Vec3 a(-0.3, 0.1, 0.5), b(-0.3, 0.12, 0.5);
  const auto ra = s.estimate(a), rb = s.estimate(b);
  CHECK(!ra.flagged);
  CHECK(std::abs(ra.mean - rb.mean) <= 10.0 * (b - a).norm() + 3.0 * (ra.std_error + rb.std_error));
}

TEST_CASE("standard error scales like M^-1/2") {
  const auto small = WosSolver(config(shell(), 10000)).estimate(Vec3(0.7, 0.1, 0));
  const auto large = WosSolver(config(shell(), 40000)).estimate(Vec3(0.7, 0.1, 0));
  CHECK(large.std_error / small.std_error == doctest::Approx(0.5).epsilon(0.3));
}

TEST_CASE("halving the shrink tolerance stays within the noise") {
  WosConfig c = config(shell(), 20000);
  c.shrink_tolerance = 1e-3;
  const auto coarse = WosSolver(c).estimate(Vec3(0.6, 0.2, 0.1));
  c.shrink_tolerance = 5e-4;
  const auto fine = WosSolver(c).estimate(Vec3(0.6, 0.2, 0.1));
  CHECK(std::abs(coarse.mean - fine.mean) < 2.0 * fine.std_error);
}

TEST_CASE("mean step count grows logarithmically in the tolerance") {
  WosConfig c = config(shell(), 4000);
  std::vector<double> steps;
  for (double eps : {1e-2, 1e-3, 1e-4, 1e-5, 1e-6}) {
    c.shrink_tolerance = eps;
    steps.push_back(WosSolver(c).estimate(Vec3(0.75, 0, 0)).mean_steps);
  }
  // Equal increments per decade: linear in log(1/eps).
  for (std::size_t i = 1; i < steps.size(); ++i) CHECK(steps[i] > steps[i - 1]);
  const double first = steps[1] - steps[0], last = steps.back() - steps[steps.size() - 2];
  CHECK(last < 2.0 * first);
  CHECK(last > 0.5 * first);
}

TEST_CASE("estimates are identical for any worker count") {
  WosConfig c = config(variety("x^3 + y^2 - z^2 * x^2", "x^2 + y"), 5000, 99);
  c.workers = 1;
  const auto one = WosSolver(c).estimate_batch({Vec3(-0.3, 0.1, 0.5), Vec3(0.2, 0.3, -0.1)});
  c.workers = 4;
  const auto four = WosSolver(c).estimate_batch({Vec3(0.2, 0.3, -0.1), Vec3(-0.3, 0.1, 0.5)});
  CHECK(one[0].mean == four[1].mean);
  CHECK(one[0].std_error == four[1].std_error);
  CHECK(one[1].mean == four[0].mean);
  c.seed = 100;
  CHECK(WosSolver(c).estimate(Vec3(0.2, 0.3, -0.1)).mean != one[1].mean);
}

TEST_CASE("step cap exclusions are counted and flagged") {
  WosConfig c = config(shell(), 500);
  c.max_steps = 2;
  const auto r = WosSolver(c).estimate(Vec3(0.75, 0, 0));
  CHECK(r.excluded > 5);
  CHECK(r.used + r.excluded == 500);
  CHECK(r.flagged);
}

TEST_CASE("unsupported configurations are rejected") {
  DomainSpec d = variety("z", "1");
  d.source = field3("1");
  CHECK_THROWS_WITH_AS(WosSolver(config(d, 10)), doctest::Contains("volume source"), ValidationError);
  d = variety("z", "1");
  d.op = CoefficientField(3, {field3("2"), field3("0"), field3("0"), field3("0"), field3("1"), field3("0"),
                              field3("0"), field3("0"), field3("1")},
                          1e-6);
  CHECK_THROWS_AS(WosSolver(config(d, 10)), ValidationError);
  d = variety("z", "1");
  d.neumann = BoundarySelector::parse("all");
  d.dirichlet = BoundarySelector{};
  CHECK_THROWS_AS(WosSolver(config(d, 10)), ValidationError);
  d = variety("z", "1");
  d.dim = 2;
  CHECK_THROWS_AS(WosSolver(config(d, 10)), ValidationError);
  const WosSolver s(config(shell(), 10));
  CHECK_THROWS_AS(s.estimate(Vec3(0.1, 0, 0)), ValidationError);
  CHECK_THROWS_AS(s.gradient(Vec3(0.55, 0, 0), 0.1), ValidationError);
}
