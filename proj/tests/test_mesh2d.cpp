#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

#include "conelab/errors.hpp"
#include "conelab/mesh2d.hpp"
#include "doctest.h"
#include "domains.hpp"

using namespace conelab;
namespace td = conelab::testdomains;

namespace {

constexpr double kPi = std::numbers::pi;

double max_boundary_vertex_residual(const TriMesh& m, const DomainSpec& d) {
  double r = 0.0;
  for (const auto& e : m.boundary_edges) {
    for (int v : {e.a, e.b}) {
      const Vec3 x(m.vertices[static_cast<std::size_t>(v)].x(), m.vertices[static_cast<std::size_t>(v)].y(), 0);
      r = std::max(r, d.piece_distance(x, e.piece));
    }
  }
  return r;
}

double max_midpoint_gap(const TriMesh& m) {
  double r = 0.0;
  for (const auto& e : m.boundary_edges) {
    const Vec2 mid = 0.5 * (m.vertices[static_cast<std::size_t>(e.a)] + m.vertices[static_cast<std::size_t>(e.b)]);
    r = std::max(r, std::abs(1.0 - mid.norm()));
  }
  return r;
}

}  // namespace

TEST_CASE("structured square mesh") {
  const auto d = td::square();
  const auto m = build_mesh(d, 0.5, {});
  CHECK(m.triangles.size() == 32);
  CHECK(m.vertices.size() == 25);
  CHECK(m.boundary_edges.size() == 16);
  CHECK(m.flagged.empty());
  const auto q = mesh_quality(m);
  CHECK(q.conformity);
  CHECK(q.min_angle == doctest::Approx(45.0));
  CHECK(m.area() == doctest::Approx(4.0));
  for (const auto& e : m.boundary_edges) CHECK(e.tag == BoundaryTag::Dirichlet);
}

TEST_CASE("disk mesh") {
  const auto d = td::disk();
  const double h = 0.1;
  const auto m = build_mesh(d, h, {});
  // Roughly area / (h^2 / 2) triangles.
  const double expected = kPi / (0.5 * h * h);
  CHECK(static_cast<double>(m.triangles.size()) > 0.85 * expected);
  CHECK(static_cast<double>(m.triangles.size()) < 1.15 * expected);
  const auto q = mesh_quality(m);
  CHECK(q.conformity);
  CHECK(q.min_angle >= 15.0);
  CHECK(m.flagged.empty());
  CHECK(max_boundary_vertex_residual(m, d) <= kEpsFit * h);
  // Inscribed polygon: area deficit bounded by perimeter * sagitta.
  CHECK(m.area() <= kPi);
  CHECK(kPi - m.area() <= 2 * kPi * h * h / 4);
}

TEST_CASE("boundary residuals under halving h") {
  const auto d = td::disk();
  const auto circle = Polynomial::parse("x^2 + y^2 - 1", 2);
  double prev = 0.0;
  for (double h : {0.2, 0.1, 0.05}) {
    const auto m = build_mesh(d, h, {});
    // Vertices sit on the circle to rounding; edge midpoints deviate by the
    // sagitta, which shrinks quadratically.
    double vertex_residual = 0.0;
    for (const auto& e : m.boundary_edges)
      for (int v : {e.a, e.b})
        vertex_residual = std::max(vertex_residual, std::abs(circle.eval(Vec3(m.vertices[static_cast<std::size_t>(v)].x(),
                                                                              m.vertices[static_cast<std::size_t>(v)].y(), 0))));
    CHECK(vertex_residual <= 1e-14);
    const double g = max_midpoint_gap(m);
    CHECK(g <= h * h / 2);
    if (prev > 0) CHECK(g <= prev / 2);
    prev = g;
  }
}

TEST_CASE("mesh area against Monte Carlo") {
  const auto d = td::lshape();
  const double h = 0.1;
  const auto m = build_mesh(d, h, detect_grading_centers(d));
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  const int n = 1000000;
  int hits = 0;
  for (int i = 0; i < n; ++i)
    if (d.contains(Vec3(u(rng), u(rng), 0))) ++hits;
  const double mc = 9.0 * hits / n;
  CHECK(mc == doctest::Approx(3.0).epsilon(0.01));
  CHECK(std::abs(m.area() - mc) <= h * 8.0 * 0.05 + 4 * 9.0 * std::sqrt(0.33 * 0.67 / n));
  CHECK(mesh_quality(m).conformity);
}

TEST_CASE("grading centers") {
  SUBCASE("slit tip") {
    const auto c = detect_grading_centers(td::slit());
    REQUIRE(c.size() == 1);
    CHECK(c[0].point.norm() < 1e-8);
    CHECK(c[0].gamma == 3.0);
  }
  SUBCASE("L-shape corners") {
    const auto c = detect_grading_centers(td::lshape());
    // Five convex corners plus the reentrant one.
    CHECK(c.size() == 6);
    bool origin = false;
    for (const auto& g : c) origin = origin || g.point.norm() < 1e-8;
    CHECK(origin);
  }
  SUBCASE("disk has none") { CHECK(detect_grading_centers(td::disk()).empty()); }
}

TEST_CASE("slit mesh") {
  const auto d = td::slit();
  const double h = 0.1;
  const auto m = build_mesh(d, h, detect_grading_centers(d));
  const auto q = mesh_quality(m);
  CHECK(q.conformity);
  CHECK(m.flagged.empty());
  CHECK(q.min_angle_outer >= 15.0);
  CHECK(q.min_angle >= 5.0);
  // The slit appears twice in the boundary, once per side.
  double crack_len = 0.0;
  for (const auto& e : m.boundary_edges) {
    if (e.piece.kind != BoundaryPiece::Kind::Constraint) continue;
    const Vec2 a = m.vertices[static_cast<std::size_t>(e.a)], b = m.vertices[static_cast<std::size_t>(e.b)];
    CHECK(std::abs(a.y()) < 1e-12);
    CHECK(std::abs(b.y()) < 1e-12);
    crack_len += (a - b).norm();
  }
  CHECK(crack_len == doctest::Approx(2.0).epsilon(1e-9));
  // Side hints separate the two copies of each interior slit vertex.
  int up = 0, down = 0;
  for (std::size_t v = 0; v < m.vertices.size(); ++v) {
    const Vec2 x = m.vertices[v];
    if (std::abs(x.y()) > 1e-12 || x.x() <= 1e-9 || x.x() >= 1 - 1e-9) continue;
    if (m.side_hint[v].y() > 0) ++up;
    if (m.side_hint[v].y() < 0) ++down;
  }
  CHECK(up > 0);
  CHECK(up == down);
  // Smallest elements at the tip.
  std::size_t smallest = 0;
  for (std::size_t t = 1; t < m.triangles.size(); ++t)
    if (m.diameter(t) < m.diameter(smallest)) smallest = t;
  CHECK(m.centroid(smallest).norm() < 0.01);
  CHECK(m.area() == doctest::Approx(kPi).epsilon(0.01));
}

TEST_CASE("grading law slope") {
  const auto d = td::disk();
  const double gamma = 3.0;
  const auto m = build_mesh(d, 0.1, {{Vec2::Zero(), gamma}});
  // Least-squares slope of log size against log distance.
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int n = 0;
  for (std::size_t t = 0; t < m.triangles.size(); ++t) {
    const double r = m.centroid(t).norm();
    if (r < 1e-3 || r > 0.5) continue;
    const double x = std::log(r), y = std::log(m.diameter(t));
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++n;
  }
  REQUIRE(n > 50);
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  CHECK(slope == doctest::Approx((gamma - 1) / gamma).epsilon(0.2));
}

TEST_CASE("flipped triangle breaks conformity") {
  auto m = build_mesh(td::square(), 0.5, {});
  REQUIRE(mesh_quality(m).conformity);
  std::swap(m.triangles[3][1], m.triangles[3][2]);
  CHECK_FALSE(mesh_quality(m).conformity);
}

TEST_CASE("uniform refinement") {
  const auto d = td::slit();
  const auto m = build_mesh(d, 0.2, detect_grading_centers(d));
  const auto r = refine_uniform(m);
  CHECK(r.triangles.size() == 4 * m.triangles.size());
  CHECK(r.boundary_edges.size() == 2 * m.boundary_edges.size());
  CHECK(r.area() == doctest::Approx(m.area()).epsilon(1e-12));
  CHECK(mesh_quality(r).conformity);
  CHECK(r.h == doctest::Approx(0.1));
}

TEST_CASE("mesh export") {
  const auto m = build_mesh(td::square(), 1.0, {});
  std::ostringstream os;
  write_mesh(os, m);
  std::istringstream is(os.str());
  std::string tag;
  std::size_t n = 0;
  is >> tag >> n;
  CHECK(tag == "V");
  CHECK(n == m.vertices.size());
  for (std::size_t i = 0; i < n; ++i) {
    double x, y;
    is >> x >> y;
    CHECK(x == m.vertices[i].x());
    CHECK(y == m.vertices[i].y());
  }
  is >> tag >> n;
  CHECK(tag == "T");
  CHECK(n == m.triangles.size());
  for (std::size_t i = 0; i < n; ++i) {
    int a, b, c;
    is >> a >> b >> c;
    CHECK(a == m.triangles[i][0]);
  }
  is >> tag >> n;
  CHECK(tag == "B");
  CHECK(n == m.boundary_edges.size());
  is >> tag >> tag >> tag;
  CHECK(tag == "DIRICHLET");
}

TEST_CASE("invalid mesh requests") {
  CHECK_THROWS_AS(build_mesh(td::disk(), 0.0, {}), ValidationError);
  CHECK_THROWS_AS(build_mesh(td::disk(), 2.0, {}), ValidationError);
  DomainSpec empty = td::disk();
  empty.constraints.push_back({{td::atom("x^2 + y^2 + 1", Sign::Less)}});
  CHECK_THROWS_AS(build_mesh(empty, 0.2, {}), ValidationError);
}

TEST_CASE("property: disks cut by a line") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int c = 0; c < 100; ++c) {
    const double ang = kPi * u(rng), off = 0.8 * u(rng);
    const double a = std::cos(ang), b = std::sin(ang);
    DomainSpec d = td::disk();
    d.constraints.push_back({{Atom{Polynomial(2, {{{1, 0}, a}, {{0, 1}, b}, {{0, 0}, off}}), Sign::Greater}}});
    const double h = 0.2;
    const auto m = build_mesh(d, h, detect_grading_centers(d));
    const auto q = mesh_quality(m);
    CHECK(q.conformity);
    CHECK(q.min_angle_outer >= 15.0);
    CHECK(q.min_angle >= 5.0);
    // Unresolved corners leave at most a few flagged vertices each.
    CHECK(m.flagged.size() <= 3 * m.grading_centers.size());
    // Distance of boundary vertices to the true boundary: circle arc inside
    // the half-plane or chord inside the disk.
    double worst = 0.0;
    for (const auto& e : m.boundary_edges) {
      for (int v : {e.a, e.b}) {
        const Vec2 x = m.vertices[static_cast<std::size_t>(v)];
        const double line = a * x.x() + b * x.y() + off;
        const double arc = std::abs(1.0 - x.norm()) + std::max(0.0, -line);
        const double chord = std::abs(line) + std::max(0.0, x.norm() - 1.0);
        worst = std::max(worst, std::min(arc, chord));
      }
    }
    CHECK(worst <= kEpsFit * h);
    const double delta = std::abs(off);
    const double segment = std::acos(delta) - delta * std::sqrt(1 - delta * delta);
    const double exact = off > 0 ? kPi - segment : segment;
    CHECK(m.area() <= exact + 1e-12);
    CHECK(exact - m.area() <= 2 * kPi * h * h / 4);
  }
}
