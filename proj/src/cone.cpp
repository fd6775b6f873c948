#include "conelab/cone.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <Eigen/Dense>

#include "conelab/errors.hpp"
#include "conelab/kdtree.hpp"
#include "conelab/parallel.hpp"
#include "conelab/random.hpp"

namespace conelab {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr int kCircleBlock = 64;
constexpr int kCoverageLattice = 20000;

Polynomial sphere_polynomial(const Ball& b, int dim) {
  Polynomial s = Polynomial::constant(dim, -b.radius * b.radius);
  for (int j = 0; j < dim; ++j) {
    const Polynomial xj = Polynomial::variable(dim, j) - Polynomial::constant(dim, b.center[j]);
    s = s + xj * xj;
  }
  return s;
}

// Fibonacci lattice on S^2, rotated by a seeded random rotation.
std::vector<Vec3> sphere_lattice(int n, std::uint64_t seed) {
  std::vector<Vec3> out;
  out.reserve(static_cast<std::size_t>(n));
  Mat3 rot = Mat3::Identity();
  if (seed != 0) {
    Rng rng(seed);
    const Vec3 a = rng.unit_vector(3);
    Vec3 b = rng.unit_vector(3);
    b = (b - b.dot(a) * a).normalized();
    rot.col(0) = a;
    rot.col(1) = b;
    rot.col(2) = a.cross(b);
  }
  const double golden = kPi * (3.0 - std::sqrt(5.0));
  for (int i = 0; i < n; ++i) {
    const double z = 1.0 - (2.0 * i + 1.0) / n;
    const double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double phi = golden * i;
    out.push_back(rot * Vec3(rho * std::cos(phi), rho * std::sin(phi), z));
  }
  return out;
}

struct Frame {
  std::vector<Vec3> basis;  // orthonormal, size 0..3
};

Frame full_frame(int n) {
  Frame f;
  for (int j = 0; j < n; ++j) f.basis.push_back(Vec3::Unit(j));
  return f;
}

struct Circle {
  Vec3 u, w;
  double phase;
};

// Fixed sampling design reused at every radius.
struct Design {
  Frame frame;
  std::vector<Vec3> directions;  // region sets
  std::vector<Circle> circles;   // surface sets
  int steps = 0;
  double resolution = 0.0;
};

Design make_design(const SampledSet& x, const Frame& frame, const LinkOptions& opt) {
  Design d;
  d.frame = frame;
  const int m = static_cast<int>(frame.basis.size());
  Rng rng(derive_seed(opt.seed, "link-design"));
  if (m == 0) return d;
  if (m == 1) {
    d.directions = {frame.basis[0], -frame.basis[0]};
    d.resolution = 2.0;
    return d;
  }
  if (x.kind() == SampledSet::Kind::Region) {
    if (m == 2) {
      const double phase = 2.0 * kPi * rng.uniform();
      for (int i = 0; i < opt.samples; ++i) {
        const double a = phase + 2.0 * kPi * i / opt.samples;
        d.directions.push_back(std::cos(a) * frame.basis[0] + std::sin(a) * frame.basis[1]);
      }
      d.resolution = 2.0 * std::sin(kPi / opt.samples);
    } else {
      d.directions = sphere_lattice(opt.samples * std::max(1, opt.region_factor), rng.bits() | 1);
      const KdTree tree(d.directions);
      double worst = 0.0;
      for (std::size_t i = 0; i < d.directions.size(); ++i) {
        double dist = 0.0;
        tree.nearest(d.directions[i], &dist, i);
        worst = std::max(worst, dist);
      }
      d.resolution = worst;
    }
    return d;
  }
  if (m == 2) {
    d.circles.push_back({frame.basis[0], frame.basis[1], 2.0 * kPi * rng.uniform()});
    d.steps = opt.samples;
  } else {
    for (int i = 0; i < opt.samples; ++i) {
      const Vec3 nrm = rng.unit_vector(3);
      const Vec3 seed = std::abs(nrm.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
      const Vec3 u = (seed - seed.dot(nrm) * nrm).normalized();
      const Vec3 w = nrm.cross(u);
      d.circles.push_back({u, w, 2.0 * kPi * rng.uniform()});
    }
    d.steps = opt.circle_steps;
  }
  d.resolution = 0.0;
  return d;
}

void march_circle(const SampledSet& x, const Circle& c, int steps, const Vec3& t, double r, std::vector<Vec3>& out) {
  const auto& polys = x.polys();
  auto point_at = [&](double a) -> Vec3 { return t + r * (std::cos(a) * c.u + std::sin(a) * c.w); };
  for (std::size_t k = 0; k < polys.size(); ++k) {
    const Polynomial& p = polys[k];
    double a_prev = c.phase;
    bool s_prev = p.eval(point_at(a_prev)) > 0.0;
    for (int i = 1; i <= steps; ++i) {
      const double a = c.phase + 2.0 * kPi * i / steps;
      const bool s = p.eval(point_at(a)) > 0.0;
      if (s != s_prev) {
        double lo = a_prev, hi = a;
        for (int it = 0; it < 64 && hi - lo > 1e-15; ++it) {
          const double mid = 0.5 * (lo + hi);
          if ((p.eval(point_at(mid)) > 0.0) == s_prev) {
            lo = mid;
          } else {
            hi = mid;
          }
        }
        const Vec3 pa = point_at(lo), pb = point_at(hi);
        const Vec3 xs = 0.5 * (pa + pb);
        if (x.accept(xs, k, pa, pb)) out.push_back((xs - t).normalized());
      }
      a_prev = a;
      s_prev = s;
    }
  }
}

std::vector<Vec3> sample_at(const SampledSet& x, const Design& d, const Vec3& t, double r, int workers) {
  std::vector<Vec3> cloud;
  if (x.kind() == SampledSet::Kind::Region) {
    for (const auto& v : d.directions)
      if (x.member(t + r * v)) cloud.push_back(v);
    return cloud;
  }
  if (d.circles.empty()) {
    // Two normal directions only: keep those lying on a zero set.
    for (const auto& v : d.directions) {
      const Vec3 p = t + r * v;
      for (const auto& poly : x.polys()) {
        if (std::abs(poly.eval(p)) <= kEpsVal) {
          cloud.push_back(v);
          break;
        }
      }
    }
    return cloud;
  }
  const std::size_t nc = d.circles.size();
  const std::size_t blocks = (nc + kCircleBlock - 1) / kCircleBlock;
  std::vector<std::vector<Vec3>> parts(blocks);
  for_each_block(blocks, workers, [&](std::size_t b) {
    const std::size_t lo = b * kCircleBlock, hi = std::min(nc, lo + kCircleBlock);
    for (std::size_t i = lo; i < hi; ++i) march_circle(x, d.circles[i], d.steps, t, r, parts[b]);
  });
  for (auto& p : parts) cloud.insert(cloud.end(), p.begin(), p.end());
  return cloud;
}

double cloud_gap(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
  if (a.empty() && b.empty()) return 0.0;
  if (a.empty() || b.empty()) return std::numeric_limits<double>::infinity();
  return hausdorff_distance(a, b);
}

ConeLink run_link(const SampledSet& x, const Frame& frame, const Vec3& t, const LinkOptions& opt, int codim) {
  if (opt.samples < 1) throw ValidationError("samples per radius must be positive");
  const auto radii = opt.radius_sequence();
  const Design design = make_design(x, frame, opt);
  const int workers = opt.workers > 0 ? opt.workers : default_workers();
  const double tol = std::max(opt.eps_stab, 2.0 * design.resolution);

  ConeLink link;
  link.ambient_dim = x.dimension();
  link.center = t;
  link.target_codim = codim;
  link.frame = frame.basis;
  link.direction_budget = static_cast<int>(design.directions.size());
  link.resolution = design.resolution;
  std::vector<Vec3> prev;
  for (std::size_t j = 0; j < radii.size(); ++j) {
    auto cloud = sample_at(x, design, t, radii[j], workers);
    link.levels_used = static_cast<int>(j + 1);
    link.radius_used = radii[j];
    if (j > 0) {
      link.stabilization_gap = cloud_gap(prev, cloud);
      if (link.stabilization_gap <= tol) {
        link.stabilized = true;
        link.points = std::move(cloud);
        break;
      }
    }
    prev = std::move(cloud);
    if (j + 1 == radii.size()) link.points = prev;
  }
  link.measure_estimate = link_measure(link);
  return link;
}

// Sorted angles of unit vectors lying in a plane with basis (e0, e1).
std::vector<double> plane_angles(const std::vector<Vec3>& pts, const Vec3& e0, const Vec3& e1) {
  std::vector<double> a;
  a.reserve(pts.size());
  for (const auto& p : pts) {
    double th = std::atan2(p.dot(e1), p.dot(e0));
    if (th < 0) th += 2.0 * kPi;
    a.push_back(th);
  }
  std::sort(a.begin(), a.end());
  return a;
}

// Length of the union of arcs [a_i - eps, a_i + eps] on the circle.
double arc_union(const std::vector<double>& sorted, double eps) {
  if (sorted.empty()) return 0.0;
  if (eps >= kPi) return 2.0 * kPi;
  double total = 0.0;
  const std::size_t n = sorted.size();
  for (std::size_t i = 0; i < n; ++i) {
    const double next = i + 1 < n ? sorted[i + 1] : sorted[0] + 2.0 * kPi;
    total += std::min(2.0 * eps, next - sorted[i]);
  }
  return std::min(total, 2.0 * kPi);
}

// Greedy thinning: keeps points at mutual distance >= delta, in index order.
std::vector<Vec3> thin_cloud(const std::vector<Vec3>& pts, double delta) {
  std::vector<Vec3> kept;
  if (pts.empty()) return kept;
  const KdTree tree(pts);
  std::vector<char> dropped(pts.size(), 0);
  std::vector<std::size_t> near;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (dropped[i]) continue;
    kept.push_back(pts[i]);
    tree.within(pts[i], delta, near);
    for (std::size_t j : near) dropped[j] = 1;
  }
  return kept;
}

// Length of a polyline through the cloud: greedy nearest-neighbour chains,
// broken where the step exceeds 5 times the median spacing (at most
// 5 eps_stab, so isolated points are never joined). The cloud is
// first thinned to spacing delta so that random clumping of the samples
// along a curve does not produce spurious long steps.
double polyline_length(const std::vector<Vec3>& raw, double delta) {
  const std::vector<Vec3> pts = thin_cloud(raw, delta);
  const std::size_t n = pts.size();
  if (n < 2) return 0.0;
  std::vector<double> nn(n);
  {
    const KdTree tree(pts);
    for (std::size_t i = 0; i < n; ++i) tree.nearest(pts[i], &nn[i], i);
  }
  std::vector<double> sorted = nn;
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(n / 2), sorted.end());
  const double gap = std::min(5.0 * sorted[n / 2], 5.0 * kEpsStab);

  KdTree tree(pts);
  double length = 0.0;
  std::size_t scan = 0;
  std::vector<char> seen(n, 0);
  while (tree.alive() > 0) {
    while (seen[scan]) ++scan;
    std::size_t cur = scan;
    for (;;) {
      seen[cur] = 1;
      tree.remove(cur);
      if (tree.alive() == 0) break;
      double d = 0.0;
      const std::size_t nxt = tree.nearest(pts[cur], &d);
      if (d > gap) break;
      length += d;
      cur = nxt;
    }
  }
  return length;
}

int cluster_count(const std::vector<Vec3>& pts, double tol) {
  const std::size_t n = pts.size();
  std::vector<int> parent(n);
  for (std::size_t i = 0; i < n; ++i) parent[i] = static_cast<int>(i);
  auto find = [&](int i) {
    while (parent[static_cast<std::size_t>(i)] != i) i = parent[static_cast<std::size_t>(i)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(i)])];
    return i;
  };
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if ((pts[i] - pts[j]).norm() <= tol) parent[static_cast<std::size_t>(find(static_cast<int>(i)))] = find(static_cast<int>(j));
  int count = 0;
  for (std::size_t i = 0; i < n; ++i)
    if (find(static_cast<int>(i)) == static_cast<int>(i)) ++count;
  return count;
}

}  // namespace

// ---------------------------------------------------------------- sets

SampledSet SampledSet::region(int dim, Member member) {
  SampledSet s;
  s.kind_ = Kind::Region;
  s.dim_ = dim;
  s.member_ = std::move(member);
  return s;
}

SampledSet SampledSet::surface(int dim, std::vector<Polynomial> polys, Accept accept) {
  SampledSet s;
  s.kind_ = Kind::Surface;
  s.dim_ = dim;
  s.polys_ = std::move(polys);
  s.accept_ = std::move(accept);
  s.member_ = [](const Vec3&) { return false; };
  return s;
}

SampledSet SampledSet::variety(const Polynomial& p) {
  return surface(p.dimension(), {p}, [](const Vec3&, std::size_t, const Vec3&, const Vec3&) { return true; });
}

SampledSet SampledSet::complement(const DomainSpec& d) {
  return region(d.dim, [d](const Vec3& x) { return !d.contains(x); });
}

SampledSet SampledSet::boundary(const DomainSpec& d) {
  std::vector<Polynomial> polys;
  // For each distinct polynomial, the (constraint, atom) slots that use it.
  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> slots;
  for (std::size_t c = 0; c < d.constraints.size(); ++c) {
    for (std::size_t a = 0; a < d.constraints[c].any_of.size(); ++a) {
      const Polynomial& p = d.constraints[c].any_of[a].poly;
      std::size_t k = 0;
      while (k < polys.size() && !(polys[k] == p)) ++k;
      if (k == polys.size()) {
        polys.push_back(p);
        slots.emplace_back();
      }
      slots[k].emplace_back(c, a);
    }
  }
  const std::size_t sphere = polys.size();
  polys.push_back(sphere_polynomial(d.ball, d.dim));
  slots.emplace_back();

  auto inside_given_zero = [d, slots, sphere](const Vec3& x, std::size_t k) {
    if (k == sphere) return false;
    double r2 = 0.0;
    for (int j = 0; j < d.dim; ++j) r2 += (x[j] - d.ball.center[j]) * (x[j] - d.ball.center[j]);
    if (r2 >= d.ball.radius * d.ball.radius) return false;
    for (std::size_t c = 0; c < d.constraints.size(); ++c) {
      bool ok = false;
      const auto& atoms = d.constraints[c].any_of;
      for (std::size_t a = 0; a < atoms.size() && !ok; ++a) {
        const bool zeroed =
            std::find(slots[k].begin(), slots[k].end(), std::make_pair(c, a)) != slots[k].end();
        ok = zeroed ? atoms[a].sign == Sign::Equal : atoms[a].holds(x);
      }
      if (!ok) return false;
    }
    return true;
  };
  return surface(d.dim, std::move(polys),
                 [d, inside_given_zero](const Vec3& x, std::size_t k, const Vec3& a, const Vec3& b) {
                   return (d.contains(a) || d.contains(b)) && !inside_given_zero(x, k);
                 });
}

// ---------------------------------------------------------------- strata

StratumSpec StratumSpec::point_stratum(const Vec3& p) {
  StratumSpec s;
  s.dim = 0;
  s.point = p;
  return s;
}

StratumSpec StratumSpec::line(const Vec3& p, const Vec3& direction) {
  if (direction.norm() == 0.0) throw ValidationError("stratum direction must be nonzero");
  StratumSpec s;
  s.dim = 1;
  s.point = p;
  s.tangent = {direction.normalized()};
  return s;
}

Vec3 StratumSpec::project(const Vec3& x) const {
  Vec3 out = point;
  for (const auto& e : tangent) out += (x - point).dot(e) * e;
  return out;
}

std::vector<Vec3> StratumSpec::normal_basis(int ambient) const {
  std::vector<Vec3> basis;
  for (int j = 0; j < ambient; ++j) {
    Vec3 v = Vec3::Unit(j);
    for (const auto& e : tangent) v -= v.dot(e) * e;
    for (const auto& b : basis) v -= v.dot(b) * b;
    if (v.norm() > 1e-8) basis.push_back(v.normalized());
  }
  return basis;
}

// ---------------------------------------------------------------- links

std::vector<double> LinkOptions::radius_sequence() const {
  std::vector<double> r = radii;
  if (r.empty()) {
    for (int j = 0; j < 10; ++j) r.push_back(0.05 * scale * std::ldexp(1.0, -j));
  }
  for (std::size_t j = 0; j < r.size(); ++j) {
    if (!(r[j] > 0.0)) throw ValidationError("link radii must be positive");
    if (j > 0 && !(r[j] < r[j - 1])) throw ValidationError("link radii must be strictly decreasing");
  }
  return r;
}

ConeLink sample_link(const SampledSet& x, const Vec3& t, const LinkOptions& opt) {
  return run_link(x, full_frame(x.dimension()), t, opt, x.kind() == SampledSet::Kind::Region ? 1 : 2);
}

ConeLink sample_normal_link(const SampledSet& x, const StratumSpec& s, const Vec3& t, const LinkOptions& opt) {
  if (s.distance(t) > 1e-9 * (1.0 + t.norm())) throw ValidationError("normal link: t is not on the stratum");
  Frame f;
  f.basis = s.normal_basis(x.dimension());
  return run_link(x, f, t, opt, x.kind() == SampledSet::Kind::Region ? 1 : 2);
}

double hausdorff_distance(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
  if (a.empty() || b.empty()) throw ValidationError("hausdorff distance of an empty cloud");
  const KdTree ta(a), tb(b);
  double h = 0.0;
  for (const auto& p : a) {
    double d = 0.0;
    tb.nearest(p, &d);
    h = std::max(h, d);
  }
  for (const auto& p : b) {
    double d = 0.0;
    ta.nearest(p, &d);
    h = std::max(h, d);
  }
  return h;
}

double sphere_area(int n) {
  switch (n) {
    case 1:
      return 2.0;
    case 2:
      return 2.0 * kPi;
    case 3:
      return 4.0 * kPi;
  }
  throw ValidationError("sphere_area: dimension must be 1..3");
}

double equator_measure(int n) { return sphere_area(n - 1); }

double link_measure(const ConeLink& link) {
  if (link.points.empty()) return 0.0;
  const std::size_t m = link.frame.size();
  if (m <= 1) return static_cast<double>(cluster_count(link.points, 2.0 * kEpsStab));
  if (link.target_codim == 1) {
    const int budget = std::max(link.direction_budget, 1);
    if (m == 2) {
      // Equally spaced directions on a circle: arcs of one spacing each,
      // extrapolated to zero width.
      const auto ang = plane_angles(link.points, link.frame[0], link.frame[1]);
      const double eps = 2.0 * kPi / budget;
      const double a1 = arc_union(ang, eps), a2 = arc_union(ang, 2.0 * eps);
      return std::clamp(2.0 * a1 - a2, 0.0, 2.0 * kPi);
    }
    // Coverage of a fixed lattice by the eps-neighbourhood of the cloud,
    // extrapolated to eps = 0 to remove the tube around the link boundary.
    const double eps = std::max(std::sqrt(24.0 / budget), 2.0 * link.resolution);
    const KdTree tree(link.points);
    const auto probe = sphere_lattice(kCoverageLattice, 0);
    const double c1 = 2.0 * std::sin(0.5 * eps), c2 = 2.0 * std::sin(eps);
    int hit1 = 0, hit2 = 0;
    for (const auto& q : probe) {
      double d = 0.0;
      tree.nearest(q, &d);
      hit1 += d <= c1;
      hit2 += d <= c2;
    }
    const double cell = 4.0 * kPi / kCoverageLattice;
    return std::clamp((2.0 * hit1 - hit2) * cell, 0.0, 4.0 * kPi);
  }
  if (m == 2) return static_cast<double>(cluster_count(link.points, 2.0 * kEpsStab));
  return polyline_length(link.points, 0.5 * kEpsStab);
}

double default_alpha(int n, int clause) {
  return 0.05 * (clause == 1 ? sphere_area(n) : equator_measure(n));
}

CriterionReport check_criterion(const DomainSpec& d, const Vec3& t, std::optional<double> alpha,
                                const LinkOptions& opt) {
  if (d.contains(t)) throw ValidationError("criterion point lies inside the domain");
  if (alpha && !(*alpha > 0.0)) throw ValidationError("alpha must be positive");
  CriterionReport rep;
  rep.point = t;
  rep.alpha1 = alpha ? *alpha : default_alpha(d.dim, 1);
  rep.alpha2 = alpha ? *alpha : default_alpha(d.dim, 2);
  LinkOptions o1 = opt;
  o1.seed = derive_seed(opt.seed, "complement");
  LinkOptions o2 = opt;
  o2.seed = derive_seed(opt.seed, "boundary");
  rep.complement_link = sample_link(SampledSet::complement(d), t, o1);
  rep.boundary_link = sample_link(SampledSet::boundary(d), t, o2);
  rep.clause1 = rep.complement_link.measure_estimate;
  rep.clause2 = rep.boundary_link.measure_estimate;
  rep.holds = rep.clause1 >= rep.alpha1 || rep.clause2 >= rep.alpha2;
  rep.confident = rep.complement_link.stabilized && rep.boundary_link.stabilized;
  // No domain point seen near t: either t is not in the closure or the
  // domain is thinner than the sampling there.
  if (static_cast<int>(rep.complement_link.points.size()) == rep.complement_link.direction_budget &&
      rep.boundary_link.points.empty())
    rep.confident = false;
  return rep;
}

ProductReport check_product_decomposition(const SampledSet& x, const StratumSpec& s, const Vec3& t,
                                          const LinkOptions& opt) {
  ProductReport rep;
  LinkOptions o1 = opt;
  o1.seed = derive_seed(opt.seed, "product-link");
  LinkOptions o2 = opt;
  o2.seed = derive_seed(opt.seed, "product-normal");
  rep.link = sample_link(x, t, o1);
  rep.normal_link = sample_normal_link(x, s, t, o2);
  rep.confident = rep.link.stabilized && rep.normal_link.stabilized;

  // {v + w : w in T_tS} normalized: for a line stratum, half great circles
  // from -e to e through v; the tangent directions themselves are limits.
  const int arc_steps = 4096;
  for (const auto& e : s.tangent) {
    rep.product.push_back(e);
    rep.product.push_back(-e);
  }
  for (const auto& v : rep.normal_link.points) {
    if (s.tangent.empty()) {
      rep.product.push_back(v);
      continue;
    }
    if (s.tangent.size() > 1) throw ValidationError("product decomposition supports point and line strata");
    const Vec3& e = s.tangent[0];
    for (int i = 1; i < arc_steps; ++i) {
      const double a = -0.5 * kPi + kPi * i / arc_steps;
      rep.product.push_back(std::cos(a) * v + std::sin(a) * e);
    }
  }
  if (rep.link.points.empty() && rep.product.empty()) return rep;
  if (rep.link.points.empty() || rep.product.empty()) {
    rep.distance = std::numeric_limits<double>::infinity();
    return rep;
  }
  rep.distance = hausdorff_distance(rep.link.points, rep.product);
  return rep;
}

}  // namespace conelab
