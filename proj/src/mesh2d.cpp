#include "conelab/mesh2d.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <deque>
#include <map>
#include <numbers>
#include <ostream>
#include <set>
#include <utility>

#include <Eigen/Dense>

#include "conelab/errors.hpp"

namespace conelab {

const char* to_string(BoundaryTag t) { return t == BoundaryTag::Dirichlet ? "DIRICHLET" : "NEUMANN"; }

double TriMesh::triangle_area(std::size_t t) const {
  const auto& tr = triangles[t];
  const Vec2 a = vertices[static_cast<std::size_t>(tr[0])], b = vertices[static_cast<std::size_t>(tr[1])],
             c = vertices[static_cast<std::size_t>(tr[2])];
  return 0.5 * ((b - a).x() * (c - a).y() - (b - a).y() * (c - a).x());
}

double TriMesh::area() const {
  double s = 0.0;
  for (std::size_t t = 0; t < triangles.size(); ++t) s += triangle_area(t);
  return s;
}

double TriMesh::diameter(std::size_t t) const {
  const auto& tr = triangles[t];
  double d = 0.0;
  for (int k = 0; k < 3; ++k)
    d = std::max(d, (vertices[static_cast<std::size_t>(tr[static_cast<std::size_t>(k)])] -
                     vertices[static_cast<std::size_t>(tr[static_cast<std::size_t>((k + 1) % 3)])])
                        .norm());
  return d;
}

Vec2 TriMesh::centroid(std::size_t t) const {
  const auto& tr = triangles[t];
  return (vertices[static_cast<std::size_t>(tr[0])] + vertices[static_cast<std::size_t>(tr[1])] +
          vertices[static_cast<std::size_t>(tr[2])]) /
         3.0;
}

namespace {

constexpr int kMaxLevel = 30;
constexpr double kSnapFraction = 0.3;

using Tri = std::array<int, 3>;

Vec3 lift(const Vec2& p) { return Vec3(p.x(), p.y(), 0.0); }

struct CellKey {
  int level;
  std::int64_t i, j;
  bool operator<(const CellKey& o) const {
    if (level != o.level) return level < o.level;
    if (i != o.i) return i < o.i;
    return j < o.j;
  }
};

std::uint64_t edge_key(int a, int b) {
  const auto lo = static_cast<std::uint32_t>(std::min(a, b)), hi = static_cast<std::uint32_t>(std::max(a, b));
  return (static_cast<std::uint64_t>(lo) << 32) | hi;
}

double min_angle_deg(const Vec2& a, const Vec2& b, const Vec2& c) {
  auto ang = [](const Vec2& p, const Vec2& q, const Vec2& r) {
    const Vec2 u = q - p, v = r - p;
    const double den = u.norm() * v.norm();
    if (den == 0.0) return 0.0;
    return std::acos(std::clamp(u.dot(v) / den, -1.0, 1.0));
  };
  return std::min({ang(a, b, c), ang(b, c, a), ang(c, a, b)}) * 180.0 / std::numbers::pi;
}

// Root of f on the segment [a, b], given f(a) and f(b) of strictly opposite
// signs.
template <class F>
Vec2 bisect(Vec2 a, Vec2 b, F f) {
  const bool a_pos = f(a) > 0;
  for (int it = 0; it < 64; ++it) {
    const Vec2 m = 0.5 * (a + b);
    if (m == a || m == b) break;
    const double v = f(m);
    if (v == 0.0) return m;
    if ((v > 0) == a_pos) a = m;
    else b = m;
  }
  return 0.5 * (a + b);
}

// Corner points: Newton solve on two boundary polynomials.
class Projector {
 public:
  explicit Projector(const DomainSpec& d) : d_(d) {}

  bool onto_two(const Polynomial& p, const Polynomial& q, Vec2& x) const {
    Vec2 y = x;
    for (int it = 0; it < 60; ++it) {
      Vec3 gp, gq;
      const double vp = p.eval_with_gradient(lift(y), gp), vq = q.eval_with_gradient(lift(y), gq);
      if (std::abs(vp) <= tol(p) && std::abs(vq) <= tol(q)) {
        if ((y - x).norm() > 0.5 * d_.ball.radius) return false;
        x = y;
        return true;
      }
      Eigen::Matrix2d j;
      j << gp.x(), gp.y(), gq.x(), gq.y();
      if (std::abs(j.determinant()) < 1e-14) return false;
      y -= j.inverse() * Eigen::Vector2d(vp, vq);
    }
    return false;
  }

  double tol(const Polynomial& p) const {
    double scale = 0.0;
    for (const auto& [e, c] : p.terms()) scale = std::max(scale, std::abs(c));
    return 1e-13 * std::max(scale, 1.0);
  }

  Polynomial sphere_poly() const {
    Polynomial s = Polynomial::constant(2, -d_.ball.radius * d_.ball.radius);
    for (int j = 0; j < 2; ++j) {
      const Polynomial xj = Polynomial::variable(2, j) - Polynomial::constant(2, d_.ball.center[j]);
      s = s + xj * xj;
    }
    return s;
  }

 private:
  const DomainSpec& d_;
};

class Builder {
 public:
  Builder(const DomainSpec& d, double h, std::vector<GradingCenter> centers)
      : d_(d), h_(h), centers_(std::move(centers)), proj_(d) {}

  TriMesh run() {
    build_quadtree();
    balance();
    triangulate_leaves();
    compute_levels();
    insert_centers();
    snap_region();
    clip_region();
    insert_corners();
    for (std::size_t c = 0; c < d_.constraints.size(); ++c)
      for (std::size_t a = 0; a < d_.constraints[c].any_of.size(); ++a)
        if (d_.constraints[c].any_of[a].sign == Sign::NotEqual) split_crack(c, a);
    drop_degenerate();
    duplicate_crack_vertices();
    flip_edges();
    smooth();
    flip_edges();
    return finish();
  }

 private:
  // ------------------------------------------------------------ quadtree
  double cell_size(int level) const { return std::ldexp(h_, -level); }

  Vec2 cell_center(const CellKey& k) const {
    const double s = cell_size(k.level);
    return Vec2((static_cast<double>(k.i) + 0.5) * s, (static_cast<double>(k.j) + 0.5) * s);
  }

  double target_size(const CellKey& k) const {
    const double s = cell_size(k.level);
    const Vec2 c = cell_center(k);
    double t = h_;
    for (const auto& g : centers_) {
      const double dist = std::max((c - g.point).norm(), 0.5 * s);
      t = std::min(t, h_ * std::pow(std::min(dist / d_.ball.radius, 1.0), (g.gamma - 1.0) / g.gamma));
    }
    return t;
  }

  void build_quadtree() {
    const Vec2 c = d_.ball.center.head<2>();
    const double r = d_.ball.radius;
    const auto i0 = static_cast<std::int64_t>(std::floor((c.x() - r) / h_));
    const auto i1 = static_cast<std::int64_t>(std::ceil((c.x() + r) / h_));
    const auto j0 = static_cast<std::int64_t>(std::floor((c.y() - r) / h_));
    const auto j1 = static_cast<std::int64_t>(std::ceil((c.y() + r) / h_));
    std::deque<CellKey> work;
    for (std::int64_t i = i0; i < i1; ++i) {
      for (std::int64_t j = j0; j < j1; ++j) {
        const double x0 = static_cast<double>(i) * h_, y0 = static_cast<double>(j) * h_;
        const double dx = std::max({x0 - c.x(), 0.0, c.x() - (x0 + h_)});
        const double dy = std::max({y0 - c.y(), 0.0, c.y() - (y0 + h_)});
        if (dx * dx + dy * dy < r * r) work.push_back({0, i, j});
      }
    }
    while (!work.empty()) {
      const CellKey k = work.front();
      work.pop_front();
      if (k.level < kMaxLevel && cell_size(k.level) > target_size(k) * (1.0 + 1e-12)) {
        internal_.insert(k);
        for (int a = 0; a < 2; ++a)
          for (int b = 0; b < 2; ++b) work.push_back({k.level + 1, 2 * k.i + a, 2 * k.j + b});
      } else {
        leaves_.insert(k);
      }
    }
  }

  void split(const CellKey& k) {
    leaves_.erase(k);
    internal_.insert(k);
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b) leaves_.insert({k.level + 1, 2 * k.i + a, 2 * k.j + b});
  }

  void balance() {
    const std::int64_t di[4] = {1, -1, 0, 0}, dj[4] = {0, 0, 1, -1};
    bool changed = true;
    while (changed) {
      changed = false;
      std::vector<CellKey> to_split;
      for (const auto& k : leaves_) {
        for (int s = 0; s < 4 && (to_split.empty() || to_split.back().level != k.level || to_split.back().i != k.i ||
                                  to_split.back().j != k.j);
             ++s) {
          const CellKey n{k.level, k.i + di[s], k.j + dj[s]};
          if (!internal_.count(n)) continue;
          // Children of n touching the shared side.
          for (int c = 0; c < 2; ++c) {
            CellKey child{k.level + 1, 0, 0};
            if (di[s] == 1) child = {k.level + 1, 2 * n.i, 2 * n.j + c};
            if (di[s] == -1) child = {k.level + 1, 2 * n.i + 1, 2 * n.j + c};
            if (dj[s] == 1) child = {k.level + 1, 2 * n.i + c, 2 * n.j};
            if (dj[s] == -1) child = {k.level + 1, 2 * n.i + c, 2 * n.j + 1};
            if (internal_.count(child)) {
              to_split.push_back(k);
              break;
            }
          }
        }
      }
      for (const auto& k : to_split) {
        if (leaves_.count(k)) {
          split(k);
          changed = true;
        }
      }
    }
  }

  int vertex(std::int64_t i, std::int64_t j, int level, double size) {
    const std::int64_t X = i * (std::int64_t{1} << (kMaxLevel - level));
    const std::int64_t Y = j * (std::int64_t{1} << (kMaxLevel - level));
    const auto [it, inserted] = vid_.try_emplace({X, Y}, static_cast<int>(pos_.size()));
    if (inserted) {
      pos_.emplace_back(std::ldexp(static_cast<double>(X) * h_, -kMaxLevel),
                        std::ldexp(static_cast<double>(Y) * h_, -kMaxLevel));
      size_.push_back(size);
    } else {
      size_[static_cast<std::size_t>(it->second)] = std::min(size_[static_cast<std::size_t>(it->second)], size);
    }
    return it->second;
  }

  void triangulate_leaves() {
    for (const auto& k : leaves_) {
      const double s = cell_size(k.level);
      const int L = k.level;
      const int bl = vertex(k.i, k.j, L, s), br = vertex(k.i + 1, k.j, L, s);
      const int tr = vertex(k.i + 1, k.j + 1, L, s), tl = vertex(k.i, k.j + 1, L, s);
      const bool mb = internal_.count({L, k.i, k.j - 1}) > 0, mr = internal_.count({L, k.i + 1, k.j}) > 0;
      const bool mt = internal_.count({L, k.i, k.j + 1}) > 0, ml = internal_.count({L, k.i - 1, k.j}) > 0;
      if (!mb && !mr && !mt && !ml) {
        tris_.push_back({bl, br, tr});
        tris_.push_back({bl, tr, tl});
        continue;
      }
      std::vector<int> ring{bl};
      if (mb) ring.push_back(vertex(2 * k.i + 1, 2 * k.j, L + 1, s / 2));
      ring.push_back(br);
      if (mr) ring.push_back(vertex(2 * k.i + 2, 2 * k.j + 1, L + 1, s / 2));
      ring.push_back(tr);
      if (mt) ring.push_back(vertex(2 * k.i + 1, 2 * k.j + 2, L + 1, s / 2));
      ring.push_back(tl);
      if (ml) ring.push_back(vertex(2 * k.i, 2 * k.j + 1, L + 1, s / 2));
      const int c = vertex(2 * k.i + 1, 2 * k.j + 1, L + 1, s);
      for (std::size_t q = 0; q < ring.size(); ++q) tris_.push_back({c, ring[q], ring[(q + 1) % ring.size()]});
    }
  }

  // ------------------------------------------------------------ clipping
  void compute_levels() {
    level_.resize(pos_.size());
    onb_.assign(pos_.size(), 0);
    failed_.assign(pos_.size(), 0);
    for (std::size_t v = 0; v < pos_.size(); ++v) {
      level_[v] = d_.closure_level(lift(pos_[v])).value;
      if (level_[v] == 0.0) onb_[v] = 1;
    }
  }

  static int sgn(double x) { return x > 0 ? 1 : (x < 0 ? -1 : 0); }

  std::vector<std::vector<int>> vertex_triangles() const {
    std::vector<std::vector<int>> vt(pos_.size());
    for (std::size_t t = 0; t < tris_.size(); ++t)
      for (int v : tris_[t]) vt[static_cast<std::size_t>(v)].push_back(static_cast<int>(t));
    return vt;
  }

  double signed_area(const Vec2& a, const Vec2& b, const Vec2& c) const {
    return 0.5 * ((b - a).x() * (c - a).y() - (b - a).y() * (c - a).x());
  }

  // Moves v to y when no incident triangle loses more than 80% of its area.
  bool try_move(int v, const Vec2& y, const std::vector<std::vector<int>>& vt) {
    for (int t : vt[static_cast<std::size_t>(v)]) {
      Tri tr = tris_[static_cast<std::size_t>(t)];
      const double before =
          signed_area(pos_[static_cast<std::size_t>(tr[0])], pos_[static_cast<std::size_t>(tr[1])], pos_[static_cast<std::size_t>(tr[2])]);
      Vec2 p[3];
      for (int k = 0; k < 3; ++k) p[k] = tr[static_cast<std::size_t>(k)] == v ? y : pos_[static_cast<std::size_t>(tr[static_cast<std::size_t>(k)])];
      if (signed_area(p[0], p[1], p[2]) < 0.2 * before) return false;
    }
    pos_[static_cast<std::size_t>(v)] = y;
    return true;
  }

  // Makes every grading center a vertex of the background triangulation:
  // moves a nearby vertex onto it when that keeps the triangles well shaped,
  // otherwise splits the containing triangle.
  void insert_centers() {
    for (const auto& g : centers_) {
      const Vec2 c = g.point;
      int host = -1;
      double lam[3] = {0, 0, 0};
      for (std::size_t t = 0; t < tris_.size() && host < 0; ++t) {
        const auto& tr = tris_[t];
        const Vec2 p0 = pos_[static_cast<std::size_t>(tr[0])], p1 = pos_[static_cast<std::size_t>(tr[1])],
                   p2 = pos_[static_cast<std::size_t>(tr[2])];
        const double A = signed_area(p0, p1, p2);
        const double l0 = signed_area(c, p1, p2) / A, l1 = signed_area(p0, c, p2) / A, l2 = signed_area(p0, p1, c) / A;
        if (l0 >= -1e-14 && l1 >= -1e-14 && l2 >= -1e-14) {
          host = static_cast<int>(t);
          lam[0] = l0;
          lam[1] = l1;
          lam[2] = l2;
        }
      }
      if (host < 0) continue;
      const Tri tr = tris_[static_cast<std::size_t>(host)];
      int v = -1;
      const auto vt = vertex_triangles();
      int order[3] = {0, 1, 2};
      std::sort(order, order + 3, [&](int i, int j) { return lam[i] > lam[j]; });
      for (int k : order) {
        const int w = tr[static_cast<std::size_t>(k)];
        if ((pos_[static_cast<std::size_t>(w)] - c).norm() == 0.0 ||
            (lam[k] >= 0.5 && try_move(w, c, vt))) {
          v = w;
          break;
        }
      }
      if (v < 0 && std::min({lam[0], lam[1], lam[2]}) > 1e-9) {
        v = new_vertex(c, size_[static_cast<std::size_t>(tr[0])], false, false);
        tris_[static_cast<std::size_t>(host)] = {tr[0], tr[1], v};
        tris_.push_back({tr[1], tr[2], v});
        tris_.push_back({tr[2], tr[0], v});
      }
      if (v < 0) continue;
      const double l = d_.closure_level(lift(c)).value;
      const bool on = std::abs(l) <= 1e-12 * d_.ball.radius * d_.ball.radius;
      level_[static_cast<std::size_t>(v)] = on ? 0.0 : l;
      onb_[static_cast<std::size_t>(v)] = on ? 1 : 0;
    }
  }

  void snap_region() {
    const auto vt = vertex_triangles();
    // Best crossing per vertex: fraction along the edge and the far end.
    std::vector<std::pair<double, int>> best(pos_.size(), {2.0, -1});
    for (const auto& tr : tris_) {
      for (int e = 0; e < 3; ++e) {
        const int a = tr[static_cast<std::size_t>(e)], b = tr[static_cast<std::size_t>((e + 1) % 3)];
        const double la = level_[static_cast<std::size_t>(a)], lb = level_[static_cast<std::size_t>(b)];
        if (sgn(la) * sgn(lb) >= 0) continue;
        const double ta = la / (la - lb);
        best[static_cast<std::size_t>(a)] = std::min(best[static_cast<std::size_t>(a)], {ta, b});
        best[static_cast<std::size_t>(b)] = std::min(best[static_cast<std::size_t>(b)], {1.0 - ta, a});
      }
    }
    for (std::size_t v = 0; v < pos_.size(); ++v) {
      const auto [t, w] = best[v];
      if (w < 0 || t >= kSnapFraction || onb_[v]) continue;
      const double lv = level_[v], lw = level_[static_cast<std::size_t>(w)];
      if (sgn(lv) * sgn(lw) >= 0) continue;  // far end already snapped
      const Vec2 p = boundary_crossing(static_cast<int>(v), w);
      if (!try_move(static_cast<int>(v), p, vt)) continue;
      level_[v] = 0.0;
      onb_[v] = 1;
    }
  }

  Vec2 boundary_crossing(int a, int b) const {
    return bisect(pos_[static_cast<std::size_t>(a)], pos_[static_cast<std::size_t>(b)],
                  [&](const Vec2& x) { return d_.closure_level(lift(x)).value; });
  }

  int new_vertex(const Vec2& p, double size, bool boundary, bool failed) {
    pos_.push_back(p);
    size_.push_back(size);
    level_.push_back(0.0);
    onb_.push_back(boundary ? 1 : 0);
    failed_.push_back(failed ? 1 : 0);
    return static_cast<int>(pos_.size() - 1);
  }

  int cut_vertex(int a, int b, std::map<std::uint64_t, int>& cache) {
    const auto key = edge_key(a, b);
    if (const auto it = cache.find(key); it != cache.end()) return it->second;
    const int v = new_vertex(boundary_crossing(a, b),
                             std::min(size_[static_cast<std::size_t>(a)], size_[static_cast<std::size_t>(b)]), true, false);
    cache[key] = v;
    return v;
  }

  // Splits a convex polygon into triangles; quadrilaterals use the
  // diagonal with the larger minimum angle.
  void emit_polygon(const std::vector<int>& poly, std::vector<Tri>& out) const {
    if (poly.size() < 3) return;
    if (poly.size() == 4) {
      auto q = [&](int i) { return pos_[static_cast<std::size_t>(poly[static_cast<std::size_t>(i)])]; };
      const double a02 = std::min(min_angle_deg(q(0), q(1), q(2)), min_angle_deg(q(0), q(2), q(3)));
      const double a13 = std::min(min_angle_deg(q(1), q(2), q(3)), min_angle_deg(q(1), q(3), q(0)));
      if (a02 >= a13) {
        out.push_back({poly[0], poly[1], poly[2]});
        out.push_back({poly[0], poly[2], poly[3]});
      } else {
        out.push_back({poly[1], poly[2], poly[3]});
        out.push_back({poly[1], poly[3], poly[0]});
      }
      return;
    }
    for (std::size_t k = 1; k + 1 < poly.size(); ++k) out.push_back({poly[0], poly[k], poly[k + 1]});
  }

  void clip_region() {
    std::map<std::uint64_t, int> cache;
    std::vector<Tri> out;
    out.reserve(tris_.size());
    for (const auto& tr : tris_) {
      int s[3];
      for (int k = 0; k < 3; ++k) s[k] = sgn(level_[static_cast<std::size_t>(tr[static_cast<std::size_t>(k)])]);
      if (s[0] >= 0 && s[1] >= 0 && s[2] >= 0) {
        const Vec2 c = (pos_[static_cast<std::size_t>(tr[0])] + pos_[static_cast<std::size_t>(tr[1])] +
                        pos_[static_cast<std::size_t>(tr[2])]) /
                       3.0;
        if (s[0] > 0 || s[1] > 0 || s[2] > 0 || d_.closure_level(lift(c)).value > 0) out.push_back(tr);
        continue;
      }
      if (s[0] <= 0 && s[1] <= 0 && s[2] <= 0) continue;
      std::vector<int> poly;
      for (int k = 0; k < 3; ++k) {
        const int a = tr[static_cast<std::size_t>(k)], b = tr[static_cast<std::size_t>((k + 1) % 3)];
        const int sa = s[k], sb = s[(k + 1) % 3];
        if (sa >= 0) poly.push_back(a);
        if (sa * sb < 0) poly.push_back(cut_vertex(a, b, cache));
      }
      emit_polygon(poly, out);
    }
    tris_ = std::move(out);
    if (tris_.empty()) throw ValidationError("domain is empty at mesh resolution h");
  }

  // Boundary pieces (atom polynomials or the circle) through x, excluding
  // cracks.
  std::vector<std::pair<BoundaryPiece, int>> pieces_at(const Vec2& x) const {
    std::vector<std::pair<BoundaryPiece, int>> out;
    const double tol = 1e-9 * d_.ball.radius;
    if (std::abs((x - d_.ball.center.head<2>()).norm() - d_.ball.radius) <= tol)
      out.push_back({BoundaryPiece{BoundaryPiece::Kind::Sphere, -1}, -1});
    for (std::size_t c = 0; c < d_.constraints.size(); ++c) {
      const auto& atoms = d_.constraints[c].any_of;
      for (std::size_t a = 0; a < atoms.size(); ++a) {
        if (atoms[a].sign == Sign::NotEqual) continue;
        Vec3 g;
        const double v = atoms[a].poly.eval_with_gradient(lift(x), g);
        if (std::abs(v) <= tol * g.norm() || std::abs(v) <= proj_.tol(atoms[a].poly))
          out.push_back({BoundaryPiece{BoundaryPiece::Kind::Constraint, static_cast<int>(c)}, static_cast<int>(a)});
      }
    }
    return out;
  }

  Polynomial piece_poly(const std::pair<BoundaryPiece, int>& p) const {
    if (p.first.kind == BoundaryPiece::Kind::Sphere) return proj_.sphere_poly();
    return d_.constraints[static_cast<std::size_t>(p.first.index)].any_of[static_cast<std::size_t>(p.second)].poly;
  }

  // A boundary edge whose endpoints lie on different pieces cuts off a
  // corner; the corner is inserted as a vertex splitting the edge's triangle.
  void insert_corners() {
    std::map<std::uint64_t, std::pair<int, int>> edges;  // key -> (count, triangle)
    for (std::size_t t = 0; t < tris_.size(); ++t) {
      for (int e = 0; e < 3; ++e) {
        auto& slot = edges[edge_key(tris_[t][static_cast<std::size_t>(e)], tris_[t][static_cast<std::size_t>((e + 1) % 3)])];
        ++slot.first;
        slot.second = static_cast<int>(t);
      }
    }
    std::set<std::pair<int, int>> directed;
    for (const auto& t : tris_)
      for (int e = 0; e < 3; ++e) directed.insert({t[static_cast<std::size_t>(e)], t[static_cast<std::size_t>((e + 1) % 3)]});
    std::vector<char> touched(tris_.size(), 0);
    for (const auto& [key, slot] : edges) {
      if (slot.first != 1 || touched[static_cast<std::size_t>(slot.second)]) continue;
      const Tri tr = tris_[static_cast<std::size_t>(slot.second)];
      int e = 0;
      while (edge_key(tr[static_cast<std::size_t>(e)], tr[static_cast<std::size_t>((e + 1) % 3)]) != key) ++e;
      const int a = tr[static_cast<std::size_t>(e)], b = tr[static_cast<std::size_t>((e + 1) % 3)],
                o = tr[static_cast<std::size_t>((e + 2) % 3)];
      if (!onb_[static_cast<std::size_t>(a)] || !onb_[static_cast<std::size_t>(b)]) continue;
      const auto pa = pieces_at(pos_[static_cast<std::size_t>(a)]), pb = pieces_at(pos_[static_cast<std::size_t>(b)]);
      if (pa.empty() || pb.empty()) continue;
      bool shared = false;
      for (const auto& x : pa)
        for (const auto& y : pb) shared = shared || x == y;
      if (shared) continue;
      const Vec2 A = pos_[static_cast<std::size_t>(a)], B = pos_[static_cast<std::size_t>(b)],
                 O = pos_[static_cast<std::size_t>(o)];
      Vec2 c = 0.5 * (A + B);
      const double s = std::min(size_[static_cast<std::size_t>(a)], size_[static_cast<std::size_t>(b)]);
      auto fail = [&] { failed_[static_cast<std::size_t>(a)] = failed_[static_cast<std::size_t>(b)] = 1; };
      if (!proj_.onto_two(piece_poly(pa.front()), piece_poly(pb.front()), c) ||
          (c - 0.5 * (A + B)).norm() > 3.0 * std::max((A - B).norm(), s)) {
        fail();
        continue;
      }
      if (signed_area(A, c, O) <= 1e-12 * s * s || signed_area(c, B, O) <= 1e-12 * s * s) {
        // The corner lies beyond one end of the edge: move that end onto it.
        const int near = (c - A).norm() <= (c - B).norm() ? a : b;
        if (!try_move(near, c, vertex_triangles())) fail();
        continue;
      }
      int v = -1;
      for (std::size_t w = 0; w < pos_.size() && v < 0; ++w)
        if ((pos_[w] - c).norm() <= 1e-12 * d_.ball.radius) v = static_cast<int>(w);
      if (v >= 0 && (directed.count({a, v}) || directed.count({v, b}) || directed.count({v, o}) ||
                     directed.count({o, v}))) {
        fail();
        continue;
      }
      if (v < 0) v = new_vertex(c, s, true, false);
      touched[static_cast<std::size_t>(slot.second)] = 1;
      directed.erase({a, b});
      directed.insert({{a, v}, {v, o}, {o, v}, {v, b}});
      tris_[static_cast<std::size_t>(slot.second)] = {a, v, o};
      tris_.push_back({v, b, o});
    }
  }

  // ------------------------------------------------------------ cracks
  bool crack_active(std::size_t c, std::size_t a, const Vec2& x) const {
    const auto& atoms = d_.constraints[c].any_of;
    for (std::size_t k = 0; k < atoms.size(); ++k)
      if (k != a && atoms[k].holds(lift(x))) return false;
    return true;
  }

  void split_crack(std::size_t c, std::size_t a) {
    const Polynomial& q = d_.constraints[c].any_of[a].poly;
    const double tol = proj_.tol(q);
    std::vector<double> qv(pos_.size());
    for (std::size_t v = 0; v < pos_.size(); ++v) {
      qv[v] = q.eval(lift(pos_[v]));
      if (std::abs(qv[v]) <= tol) qv[v] = 0.0;
    }
    auto crossing = [&](int u, int w) {
      return bisect(pos_[static_cast<std::size_t>(u)], pos_[static_cast<std::size_t>(w)],
                    [&](const Vec2& x) { return q.eval(lift(x)); });
    };

    // Snap vertices close to the crack.
    {
      const auto vt = vertex_triangles();
      std::vector<std::pair<double, int>> best(pos_.size(), {2.0, -1});
      for (const auto& tr : tris_) {
        for (int e = 0; e < 3; ++e) {
          const int u = tr[static_cast<std::size_t>(e)], w = tr[static_cast<std::size_t>((e + 1) % 3)];
          const double qu = qv[static_cast<std::size_t>(u)], qw = qv[static_cast<std::size_t>(w)];
          if (sgn(qu) * sgn(qw) >= 0) continue;
          const double tu = qu / (qu - qw);
          best[static_cast<std::size_t>(u)] = std::min(best[static_cast<std::size_t>(u)], {tu, w});
          best[static_cast<std::size_t>(w)] = std::min(best[static_cast<std::size_t>(w)], {1.0 - tu, u});
        }
      }
      for (std::size_t v = 0; v < pos_.size(); ++v) {
        const auto [t, w] = best[v];
        if (w < 0 || t >= kSnapFraction || qv[v] == 0.0) continue;
        if (sgn(qv[v]) * sgn(qv[static_cast<std::size_t>(w)]) >= 0) continue;
        const Vec2 p = crossing(static_cast<int>(v), w);
        if (!crack_active(c, a, p)) continue;
        if (!try_move(static_cast<int>(v), p, vt)) continue;
        qv[v] = 0.0;
        onb_[v] = 1;
      }
    }

    // Split the remaining crossing edges.
    std::map<std::uint64_t, int> mid;
    for (const auto& tr : tris_) {
      for (int e = 0; e < 3; ++e) {
        const int u = tr[static_cast<std::size_t>(e)], w = tr[static_cast<std::size_t>((e + 1) % 3)];
        if (sgn(qv[static_cast<std::size_t>(u)]) * sgn(qv[static_cast<std::size_t>(w)]) >= 0) continue;
        const auto key = edge_key(u, w);
        if (mid.count(key)) continue;
        const Vec2 p = crossing(u, w);
        if (!crack_active(c, a, p)) continue;
        const int v = new_vertex(p, std::min(size_[static_cast<std::size_t>(u)], size_[static_cast<std::size_t>(w)]), true, false);
        qv.push_back(0.0);
        mid[key] = v;
      }
    }
    if (!mid.empty()) {
      std::vector<Tri> out;
      for (const auto& tr : tris_) {
        int m[3];
        int count = 0;
        for (int e = 0; e < 3; ++e) {
          const auto it = mid.find(edge_key(tr[static_cast<std::size_t>(e)], tr[static_cast<std::size_t>((e + 1) % 3)]));
          m[e] = it == mid.end() ? -1 : it->second;
          count += m[e] >= 0;
        }
        if (count == 0) {
          out.push_back(tr);
        } else if (count == 1) {
          const int e = m[0] >= 0 ? 0 : (m[1] >= 0 ? 1 : 2);
          const int v0 = tr[static_cast<std::size_t>(e)], v1 = tr[static_cast<std::size_t>((e + 1) % 3)],
                    v2 = tr[static_cast<std::size_t>((e + 2) % 3)];
          out.push_back({v0, m[e], v2});
          out.push_back({m[e], v1, v2});
        } else {
          // Two split edges meet at the corner vertex `k`.
          int k = 0;
          for (int e = 0; e < 3; ++e)
            if (m[e] >= 0 && m[(e + 2) % 3] >= 0) k = e;
          const int vk = tr[static_cast<std::size_t>(k)], vn = tr[static_cast<std::size_t>((k + 1) % 3)],
                    vp = tr[static_cast<std::size_t>((k + 2) % 3)];
          const int m_out = m[k], m_in = m[(k + 2) % 3];
          out.push_back({vk, m_out, m_in});
          emit_polygon({m_out, vn, vp, m_in}, out);
        }
      }
      tris_ = std::move(out);
    }
    for (std::size_t v = 0; v < pos_.size(); ++v) {
      if (qv[v] == 0.0 && crack_active(c, a, pos_[v])) {
        crack_.emplace_back(static_cast<int>(v), std::make_pair(c, a));
        onb_[v] = 1;
      }
    }
  }

  void drop_degenerate() {
    std::vector<Tri> out;
    for (const auto& tr : tris_) {
      if (tr[0] == tr[1] || tr[1] == tr[2] || tr[0] == tr[2]) continue;
      const double s = std::min({size_[static_cast<std::size_t>(tr[0])], size_[static_cast<std::size_t>(tr[1])],
                                 size_[static_cast<std::size_t>(tr[2])]});
      if (signed_area(pos_[static_cast<std::size_t>(tr[0])], pos_[static_cast<std::size_t>(tr[1])],
                      pos_[static_cast<std::size_t>(tr[2])]) <= 1e-12 * s * s)
        continue;
      out.push_back(tr);
    }
    tris_ = std::move(out);
  }

  bool is_crack_edge(int u, int w) const {
    for (const auto& [v1, ca1] : crack_) {
      if (v1 != u) continue;
      for (const auto& [v2, ca2] : crack_) {
        if (v2 != w || ca1 != ca2) continue;
        const Vec2 m = 0.5 * (pos_[static_cast<std::size_t>(u)] + pos_[static_cast<std::size_t>(w)]);
        const Polynomial& q = d_.constraints[ca1.first].any_of[ca1.second].poly;
        Vec3 g;
        const double val = q.eval_with_gradient(lift(m), g);
        const double len = (pos_[static_cast<std::size_t>(u)] - pos_[static_cast<std::size_t>(w)]).norm();
        if (std::abs(val) <= 0.05 * len * g.norm() + proj_.tol(q) && crack_active(ca1.first, ca1.second, m)) return true;
      }
    }
    return false;
  }

  void duplicate_crack_vertices() {
    hint_.assign(pos_.size(), Vec2::Zero());
    if (crack_.empty()) return;
    std::set<int> crack_vertices;
    for (const auto& [v, ca] : crack_) crack_vertices.insert(v);
    auto vt = vertex_triangles();
    for (int v : crack_vertices) {
      const auto& star = vt[static_cast<std::size_t>(v)];
      const std::size_t n = star.size();
      std::vector<std::size_t> parent(n);
      for (std::size_t i = 0; i < n; ++i) parent[i] = i;
      auto find = [&](std::size_t i) {
        while (parent[i] != i) i = parent[i] = parent[parent[i]];
        return i;
      };
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
          const auto& ti = tris_[static_cast<std::size_t>(star[i])];
          const auto& tj = tris_[static_cast<std::size_t>(star[j])];
          for (int w : ti) {
            if (w == v || std::find(tj.begin(), tj.end(), w) == tj.end()) continue;
            if (crack_vertices.count(w) && is_crack_edge(v, w)) continue;
            parent[find(i)] = find(j);
          }
        }
      }
      std::map<std::size_t, std::vector<std::size_t>> comps;
      for (std::size_t i = 0; i < n; ++i) comps[find(i)].push_back(i);
      if (comps.size() < 2) continue;
      std::vector<std::vector<std::size_t>> ordered;
      for (auto& [root, members] : comps) ordered.push_back(members);
      std::sort(ordered.begin(), ordered.end(),
                [&](const auto& x, const auto& y) { return star[x.front()] < star[y.front()]; });
      for (std::size_t ci = 0; ci < ordered.size(); ++ci) {
        int copy = v;
        if (ci > 0) {
          copy = new_vertex(pos_[static_cast<std::size_t>(v)], size_[static_cast<std::size_t>(v)], true,
                            failed_[static_cast<std::size_t>(v)] != 0);
          hint_.push_back(Vec2::Zero());
        }
        Vec2 dir = Vec2::Zero();
        for (std::size_t i : ordered[ci]) {
          auto& tr = tris_[static_cast<std::size_t>(star[i])];
          Vec2 cen = Vec2::Zero();
          for (auto& w : tr) {
            cen += pos_[static_cast<std::size_t>(w)] / 3.0;
            if (w == v) w = copy;
          }
          dir += cen - pos_[static_cast<std::size_t>(v)];
        }
        if (dir.norm() > 0) hint_[static_cast<std::size_t>(copy)] = dir.normalized();
      }
    }
  }

  // Interior edge flips that raise the smaller minimum angle of the two
  // adjacent triangles. Boundary and crack edges are never flipped.
  void flip_edges() {
    for (int pass = 0; pass < 20; ++pass) {
      std::map<std::pair<int, int>, std::pair<int, int>> directed;  // (u, w) -> (triangle, opposite)
      for (std::size_t t = 0; t < tris_.size(); ++t)
        for (int e = 0; e < 3; ++e)
          directed[{tris_[t][static_cast<std::size_t>(e)], tris_[t][static_cast<std::size_t>((e + 1) % 3)]}] = {
              static_cast<int>(t), tris_[t][static_cast<std::size_t>((e + 2) % 3)]};
      std::vector<char> changed(tris_.size(), 0);
      int flips = 0;
      for (const auto& [edge, t1] : directed) {
        const auto [u, w] = edge;
        if (u > w) continue;
        const auto it = directed.find({w, u});
        if (it == directed.end()) continue;
        const auto t2 = it->second;
        if (changed[static_cast<std::size_t>(t1.first)] || changed[static_cast<std::size_t>(t2.first)]) continue;
        const int x = t1.second, y = t2.second;
        if (x == y || directed.count({x, y}) || directed.count({y, x})) continue;
        const Vec2 U = pos_[static_cast<std::size_t>(u)], W = pos_[static_cast<std::size_t>(w)],
                   X = pos_[static_cast<std::size_t>(x)], Y = pos_[static_cast<std::size_t>(y)];
        if (signed_area(X, U, Y) <= 0.0 || signed_area(Y, W, X) <= 0.0) continue;
        const double before = std::min(min_angle_deg(U, W, X), min_angle_deg(W, U, Y));
        const double after = std::min(min_angle_deg(X, U, Y), min_angle_deg(Y, W, X));
        if (after <= before + 1e-9) continue;
        tris_[static_cast<std::size_t>(t1.first)] = {x, u, y};
        tris_[static_cast<std::size_t>(t2.first)] = {y, w, x};
        changed[static_cast<std::size_t>(t1.first)] = changed[static_cast<std::size_t>(t2.first)] = 1;
        ++flips;
      }
      if (flips == 0) break;
    }
  }

  double star_min_angle(int v, const Vec2& x, const std::vector<int>& star) const {
    double worst = 180.0;
    for (int t : star) {
      Vec2 p[3];
      for (int k = 0; k < 3; ++k) {
        const int w = tris_[static_cast<std::size_t>(t)][static_cast<std::size_t>(k)];
        p[k] = w == v ? x : pos_[static_cast<std::size_t>(w)];
      }
      if (signed_area(p[0], p[1], p[2]) <= 0.0) return -1.0;
      worst = std::min(worst, min_angle_deg(p[0], p[1], p[2]));
    }
    return worst;
  }

  // Moves interior vertices of poorly shaped triangles toward the centroid
  // of their neighbours when that improves the worst angle around them.
  void smooth() {
    std::vector<char> fixed(pos_.size(), 0);
    for (std::size_t v = 0; v < pos_.size(); ++v) fixed[v] = onb_[v] || failed_[v];
    for (const auto& g : centers_)
      for (std::size_t v = 0; v < pos_.size(); ++v)
        if ((pos_[v] - g.point).norm() == 0.0) fixed[v] = 1;
    for (int pass = 0; pass < 5; ++pass) {
      const auto vt = vertex_triangles();
      int moved = 0;
      for (std::size_t v = 0; v < pos_.size(); ++v) {
        if (fixed[v] || vt[v].empty()) continue;
        const double now = star_min_angle(static_cast<int>(v), pos_[v], vt[v]);
        if (now >= 20.0) continue;
        Vec2 c = Vec2::Zero();
        int n = 0;
        for (int t : vt[v])
          for (int w : tris_[static_cast<std::size_t>(t)])
            if (w != static_cast<int>(v)) {
              c += pos_[static_cast<std::size_t>(w)];
              ++n;
            }
        c /= n;
        for (double step : {1.0, 0.5, 0.25}) {
          const Vec2 x = pos_[v] + step * (c - pos_[v]);
          if (star_min_angle(static_cast<int>(v), x, vt[v]) > now + 1e-9) {
            pos_[v] = x;
            ++moved;
            break;
          }
        }
      }
      if (moved == 0) break;
    }
  }

  // ------------------------------------------------------------ output
  TriMesh finish() {
    TriMesh m;
    m.h = h_;
    m.radius = d_.ball.radius;
    m.grading_centers = centers_;
    hint_.resize(pos_.size(), Vec2::Zero());
    std::vector<int> remap(pos_.size(), -1);
    for (auto& tr : tris_) {
      for (auto& v : tr) {
        if (remap[static_cast<std::size_t>(v)] < 0) {
          remap[static_cast<std::size_t>(v)] = 0;
        }
      }
    }
    int next = 0;
    for (std::size_t v = 0; v < pos_.size(); ++v) {
      if (remap[v] < 0) continue;
      remap[v] = next++;
      m.vertices.push_back(pos_[v]);
      m.vertex_size.push_back(size_[v]);
      m.side_hint.push_back(hint_[v]);
      if (failed_[v]) m.flagged.push_back(remap[v]);
    }
    for (const auto& tr : tris_) {
      Tri t{remap[static_cast<std::size_t>(tr[0])], remap[static_cast<std::size_t>(tr[1])],
            remap[static_cast<std::size_t>(tr[2])]};
      m.triangles.push_back(t);
      if (m.triangle_area(m.triangles.size() - 1) < 0) std::swap(m.triangles.back()[1], m.triangles.back()[2]);
    }

    // Boundary edges: edges used by one triangle, oriented with the domain
    // on their left.
    std::map<std::uint64_t, std::pair<int, std::pair<int, int>>> count;
    for (const auto& t : m.triangles) {
      for (int e = 0; e < 3; ++e) {
        const int a = t[static_cast<std::size_t>(e)], b = t[static_cast<std::size_t>((e + 1) % 3)];
        auto& slot = count[edge_key(a, b)];
        ++slot.first;
        slot.second = {a, b};
      }
    }
    const auto pieces = d_.pieces();
    for (const auto& [key, slot] : count) {
      if (slot.first != 1) continue;
      const auto [a, b] = slot.second;
      const Vec2 mid = 0.5 * (m.vertices[static_cast<std::size_t>(a)] + m.vertices[static_cast<std::size_t>(b)]);
      BoundaryPiece best = pieces.front();
      double bd = std::numeric_limits<double>::infinity();
      for (const auto& p : pieces) {
        const double dist = d_.piece_distance(lift(mid), p);
        if (dist < bd) {
          bd = dist;
          best = p;
        }
      }
      BoundaryEdge be;
      be.a = a;
      be.b = b;
      be.piece = best;
      be.tag = d_.dirichlet.selects(best) ? BoundaryTag::Dirichlet : BoundaryTag::Neumann;
      m.boundary_edges.push_back(be);
    }
    return m;
  }

  const DomainSpec& d_;
  double h_;
  std::vector<GradingCenter> centers_;
  Projector proj_;
  std::set<CellKey> leaves_, internal_;
  std::map<std::pair<std::int64_t, std::int64_t>, int> vid_;
  std::vector<Vec2> pos_;
  std::vector<double> size_;
  std::vector<Tri> tris_;
  std::vector<double> level_;
  std::vector<char> onb_, failed_;
  std::vector<std::pair<int, std::pair<std::size_t, std::size_t>>> crack_;
  std::vector<Vec2> hint_;
};

bool near_domain(const DomainSpec& d, const Vec3& x) {
  if (d.contains(x)) return false;
  const double eps = 1e-5 * d.ball.radius;
  for (int k = 0; k < 32; ++k) {
    const double a = 2.0 * std::numbers::pi * (k + 0.5) / 32;
    if (d.contains(x + eps * Vec3(std::cos(a), std::sin(a), 0.0))) return true;
  }
  return false;
}

bool crack_active_at(const Constraint& c, std::size_t a, const Vec3& x) {
  for (std::size_t k = 0; k < c.any_of.size(); ++k)
    if (k != a && c.any_of[k].holds(x)) return false;
  return true;
}

// Boundary point where the boundary is not locally a smooth curve: the
// domain's trace on a small circle is not two antipodal arcs, or a crack
// ends there.
bool is_corner(const DomainSpec& d, const Vec3& x) {
  constexpr int n = 64;
  const double eps = 1e-5 * d.ball.radius;
  std::vector<char> in(n);
  for (int k = 0; k < n; ++k) {
    const double a = 2.0 * std::numbers::pi * k / n;
    in[static_cast<std::size_t>(k)] = d.contains(x + eps * Vec3(std::cos(a), std::sin(a), 0.0));
  }
  std::vector<int> flips;
  for (int k = 0; k < n; ++k)
    if (in[static_cast<std::size_t>(k)] != in[static_cast<std::size_t>((k + 1) % n)]) flips.push_back(k);
  if (flips.empty()) return false;
  if (flips.size() != 2 || std::abs(flips[1] - flips[0] - n / 2) > 1) return true;
  for (const auto& c : d.constraints) {
    for (std::size_t a = 0; a < c.any_of.size(); ++a) {
      if (c.any_of[a].sign != Sign::NotEqual) continue;
      Vec3 g;
      const double v = c.any_of[a].poly.eval_with_gradient(x, g);
      if (g.norm() == 0.0 || std::abs(v) > 1e-9 * g.norm()) continue;
      const Vec3 t = Vec3(-g.y(), g.x(), 0.0).normalized();
      const Vec3 p = project_to_zero_set(c.any_of[a].poly, x + eps * t, 1e-14);
      const Vec3 q = project_to_zero_set(c.any_of[a].poly, x - eps * t, 1e-14);
      if (crack_active_at(c, a, p) != crack_active_at(c, a, q)) return true;
    }
  }
  return false;
}

}  // namespace

TriMesh build_mesh(const DomainSpec& domain, double h, const std::vector<GradingCenter>& grading) {
  if (domain.dim != 2) throw ValidationError("meshing requires a 2D domain");
  if (!(h > 0.0)) throw ValidationError("mesh size h must be positive");
  if (h > domain.ball.radius) throw ValidationError("mesh size h exceeds the domain radius");
  for (const auto& g : grading)
    if (!(g.gamma >= 1.0)) throw ValidationError("grading exponent must be >= 1");
  return Builder(domain, h, grading).run();
}

std::vector<GradingCenter> detect_grading_centers(const DomainSpec& domain) {
  std::vector<Polynomial> polys;
  for (const auto& c : domain.constraints)
    for (const auto& a : c.any_of)
      if (std::find(polys.begin(), polys.end(), a.poly) == polys.end()) polys.push_back(a.poly);
  std::vector<Vec3> found;
  const double merge = kEpsMergeRel * domain.ball.radius;
  auto add = [&](const Vec3& x) {
    if ((x - domain.ball.center).head<2>().norm() > domain.ball.radius) return;
    if (!near_domain(domain, x) && !is_corner(domain, x)) return;
    for (const auto& f : found)
      if ((f - x).norm() <= merge) return;
    found.push_back(x);
  };
  for (const auto& p : polys)
    for (const auto& s : singular_points(p, domain.ball)) add(s);
  {
    Polynomial sphere = Polynomial::constant(2, -domain.ball.radius * domain.ball.radius);
    for (int j = 0; j < 2; ++j) {
      const Polynomial xj = Polynomial::variable(2, j) - Polynomial::constant(2, domain.ball.center[j]);
      sphere = sphere + xj * xj;
    }
    polys.push_back(sphere);
  }
  const int m = 16;
  for (std::size_t i = 0; i < polys.size(); ++i) {
    for (std::size_t j = i + 1; j < polys.size(); ++j) {
      for (int a = 0; a < m; ++a) {
        for (int b = 0; b < m; ++b) {
          Vec3 x = domain.ball.center +
                   domain.ball.radius * Vec3(-1.0 + 2.0 * (a + 0.5) / m, -1.0 + 2.0 * (b + 0.5) / m, 0.0);
          bool ok = false;
          for (int it = 0; it < 50; ++it) {
            Vec3 gp, gq;
            const double vp = polys[i].eval_with_gradient(x, gp), vq = polys[j].eval_with_gradient(x, gq);
            if (std::abs(vp) <= 1e-13 && std::abs(vq) <= 1e-13) {
              ok = true;
              break;
            }
            Eigen::Matrix2d jac;
            jac << gp.x(), gp.y(), gq.x(), gq.y();
            if (std::abs(jac.determinant()) < 1e-12) break;
            const Eigen::Vector2d step = jac.inverse() * Eigen::Vector2d(vp, vq);
            x.x() -= step.x();
            x.y() -= step.y();
          }
          if (ok && is_corner(domain, x)) add(x);
        }
      }
    }
  }
  std::vector<GradingCenter> out;
  for (const auto& f : found) out.push_back({f.head<2>(), 3.0});
  return out;
}

bool in_innermost_ring(const TriMesh& m, std::size_t t) {
  const Vec2 c = m.centroid(t);
  const double dia = m.diameter(t);
  for (const auto& g : m.grading_centers)
    if ((c - g.point).norm() <= 2.0 * dia) return true;
  return false;
}

MeshQuality mesh_quality(const TriMesh& m) {
  MeshQuality q;
  q.min_angle = 180.0;
  q.min_angle_outer = 180.0;
  q.conformity = true;
  for (std::size_t t = 0; t < m.triangles.size(); ++t) {
    const auto& tr = m.triangles[t];
    for (int v : tr)
      if (v < 0 || static_cast<std::size_t>(v) >= m.vertices.size()) q.conformity = false;
    if (!q.conformity) break;
    const Vec2 a = m.vertices[static_cast<std::size_t>(tr[0])], b = m.vertices[static_cast<std::size_t>(tr[1])],
               c = m.vertices[static_cast<std::size_t>(tr[2])];
    const double area = m.triangle_area(t);
    if (!(area > 0.0)) q.conformity = false;
    const double ang = min_angle_deg(a, b, c);
    q.min_angle = std::min(q.min_angle, ang);
    if (!in_innermost_ring(m, t)) q.min_angle_outer = std::min(q.min_angle_outer, ang);
    const double longest = m.diameter(t);
    const double height = area > 0 ? 2.0 * area / longest : 0.0;
    q.max_aspect = std::max(q.max_aspect, height > 0 ? longest / height : std::numeric_limits<double>::infinity());
  }
  if (!q.conformity) return q;
  // Every edge in at most two triangles, traversed in opposite directions;
  // edges in one triangle are exactly the tagged boundary edges.
  std::map<std::pair<int, int>, int> directed;
  for (const auto& tr : m.triangles)
    for (int e = 0; e < 3; ++e) ++directed[{tr[static_cast<std::size_t>(e)], tr[static_cast<std::size_t>((e + 1) % 3)]}];
  std::set<std::pair<int, int>> boundary;
  for (const auto& [e, n] : directed) {
    if (n > 1) q.conformity = false;
    if (!directed.count({e.second, e.first})) boundary.insert(e);
  }
  std::set<std::pair<int, int>> tagged;
  for (const auto& be : m.boundary_edges) tagged.insert({be.a, be.b});
  if (tagged != boundary) q.conformity = false;
  return q;
}

TriMesh refine_uniform(const TriMesh& m) {
  TriMesh r;
  r.h = 0.5 * m.h;
  r.radius = m.radius;
  r.grading_centers = m.grading_centers;
  r.vertices = m.vertices;
  r.side_hint = m.side_hint;
  r.vertex_size = m.vertex_size;
  for (auto& s : r.vertex_size) s *= 0.5;
  r.flagged = m.flagged;
  std::map<std::uint64_t, int> mid;
  auto midpoint = [&](int a, int b) {
    const auto key = edge_key(a, b);
    if (const auto it = mid.find(key); it != mid.end()) return it->second;
    const int v = static_cast<int>(r.vertices.size());
    r.vertices.push_back(0.5 * (m.vertices[static_cast<std::size_t>(a)] + m.vertices[static_cast<std::size_t>(b)]));
    Vec2 hint = m.side_hint[static_cast<std::size_t>(a)] + m.side_hint[static_cast<std::size_t>(b)];
    r.side_hint.push_back(hint.norm() > 0 ? Vec2(hint.normalized()) : Vec2::Zero());
    r.vertex_size.push_back(0.5 * std::min(m.vertex_size[static_cast<std::size_t>(a)], m.vertex_size[static_cast<std::size_t>(b)]));
    mid[key] = v;
    return v;
  };
  for (const auto& t : m.triangles) {
    const int a = t[0], b = t[1], c = t[2];
    const int ab = midpoint(a, b), bc = midpoint(b, c), ca = midpoint(c, a);
    r.triangles.push_back({a, ab, ca});
    r.triangles.push_back({ab, b, bc});
    r.triangles.push_back({ca, bc, c});
    r.triangles.push_back({ab, bc, ca});
  }
  for (const auto& e : m.boundary_edges) {
    const int v = midpoint(e.a, e.b);
    r.boundary_edges.push_back({e.a, v, e.tag, e.piece});
    r.boundary_edges.push_back({v, e.b, e.tag, e.piece});
  }
  return r;
}

void write_mesh(std::ostream& os, const TriMesh& m) {
  char buf[96];
  os << "V " << m.vertices.size() << '\n';
  for (const auto& v : m.vertices) {
    std::snprintf(buf, sizeof buf, "%.17g %.17g\n", v.x(), v.y());
    os << buf;
  }
  os << "T " << m.triangles.size() << '\n';
  for (const auto& t : m.triangles) os << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
  os << "B " << m.boundary_edges.size() << '\n';
  for (const auto& e : m.boundary_edges) os << e.a << ' ' << e.b << ' ' << to_string(e.tag) << '\n';
}

}  // namespace conelab
