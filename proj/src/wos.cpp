#include "conelab/wos.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>

#include "conelab/errors.hpp"
#include "conelab/parallel.hpp"
#include "conelab/random.hpp"

namespace conelab {

namespace {

constexpr long kBlock = 1024;

struct Moments {
  double sum = 0.0, sum_sq = 0.0, steps = 0.0;
  long used = 0, excluded = 0;

  void merge(const Moments& o) {
    sum += o.sum;
    sum_sq += o.sum_sq;
    steps += o.steps;
    used += o.used;
    excluded += o.excluded;
  }
  double mean() const { return used > 0 ? sum / static_cast<double>(used) : 0.0; }
  double std_error() const {
    if (used < 2) return std::numeric_limits<double>::infinity();
    const double n = static_cast<double>(used);
    const double var = std::max(0.0, (sum_sq - sum * sum / n) / (n - 1.0));
    return std::sqrt(var / n);
  }
};

}  // namespace

WosSolver::WosSolver(WosConfig cfg) : cfg_(std::move(cfg)) {
  const DomainSpec& d = cfg_.domain;
  if (d.dim != 3) throw ValidationError("walk-on-spheres requires a 3D domain");
  if (!d.op.is_identity()) throw ValidationError("walk-on-spheres requires A = I");
  const auto f = d.source.constant_value();
  if (!f || *f != 0.0) throw ValidationError("walk-on-spheres requires f = 0: volume source unsupported in 3D");
  if (cfg_.walkers < 1) throw ValidationError("walkers must be at least 1");
  if (cfg_.max_steps < 1) throw ValidationError("max_steps must be at least 1");
  eps_ = cfg_.shrink_tolerance > 0.0 ? cfg_.shrink_tolerance : 1e-4 * d.ball.radius;
  if (cfg_.shrink_tolerance < 0.0) throw ValidationError("shrink tolerance must be positive");

  const BoundaryPiece sphere{BoundaryPiece::Kind::Sphere, -1};
  sphere_dirichlet_ = d.dirichlet.selects(sphere);
  reflect_ = d.neumann.selects(sphere);
  const Ball region = d.ball;
  for (int c = 0; c < static_cast<int>(d.constraints.size()); ++c) {
    const BoundaryPiece piece{BoundaryPiece::Kind::Constraint, c};
    if (d.neumann.selects(piece))
      throw ValidationError("walk-on-spheres supports Neumann data only on the bounding sphere");
    if (!d.dirichlet.selects(piece))
      throw ValidationError("constraint " + std::to_string(c) + " carries no boundary condition");
    Piece p;
    p.constraint = c;
    const auto& atoms = d.constraints[static_cast<std::size_t>(c)].any_of;
    for (int a = 0; a < static_cast<int>(atoms.size()); ++a) {
      if (atoms[static_cast<std::size_t>(a)].sign == Sign::Equal)
        throw ValidationError("walk-on-spheres needs an open domain: equality constraints unsupported");
      p.atoms.emplace_back(atoms[static_cast<std::size_t>(a)].poly, region);
      p.atom_index.push_back(a);
    }
    pieces_.push_back(std::move(p));
  }
  if (!sphere_dirichlet_ && pieces_.empty()) throw ValidationError("the Dirichlet part of the boundary is empty");
}

double WosSolver::distance_bound(const Vec3& x) const {
  const DomainSpec& d = cfg_.domain;
  double dist = std::numeric_limits<double>::infinity();
  if (sphere_dirichlet_) dist = d.ball.radius - (x - d.ball.center).norm();
  for (const auto& p : pieces_) {
    const auto& atoms = d.constraints[static_cast<std::size_t>(p.constraint)].any_of;
    double best = 0.0;
    for (std::size_t a = 0; a < p.atoms.size(); ++a)
      if (atoms[static_cast<std::size_t>(p.atom_index[a])].holds(x)) best = std::max(best, p.atoms[a].local_lower_bound(x));
    dist = std::min(dist, best);
  }
  return dist;
}

WosSolver::Walk WosSolver::walk(Vec3 x, std::uint64_t walker_seed) const {
  const DomainSpec& d = cfg_.domain;
  const Vec3 c = d.ball.center;
  const double r2 = d.ball.radius * d.ball.radius;
  Rng rng(walker_seed);
  Walk w;
  for (w.steps = 0; w.steps < cfg_.max_steps; ++w.steps) {
    const double dist = distance_bound(x);
    if (dist < eps_) {
      // Score g at the nearest Dirichlet piece.
      Vec3 y = x;
      double nearest = std::numeric_limits<double>::infinity();
      if (sphere_dirichlet_) {
        nearest = d.ball.radius - (x - c).norm();
        y = c + d.ball.radius * (x - c).normalized();
      }
      for (const auto& p : pieces_) {
        const auto& atoms = d.constraints[static_cast<std::size_t>(p.constraint)].any_of;
        double best = 0.0;
        int which = -1;
        for (std::size_t a = 0; a < p.atoms.size(); ++a) {
          if (!atoms[static_cast<std::size_t>(p.atom_index[a])].holds(x)) continue;
          const double b = p.atoms[a].local_lower_bound(x);
          if (which < 0 || b > best) {
            best = b;
            which = static_cast<int>(a);
          }
        }
        if (which >= 0 && best < nearest) {
          nearest = best;
          y = project_to_zero_set(p.atoms[static_cast<std::size_t>(which)].polynomial(), x, kEpsVal);
        }
      }
      w.value = d.dirichlet_data(y);
      w.done = true;
      return w;
    }
    x += dist * rng.unit_vector(3);
    if (reflect_) {
      const Vec3 v = x - c;
      const double n2 = v.squaredNorm();
      if (n2 > r2) x = c + (r2 / n2) * v;
    }
  }
  return w;
}

std::uint64_t WosSolver::point_seed(const Vec3& x) const {
  std::uint64_t s = derive_seed(cfg_.seed, "wos");
  for (int k = 0; k < 3; ++k) s = derive_seed(s, std::bit_cast<std::uint64_t>(x[k] == 0.0 ? 0.0 : x[k]));
  return s;
}

void WosSolver::check_interior(const Vec3& x) const {
  if (!cfg_.domain.contains(x))
    throw ValidationError("point (" + std::to_string(x.x()) + ", " + std::to_string(x.y()) + ", " +
                          std::to_string(x.z()) + ") is not in the domain");
}

WosResult WosSolver::estimate(const Vec3& x) const {
  check_interior(x);
  const std::uint64_t seed = point_seed(x);
  const long blocks = (cfg_.walkers + kBlock - 1) / kBlock;
  std::vector<Moments> part(static_cast<std::size_t>(blocks));
  const int workers = cfg_.workers > 0 ? cfg_.workers : default_workers();
  for_each_block(static_cast<std::size_t>(blocks), workers, [&](std::size_t b) {
    Moments& m = part[b];
    const long end = std::min(cfg_.walkers, static_cast<long>(b + 1) * kBlock);
    for (long i = static_cast<long>(b) * kBlock; i < end; ++i) {
      const Walk w = walk(x, derive_seed(seed, static_cast<std::uint64_t>(i)));
      if (!w.done) {
        ++m.excluded;
        continue;
      }
      ++m.used;
      m.sum += w.value;
      m.sum_sq += w.value * w.value;
      m.steps += static_cast<double>(w.steps);
    }
  });
  Moments total;
  for (const auto& m : part) total.merge(m);
  WosResult r;
  r.point = x;
  r.mean = total.mean();
  r.std_error = total.std_error();
  r.mean_steps = total.used > 0 ? total.steps / static_cast<double>(total.used) : 0.0;
  r.used = total.used;
  r.excluded = total.excluded;
  r.flagged = static_cast<double>(total.excluded) > 0.01 * static_cast<double>(cfg_.walkers);
  return r;
}

std::vector<WosResult> WosSolver::estimate_batch(const std::vector<Vec3>& points) const {
  std::vector<WosResult> out;
  out.reserve(points.size());
  for (const auto& p : points) out.push_back(estimate(p));
  return out;
}

WosGradient WosSolver::gradient(const Vec3& x, double h) const {
  check_interior(x);
  if (!(h > 0.0)) throw ValidationError("gradient step must be positive");
  const double room = std::min(distance_bound(x), reflect_ ? cfg_.domain.ball.radius - (x - cfg_.domain.ball.center).norm()
                                                           : std::numeric_limits<double>::infinity());
  if (room < h) throw ValidationError("gradient step leaves the domain: the ball B(x, h) must lie inside");
  const std::uint64_t seed = point_seed(x);
  const long blocks = (cfg_.walkers + kBlock - 1) / kBlock;
  const int workers = cfg_.workers > 0 ? cfg_.workers : default_workers();
  WosGradient g;
  g.point = x;
  for (int k = 0; k < 3; ++k) {
    Vec3 e = Vec3::Zero();
    e[k] = h;
    const std::uint64_t axis_seed = derive_seed(seed, static_cast<std::uint64_t>(k) + 1);
    std::vector<Moments> part(static_cast<std::size_t>(blocks));
    for_each_block(static_cast<std::size_t>(blocks), workers, [&](std::size_t b) {
      Moments& m = part[b];
      const long end = std::min(cfg_.walkers, static_cast<long>(b + 1) * kBlock);
      for (long i = static_cast<long>(b) * kBlock; i < end; ++i) {
        const std::uint64_t s = derive_seed(axis_seed, static_cast<std::uint64_t>(i));
        const Walk plus = walk(x + e, s);
        const Walk minus = walk(x - e, s);
        if (!plus.done || !minus.done) {
          ++m.excluded;
          continue;
        }
        const double diff = (plus.value - minus.value) / (2.0 * h);
        ++m.used;
        m.sum += diff;
        m.sum_sq += diff * diff;
      }
    });
    Moments total;
    for (const auto& m : part) total.merge(m);
    g.value[k] = total.mean();
    g.std_error[k] = total.std_error();
    g.excluded += total.excluded;
    if (g.std_error[k] > 0.5 * std::abs(g.value[k])) g.low_confidence = true;
  }
  g.flagged = static_cast<double>(g.excluded) > 0.01 * 3.0 * static_cast<double>(cfg_.walkers);
  return g;
}

}  // namespace conelab
