#include "conelab/regularity.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <memory>
#include <numbers>

#include "conelab/errors.hpp"
#include "conelab/kdtree.hpp"
#include "conelab/random.hpp"

namespace conelab {

namespace {

constexpr double kPi = std::numbers::pi;

double cross(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

// Signed area of the disk of radius r about the origin intersected with the
// triangle (0, a, b).
double wedge_disk_area(const Vec2& a, const Vec2& b, double r) {
  const Vec2 d = b - a;
  const double qa = d.squaredNorm(), qb = 2.0 * a.dot(d), qc = a.squaredNorm() - r * r;
  double cuts[4] = {0.0, 0.0, 0.0, 1.0};
  int n = 1;
  const double disc = qb * qb - 4.0 * qa * qc;
  if (qa > 0.0 && disc > 0.0) {
    const double s = std::sqrt(disc);
    for (double t : {(-qb - s) / (2.0 * qa), (-qb + s) / (2.0 * qa)})
      if (t > 0.0 && t < 1.0) cuts[n++] = t;
  }
  cuts[n++] = 1.0;
  double area = 0.0;
  for (int i = 0; i + 1 < n; ++i) {
    const Vec2 p = a + cuts[i] * d, q = a + cuts[i + 1] * d;
    const Vec2 mid = 0.5 * (p + q);
    if (mid.squaredNorm() <= r * r) area += 0.5 * cross(p, q);
    else area += 0.5 * r * r * std::atan2(cross(p, q), p.dot(q));
  }
  return area;
}

double triangle_disk_area(const Vec2 (&p)[3], const Vec2& c, double r) {
  double s = 0.0;
  for (int k = 0; k < 3; ++k) s += wedge_disk_area(p[k] - c, p[(k + 1) % 3] - c, r);
  return std::abs(s);
}

AnnulusProfile empty_profile(const Vec3& t, const ProfileOptions& opt, double radius) {
  if (opt.levels < 1) throw ValidationError("profile needs at least one annulus");
  if (opt.p_values.empty()) throw ValidationError("profile needs at least one exponent");
  AnnulusProfile prof;
  prof.center = t;
  const double r0 = opt.r0 > 0.0 ? opt.r0 : 0.25 * radius;
  for (int j = 0; j <= opt.levels; ++j) prof.radii.push_back(std::ldexp(r0, -j));
  prof.p_values = opt.p_values;
  prof.mass.assign(static_cast<std::size_t>(opt.levels), std::vector<double>(opt.p_values.size(), 0.0));
  prof.missing.assign(static_cast<std::size_t>(opt.levels), 0);
  prof.excluded.assign(static_cast<std::size_t>(opt.levels), 0);
  for (int j = 0; j < opt.levels; ++j)
    if (j >= opt.levels - opt.discard_inner) prof.excluded[static_cast<std::size_t>(j)] = 1;
  return prof;
}

// Uniform-grid bucketing of triangles for point location.
class TriangleLocator {
 public:
  explicit TriangleLocator(const TriMesh& m) : m_(m) {
    lo_ = Vec2::Constant(std::numeric_limits<double>::infinity());
    Vec2 hi = -lo_;
    for (const auto& v : m.vertices) {
      lo_ = lo_.cwiseMin(v);
      hi = hi.cwiseMax(v);
    }
    n_ = std::max(1, static_cast<int>(std::sqrt(static_cast<double>(m.triangles.size()) / 2.0)));
    cell_ = std::max((hi - lo_).maxCoeff() / n_, 1e-300);
    cells_.assign(static_cast<std::size_t>(n_) * static_cast<std::size_t>(n_), {});
    for (std::size_t t = 0; t < m.triangles.size(); ++t) {
      Vec2 a = m.vertices[static_cast<std::size_t>(m.triangles[t][0])], b = a;
      for (int k = 1; k < 3; ++k) {
        a = a.cwiseMin(m.vertices[static_cast<std::size_t>(m.triangles[t][static_cast<std::size_t>(k)])]);
        b = b.cwiseMax(m.vertices[static_cast<std::size_t>(m.triangles[t][static_cast<std::size_t>(k)])]);
      }
      const int i0 = index(a.x() - lo_.x()), i1 = index(b.x() - lo_.x());
      const int j0 = index(a.y() - lo_.y()), j1 = index(b.y() - lo_.y());
      for (int i = i0; i <= i1; ++i)
        for (int j = j0; j <= j1; ++j) cells_[static_cast<std::size_t>(i * n_ + j)].push_back(static_cast<int>(t));
    }
  }

  // Triangle containing x, or -1.
  int locate(const Vec2& x) const {
    const double fx = (x.x() - lo_.x()) / cell_, fy = (x.y() - lo_.y()) / cell_;
    if (fx < 0 || fy < 0 || fx > n_ || fy > n_) return -1;
    for (int t : cells_[static_cast<std::size_t>(index(x.x() - lo_.x()) * n_ + index(x.y() - lo_.y()))]) {
      const auto& tr = m_.triangles[static_cast<std::size_t>(t)];
      const Vec2 a = m_.vertices[static_cast<std::size_t>(tr[0])], b = m_.vertices[static_cast<std::size_t>(tr[1])],
                 c = m_.vertices[static_cast<std::size_t>(tr[2])];
      const double tol = -1e-12 * cross(b - a, c - a);
      if (cross(b - a, x - a) >= tol && cross(c - b, x - b) >= tol && cross(a - c, x - c) >= tol) return t;
    }
    return -1;
  }

 private:
  int index(double d) const { return std::clamp(static_cast<int>(d / cell_), 0, n_ - 1); }

  const TriMesh& m_;
  Vec2 lo_;
  double cell_ = 1.0;
  int n_ = 1;
  std::vector<std::vector<int>> cells_;
};

}  // namespace

std::vector<double> default_p_grid() {
  std::vector<double> p;
  for (int k = 0; k <= 24; ++k) p.push_back(2.0 + 0.25 * k);
  return p;
}

AnnulusProfile annulus_profile(const SolutionField& u, const Vec3& t, const ProfileOptions& opt) {
  const TriMesh& m = *u.mesh;
  AnnulusProfile prof = empty_profile(t, opt, m.radius);
  const Vec2 c = t.head<2>();
  const double r0 = prof.radii[0];
  const std::size_t levels = prof.missing.size();
  std::vector<double> support(levels, 0.0);
  std::vector<double> inside(levels + 1);
  for (std::size_t tri = 0; tri < m.triangles.size(); ++tri) {
    Vec2 p[3];
    double dmin = std::numeric_limits<double>::infinity();
    for (int k = 0; k < 3; ++k) {
      p[k] = m.vertices[static_cast<std::size_t>(m.triangles[tri][static_cast<std::size_t>(k)])];
      dmin = std::min(dmin, (p[k] - c).norm());
    }
    // Cheap rejection: a triangle far from t cannot meet B(t, r0).
    if (dmin > r0 + m.diameter(tri)) continue;
    for (std::size_t j = 0; j <= levels; ++j) inside[j] = triangle_disk_area(p, c, prof.radii[j]);
    const double g = u.gradients[tri].norm();
    for (std::size_t j = 0; j < levels; ++j) {
      const double a = std::max(0.0, inside[j] - inside[j + 1]);
      if (a <= 0.0) continue;
      support[j] += a;
      for (std::size_t k = 0; k < prof.p_values.size(); ++k) prof.mass[j][k] += a * std::pow(g, prof.p_values[k]);
    }
  }
  for (std::size_t j = 0; j < levels; ++j)
    if (support[j] <= 0.0) prof.missing[j] = 1;
  return prof;
}

AnnulusProfile annulus_profile(const WosSolver& solver, const Vec3& t, const WosProfileOptions& opt) {
  const DomainSpec& d = solver.config().domain;
  AnnulusProfile prof = empty_profile(t, opt.base, d.ball.radius);
  // WoS profiles keep the inner annuli; exclusion is driven by confidence.
  std::fill(prof.excluded.begin(), prof.excluded.end(), 0);
  if (opt.samples < 1) throw ValidationError("profile needs at least one sample per annulus");
  Vec3 e1 = Vec3::UnitX(), e2 = Vec3::UnitY();
  if (opt.axis) {
    const Vec3 a = opt.axis->normalized();
    const auto normals = StratumSpec::line(t, a).normal_basis(3);
    e1 = normals[0];
    e2 = normals[1];
  }
  Rng rng(derive_seed(solver.config().seed, "annulus-profile"));
  for (std::size_t j = 0; j < prof.missing.size(); ++j) {
    const double ro = prof.radii[j], ri = prof.radii[j + 1];
    const double measure = opt.axis ? kPi * (ro * ro - ri * ri) : 4.0 / 3.0 * kPi * (ro * ro * ro - ri * ri * ri);
    std::vector<double> acc(prof.p_values.size(), 0.0);
    int in_domain = 0, low = 0;
    for (int s = 0; s < opt.samples; ++s) {
      // Stratified in the radial measure, uniform in direction.
      const double w = (s + rng.uniform()) / opt.samples;
      Vec3 x;
      if (opt.axis) {
        const double r = std::sqrt(ri * ri + w * (ro * ro - ri * ri));
        const double a = 2.0 * kPi * rng.uniform();
        x = t + r * (std::cos(a) * e1 + std::sin(a) * e2);
      } else {
        const double r = std::cbrt(ri * ri * ri + w * (ro * ro * ro - ri * ri * ri));
        x = t + r * rng.unit_vector(3);
      }
      if (!d.contains(x)) continue;
      ++in_domain;
      double room = solver.distance_bound(x);
      if (d.neumann.sphere) room = std::min(room, d.ball.radius - (x - d.ball.center).norm());
      const double h = std::min(0.25 * ri, 0.5 * room);
      if (!(h > 1e-9 * d.ball.radius)) {
        ++low;
        continue;
      }
      const WosGradient g = solver.gradient(x, h);
      const double gn = g.value.norm();
      if (g.flagged || g.std_error.norm() > 0.5 * gn) {
        ++low;
        continue;
      }
      for (std::size_t k = 0; k < acc.size(); ++k) acc[k] += std::pow(gn, prof.p_values[k]);
    }
    if (in_domain == 0) {
      prof.missing[j] = 1;
      continue;
    }
    if (low > 0.2 * in_domain) prof.excluded[j] = 1;
    for (std::size_t k = 0; k < acc.size(); ++k) prof.mass[j][k] = measure * acc[k] / opt.samples;
  }
  return prof;
}

ScalingFit fit_scaling_exponent(const AnnulusProfile& profile, std::size_t p_index) {
  if (p_index >= profile.p_values.size()) throw ValidationError("exponent index out of range");
  std::vector<double> xs, ys;
  for (int j = 0; j < profile.annuli(); ++j) {
    const auto jj = static_cast<std::size_t>(j);
    if (profile.missing[jj] || profile.excluded[jj]) continue;
    const double m = profile.mass[jj][p_index];
    if (!(m > 0.0) || !std::isfinite(m)) continue;
    xs.push_back(std::log(profile.radii[jj]));
    ys.push_back(std::log(m));
  }
  if (xs.size() < 4) throw NumericalError("scaling fit needs at least 4 resolved annuli, have " + std::to_string(xs.size()));
  const double n = static_cast<double>(xs.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  ScalingFit f;
  f.points = static_cast<int>(xs.size());
  f.slope = sxy / sxx;
  f.r2 = syy > 0.0 ? sxy * sxy / (sxx * syy) : 1.0;
  f.low_confidence = f.r2 < 0.9;
  return f;
}

CriticalExponent critical_exponent(const AnnulusProfile& profile, double margin) {
  CriticalExponent out;
  out.center = profile.center;
  out.margin = margin;
  const std::size_t np = profile.p_values.size();
  bool any = false;
  for (std::size_t k = 0; k < np; ++k) {
    ScalingFit f;
    try {
      f = fit_scaling_exponent(profile, k);
      any = any || !f.low_confidence;
    } catch (const NumericalError&) {
      f.slope = std::numeric_limits<double>::quiet_NaN();
      f.low_confidence = true;
    }
    out.fits.push_back(f);
  }
  if (!any) throw NumericalError("no exponent estimate: every scaling fit is low-confidence");
  const auto& p = profile.p_values;
  std::size_t prev = np;
  for (std::size_t k = 0; k < np; ++k) {
    const ScalingFit& f = out.fits[k];
    if (std::isnan(f.slope)) continue;
    // r^2 carries no information for a nearly flat fit.
    if (f.low_confidence && std::abs(f.slope) > margin) out.confident = false;
    if (f.slope <= 0.0) {
      if (prev == np) {
        out.p_star = p[k];
        out.confident = false;
      } else {
        const double b0 = out.fits[prev].slope, b1 = f.slope;
        out.p_star = p[prev] + (p[k] - p[prev]) * b0 / (b0 - b1);
      }
      return out;
    }
    prev = k;
  }
  if (prev == np) throw NumericalError("no exponent estimate: no usable scaling fit");
  if (out.fits[prev].slope > margin) return out;  // unbounded
  // Small positive slope at the end of the grid: extrapolate.
  std::size_t before = np;
  for (std::size_t k = 0; k < prev; ++k)
    if (!std::isnan(out.fits[k].slope)) before = k;
  out.confident = false;
  if (before == np || out.fits[before].slope <= out.fits[prev].slope) {
    out.p_star = p[prev];
  } else {
    const double b0 = out.fits[before].slope, b1 = out.fits[prev].slope;
    out.p_star = p[prev] + (p[prev] - p[before]) * b1 / (b0 - b1);
  }
  return out;
}

std::string format_p_star(const CriticalExponent& c) {
  if (!c.p_star) return "unbounded";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", *c.p_star);
  return buf;
}

FieldSampler sample_field(const ScalarField& u, const DomainSpec& domain) {
  return [u, domain](const Vec3& x, double& value, Vec3& gradient) {
    if (!domain.contains(x)) return false;
    value = u.value_and_gradient(x, gradient);
    return true;
  };
}

FieldSampler sample_field(const SolutionField& u) {
  auto locator = std::make_shared<const TriangleLocator>(*u.mesh);
  return [u, locator](const Vec3& x, double& value, Vec3& gradient) {
    const int t = locator->locate(x.head<2>());
    if (t < 0) return false;
    value = u.value_at(static_cast<std::size_t>(t), x.head<2>());
    const Vec2 g = u.gradients[static_cast<std::size_t>(t)];
    gradient = Vec3(g.x(), g.y(), 0.0);
    return true;
  };
}

std::vector<SliceRow> slice_poincare_ratio(const FieldSampler& u, const SliceSpec& spec) {
  const int n = spec.ambient_dim;
  const int k = spec.stratum.dim;
  if (n != 2 && n != 3) throw ValidationError("slices need ambient dimension 2 or 3");
  if (k > n - 1) throw ValidationError("stratum dimension must be below the ambient dimension");
  if (static_cast<int>(spec.stratum.tangent.size()) != k) throw ValidationError("stratum tangent basis does not match its dimension");
  if (spec.samples < 1 || !(spec.p >= 1.0)) throw ValidationError("slice needs samples >= 1 and p >= 1");
  const auto normals = spec.stratum.normal_basis(n);
  const Vec3 t = spec.stratum.point;
  const int m = spec.samples;
  const double ext = spec.extent;
  const double p = spec.p;

  std::vector<SliceRow> rows;
  for (double eta : spec.etas) {
    if (!(eta > 0.0) || !(eta < spec.delta)) throw ValidationError("slice levels must satisfy 0 < eta < delta");
    double su = 0.0, sg = 0.0;
    int hits = 0;
    auto add = [&](const Vec3& x, double w, bool value, bool grad) {
      double v;
      Vec3 g;
      if (!u(x, v, g)) return;
      ++hits;
      if (value) su += w * std::pow(std::abs(v), p);
      if (grad) sg += w * std::pow(g.head(n).norm(), p);
    };
    const bool hypersurface = k == n - 1;
    if (n == 2 && k == 0) {
      const int q = m * m;
      const double w = 2.0 * kPi * eta / q;
      for (int i = 0; i < q; ++i) {
        const double a = 2.0 * kPi * (i + 0.5) / q;
        add(t + eta * (std::cos(a) * normals[0] + std::sin(a) * normals[1]), w, true, true);
      }
    } else if (n == 3 && k == 0) {
      // Equal-area midpoint cells in (cos polar angle, azimuth).
      const double w = 4.0 * kPi * eta * eta / (m * m);
      for (int i = 0; i < m; ++i) {
        const double cz = -1.0 + 2.0 * (i + 0.5) / m, sz = std::sqrt(1.0 - cz * cz);
        for (int j = 0; j < m; ++j) {
          const double a = 2.0 * kPi * (j + 0.5) / m;
          add(t + eta * Vec3(sz * std::cos(a), sz * std::sin(a), cz), w, true, true);
        }
      }
    } else if (n == 3 && k == 1) {
      const Vec3 tau = spec.stratum.tangent[0];
      const double w = (2.0 * ext / m) * (2.0 * kPi * eta / m);
      for (int i = 0; i < m; ++i) {
        const double s = -ext + 2.0 * ext * (i + 0.5) / m;
        for (int j = 0; j < m; ++j) {
          const double a = 2.0 * kPi * (j + 0.5) / m;
          add(t + s * tau + eta * (std::cos(a) * normals[0] + std::sin(a) * normals[1]), w, true, true);
        }
      }
    } else if (n == 2 && k == 1) {
      const Vec3 tau = spec.stratum.tangent[0];
      const int q = m * m;
      for (int side : {-1, 1})
        for (int i = 0; i < q; ++i) {
          const double s = -ext + 2.0 * ext * (i + 0.5) / q;
          add(t + s * tau + side * eta * normals[0], 2.0 * ext / q, true, false);
        }
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) {
          const double s = -ext + 2.0 * ext * (i + 0.5) / m;
          const double dn = -eta + 2.0 * eta * (j + 0.5) / m;
          add(t + s * tau + dn * normals[0], (2.0 * ext / m) * (2.0 * eta / m), false, true);
        }
    } else {  // n == 3, k == 2
      const Vec3 t1 = spec.stratum.tangent[0], t2 = spec.stratum.tangent[1];
      const double cell = (2.0 * ext / m) * (2.0 * ext / m);
      const int layers = 16;
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) {
          const Vec3 base = t + (-ext + 2.0 * ext * (i + 0.5) / m) * t1 + (-ext + 2.0 * ext * (j + 0.5) / m) * t2;
          for (int side : {-1, 1}) add(base + side * eta * normals[0], cell, true, false);
          for (int l = 0; l < layers; ++l)
            add(base + (-eta + 2.0 * eta * (l + 0.5) / layers) * normals[0], cell * 2.0 * eta / layers, false, true);
        }
    }
    if (hits == 0) continue;
    SliceRow r;
    r.eta = eta;
    r.num = std::pow(su, 1.0 / p);
    r.den = std::pow(sg, 1.0 / p);
    r.degenerate = !(r.den > 0.0);
    r.ratio = r.degenerate ? std::numeric_limits<double>::quiet_NaN() : r.num / r.den;
    rows.push_back(r);
  }
  return rows;
}

double slice_slope(const std::vector<SliceRow>& rows) {
  double mx = 0, my = 0;
  int n = 0;
  for (const auto& r : rows)
    if (!r.degenerate && r.ratio > 0.0) {
      mx += std::log(r.eta);
      my += std::log(r.ratio);
      ++n;
    }
  if (n < 2) throw NumericalError("slice slope needs two non-degenerate levels");
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0;
  for (const auto& r : rows)
    if (!r.degenerate && r.ratio > 0.0) {
      sxx += (std::log(r.eta) - mx) * (std::log(r.eta) - mx);
      sxy += (std::log(r.eta) - mx) * (std::log(r.ratio) - my);
    }
  return sxy / sxx;
}

double weighted_gradient_norm(const SolutionField& u, const WeightSpec& w, double p) {
  const TriMesh& m = *u.mesh;
  const double expo = w.kappa * w.power;
  std::unique_ptr<KdTree> tree;
  if (expo != 0.0) {
    if (w.singular_set.empty()) throw ValidationError("weight needs a nonempty singular set");
    tree = std::make_unique<KdTree>(w.singular_set);
  }
  double s = 0.0;
  for (std::size_t t = 0; t < m.triangles.size(); ++t) {
    const double g = std::pow(u.gradients[t].norm(), p);
    if (g == 0.0) continue;
    const double area = std::abs(m.triangle_area(t));
    if (!tree) {
      s += area * g;
      continue;
    }
    double q = 0.0;
    for (int k = 0; k < 3; ++k) {
      const Vec2 a = m.vertices[static_cast<std::size_t>(m.triangles[t][static_cast<std::size_t>(k)])];
      const Vec2 b = m.vertices[static_cast<std::size_t>(m.triangles[t][static_cast<std::size_t>((k + 1) % 3)])];
      const Vec2 mid = 0.5 * (a + b);
      double d = 0.0;
      tree->nearest(Vec3(mid.x(), mid.y(), 0.0), &d);
      q += std::pow(d, expo * p);
    }
    s += area / 3.0 * q * g;
  }
  return s;
}

}  // namespace conelab
