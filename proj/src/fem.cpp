#include "conelab/fem.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/SparseCore>

#include "conelab/errors.hpp"
#include "conelab/parallel.hpp"

namespace conelab {

namespace {

constexpr std::size_t kBlock = 4096;

Vec3 lift(const Vec2& p) { return Vec3(p.x(), p.y(), 0.0); }

struct TriGeom {
  Vec2 p[3];
  Vec2 grad[3];  // gradients of the barycentric basis functions
  double area = 0.0;
};

TriGeom geometry(const TriMesh& m, std::size_t t) {
  TriGeom g;
  for (int k = 0; k < 3; ++k)
    g.p[k] = m.vertices[static_cast<std::size_t>(m.triangles[t][static_cast<std::size_t>(k)])];
  g.area = m.triangle_area(t);
  for (int k = 0; k < 3; ++k) {
    const Vec2& a = g.p[(k + 1) % 3];
    const Vec2& b = g.p[(k + 2) % 3];
    g.grad[k] = Vec2(a.y() - b.y(), b.x() - a.x()) / (2.0 * g.area);
  }
  return g;
}

// Edge midpoints: the three-point rule exact for quadratics.
void midpoints(const TriGeom& g, Vec2 (&q)[3]) {
  for (int k = 0; k < 3; ++k) q[k] = 0.5 * (g.p[k] + g.p[(k + 1) % 3]);
}

// Value of basis function i at midpoint k of edge (k, k+1).
double basis_at_mid(int i, int k) { return (i == k || i == (k + 1) % 3) ? 0.5 : 0.0; }

const double kGauss[2] = {0.5 - 0.5 / std::sqrt(3.0), 0.5 + 0.5 / std::sqrt(3.0)};

std::string point_text(const Vec2& x) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "(%.17g, %.17g)", x.x(), x.y());
  return buf;
}

}  // namespace

double SolutionField::energy() const {
  double e = 0.0;
  for (std::size_t t = 0; t < mesh->triangles.size(); ++t) e += mesh->triangle_area(t) * gradients[t].squaredNorm();
  return e;
}

double SolutionField::w12_norm_squared() const {
  double s = energy();
  for (std::size_t t = 0; t < mesh->triangles.size(); ++t) {
    const auto& tr = mesh->triangles[t];
    const double a = values[tr[0]], b = values[tr[1]], c = values[tr[2]];
    // Exact integral of a P1 function squared.
    s += mesh->triangle_area(t) / 6.0 * (a * a + b * b + c * c + a * b + b * c + c * a);
  }
  return s;
}

double SolutionField::value_at(std::size_t t, const Vec2& x) const {
  const auto& tr = mesh->triangles[t];
  const Vec2 p0 = mesh->vertices[static_cast<std::size_t>(tr[0])];
  return values[tr[0]] + gradients[t].dot(x - p0);
}

std::vector<Vec2> p1_gradients(const TriMesh& m, const Eigen::VectorXd& values) {
  std::vector<Vec2> out(m.triangles.size());
  for (std::size_t t = 0; t < m.triangles.size(); ++t) {
    const TriGeom g = geometry(m, t);
    Vec2 s = Vec2::Zero();
    for (int k = 0; k < 3; ++k) s += values[m.triangles[t][static_cast<std::size_t>(k)]] * g.grad[k];
    out[t] = s;
  }
  return out;
}

SparseSystem assemble(std::shared_ptr<const TriMesh> mesh, const DomainSpec& domain, int workers) {
  if (!mesh) throw ValidationError("assemble: no mesh");
  const TriMesh& m = *mesh;
  const auto n = static_cast<Eigen::Index>(m.vertices.size());
  const std::size_t nt = m.triangles.size();
  const CoefficientField& A = domain.op;
  const bool identity = A.is_identity();
  const std::optional<double> f_const = domain.source.constant_value();

  const std::size_t blocks = (nt + kBlock - 1) / kBlock;
  std::vector<std::vector<Eigen::Triplet<double>>> trip(blocks);
  std::vector<std::vector<std::pair<int, double>>> loads(blocks);
  if (workers <= 0) workers = default_workers();
  for_each_block(blocks, workers, [&](std::size_t b) {
    auto& out = trip[b];
    auto& load = loads[b];
    const std::size_t t1 = std::min(nt, (b + 1) * kBlock);
    out.reserve(9 * (t1 - b * kBlock));
    for (std::size_t t = b * kBlock; t < t1; ++t) {
      const TriGeom g = geometry(m, t);
      Vec2 q[3];
      midpoints(g, q);
      Eigen::Matrix2d abar = Eigen::Matrix2d::Identity();
      if (!identity) {
        abar.setZero();
        for (const auto& x : q) {
          const Mat3 a3 = A(lift(x));
          const Eigen::Matrix2d a = a3.topLeftCorner<2, 2>();
          if (std::abs(a(0, 1) - a(1, 0)) > 1e-12 * (1.0 + a.norm()))
            throw ValidationError("coefficient matrix A is not symmetric at " + point_text(x));
          if (!A.elliptic_at(lift(x)))
            throw ValidationError("ellipticity fails at " + point_text(x) + ": smallest eigenvalue " +
                                  std::to_string(A.min_eigenvalue(lift(x))) + " < lambda0 " +
                                  std::to_string(A.lambda0()));
          abar += a / 3.0;
        }
      }
      const auto& tr = m.triangles[t];
      double k[3][3];
      for (int i = 0; i < 3; ++i)
        for (int j = i; j < 3; ++j) k[i][j] = k[j][i] = g.area * g.grad[i].dot(abar * g.grad[j]);
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) out.emplace_back(tr[static_cast<std::size_t>(i)], tr[static_cast<std::size_t>(j)], k[i][j]);
      double fq[3];
      for (int s = 0; s < 3; ++s) fq[s] = f_const ? *f_const : domain.source(lift(q[s]));
      for (int i = 0; i < 3; ++i) {
        double v = 0.0;
        for (int s = 0; s < 3; ++s) v += fq[s] * basis_at_mid(i, s);
        if (v != 0.0) load.emplace_back(tr[static_cast<std::size_t>(i)], -g.area / 3.0 * v);
      }
    }
  });

  SparseSystem sys;
  sys.mesh = mesh;
  std::vector<Eigen::Triplet<double>> all;
  all.reserve(9 * nt);
  for (auto& v : trip) all.insert(all.end(), v.begin(), v.end());
  sys.matrix.resize(n, n);
  sys.matrix.setFromTriplets(all.begin(), all.end());
  sys.rhs = Eigen::VectorXd::Zero(n);
  for (const auto& block : loads)
    for (const auto& [i, v] : block) sys.rhs[i] += v;

  sys.dirichlet_mask.assign(static_cast<std::size_t>(n), 0);
  sys.dirichlet_values = Eigen::VectorXd::Zero(n);
  const double offset = 1e-9 * m.radius;
  for (const auto& e : m.boundary_edges) {
    const Vec2 a = m.vertices[static_cast<std::size_t>(e.a)], b = m.vertices[static_cast<std::size_t>(e.b)];
    if (e.tag == BoundaryTag::Dirichlet) {
      for (int v : {e.a, e.b}) {
        if (sys.dirichlet_mask[static_cast<std::size_t>(v)]) continue;
        sys.dirichlet_mask[static_cast<std::size_t>(v)] = 1;
        // Copies of crack vertices take the data from their own side.
        const Vec2 x = m.vertices[static_cast<std::size_t>(v)] + offset * m.side_hint[static_cast<std::size_t>(v)];
        sys.dirichlet_values[v] = domain.dirichlet_data(lift(x));
      }
      continue;
    }
    const double len = (b - a).norm();
    const Vec2 inward = Vec2(-(b - a).y(), (b - a).x()) / len;
    for (double s : kGauss) {
      const Vec2 x = a + s * (b - a);
      const double theta = domain.neumann_data(lift(x + offset * inward));
      sys.rhs[e.a] += 0.5 * len * theta * (1.0 - s);
      sys.rhs[e.b] += 0.5 * len * theta * s;
    }
  }
  return sys;
}

namespace {

double lanczos_condition(const std::vector<double>& alpha, const std::vector<double>& beta) {
  const std::size_t k = std::min<std::size_t>(alpha.size(), 1000);
  if (k == 0) return 1.0;
  Eigen::VectorXd diag(static_cast<Eigen::Index>(k)), sub(static_cast<Eigen::Index>(k > 1 ? k - 1 : 1));
  for (std::size_t j = 0; j < k; ++j) {
    diag[static_cast<Eigen::Index>(j)] = 1.0 / alpha[j] + (j > 0 ? beta[j - 1] / alpha[j - 1] : 0.0);
    if (j + 1 < k) sub[static_cast<Eigen::Index>(j)] = std::sqrt(beta[j]) / alpha[j];
  }
  if (k == 1) return 1.0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
  es.computeFromTridiagonal(diag, sub.head(static_cast<Eigen::Index>(k - 1)), Eigen::EigenvaluesOnly);
  const auto& ev = es.eigenvalues();
  return ev[0] > 0 ? ev[ev.size() - 1] / ev[0] : std::numeric_limits<double>::infinity();
}

}  // namespace

SolutionField solve(const SparseSystem& sys, const CgOptions& opt) {
  const TriMesh& m = *sys.mesh;
  const auto n = static_cast<Eigen::Index>(m.vertices.size());
  std::vector<Eigen::Index> free_index(static_cast<std::size_t>(n), -1);
  Eigen::Index nf = 0;
  bool any_dirichlet = false;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (sys.dirichlet_mask[static_cast<std::size_t>(i)]) any_dirichlet = true;
    else free_index[static_cast<std::size_t>(i)] = nf++;
  }
  if (!any_dirichlet) throw ValidationError("no Dirichlet nodes: the Dirichlet part of the boundary is empty");

  SolutionField u;
  u.mesh = sys.mesh;
  u.values = Eigen::VectorXd::Zero(n);
  for (Eigen::Index i = 0; i < n; ++i)
    if (sys.dirichlet_mask[static_cast<std::size_t>(i)]) u.values[i] = sys.dirichlet_values[i];

  if (nf > 0) {
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(sys.matrix.nonZeros()));
    Eigen::VectorXd b(nf);
    for (Eigen::Index i = 0; i < n; ++i) {
      const Eigen::Index fi = free_index[static_cast<std::size_t>(i)];
      if (fi < 0) continue;
      double r = sys.rhs[i];
      for (SparseMatrix::InnerIterator it(sys.matrix, i); it; ++it) {
        const Eigen::Index fj = free_index[static_cast<std::size_t>(it.col())];
        if (fj >= 0) trip.emplace_back(fi, fj, it.value());
        else r -= it.value() * u.values[it.col()];
      }
      b[fi] = r;
    }
    SparseMatrix K(nf, nf);
    K.setFromTriplets(trip.begin(), trip.end());
    const Eigen::VectorXd dinv = K.diagonal().cwiseInverse();

    Eigen::VectorXd x = Eigen::VectorXd::Zero(nf);
    const double bnorm = b.norm();
    if (bnorm > 0.0) {
      Eigen::VectorXd r = b, z = dinv.cwiseProduct(r), p = z, kp(nf);
      double rz = r.dot(z);
      std::vector<double> alphas, betas;
      const long cap = static_cast<long>(opt.max_iter_factor) * static_cast<long>(nf);
      double window_ref = 1.0;
      int it = 0;
      double rel = 1.0;
      while (true) {
        rel = r.norm() / bnorm;
        if (rel <= opt.tolerance) break;
        if (it >= cap) {
          std::ostringstream msg;
          msg << "CG reached the iteration cap " << cap << " at relative residual " << rel
              << " (condition estimate " << lanczos_condition(alphas, betas) << ")";
          throw NumericalError(msg.str());
        }
        if (it > 0 && it % opt.stagnation_window == 0) {
          if (rel > window_ref / 10.0) {
            std::ostringstream msg;
            msg << "CG stagnated: relative residual " << rel << " after " << it
                << " iterations, no 10x drop over the last " << opt.stagnation_window
                << " (condition estimate " << lanczos_condition(alphas, betas) << ")";
            throw NumericalError(msg.str());
          }
          window_ref = rel;
        }
        kp.noalias() = K * p;
        const double pkp = p.dot(kp);
        if (!(pkp > 0.0)) throw NumericalError("CG breakdown: stiffness matrix is not positive definite");
        const double alpha = rz / pkp;
        x += alpha * p;
        r -= alpha * kp;
        z = dinv.cwiseProduct(r);
        const double rz_new = r.dot(z);
        const double beta = rz_new / rz;
        rz = rz_new;
        p = z + beta * p;
        alphas.push_back(alpha);
        betas.push_back(beta);
        ++it;
      }
      u.solver.iterations = it;
      u.solver.relative_residual = rel;
      u.solver.condition_estimate = lanczos_condition(alphas, betas);
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      const Eigen::Index fi = free_index[static_cast<std::size_t>(i)];
      if (fi >= 0) u.values[i] = x[fi];
    }
  }
  u.gradients = p1_gradients(m, u.values);
  return u;
}

double green_identity_residual(const VectorField& beta, const SolutionField& u) {
  const TriMesh& m = *u.mesh;
  double lhs = 0.0;
  for (std::size_t t = 0; t < m.triangles.size(); ++t) {
    const TriGeom g = geometry(m, t);
    Vec2 q[3];
    midpoints(g, q);
    const auto& tr = m.triangles[t];
    double s = 0.0;
    for (int k = 0; k < 3; ++k) {
      const Vec3 b = beta(lift(q[k]));
      const double uq = 0.5 * (u.values[tr[static_cast<std::size_t>(k)]] + u.values[tr[static_cast<std::size_t>((k + 1) % 3)]]);
      s += b.head<2>().dot(u.gradients[t]) + beta.divergence(lift(q[k])) * uq;
    }
    lhs += g.area / 3.0 * s;
  }
  double rhs = 0.0;
  for (const auto& e : m.boundary_edges) {
    const Vec2 a = m.vertices[static_cast<std::size_t>(e.a)], b = m.vertices[static_cast<std::size_t>(e.b)];
    const Vec2 d = b - a;
    const double len = d.norm();
    const Vec2 nu = Vec2(d.y(), -d.x()) / len;
    for (double s : kGauss) {
      const Vec2 x = a + s * d;
      const double ux = (1.0 - s) * u.values[e.a] + s * u.values[e.b];
      rhs += 0.5 * len * beta(lift(x)).head<2>().dot(nu) * ux;
    }
  }
  return std::abs(lhs - rhs);
}

double l2_error(const SolutionField& u, const ScalarField& exact) {
  const TriMesh& m = *u.mesh;
  double s = 0.0;
  for (std::size_t t = 0; t < m.triangles.size(); ++t) {
    const TriGeom g = geometry(m, t);
    Vec2 q[3];
    midpoints(g, q);
    double v = 0.0;
    for (const auto& x : q) {
      const double d = u.value_at(t, x) - exact(lift(x));
      v += d * d;
    }
    s += g.area / 3.0 * v;
  }
  return std::sqrt(s);
}

double l2_norm(const TriMesh& m, const ScalarField& f) {
  double s = 0.0;
  for (std::size_t t = 0; t < m.triangles.size(); ++t) {
    const TriGeom g = geometry(m, t);
    Vec2 q[3];
    midpoints(g, q);
    double v = 0.0;
    for (const auto& x : q) v += f(lift(x)) * f(lift(x));
    s += g.area / 3.0 * v;
  }
  return std::sqrt(s);
}

DomainSpec argmin_domain(const DomainSpec& domain, const ScalarField& g) {
  if (domain.dim != 2) throw ValidationError("solve_argmin requires a 2D domain");
  DomainSpec d = domain;
  d.dirichlet = BoundarySelector::parse("constraints");
  d.neumann = BoundarySelector::parse("sphere");
  d.dirichlet_data = g;
  d.neumann_data = ScalarField::constant(0.0, 2);
  d.source = ScalarField::constant(0.0, 2);
  return d;
}

SolutionField solve_argmin(const DomainSpec& domain, const ScalarField& g, double h, int workers) {
  const DomainSpec d = argmin_domain(domain, g);
  auto mesh = std::make_shared<TriMesh>(build_mesh(d, h, detect_grading_centers(d)));
  bool any = false;
  for (const auto& e : mesh->boundary_edges) any = any || e.tag == BoundaryTag::Dirichlet;
  if (!any) throw ValidationError("the variety misses the ball: the minimizer is not unique");
  return solve(assemble(mesh, d, workers));
}

void write_solution(std::ostream& os, const SolutionField& u) {
  const TriMesh& m = *u.mesh;
  char buf[160];
  for (std::size_t i = 0; i < m.vertices.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g %.17g %.17g\n", m.vertices[i].x(), m.vertices[i].y(),
                  u.values[static_cast<Eigen::Index>(i)]);
    os << buf;
  }
  for (std::size_t t = 0; t < m.triangles.size(); ++t) {
    const auto& tr = m.triangles[t];
    std::snprintf(buf, sizeof buf, "%d %d %d %.17g %.17g\n", tr[0], tr[1], tr[2], u.gradients[t].x(), u.gradients[t].y());
    os << buf;
  }
}

}  // namespace conelab
