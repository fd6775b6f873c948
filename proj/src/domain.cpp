#include "conelab/domain.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/Dense>

#include "conelab/errors.hpp"

namespace conelab {

// ---------------------------------------------------------------- operator

CoefficientField CoefficientField::identity(int dim, double lambda0) {
  std::vector<ScalarField> e;
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) e.push_back(ScalarField::constant(i == j ? 1.0 : 0.0, dim));
  return CoefficientField(dim, std::move(e), lambda0);
}

CoefficientField::CoefficientField(int dim, std::vector<ScalarField> entries, double lambda0)
    : dim_(dim), entries_(std::move(entries)), lambda0_(lambda0) {
  if (dim < 1 || dim > 3) throw ValidationError("coefficient field dimension must be 1..3");
  if (static_cast<int>(entries_.size()) != dim * dim)
    throw ValidationError("coefficient matrix needs dim*dim entries");
  if (!(lambda0 > 0.0)) throw ValidationError("ellipticity floor lambda0 must be positive");
}

bool CoefficientField::is_identity() const {
  for (int i = 0; i < dim_; ++i) {
    for (int j = 0; j < dim_; ++j) {
      const auto c = entries_[static_cast<std::size_t>(i * dim_ + j)].constant_value();
      if (!c || *c != (i == j ? 1.0 : 0.0)) return false;
    }
  }
  return true;
}

Mat3 CoefficientField::operator()(const Vec3& x) const {
  Mat3 a = Mat3::Zero();
  for (int i = 0; i < dim_; ++i)
    for (int j = 0; j < dim_; ++j) a(i, j) = entries_[static_cast<std::size_t>(i * dim_ + j)](x);
  return a;
}

double CoefficientField::min_eigenvalue(const Vec3& x) const {
  const Mat3 a = (*this)(x);
  const Eigen::MatrixXd s = 0.5 * (a + a.transpose()).topLeftCorner(dim_, dim_);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

// ---------------------------------------------------------------- constraints

std::string to_string(Sign s) {
  switch (s) {
    case Sign::Less:
      return "<";
    case Sign::Greater:
      return ">";
    case Sign::NotEqual:
      return "!=";
    case Sign::Equal:
      return "=";
  }
  return "?";
}

bool Atom::holds(const Vec3& x) const {
  const double v = poly.eval(x);
  switch (sign) {
    case Sign::Less:
      return v < 0.0;
    case Sign::Greater:
      return v > 0.0;
    case Sign::NotEqual:
      return v != 0.0;
    case Sign::Equal:
      return std::abs(v) <= kEpsVal;
  }
  return false;
}

bool Constraint::holds(const Vec3& x) const {
  for (const auto& a : any_of)
    if (a.holds(x)) return true;
  return false;
}

std::string BoundaryPiece::to_string() const {
  if (kind == Kind::Sphere) return "sphere";
  return "constraint:" + std::to_string(index);
}

bool BoundarySelector::selects(const BoundaryPiece& piece) const {
  if (piece.kind == BoundaryPiece::Kind::Sphere) return sphere;
  if (all_constraints) return true;
  return std::find(constraints.begin(), constraints.end(), piece.index) != constraints.end();
}

BoundarySelector BoundarySelector::parse(const std::string& text) {
  BoundarySelector s;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    if (b == std::string::npos) continue;
    item = item.substr(b, item.find_last_not_of(" \t") - b + 1);
    if (item == "none") continue;
    if (item == "sphere") {
      s.sphere = true;
    } else if (item == "constraints") {
      s.all_constraints = true;
    } else if (item == "all") {
      s.sphere = true;
      s.all_constraints = true;
    } else if (item.rfind("constraint:", 0) == 0) {
      const std::string idx = item.substr(11);
      try {
        std::size_t used = 0;
        const int k = std::stoi(idx, &used);
        if (used != idx.size() || k < 0) throw std::invalid_argument(idx);
        s.constraints.push_back(k);
      } catch (const std::logic_error&) {
        throw ValidationError("boundary selector: bad constraint index '" + idx + "'");
      }
    } else {
      throw ValidationError("boundary selector: unknown piece '" + item + "'");
    }
  }
  std::sort(s.constraints.begin(), s.constraints.end());
  s.constraints.erase(std::unique(s.constraints.begin(), s.constraints.end()), s.constraints.end());
  return s;
}

std::string BoundarySelector::to_string() const {
  std::vector<std::string> parts;
  if (sphere && all_constraints) return "all";
  if (sphere) parts.push_back("sphere");
  if (all_constraints) {
    parts.push_back("constraints");
  } else {
    for (int k : constraints) parts.push_back("constraint:" + std::to_string(k));
  }
  if (parts.empty()) return "none";
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) out += (i ? "," : "") + parts[i];
  return out;
}

// ---------------------------------------------------------------- domain

namespace {

double ball_offset2(const Ball& b, const Vec3& x, int dim) {
  double s = 0.0;
  for (int j = 0; j < dim; ++j) s += (x[j] - b.center[j]) * (x[j] - b.center[j]);
  return s;
}

double atom_level(const Atom& a, double v) {
  switch (a.sign) {
    case Sign::Greater:
      return v;
    case Sign::Less:
      return -v;
    case Sign::NotEqual:
      return std::abs(v);
    case Sign::Equal:
      return -std::abs(v);
  }
  return v;
}

}  // namespace

bool DomainSpec::contains(const Vec3& x) const {
  if (ball_offset2(ball, x, dim) >= ball.radius * ball.radius) return false;
  for (const auto& c : constraints)
    if (!c.holds(x)) return false;
  return true;
}

DomainSpec DomainSpec::select_component(const Vec3& seed) const {
  DomainSpec out = *this;
  out.component_seed = seed;
  for (auto& c : out.constraints) {
    for (auto& a : c.any_of) {
      if (a.sign != Sign::NotEqual) continue;
      const double v = a.poly.eval(seed);
      if (v == 0.0) throw ValidationError("component seed lies on the variety " + a.poly.to_string());
      a.sign = v > 0.0 ? Sign::Greater : Sign::Less;
    }
  }
  return out;
}

void DomainSpec::validate() const {
  if (dim != 2 && dim != 3) throw ValidationError("domain dimension must be 2 or 3");
  if (!(ball.radius > 0.0)) throw ValidationError("bounding ball radius must be positive");
  for (const auto& c : constraints) {
    if (c.any_of.empty()) throw ValidationError("empty constraint");
    for (const auto& a : c.any_of)
      if (a.poly.dimension() != dim) throw ValidationError("constraint polynomial dimension mismatch");
  }
  for (int k : dirichlet.constraints)
    if (k >= static_cast<int>(constraints.size()))
      throw ValidationError("dirichlet selector names missing constraint " + std::to_string(k));
  for (int k : neumann.constraints)
    if (k >= static_cast<int>(constraints.size()))
      throw ValidationError("neumann selector names missing constraint " + std::to_string(k));
  bool any_dirichlet = false;
  for (const auto& piece : pieces()) {
    if (dirichlet.selects(piece) && neumann.selects(piece))
      throw ValidationError("boundary piece " + piece.to_string() + " is both Dirichlet and Neumann");
    any_dirichlet = any_dirichlet || dirichlet.selects(piece);
  }
  if (!any_dirichlet) throw ValidationError("Dirichlet boundary is empty (Omega_D must be nonempty)");
  if (op.dimension() != dim) throw ValidationError("operator dimension does not match domain");
}

LevelSample DomainSpec::level(const Vec3& x) const { return level_impl(x, false); }

LevelSample DomainSpec::closure_level(const Vec3& x) const { return level_impl(x, true); }

LevelSample DomainSpec::level_impl(const Vec3& x, bool closure) const {
  LevelSample out;
  out.value = ball.radius * ball.radius - ball_offset2(ball, x, dim);
  out.piece = BoundaryPiece{BoundaryPiece::Kind::Sphere, -1};
  for (std::size_t k = 0; k < constraints.size(); ++k) {
    double best = -std::numeric_limits<double>::infinity();
    int best_atom = -1;
    const auto& atoms = constraints[k].any_of;
    for (std::size_t a = 0; a < atoms.size(); ++a) {
      const double v = closure && atoms[a].sign == Sign::NotEqual ? std::numeric_limits<double>::infinity()
                                                                  : atom_level(atoms[a], atoms[a].poly.eval(x));
      if (v > best) {
        best = v;
        best_atom = static_cast<int>(a);
      }
    }
    if (best < out.value) {
      out.value = best;
      out.piece = BoundaryPiece{BoundaryPiece::Kind::Constraint, static_cast<int>(k)};
      out.atom = best_atom;
    }
  }
  return out;
}

std::vector<std::pair<int, const Polynomial*>> DomainSpec::boundary_polynomials() const {
  std::vector<std::pair<int, const Polynomial*>> out;
  for (std::size_t k = 0; k < constraints.size(); ++k)
    for (const auto& a : constraints[k].any_of) out.emplace_back(static_cast<int>(k), &a.poly);
  return out;
}

double DomainSpec::piece_distance(const Vec3& x, const BoundaryPiece& piece) const {
  if (piece.kind == BoundaryPiece::Kind::Sphere)
    return std::abs(ball.radius - std::sqrt(ball_offset2(ball, x, dim)));
  double best = std::numeric_limits<double>::infinity();
  for (const auto& a : constraints.at(static_cast<std::size_t>(piece.index)).any_of) {
    Vec3 g;
    const double v = a.poly.eval_with_gradient(x, g);
    const double gn = g.norm();
    const double d = gn > 0.0 ? std::abs(v) / gn : (v == 0.0 ? 0.0 : std::numeric_limits<double>::infinity());
    best = std::min(best, d);
  }
  return best;
}

std::vector<BoundaryPiece> DomainSpec::pieces() const {
  std::vector<BoundaryPiece> out{{BoundaryPiece::Kind::Sphere, -1}};
  for (std::size_t k = 0; k < constraints.size(); ++k)
    out.push_back({BoundaryPiece::Kind::Constraint, static_cast<int>(k)});
  return out;
}

// ---------------------------------------------------------------- singular points

std::vector<Vec3> singular_points(const Polynomial& p, const Ball& region, int seeds_per_axis) {
  const int n = p.dimension();
  if (n != 2 && n != 3) throw ValidationError("singular_points supports dimensions 2 and 3");
  if (seeds_per_axis <= 0) seeds_per_axis = n == 2 ? 24 : 12;
  const auto grad = p.gradient();
  std::vector<std::vector<Polynomial>> hess(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) hess[static_cast<std::size_t>(i)] = grad[static_cast<std::size_t>(i)].gradient();

  auto residual = [&](const Vec3& x, Eigen::VectorXd& f, Eigen::MatrixXd& jac) {
    f.resize(n + 1);
    jac.resize(n + 1, n);
    Vec3 g;
    f[0] = p.eval_with_gradient(x, g);
    for (int j = 0; j < n; ++j) jac(0, j) = g[j];
    for (int i = 0; i < n; ++i) {
      Vec3 h;
      f[i + 1] = grad[static_cast<std::size_t>(i)].eval_with_gradient(x, h);
      for (int j = 0; j < n; ++j) jac(i + 1, j) = h[j];
    }
  };

  std::vector<Vec3> found;
  const double merge = kEpsMergeRel * region.radius;
  const int m = seeds_per_axis;
  std::vector<int> idx(static_cast<std::size_t>(n), 0);
  for (;;) {
    Vec3 x = region.center;
    for (int j = 0; j < n; ++j)
      x[j] += region.radius * (-1.0 + 2.0 * (idx[static_cast<std::size_t>(j)] + 0.5) / m);
    if ((x - region.center).head(n).norm() < region.radius) {
      // Levenberg-Marquardt on the overdetermined system.
      Eigen::VectorXd f;
      Eigen::MatrixXd jac;
      residual(x, f, jac);
      double cost = f.squaredNorm();
      double mu = 1e-3;
      for (int it = 0; it < 200 && cost > 0.0; ++it) {
        const Eigen::MatrixXd jtj = jac.transpose() * jac;
        const Eigen::VectorXd jtf = jac.transpose() * f;
        const double scale = std::max(jtj.diagonal().maxCoeff(), 1e-300);
        Eigen::MatrixXd lhs = jtj;
        lhs.diagonal().array() += mu * scale;
        const Eigen::VectorXd step = lhs.ldlt().solve(-jtf);
        Vec3 trial = x;
        for (int j = 0; j < n; ++j) trial[j] += step[j];
        Eigen::VectorXd ft;
        Eigen::MatrixXd jt;
        residual(trial, ft, jt);
        const double tc = ft.squaredNorm();
        if (tc < cost) {
          x = trial;
          f = ft;
          jac = jt;
          cost = tc;
          mu = std::max(mu / 3.0, 1e-12);
          if (step.norm() < 1e-15 * (1.0 + x.norm())) break;
        } else {
          mu *= 4.0;
          if (mu > 1e12) break;
        }
      }
      const double val = std::abs(f[0]);
      const double gnorm = f.tail(n).norm();
      const bool inside = (x - region.center).head(n).norm() <= region.radius;
      if (inside && val <= kEpsVal && gnorm <= kEpsGrad) {
        bool dup = false;
        for (const auto& q : found) {
          if ((q - x).norm() <= merge) {
            dup = true;
            break;
          }
        }
        if (!dup) found.push_back(x);
      }
    }
    int j = 0;
    while (j < n) {
      if (++idx[static_cast<std::size_t>(j)] < m) break;
      idx[static_cast<std::size_t>(j)] = 0;
      ++j;
    }
    if (j == n) break;
  }
  return found;
}

// ---------------------------------------------------------------- distance bounds

DistanceBound::DistanceBound(const Polynomial& p, const Ball& region) : p_(p), region_(region) {
  const int n = p.dimension();
  if (n > 3) throw ValidationError("distance bound supports dimensions up to 3");
  // Hessian bound over the box |x_j - c_j| <= 2 radius.
  std::vector<double> box(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) box[static_cast<std::size_t>(j)] = std::abs(region.center[j]) + 2.0 * region.radius;
  double h2 = 0.0;
  const auto grad = p.gradient();
  for (const auto& gi : grad)
    for (const auto& hij : gi.gradient()) {
      const double b = hij.abs_bound(box);
      h2 += b * b;
    }
  hessian_ = std::sqrt(h2);

  // Gradient maximum on a grid, corrected by the Hessian bound times the
  // largest distance from a ball point to its nearest grid node.
  const int m = n == 2 ? 65 : 17;
  const double s = 2.0 * region.radius / (m - 1);
  const double half_diag = 0.5 * s * std::sqrt(static_cast<double>(n));
  double gmax = 0.0;
  std::vector<int> idx(static_cast<std::size_t>(n), 0);
  for (;;) {
    Vec3 x = region.center;
    for (int j = 0; j < n; ++j) x[j] += -region.radius + s * idx[static_cast<std::size_t>(j)];
    if ((x - region.center).head(n).norm() <= region.radius + half_diag) {
      Vec3 g;
      p.eval_with_gradient(x, g);
      gmax = std::max(gmax, g.norm());
    }
    int j = 0;
    while (j < n) {
      if (++idx[static_cast<std::size_t>(j)] < m) break;
      idx[static_cast<std::size_t>(j)] = 0;
      ++j;
    }
    if (j == n) break;
  }
  lipschitz_ = gmax + hessian_ * half_diag;
  if (!(lipschitz_ > 0.0)) throw ValidationError("distance bound: polynomial is constant on the region");
}

double DistanceBound::lower_bound(const Vec3& x) const { return std::abs(p_.eval(x)) / lipschitz_; }

double DistanceBound::local_lower_bound(const Vec3& x) const {
  Vec3 g;
  const double v = std::abs(p_.eval_with_gradient(x, g));
  const double global = v / lipschitz_;
  const double gn = g.norm();
  double local;
  if (hessian_ <= 0.0) {
    local = gn > 0.0 ? v / gn : global;
  } else {
    local = 2.0 * v / (gn + std::sqrt(gn * gn + 4.0 * hessian_ * v));
  }
  return std::max(global, std::min(local, region_.radius));
}

Vec3 project_to_zero_set(const Polynomial& p, const Vec3& x0, double tol, bool* converged, int max_iter) {
  Vec3 x = x0;
  bool ok = false;
  for (int it = 0; it < max_iter; ++it) {
    Vec3 g;
    const double v = p.eval_with_gradient(x, g);
    if (std::abs(v) <= tol) {
      ok = true;
      break;
    }
    const double g2 = g.squaredNorm();
    if (g2 <= 0.0) break;
    x -= (v / g2) * g;
  }
  if (!ok) ok = std::abs(p.eval(x)) <= tol;
  if (converged) *converged = ok;
  return x;
}

}  // namespace conelab
