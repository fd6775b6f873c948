#include "conelab/commands.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <ostream>
#include <sstream>

#include "conelab/cone.hpp"
#include "conelab/errors.hpp"
#include "conelab/fem.hpp"
#include "conelab/mesh2d.hpp"
#include "conelab/random.hpp"
#include "conelab/regularity.hpp"
#include "conelab/wos.hpp"

namespace conelab {

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

std::string header(const RunConfig& c) { return "# config-hash: " + config_hash(c) + "\n"; }

std::uint64_t seed_for(const RunConfig& c, const char* stream) { return derive_seed(c.seed, stream); }

// Key-value lines for the manifest, in insertion order.
class Manifest {
 public:
  void add(const std::string& k, const std::string& v) { lines_ += k + " = " + v + "\n"; }
  void add(const std::string& k, double v) { add(k, fmt(v)); }
  void add_int(const std::string& k, long long v) { add(k, std::to_string(v)); }
  const std::string& text() const { return lines_; }

 private:
  std::string lines_;
};

Manifest base_manifest(const RunConfig& c) {
  Manifest m;
  m.add("eps_val", kEpsVal);
  m.add("eps_grad", kEpsGrad);
  m.add("eps_merge", kEpsMergeRel * c.radius);
  m.add("eps_stab", kEpsStab);
  m.add("eps_fit", kEpsFit);
  m.add("lambda0", c.lambda0_or_default());
  return m;
}

OutputFile manifest_file(const RunConfig& c, const std::string& command, const Manifest& m) {
  std::string s = header(c);
  s += "# command: " + command + "\n";
  s += serialize_config(c);
  s += "\n[runtime]\n" + m.text();
  s += "\n[warnings]\n";
  for (const auto& w : c.warnings) s += "warning = " + w + "\n";
  return {"manifest.txt", s};
}

void require_points(const RunConfig& c, const char* command) {
  if (c.points.empty()) throw ValidationError(std::string(command) + " needs at least one point (--point or point =)");
}

void require_2d(const RunConfig& c, const char* what) {
  if (c.dim != 2) throw ValidationError(std::string(what) + " requires a 2D domain");
}

std::vector<GradingCenter> grading_for(const RunConfig& c, const DomainSpec& d) {
  if (!c.grading) return {};
  auto centers = detect_grading_centers(d);
  for (auto& g : centers) g.gamma = c.gamma;
  return centers;
}

std::shared_ptr<const TriMesh> mesh_for(const RunConfig& c, const DomainSpec& d, Manifest& m) {
  auto mesh = std::make_shared<const TriMesh>(build_mesh(d, c.h, grading_for(c, d)));
  const auto q = mesh_quality(*mesh);
  m.add_int("mesh_vertices", static_cast<long long>(mesh->vertices.size()));
  m.add_int("mesh_triangles", static_cast<long long>(mesh->triangles.size()));
  m.add_int("mesh_grading_centers", static_cast<long long>(mesh->grading_centers.size()));
  m.add("mesh_min_angle", q.min_angle);
  m.add("mesh_min_angle_outer", q.min_angle_outer);
  m.add_int("mesh_flagged_vertices", static_cast<long long>(mesh->flagged.size()));
  return mesh;
}

SolutionField fem_solution(const RunConfig& c, const DomainSpec& d, Manifest& m) {
  const auto mesh = mesh_for(c, d, m);
  const CgOptions opt;
  m.add("cg_tolerance", opt.tolerance);
  m.add_int("cg_max_iter_factor", opt.max_iter_factor);
  m.add_int("cg_stagnation_window", opt.stagnation_window);
  auto u = solve(assemble(mesh, d, c.workers), opt);
  m.add_int("cg_iterations", u.solver.iterations);
  m.add("cg_relative_residual", u.solver.relative_residual);
  m.add("energy", u.energy());
  return u;
}

WosConfig wos_config(const RunConfig& c, const DomainSpec& d) {
  WosConfig w;
  w.domain = d;
  w.walkers = c.walkers;
  w.shrink_tolerance = c.wos_eps_or_default();
  w.max_steps = c.max_steps;
  w.seed = seed_for(c, "wos");
  w.workers = c.workers;
  return w;
}

WosSolver wos_solver(const RunConfig& c, const DomainSpec& d, Manifest& m) {
  const WosConfig w = wos_config(c, d);
  m.add_int("wos_walkers", c.walkers);
  m.add("wos_eps", w.shrink_tolerance);
  m.add_int("wos_max_steps", c.max_steps);
  m.add("wos_seed", std::to_string(w.seed));
  return WosSolver(w);
}

std::string point_text(const Vec3& t) { return fmt(t.x()) + " " + fmt(t.y()) + " " + fmt(t.z()); }

// Configured points inside the domain; the grid when there are none.
std::vector<Vec3> evaluation_grid(const RunConfig& c, const DomainSpec& d, std::vector<std::string>& notes) {
  std::vector<Vec3> pts;
  for (const auto& p : c.points) {
    if (d.contains(p)) pts.push_back(p);
    else notes.push_back("skipping (" + point_text(p) + "): not inside the domain");
  }
  if (!pts.empty()) return pts;
  const int n = c.grid;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        auto s = [&](int a) { return n == 1 ? 0.0 : -0.8 + 1.6 * a / (n - 1); };
        const Vec3 x = c.center + c.radius * Vec3(s(i), s(j), s(k));
        if (d.contains(x)) pts.push_back(x);
      }
  if (pts.empty()) throw ValidationError("the evaluation grid misses the domain; give points explicitly");
  return pts;
}

}  // namespace

std::shared_ptr<const TriMesh> config_mesh(const RunConfig& c) {
  require_2d(c, "meshing");
  Manifest m;
  return mesh_for(c, c.domain(), m);
}

SolutionField config_fem_solution(const RunConfig& c) {
  require_2d(c, "the finite-element solver");
  Manifest m;
  return fem_solution(c, c.domain(), m);
}

WosConfig config_wos(const RunConfig& c) { return wos_config(c, c.domain()); }

LinkOptions config_link_options(const RunConfig& c) {
  LinkOptions opt;
  opt.scale = c.radius;
  opt.samples = c.cone_samples;
  opt.seed = seed_for(c, "cone");
  opt.workers = c.workers;
  return opt;
}

ProfileOptions config_profile_options(const RunConfig& c) {
  ProfileOptions o;
  o.r0 = c.r0_or_default();
  o.levels = c.levels;
  o.p_values = c.p_grid;
  o.discard_inner = c.discard_inner;
  return o;
}

SliceSpec config_slice_spec(const RunConfig& c) {
  SliceSpec spec;
  spec.stratum = c.slice_stratum == "line" ? StratumSpec::line(c.slice_point, c.slice_direction)
                                           : StratumSpec::point_stratum(c.slice_point);
  spec.ambient_dim = c.dim;
  spec.delta = c.slice_delta;
  spec.p = c.slice_p;
  spec.extent = c.slice_extent;
  for (int k : c.slice_levels) spec.etas.push_back(std::ldexp(1.0, -k));
  return spec;
}

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names = {"check-cone", "solve", "estimate-p", "slice-poincare",
                                                 "mesh-export"};
  return names;
}

RunConfig effective_config(const CommandRequest& req) {
  RunConfig c = load_config(req.config_path);
  if (!req.points.empty()) {
    c.points = req.points;
    if (c.dim == 2)
      for (const auto& p : c.points)
        if (p.z() != 0.0) throw ValidationError("points of a 2D domain must have z = 0");
  }
  if (req.out_dir) c.out_dir = *req.out_dir;
  if (req.seed) c.seed = *req.seed;
  return c;
}

CommandResult check_cone_command(const RunConfig& c) {
  require_points(c, "check-cone");
  const DomainSpec d = c.domain();
  Manifest m = base_manifest(c);
  const LinkOptions opt = config_link_options(c);
  m.add_int("cone_samples", opt.samples);
  m.add_int("cone_region_factor", opt.region_factor);
  m.add_int("cone_circle_steps", opt.circle_steps);
  std::string radii;
  for (double r : opt.radius_sequence()) radii += (radii.empty() ? "" : ", ") + fmt(r);
  m.add("cone_radii", radii);
  m.add("cone_seed", std::to_string(opt.seed));
  const double a1 = c.alpha.value_or(default_alpha(c.dim, 1));
  const double a2 = c.alpha.value_or(default_alpha(c.dim, 2));
  m.add("alpha1", a1);
  m.add("alpha2", a2);

  std::string csv = header(c) + "t,clause1,clause2,alpha,holds,confidence\n";
  CommandResult res;
  bool any_confident = false;
  for (std::size_t k = 0; k < c.points.size(); ++k) {
    LinkOptions o = opt;
    o.seed = derive_seed(opt.seed, k);
    const auto r = check_criterion(d, c.points[k], c.alpha, o);
    const std::string alpha = r.alpha1 == r.alpha2 ? fmt(r.alpha1) : fmt(r.alpha1) + "|" + fmt(r.alpha2);
    csv += point_text(c.points[k]) + "," + fmt(r.clause1) + "," + fmt(r.clause2) + "," + alpha + "," +
           (r.holds ? "true" : "false") + "," + (r.confident ? "high" : "low") + "\n";
    any_confident = any_confident || r.confident;
    res.messages.push_back("t = (" + point_text(c.points[k]) + "): " + (r.holds ? "holds" : "fails"));
  }
  res.all_flagged = !any_confident;
  res.files.push_back({"check_cone.csv", csv});
  res.files.push_back(manifest_file(c, "check-cone", m));
  return res;
}

CommandResult solve_command(const RunConfig& c) {
  const DomainSpec d = c.domain();
  Manifest m = base_manifest(c);
  CommandResult res;
  if (c.dim == 2) {
    const auto u = fem_solution(c, d, m);
    std::ostringstream os;
    os << header(c);
    write_solution(os, u);
    res.files.push_back({"solution.txt", os.str()});
    res.messages.push_back("solved on " + std::to_string(u.mesh->vertices.size()) + " nodes in " +
                           std::to_string(u.solver.iterations) + " CG iterations");
  } else {
    const WosSolver solver = wos_solver(c, d, m);
    const auto pts = evaluation_grid(c, d, res.messages);
    const auto results = solver.estimate_batch(pts);
    std::string csv = header(c) + "x,y,z,u,stderr,mean_steps,used,excluded,flagged\n";
    long excluded = 0, total = 0;
    bool all_flagged = true;
    for (const auto& r : results) {
      csv += fmt(r.point.x()) + "," + fmt(r.point.y()) + "," + fmt(r.point.z()) + "," + fmt(r.mean) + "," +
             fmt(r.std_error) + "," + fmt(r.mean_steps) + "," + std::to_string(r.used) + "," +
             std::to_string(r.excluded) + "," + (r.flagged ? "true" : "false") + "\n";
      excluded += r.excluded;
      total += r.used + r.excluded;
      all_flagged = all_flagged && r.flagged;
    }
    const double rate = total ? static_cast<double>(excluded) / static_cast<double>(total) : 0.0;
    m.add_int("wos_points", static_cast<long long>(pts.size()));
    m.add("wos_exclusion_rate", rate);
    res.all_flagged = all_flagged;
    res.files.push_back({"wos.csv", csv});
    res.messages.push_back("walk-on-spheres at " + std::to_string(pts.size()) + " points, exclusion rate " +
                           fmt(rate));
  }
  res.files.push_back(manifest_file(c, "solve", m));
  return res;
}

CommandResult estimate_p_command(const RunConfig& c) {
  require_points(c, "estimate-p");
  const DomainSpec d = c.domain();
  Manifest m = base_manifest(c);
  const ProfileOptions po = config_profile_options(c);
  m.add("r0", po.r0);
  m.add_int("levels", po.levels);
  m.add_int("discard_inner", po.discard_inner);
  m.add("margin", c.margin);

  std::vector<AnnulusProfile> profiles;
  if (c.dim == 2) {
    const auto u = fem_solution(c, d, m);
    for (const auto& t : c.points) profiles.push_back(annulus_profile(u, t, po));
  } else {
    const WosSolver solver = wos_solver(c, d, m);
    WosProfileOptions wo;
    wo.base = po;
    wo.samples = c.profile_samples;
    wo.axis = c.profile_axis;
    m.add_int("profile_samples", wo.samples);
    for (const auto& t : c.points) profiles.push_back(annulus_profile(solver, t, wo));
  }

  CommandResult res;
  std::string exponent = header(c) + "t_x,t_y,t_z,p_star,margin,confidence\n";
  bool any = false;
  for (std::size_t k = 0; k < profiles.size(); ++k) {
    const auto& prof = profiles[k];
    std::string csv = header(c) + "j,r,p,mass\n";
    for (int j = 0; j < prof.annuli(); ++j) {
      if (prof.missing[static_cast<std::size_t>(j)]) continue;
      for (std::size_t q = 0; q < prof.p_values.size(); ++q)
        csv += std::to_string(j) + "," + fmt(prof.radii[static_cast<std::size_t>(j)]) + "," + fmt(prof.p_values[q]) +
               "," + fmt(prof.mass[static_cast<std::size_t>(j)][q]) + "\n";
    }
    res.files.push_back({"profile_" + std::to_string(k) + ".csv", csv});

    const Vec3& t = c.points[k];
    std::string p_star, confidence;
    try {
      const auto ce = critical_exponent(prof, c.margin);
      p_star = format_p_star(ce);
      confidence = ce.confident ? "high" : "low";
      any = any || ce.confident;
    } catch (const NumericalError& e) {
      p_star = "failed";
      confidence = "none";
      res.messages.push_back("t = (" + point_text(t) + "): " + e.what());
    }
    exponent += fmt(t.x()) + "," + fmt(t.y()) + "," + fmt(t.z()) + "," + p_star + "," + fmt(c.margin) + "," +
                confidence + "\n";
    res.messages.push_back("t = (" + point_text(t) + "): p* = " + p_star);
  }
  res.all_flagged = !any;
  res.files.push_back({"exponent.csv", exponent});
  res.files.push_back(manifest_file(c, "estimate-p", m));
  return res;
}

CommandResult slice_poincare_command(const RunConfig& c) {
  const DomainSpec d = c.domain();
  Manifest m = base_manifest(c);
  FieldSampler u;
  if (!c.slice_field.empty()) {
    u = sample_field(ScalarField::parse(c.slice_field, c.dim), d);
  } else {
    require_2d(c, "slicing the computed solution (set slice_field in 3D)");
    u = sample_field(fem_solution(c, d, m));
  }
  const SliceSpec spec = config_slice_spec(c);
  m.add("slice_delta", spec.delta);
  m.add("slice_p", spec.p);
  m.add("slice_extent", spec.extent);
  m.add_int("slice_samples", spec.samples);

  const auto rows = slice_poincare_ratio(u, spec);
  std::string csv = header(c) + "eta,num,den,ratio\n";
  int usable = 0;
  for (const auto& r : rows) {
    csv += fmt(r.eta) + "," + fmt(r.num) + "," + fmt(r.den) + "," + (r.degenerate ? "degenerate" : fmt(r.ratio)) +
           "\n";
    if (!r.degenerate) ++usable;
  }
  CommandResult res;
  if (usable >= 2) {
    const double slope = slice_slope(rows);
    m.add("slice_slope", slope);
    res.messages.push_back("log-log slope of ratio against eta: " + fmt(slope));
  } else {
    res.messages.push_back("fewer than two non-degenerate slices; no slope");
  }
  res.files.push_back({"slice.csv", csv});
  res.files.push_back(manifest_file(c, "slice-poincare", m));
  return res;
}

CommandResult mesh_export_command(const RunConfig& c) {
  require_2d(c, "mesh-export");
  const DomainSpec d = c.domain();
  Manifest m = base_manifest(c);
  const auto mesh = mesh_for(c, d, m);
  std::ostringstream os;
  os << header(c);
  write_mesh(os, *mesh);
  CommandResult res;
  res.files.push_back({"mesh.txt", os.str()});
  res.files.push_back(manifest_file(c, "mesh-export", m));
  res.messages.push_back("mesh with " + std::to_string(mesh->vertices.size()) + " vertices and " +
                         std::to_string(mesh->triangles.size()) + " triangles");
  return res;
}

CommandResult run_command(const std::string& name, const RunConfig& c) {
  if (name == "check-cone") return check_cone_command(c);
  if (name == "solve") return solve_command(c);
  if (name == "estimate-p") return estimate_p_command(c);
  if (name == "slice-poincare") return slice_poincare_command(c);
  if (name == "mesh-export") return mesh_export_command(c);
  throw ValidationError("unknown command '" + name + "'");
}

void write_outputs(const std::string& dir, const CommandResult& r) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory '" + dir + "': " + ec.message());
  for (const auto& f : r.files) {
    const fs::path p = fs::path(dir) / f.name;
    std::ofstream os(p, std::ios::binary);
    os << f.content;
    os.close();
    if (!os) throw IoError("cannot write '" + p.string() + "'");
  }
}

int run_cli(const CommandRequest& req, std::ostream& out, std::ostream& err) {
  try {
    const RunConfig c = effective_config(req);
    for (const auto& w : c.warnings) err << "warning: " << w << "\n";
    const CommandResult r = run_command(req.command, c);
    write_outputs(c.out_dir, r);
    for (const auto& msg : r.messages) out << msg << "\n";
    for (const auto& f : r.files) out << "wrote " << (std::filesystem::path(c.out_dir) / f.name).string() << "\n";
    if (r.all_flagged) {
      err << "error: every result is flagged or low-confidence\n";
      return kExitNumerical;
    }
    return kExitOk;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const NumericalError& e) {
    err << "error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  }
}

}  // namespace conelab
