#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "conelab/commands.hpp"
#include "conelab/config.hpp"
#include "conelab/errors.hpp"

namespace py = pybind11;
using namespace conelab;

namespace {

Vec3 to_point(const std::vector<double>& v) {
  if (v.size() < 2 || v.size() > 3) throw ValidationError("a point needs 2 or 3 coordinates");
  return Vec3(v[0], v[1], v.size() == 3 ? v[2] : 0.0);
}

std::vector<double> from_point(const Vec3& v) { return {v.x(), v.y(), v.z()}; }

py::dict profile_dict(const AnnulusProfile& prof, double margin) {
  py::dict d;
  d["radii"] = prof.radii;
  d["p_values"] = prof.p_values;
  d["mass"] = prof.mass;
  std::vector<bool> excluded(prof.excluded.begin(), prof.excluded.end());
  d["excluded"] = excluded;
  const auto ce = critical_exponent(prof, margin);
  d["p_star"] = ce.p_star ? py::cast(*ce.p_star) : py::none();
  d["confident"] = ce.confident;
  std::vector<double> slopes;
  for (const auto& f : ce.fits) slopes.push_back(f.slope);
  d["slopes"] = slopes;
  return d;
}

}  // namespace

PYBIND11_MODULE(_conelab, m) {
  m.doc() = "Tangent-cone regularity checks and elliptic solves on semialgebraic domains";

  auto validation = py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);
  (void)validation;

  py::class_<RunConfig>(m, "Config")
      .def_static("from_text", &parse_config, py::arg("text"))
      .def_static("load", &load_config, py::arg("path"))
      .def("to_text", &serialize_config)
      .def("hash", &config_hash)
      .def_readonly("dim", &RunConfig::dim)
      .def_readonly("warnings", &RunConfig::warnings)
      .def_readwrite("seed", &RunConfig::seed)
      .def_readwrite("h", &RunConfig::h)
      .def_readwrite("walkers", &RunConfig::walkers)
      .def_readwrite("cone_samples", &RunConfig::cone_samples)
      .def_readwrite("out_dir", &RunConfig::out_dir)
      .def_property(
          "points",
          [](const RunConfig& c) {
            std::vector<std::vector<double>> out;
            for (const auto& p : c.points) out.push_back(from_point(p));
            return out;
          },
          [](RunConfig& c, const std::vector<std::vector<double>>& pts) {
            c.points.clear();
            for (const auto& p : pts) c.points.push_back(to_point(p));
          })
      .def("__eq__", [](const RunConfig& a, const RunConfig& b) { return a == b; })
      .def("__repr__", [](const RunConfig& c) { return "<conelab.Config " + config_hash(c) + ">"; });

  m.def(
      "check_cone",
      [](const RunConfig& c, const std::vector<double>& point) {
        const auto r = check_criterion(c.domain(), to_point(point), c.alpha, config_link_options(c));
        py::dict d;
        d["clause1"] = r.clause1;
        d["clause2"] = r.clause2;
        d["alpha1"] = r.alpha1;
        d["alpha2"] = r.alpha2;
        d["holds"] = r.holds;
        d["confident"] = r.confident;
        return d;
      },
      py::arg("config"), py::arg("point"), "Tangent-cone criterion at a boundary point.");

  m.def(
      "solve_fem",
      [](const RunConfig& c) {
        const auto u = config_fem_solution(c);
        const auto& mesh = *u.mesh;
        Eigen::MatrixXd vertices(static_cast<Eigen::Index>(mesh.vertices.size()), 2);
        for (std::size_t i = 0; i < mesh.vertices.size(); ++i)
          vertices.row(static_cast<Eigen::Index>(i)) = mesh.vertices[i].transpose();
        Eigen::MatrixXi triangles(static_cast<Eigen::Index>(mesh.triangles.size()), 3);
        Eigen::MatrixXd gradients(static_cast<Eigen::Index>(mesh.triangles.size()), 2);
        for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
          for (int k = 0; k < 3; ++k) triangles(static_cast<Eigen::Index>(t), k) = mesh.triangles[t][static_cast<std::size_t>(k)];
          gradients.row(static_cast<Eigen::Index>(t)) = u.gradients[t].transpose();
        }
        py::dict d;
        d["vertices"] = vertices;
        d["triangles"] = triangles;
        d["values"] = Eigen::VectorXd(u.values);
        d["gradients"] = gradients;
        d["energy"] = u.energy();
        d["cg_iterations"] = u.solver.iterations;
        d["relative_residual"] = u.solver.relative_residual;
        return d;
      },
      py::arg("config"), "P1 finite-element solve of a 2D configuration.");

  m.def(
      "wos_estimate",
      [](const RunConfig& c, const std::vector<std::vector<double>>& points) {
        const WosSolver solver(config_wos(c));
        std::vector<Vec3> pts;
        for (const auto& p : points) pts.push_back(to_point(p));
        py::list out;
        for (const auto& r : solver.estimate_batch(pts)) {
          py::dict d;
          d["point"] = from_point(r.point);
          d["value"] = r.mean;
          d["std_error"] = r.std_error;
          d["mean_steps"] = r.mean_steps;
          d["excluded"] = r.excluded;
          d["flagged"] = r.flagged;
          out.append(d);
        }
        return out;
      },
      py::arg("config"), py::arg("points"), "Walk-on-spheres values at interior points of a 3D configuration.");

  m.def(
      "estimate_p",
      [](const RunConfig& c, const std::vector<double>& point) {
        const Vec3 t = to_point(point);
        if (c.dim == 2) return profile_dict(annulus_profile(config_fem_solution(c), t, config_profile_options(c)), c.margin);
        WosProfileOptions wo;
        wo.base = config_profile_options(c);
        wo.samples = c.profile_samples;
        wo.axis = c.profile_axis;
        return profile_dict(annulus_profile(WosSolver(config_wos(c)), t, wo), c.margin);
      },
      py::arg("config"), py::arg("point"), "Annulus profile and critical exponent at a point.");

  m.def(
      "slice_poincare",
      [](const RunConfig& c) {
        const FieldSampler u = c.slice_field.empty() ? sample_field(config_fem_solution(c))
                                                     : sample_field(ScalarField::parse(c.slice_field, c.dim), c.domain());
        const auto rows = slice_poincare_ratio(u, config_slice_spec(c));
        py::list out;
        for (const auto& r : rows) {
          py::dict d;
          d["eta"] = r.eta;
          d["num"] = r.num;
          d["den"] = r.den;
          d["ratio"] = r.degenerate ? py::none() : py::cast(r.ratio);
          out.append(d);
        }
        return out;
      },
      py::arg("config"), "Slice Poincare ratios near the configured stratum.");

  m.def(
      "run_command",
      [](const std::string& name, const RunConfig& c, bool write) {
        const CommandResult r = run_command(name, c);
        if (write) write_outputs(c.out_dir, r);
        py::dict files;
        for (const auto& f : r.files) files[py::str(f.name)] = f.content;
        py::dict d;
        d["files"] = files;
        d["messages"] = r.messages;
        d["all_flagged"] = r.all_flagged;
        return d;
      },
      py::arg("name"), py::arg("config"), py::arg("write") = false,
      "Run a command; returns the output files as text and optionally writes them to config.out_dir.");

  m.attr("commands") = command_names();
}
