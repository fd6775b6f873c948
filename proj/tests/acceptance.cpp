// Acceptance run: one PASS/FAIL line per criterion. Exit status is the
// number of failed criteria.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "conelab/commands.hpp"
#include "conelab/config.hpp"
#include "conelab/errors.hpp"
#include "conelab/mesh2d.hpp"
#include "conelab/random.hpp"

using namespace conelab;

namespace {

const std::string kConfigs = CONELAB_SOURCE_DIR "/configs/";

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// Data rows of a CSV with a hash line and a column line, split on commas.
std::vector<std::vector<std::string>> csv_rows(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    if (n++ < 2) continue;
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

const std::string& file(const CommandResult& r, const std::string& name) {
  for (const auto& f : r.files)
    if (f.name == name) return f.content;
  throw IoError("missing output " + name);
}

// Runs a command twice and records whether the CSV outputs match byte for byte.
struct Repro {
  int runs = 0;
  std::vector<std::string> mismatches;

  CommandResult run(const std::string& command, const RunConfig& c) {
    const CommandResult a = run_command(command, c);
    const CommandResult b = run_command(command, c);
    ++runs;
    for (std::size_t k = 0; k < a.files.size(); ++k)
      if (a.files[k].content != b.files[k].content) mismatches.push_back(command + ":" + a.files[k].name);
    return a;
  }
};

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(int id, const std::string& name, const std::function<Outcome()>& check) {
  const auto t0 = Clock::now();
  Outcome o;
  try {
    o = check();
  } catch (const std::exception& e) {
    o = {false, std::string("error: ") + e.what()};
  }
  if (!o.pass) ++failures;
  std::printf("[%s] %d %s: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", id, name.c_str(), o.detail.c_str(),
              seconds_since(t0));
  std::fflush(stdout);
}

Repro repro;

Outcome cone_classification() {
  const std::vector<Vec3> seeds = {Vec3(0.1, 0.5, 0.2), Vec3(-0.5, 0.01, 0.9)};
  const double zs[] = {0.25, 0.5, 0.75, -0.25, -0.5, -0.75};
  int checked = 0, wrong = 0;
  double slowest = 0.0;
  std::string notes;
  auto verdict = [&](RunConfig c, const Vec3& t) {
    c.points = {t};
    const auto t0 = Clock::now();
    const CommandResult r = checked == 0 ? repro.run("check-cone", c) : run_command("check-cone", c);
    slowest = std::max(slowest, seconds_since(t0) / (checked == 0 ? 2.0 : 1.0));
    ++checked;
    return csv_rows(file(r, "check_cone.csv")).at(0).at(4) == "true";
  };
  for (const char* name : {"example34", "example35"}) {
    RunConfig c = load_config(kConfigs + name + ".cfg");
    c.cone_samples = 10000;
    for (const auto& seed : seeds) {
      c.component_seed = seed;
      for (double z : zs) {
        if (!verdict(c, Vec3(0, 0, z))) {
          ++wrong;
          notes += std::string(" ") + name + " z=" + fmt("%g", z);
        }
      }
    }
  }
  RunConfig c = load_config(kConfigs + "example35.cfg");
  c.cone_samples = 10000;
  c.component_seed = seeds[0];
  const bool origin_fails = !verdict(c, Vec3::Zero());
  if (!origin_fails) notes += " example35 {P>0} origin holds";
  return {wrong == 0 && origin_fails && slowest < 30.0,
          std::to_string(checked) + " points, " + std::to_string(wrong + (origin_fails ? 0 : 1)) +
              " wrong verdicts, slowest point " + fmt("%.1f", slowest) + " s" + notes};
}

Outcome fem_convergence() {
  const auto t0 = Clock::now();
  RunConfig c = load_config(kConfigs + "square.cfg");
  const ScalarField exact = ScalarField::parse("sin(pi * x) * sin(pi * y)", 2);
  std::vector<double> errs;
  for (double h : {0.2, 0.1, 0.05}) {
    c.h = h;
    errs.push_back(l2_error(config_fem_solution(c), exact));
  }
  const double r1 = errs[1] / errs[0], r2 = errs[2] / errs[1];
  const double t = seconds_since(t0);
  return {r1 <= 0.3 && r2 <= 0.3 && t < 10.0,
          "L2 error ratios " + fmt("%.3f", r1) + ", " + fmt("%.3f", r2) + " in " + fmt("%.1f", t) + " s"};
}

Outcome green_identity() {
  RunConfig c = load_config(kConfigs + "slit.cfg");
  const VectorField beta{{ScalarField::parse("sin(y)", 2), ScalarField::parse("cos(x)", 2)}};
  std::vector<double> res;
  for (double h : {0.1, 0.05, 0.025}) {
    c.h = h;
    res.push_back(green_identity_residual(beta, config_fem_solution(c)));
  }
  const bool decreasing = res[1] < res[0] && res[2] < res[1];
  return {decreasing && res[2] < 1e-2,
          "residuals " + fmt("%.3e", res[0]) + ", " + fmt("%.3e", res[1]) + ", " + fmt("%.3e", res[2])};
}

Outcome critical_exponents() {
  std::string detail;
  bool ok = true;
  const std::map<std::string, std::pair<double, double>> ranges = {{"slit", {3.6, 4.4}}, {"lshape", {5.2, 6.8}}};
  for (const auto& [name, range] : ranges) {
    RunConfig c = load_config(kConfigs + name + ".cfg");
    c.h = 0.02;
    c.gamma = 3.0;
    c.grading = true;
    const auto t0 = Clock::now();
    const CommandResult r = repro.run("estimate-p", c);
    const double t = seconds_since(t0) / 2.0;
    const auto row = csv_rows(file(r, "exponent.csv")).at(0);
    const std::string p = row.at(3);
    const bool numeric = p != "unbounded" && p != "failed";
    const double v = numeric ? std::stod(p) : 0.0;
    const bool pass = numeric && v >= range.first && v <= range.second && row.at(5) == "high" && t < 120.0;
    ok = ok && pass;
    detail += (detail.empty() ? "" : "; ") + name + " p* = " + p + " (" + row.at(5) + ", " + fmt("%.1f", t) + " s)";
  }
  return {ok, detail};
}

Outcome slice_slopes() {
  std::string detail;
  bool ok = true;
  for (const char* name : {"slit", "example34"}) {
    RunConfig c = load_config(kConfigs + name + ".cfg");
    c.slice_levels = {3, 4, 5, 6, 7, 8};
    repro.run("slice-poincare", c);
    const FieldSampler u = c.slice_field.empty() ? sample_field(config_fem_solution(c))
                                                 : sample_field(ScalarField::parse(c.slice_field, c.dim), c.domain());
    const auto rows = slice_poincare_ratio(u, config_slice_spec(c));
    int usable = 0;
    for (const auto& row : rows) usable += row.degenerate ? 0 : 1;
    const double slope = usable >= 2 ? slice_slope(rows) : 0.0;
    ok = ok && usable == 6 && slope >= 0.85;
    detail += (detail.empty() ? "" : "; ") + std::string(name) + " slope " + fmt("%.3f", slope) + " over " +
              std::to_string(usable) + " levels";
  }
  return {ok, detail};
}

Outcome wos_shell() {
  RunConfig c = load_config(kConfigs + "shell.cfg");
  c.walkers = 100000;
  const auto full = run_command("solve", c);
  c.walkers = 25000;
  const auto quarter = run_command("solve", c);
  const auto a = csv_rows(file(full, "wos.csv")), b = csv_rows(file(quarter, "wos.csv"));
  int inside = 0, halved = 0;
  double worst_z = 0.0, lo = 1e9, hi = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const Vec3 x(std::stod(a[k][0]), std::stod(a[k][1]), std::stod(a[k][2]));
    const double z = std::abs(std::stod(a[k][3]) - 1.0 / x.norm()) / std::stod(a[k][4]);
    worst_z = std::max(worst_z, z);
    inside += z <= 3.0 ? 1 : 0;
    const double ratio = std::stod(a[k][4]) / std::stod(b[k][4]);
    lo = std::min(lo, ratio);
    hi = std::max(hi, ratio);
    halved += std::abs(ratio - 0.5) <= 0.15 ? 1 : 0;
  }
  const int n = static_cast<int>(a.size());
  return {n == 5 && inside == n && halved == n,
          std::to_string(inside) + "/" + std::to_string(n) + " points within 3 stderr (worst " + fmt("%.2f", worst_z) +
              "), stderr ratio for 4x walkers in [" + fmt("%.3f", lo) + ", " + fmt("%.3f", hi) + "]"};
}

Outcome product_decomposition() {
  const auto P = Polynomial::parse("x^3 + y^2 - z^2*x^2", 3);
  const Vec3 t(0, 0, 1);
  LinkOptions o;
  o.samples = 10000;
  o.seed = derive_seed(1, "product");
  for (int j = 0; j < 8; ++j) o.radii.push_back(1e-3 * std::ldexp(1.0, -j));
  const auto rep = check_product_decomposition(SampledSet::variety(P), StratumSpec::line(t, Vec3::UnitZ()), t, o);
  return {rep.distance <= 0.05, "distance " + fmt("%.4f", rep.distance)};
}

Outcome property_suites() {
  const auto t0 = Clock::now();
  const std::string props = std::string("\"") + UNIT_TESTS_BIN + "\" -tc=\"property:*\" > /dev/null 2>&1";
  const int prop_status = std::system(props.c_str());
  const double tp = seconds_since(t0);
  const auto t1 = Clock::now();
  const std::string all = std::string("\"") + UNIT_TESTS_BIN + "\" > /dev/null 2>&1";
  const int all_status = std::system(all.c_str());
  const double ta = seconds_since(t1);
  return {prop_status == 0 && all_status == 0 && ta < 600.0,
          std::string("property suites ") + (prop_status == 0 ? "pass" : "fail") + " in " + fmt("%.1f", tp) +
              " s, full unit suite " + (all_status == 0 ? "passes" : "fails") + " in " + fmt("%.1f", ta) + " s"};
}

Outcome reproducibility() {
  RunConfig shell = load_config(kConfigs + "shell.cfg");
  shell.walkers = 5000;
  repro.run("solve", shell);
  repro.run("mesh-export", load_config(kConfigs + "slit.cfg"));
  repro.run("solve", load_config(kConfigs + "square.cfg"));
  std::string detail = std::to_string(repro.runs) + " commands run twice, ";
  if (repro.mismatches.empty()) return {true, detail + "all outputs identical"};
  for (const auto& m : repro.mismatches) detail += m + " ";
  return {false, detail + "differ"};
}

}  // namespace

int main() {
  report(1, "cone classification of the two surface examples", cone_classification);
  report(2, "FEM second-order L2 convergence", fem_convergence);
  report(3, "Green identity residual on the slit", green_identity);
  report(4, "critical exponents at the slit tip and L-shape corner", critical_exponents);
  report(5, "slice Poincare ratio slopes", slice_slopes);
  report(6, "walk-on-spheres on the spherical shell", wos_shell);
  report(7, "product decomposition along the singular axis", product_decomposition);
  report(8, "property suites and unit suite runtime", property_suites);
  report(9, "byte-identical outputs on repeated runs", reproducibility);
  std::printf("%d of 9 criteria failed\n", failures);
  return failures;
}
