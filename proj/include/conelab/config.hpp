#pragma once

// Run configuration: a flat, sectioned key-value text file.
//
//   # comment
//   [domain]
//   dim = 3
//   constraint = x^3 + y^2 - z^2*x^2 != 0
//   dirichlet = constraints
//
// Keys may appear once, except `constraint` and `point`, which accumulate.
// Lists use commas inside a value ("0, 0, 0.5") and semicolons between
// items ("0,0,0.5; 0,0,-0.5"). See README.md for every key and default.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "conelab/domain.hpp"

namespace conelab {

struct ConstraintAtomText {
  std::string lhs;
  std::string op;  // "<", ">", "!=", "="
  std::string rhs;

  bool operator==(const ConstraintAtomText&) const = default;
};

struct RunConfig {
  // [domain]
  int dim = 2;
  Vec3 center = Vec3::Zero();
  double radius = 1.0;
  std::vector<std::vector<ConstraintAtomText>> constraints;  // each a disjunction
  std::optional<Vec3> component_seed;
  std::string dirichlet = "all";
  std::string neumann = "none";

  // [operator]
  std::vector<std::string> a_entries;  // row major; empty means identity
  std::optional<double> lambda0;
  std::string f = "0";
  std::string g = "0";
  std::string theta = "0";

  // [analysis]
  std::vector<Vec3> points;
  std::optional<double> alpha;
  int cone_samples = 10000;
  std::vector<double> p_grid;
  std::optional<double> r0;
  int levels = 8;
  int discard_inner = 2;
  double margin = 0.1;
  double h = 0.05;
  bool grading = true;
  double gamma = 3.0;
  long walkers = 10000;
  std::optional<double> wos_eps;
  long max_steps = 100000;
  int grid = 5;  // 3D solve without points: grid^3 lattice over the ball
  int profile_samples = 16;
  std::optional<Vec3> profile_axis;
  std::string slice_stratum = "point";  // point | line
  Vec3 slice_point = Vec3::Zero();
  Vec3 slice_direction = Vec3::UnitZ();
  std::vector<int> slice_levels;  // eta = 2^-k
  double slice_p = 2.0;
  double slice_delta = 0.25;
  double slice_extent = 0.5;
  std::string slice_field;  // empty: the computed solution
  std::uint64_t seed = 1;
  int workers = 0;

  // [output]
  std::string out_dir = "out";

  // Not serialized: notes produced while filling defaults.
  std::vector<std::string> warnings;

  bool operator==(const RunConfig& o) const;

  double lambda0_or_default() const { return lambda0.value_or(1e-6); }
  double wos_eps_or_default() const { return wos_eps.value_or(1e-4 * radius); }
  double r0_or_default() const { return r0.value_or(0.25 * radius); }

  // Domain with operator and data; applies the component seed.
  DomainSpec domain() const;
};

// "x, y" or "x, y, z"; missing coordinates are zero.
Vec3 parse_point(const std::string& text);

// Throws ValidationError naming the line on syntax errors and naming the
// failed check on semantic errors.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);  // IoError when unreadable

// Canonical text; parse_config(serialize_config(c)) == c.
std::string serialize_config(const RunConfig& c);

// FNV-1a of the canonical text without the output directory, 16 hex digits.
std::string config_hash(const RunConfig& c);

}  // namespace conelab
