#include "conelab/config.hpp"

#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "conelab/errors.hpp"
#include "conelab/random.hpp"
#include "conelab/regularity.hpp"

namespace conelab {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(trim(item));
  if (!s.empty() && s.back() == sep) out.push_back("");
  return out;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string vec(const Vec3& v) { return num(v.x()) + ", " + num(v.y()) + ", " + num(v.z()); }

double to_double(const std::string& s, const std::string& what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::logic_error&) {
    throw ValidationError(what + ": expected a number, got '" + s + "'");
  }
}

long to_long(const std::string& s, const std::string& what) {
  try {
    std::size_t used = 0;
    const long v = std::stol(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::logic_error&) {
    throw ValidationError(what + ": expected an integer, got '" + s + "'");
  }
}

std::vector<ConstraintAtomText> parse_constraint(const std::string& text) {
  std::vector<ConstraintAtomText> out;
  std::string rest = text;
  std::vector<std::string> parts;
  for (;;) {
    const auto k = rest.find(" or ");
    parts.push_back(trim(rest.substr(0, k)));
    if (k == std::string::npos) break;
    rest = rest.substr(k + 4);
  }
  for (const auto& p : parts) {
    ConstraintAtomText a;
    std::size_t at = std::string::npos, len = 0;
    for (const char* op : {"!=", "<=", ">=", "<", ">", "="}) {
      at = p.find(op);
      if (at != std::string::npos) {
        a.op = op;
        len = a.op.size();
        break;
      }
    }
    if (at == std::string::npos) throw ValidationError("constraint '" + p + "' has no comparison (<, >, !=, =)");
    if (a.op == "<=" || a.op == ">=")
      throw ValidationError("constraint '" + p + "': domains are open, use < or > instead of " + a.op);
    a.lhs = trim(p.substr(0, at));
    a.rhs = trim(p.substr(at + len));
    if (a.lhs.empty() || a.rhs.empty()) throw ValidationError("constraint '" + p + "' is missing a side");
    out.push_back(a);
  }
  return out;
}

std::string constraint_text(const std::vector<ConstraintAtomText>& c) {
  std::string s;
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (i) s += " or ";
    s += c[i].lhs + " " + c[i].op + " " + c[i].rhs;
  }
  return s;
}

Sign sign_of(const std::string& op) {
  if (op == "<") return Sign::Less;
  if (op == ">") return Sign::Greater;
  if (op == "!=") return Sign::NotEqual;
  return Sign::Equal;
}

bool opt_eq(const std::optional<Vec3>& a, const std::optional<Vec3>& b) {
  return a.has_value() == b.has_value() && (!a || *a == *b);
}

}  // namespace

Vec3 parse_point(const std::string& text) {
  const auto parts = split(text, ',');
  if (parts.size() < 2 || parts.size() > 3) throw ValidationError("point '" + text + "': expected 2 or 3 coordinates");
  Vec3 v = Vec3::Zero();
  for (std::size_t k = 0; k < parts.size(); ++k) v[static_cast<Eigen::Index>(k)] = to_double(parts[k], "point");
  return v;
}

bool RunConfig::operator==(const RunConfig& o) const {
  return dim == o.dim && center == o.center && radius == o.radius && constraints == o.constraints &&
         opt_eq(component_seed, o.component_seed) && dirichlet == o.dirichlet && neumann == o.neumann &&
         a_entries == o.a_entries && lambda0 == o.lambda0 && f == o.f && g == o.g && theta == o.theta &&
         points == o.points && alpha == o.alpha && cone_samples == o.cone_samples && p_grid == o.p_grid &&
         r0 == o.r0 && levels == o.levels && discard_inner == o.discard_inner && margin == o.margin && h == o.h &&
         grading == o.grading && gamma == o.gamma && walkers == o.walkers && wos_eps == o.wos_eps &&
         max_steps == o.max_steps && grid == o.grid && profile_samples == o.profile_samples && opt_eq(profile_axis, o.profile_axis) &&
         slice_stratum == o.slice_stratum && slice_point == o.slice_point && slice_direction == o.slice_direction &&
         slice_levels == o.slice_levels && slice_p == o.slice_p && slice_delta == o.slice_delta &&
         slice_extent == o.slice_extent && slice_field == o.slice_field && seed == o.seed && workers == o.workers &&
         out_dir == o.out_dir;
}

DomainSpec RunConfig::domain() const {
  DomainSpec d;
  d.dim = dim;
  d.ball.center = center;
  d.ball.radius = radius;
  for (const auto& c : constraints) {
    Constraint con;
    for (const auto& a : c)
      con.any_of.push_back(Atom{Polynomial::parse(a.lhs, dim) - Polynomial::parse(a.rhs, dim), sign_of(a.op)});
    d.constraints.push_back(con);
  }
  d.dirichlet = BoundarySelector::parse(dirichlet);
  d.neumann = BoundarySelector::parse(neumann);
  if (a_entries.empty()) {
    d.op = CoefficientField::identity(dim, lambda0_or_default());
  } else {
    std::vector<ScalarField> e;
    for (const auto& s : a_entries) e.push_back(ScalarField::parse(s, dim));
    d.op = CoefficientField(dim, std::move(e), lambda0_or_default());
  }
  d.source = ScalarField::parse(f, dim);
  d.dirichlet_data = ScalarField::parse(g, dim);
  d.neumann_data = ScalarField::parse(theta, dim);
  if (component_seed) d = d.select_component(*component_seed);
  return d;
}

RunConfig parse_config(const std::string& text) {
  RunConfig c;
  static const std::map<std::string, std::set<std::string>> keys = {
      {"domain", {"dim", "center", "radius", "constraint", "component_seed", "dirichlet", "neumann"}},
      {"operator", {"A", "lambda0", "f", "g", "theta"}},
      {"analysis",
       {"point", "alpha", "cone_samples", "p_grid", "r0", "levels", "discard_inner", "margin", "h", "grading", "gamma",
        "walkers", "wos_eps", "max_steps", "grid", "profile_samples", "profile_axis", "slice_stratum", "slice_point",
        "slice_direction", "slice_levels", "slice_p", "slice_delta", "slice_extent", "slice_field", "seed",
        "workers"}},
      {"output", {"dir"}}};
  std::string section;
  std::set<std::string> seen;
  struct Expr {
    int line;
    std::string key, text;
    bool polynomial;
  };
  std::vector<Expr> exprs;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string where = "line " + std::to_string(line_no);
    const auto hash = raw.find('#');
    const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ValidationError(where + ": unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      if (!keys.count(section)) throw ValidationError(where + ": unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ValidationError(where + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (section.empty()) throw ValidationError(where + ": key '" + key + "' outside a section");
    if (!keys.at(section).count(key)) throw ValidationError(where + ": unknown key '" + key + "' in [" + section + "]");
    const bool repeatable = key == "constraint" || key == "point";
    if (!repeatable && !seen.insert(section + "." + key).second)
      throw ValidationError(where + ": duplicate key '" + key + "'");
    try {
      if (key == "dim") c.dim = static_cast<int>(to_long(value, key));
      else if (key == "center") c.center = parse_point(value);
      else if (key == "radius") c.radius = to_double(value, key);
      else if (key == "constraint") {
        c.constraints.push_back(parse_constraint(value));
        for (const auto& a : c.constraints.back()) {
          exprs.push_back({line_no, key, a.lhs, true});
          exprs.push_back({line_no, key, a.rhs, true});
        }
      }
      else if (key == "component_seed") c.component_seed = parse_point(value);
      else if (key == "dirichlet") c.dirichlet = value;
      else if (key == "neumann") c.neumann = value;
      else if (key == "A") {
        c.a_entries = split(value, ';');
        for (const auto& e : c.a_entries) exprs.push_back({line_no, key, e, false});
      }
      else if (key == "lambda0") c.lambda0 = to_double(value, key);
      else if (key == "f") c.f = value;
      else if (key == "g") c.g = value;
      else if (key == "theta") c.theta = value;
      else if (key == "point") c.points.push_back(parse_point(value));
      else if (key == "alpha") c.alpha = to_double(value, key);
      else if (key == "cone_samples") c.cone_samples = static_cast<int>(to_long(value, key));
      else if (key == "p_grid") {
        for (const auto& s : split(value, ',')) c.p_grid.push_back(to_double(s, key));
      } else if (key == "r0") c.r0 = to_double(value, key);
      else if (key == "levels") c.levels = static_cast<int>(to_long(value, key));
      else if (key == "discard_inner") c.discard_inner = static_cast<int>(to_long(value, key));
      else if (key == "margin") c.margin = to_double(value, key);
      else if (key == "h") c.h = to_double(value, key);
      else if (key == "grading") {
        if (value != "on" && value != "off") throw ValidationError("grading: expected on or off");
        c.grading = value == "on";
      } else if (key == "gamma") c.gamma = to_double(value, key);
      else if (key == "walkers") c.walkers = to_long(value, key);
      else if (key == "wos_eps") c.wos_eps = to_double(value, key);
      else if (key == "max_steps") c.max_steps = to_long(value, key);
      else if (key == "grid") c.grid = static_cast<int>(to_long(value, key));
      else if (key == "profile_samples") c.profile_samples = static_cast<int>(to_long(value, key));
      else if (key == "profile_axis") c.profile_axis = parse_point(value);
      else if (key == "slice_stratum") c.slice_stratum = value;
      else if (key == "slice_point") c.slice_point = parse_point(value);
      else if (key == "slice_direction") c.slice_direction = parse_point(value);
      else if (key == "slice_levels") {
        for (const auto& s : split(value, ',')) c.slice_levels.push_back(static_cast<int>(to_long(s, key)));
      } else if (key == "slice_p") c.slice_p = to_double(value, key);
      else if (key == "slice_delta") c.slice_delta = to_double(value, key);
      else if (key == "slice_extent") c.slice_extent = to_double(value, key);
      else if (key == "slice_field") c.slice_field = value;
      else if (key == "seed") {
        std::size_t used = 0;
        c.seed = std::stoull(value, &used);
        if (used != value.size() || value.front() == '-') throw std::invalid_argument(value);
      } else if (key == "workers") c.workers = static_cast<int>(to_long(value, key));
      else if (key == "dir") c.out_dir = value;
      if (key == "f" || key == "g" || key == "theta" || key == "slice_field") exprs.push_back({line_no, key, value, false});
    } catch (const ValidationError& e) {
      throw ValidationError(where + ": " + e.what());
    } catch (const std::logic_error&) {
      throw ValidationError(where + ": bad value '" + value + "' for " + key);
    }
  }

  // Defaults and semantic checks.
  if (c.p_grid.empty()) c.p_grid = default_p_grid();
  if (c.slice_levels.empty())
    for (int k = 3; k <= 8; ++k) c.slice_levels.push_back(k);
  if (!c.lambda0) c.warnings.push_back("lambda0 not set; using the default 1e-6");
  if (c.dim != 2 && c.dim != 3) throw ValidationError("dim must be 2 or 3");
  for (const auto& e : exprs) {
    try {
      if (e.polynomial) Polynomial::parse(e.text, c.dim);
      else ScalarField::parse(e.text, c.dim);
    } catch (const ValidationError& err) {
      throw ValidationError("line " + std::to_string(e.line) + ": " + e.key + ": " + err.what());
    }
  }
  if (!(c.radius > 0)) throw ValidationError("radius must be positive");
  if (!(c.h > 0)) throw ValidationError("h must be positive");
  if (c.levels < 1 || c.discard_inner < 0) throw ValidationError("levels must be >= 1 and discard_inner >= 0");
  if (c.cone_samples < 1 || c.walkers < 1 || c.max_steps < 1 || c.profile_samples < 1 || c.grid < 1)
    throw ValidationError("sample, walker and step counts must be positive");
  if (c.slice_stratum != "point" && c.slice_stratum != "line")
    throw ValidationError("slice_stratum must be point or line");
  if (!c.a_entries.empty() && static_cast<int>(c.a_entries.size()) != c.dim * c.dim)
    throw ValidationError("A needs dim*dim entries separated by ';'");
  if (c.dim == 2)
    for (const auto& p : c.points)
      if (p.z() != 0.0) throw ValidationError("points of a 2D domain must have z = 0");
  c.domain().validate();
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string serialize_config(const RunConfig& c) {
  std::ostringstream o;
  o << "[domain]\n";
  o << "dim = " << c.dim << "\n";
  o << "center = " << vec(c.center) << "\n";
  o << "radius = " << num(c.radius) << "\n";
  for (const auto& k : c.constraints) o << "constraint = " << constraint_text(k) << "\n";
  if (c.component_seed) o << "component_seed = " << vec(*c.component_seed) << "\n";
  o << "dirichlet = " << c.dirichlet << "\n";
  o << "neumann = " << c.neumann << "\n";
  o << "\n[operator]\n";
  if (!c.a_entries.empty()) {
    o << "A = ";
    for (std::size_t i = 0; i < c.a_entries.size(); ++i) o << (i ? "; " : "") << c.a_entries[i];
    o << "\n";
  }
  if (c.lambda0) o << "lambda0 = " << num(*c.lambda0) << "\n";
  o << "f = " << c.f << "\n";
  o << "g = " << c.g << "\n";
  o << "theta = " << c.theta << "\n";
  o << "\n[analysis]\n";
  for (const auto& p : c.points) o << "point = " << vec(p) << "\n";
  if (c.alpha) o << "alpha = " << num(*c.alpha) << "\n";
  o << "cone_samples = " << c.cone_samples << "\n";
  o << "p_grid = ";
  for (std::size_t i = 0; i < c.p_grid.size(); ++i) o << (i ? ", " : "") << num(c.p_grid[i]);
  o << "\n";
  if (c.r0) o << "r0 = " << num(*c.r0) << "\n";
  o << "levels = " << c.levels << "\n";
  o << "discard_inner = " << c.discard_inner << "\n";
  o << "margin = " << num(c.margin) << "\n";
  o << "h = " << num(c.h) << "\n";
  o << "grading = " << (c.grading ? "on" : "off") << "\n";
  o << "gamma = " << num(c.gamma) << "\n";
  o << "walkers = " << c.walkers << "\n";
  if (c.wos_eps) o << "wos_eps = " << num(*c.wos_eps) << "\n";
  o << "max_steps = " << c.max_steps << "\n";
  o << "grid = " << c.grid << "\n";
  o << "profile_samples = " << c.profile_samples << "\n";
  if (c.profile_axis) o << "profile_axis = " << vec(*c.profile_axis) << "\n";
  o << "slice_stratum = " << c.slice_stratum << "\n";
  o << "slice_point = " << vec(c.slice_point) << "\n";
  o << "slice_direction = " << vec(c.slice_direction) << "\n";
  o << "slice_levels = ";
  for (std::size_t i = 0; i < c.slice_levels.size(); ++i) o << (i ? ", " : "") << c.slice_levels[i];
  o << "\n";
  o << "slice_p = " << num(c.slice_p) << "\n";
  o << "slice_delta = " << num(c.slice_delta) << "\n";
  o << "slice_extent = " << num(c.slice_extent) << "\n";
  if (!c.slice_field.empty()) o << "slice_field = " << c.slice_field << "\n";
  o << "seed = " << c.seed << "\n";
  o << "workers = " << c.workers << "\n";
  o << "\n[output]\n";
  o << "dir = " << c.out_dir << "\n";
  return o.str();
}

std::string config_hash(const RunConfig& c) {
  RunConfig h = c;
  h.out_dir.clear();
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(serialize_config(h))));
  return buf;
}

}  // namespace conelab
