#include "conelab/scalar_field.hpp"

#include <array>
#include <cctype>
#include <cmath>
#include <numbers>
#include <sstream>
#include <type_traits>
#include <vector>

#include "conelab/errors.hpp"

namespace conelab {

namespace {

struct Dual {
  double v = 0.0;
  Eigen::Vector3d d = Eigen::Vector3d::Zero();
};

Dual operator+(const Dual& a, const Dual& b) { return {a.v + b.v, a.d + b.d}; }
Dual operator-(const Dual& a, const Dual& b) { return {a.v - b.v, a.d - b.d}; }
Dual operator-(const Dual& a) { return {-a.v, -a.d}; }
Dual operator*(const Dual& a, const Dual& b) { return {a.v * b.v, a.d * b.v + b.d * a.v}; }
Dual operator/(const Dual& a, const Dual& b) {
  return {a.v / b.v, (a.d * b.v - b.d * a.v) / (b.v * b.v)};
}
Dual chain(const Dual& a, double value, double slope) { return {value, a.d * slope}; }

// Elementary functions, overloaded for double and Dual.
double f_sin(double a) { return std::sin(a); }
double f_cos(double a) { return std::cos(a); }
double f_tan(double a) { return std::tan(a); }
double f_exp(double a) { return std::exp(a); }
double f_log(double a) { return std::log(a); }
double f_sqrt(double a) { return std::sqrt(a); }
double f_abs(double a) { return std::abs(a); }
double f_powc(double a, double k) { return std::pow(a, k); }
double f_pow(double a, double b) { return std::pow(a, b); }
double f_atan2(double y, double x) { return std::atan2(y, x); }
double f_value(double a) { return a; }

Dual f_sin(const Dual& a) { return chain(a, std::sin(a.v), std::cos(a.v)); }
Dual f_cos(const Dual& a) { return chain(a, std::cos(a.v), -std::sin(a.v)); }
Dual f_tan(const Dual& a) {
  const double c = std::cos(a.v);
  return chain(a, std::tan(a.v), 1.0 / (c * c));
}
Dual f_exp(const Dual& a) {
  const double e = std::exp(a.v);
  return chain(a, e, e);
}
Dual f_log(const Dual& a) { return chain(a, std::log(a.v), 1.0 / a.v); }
Dual f_sqrt(const Dual& a) {
  const double s = std::sqrt(a.v);
  return chain(a, s, 0.5 / s);
}
Dual f_abs(const Dual& a) { return chain(a, std::abs(a.v), a.v < 0 ? -1.0 : 1.0); }
Dual f_powc(const Dual& a, double k) {
  if (k == 0.0) return {1.0, Eigen::Vector3d::Zero()};
  return chain(a, std::pow(a.v, k), k * std::pow(a.v, k - 1.0));
}
Dual f_pow(const Dual& a, const Dual& b) {
  const double v = std::pow(a.v, b.v);
  Eigen::Vector3d d = a.d * (b.v * std::pow(a.v, b.v - 1.0));
  if (b.d.squaredNorm() > 0.0) d += b.d * (v * std::log(a.v));
  return {v, d};
}
Dual f_atan2(const Dual& y, const Dual& x) {
  const double den = x.v * x.v + y.v * y.v;
  return {std::atan2(y.v, x.v), (y.d * x.v - x.d * y.v) / den};
}
double f_value(const Dual& a) { return a.v; }

}  // namespace

namespace detail {

struct FieldNode {
  enum class Kind { Const, Var, Radius, Theta, Add, Sub, Mul, Div, Neg, PowConst, Pow, Func, Atan2 };
  Kind kind = Kind::Const;
  double value = 0.0;
  int index = 0;
  std::string func;
  std::shared_ptr<const FieldNode> a, b;

  template <class T>
  T eval(const std::array<T, 3>& vars, int dim) const {
    switch (kind) {
      case Kind::Const: {
        T out{};
        out = make_const<T>(value);
        return out;
      }
      case Kind::Var:
        return vars[index];
      case Kind::Radius: {
        T s = make_const<T>(0.0);
        for (int j = 0; j < dim; ++j) s = s + vars[j] * vars[j];
        return f_sqrt(s);
      }
      case Kind::Theta: {
        T th = f_atan2(vars[1], vars[0]);
        if (f_value(th) < 0.0) th = th + make_const<T>(2.0 * std::numbers::pi);
        return th;
      }
      case Kind::Add:
        return a->eval(vars, dim) + b->eval(vars, dim);
      case Kind::Sub:
        return a->eval(vars, dim) - b->eval(vars, dim);
      case Kind::Mul:
        return a->eval(vars, dim) * b->eval(vars, dim);
      case Kind::Div:
        return a->eval(vars, dim) / b->eval(vars, dim);
      case Kind::Neg:
        return -a->eval(vars, dim);
      case Kind::PowConst:
        return pow_int_or_real(a->eval(vars, dim), value);
      case Kind::Pow:
        return f_pow(a->eval(vars, dim), b->eval(vars, dim));
      case Kind::Atan2:
        return f_atan2(a->eval(vars, dim), b->eval(vars, dim));
      case Kind::Func: {
        const T x = a->eval(vars, dim);
        if (func == "sin") return f_sin(x);
        if (func == "cos") return f_cos(x);
        if (func == "tan") return f_tan(x);
        if (func == "exp") return f_exp(x);
        if (func == "log") return f_log(x);
        if (func == "sqrt") return f_sqrt(x);
        return f_abs(x);
      }
    }
    return make_const<T>(0.0);
  }

  template <class T>
  static T make_const(double c) {
    if constexpr (std::is_same_v<T, double>) {
      return c;
    } else {
      return T{c, Eigen::Vector3d::Zero()};
    }
  }

  // Integer powers by repeated multiplication so negative bases work.
  template <class T>
  static T pow_int_or_real(const T& x, double k) {
    if (k == std::floor(k) && std::abs(k) <= 64) {
      int n = static_cast<int>(std::abs(k));
      T r = make_const<T>(1.0);
      T base = x;
      while (n > 0) {
        if (n & 1) r = r * base;
        n >>= 1;
        if (n) base = base * base;
      }
      if (k < 0) r = make_const<T>(1.0) / r;
      return r;
    }
    return f_powc(x, k);
  }
};

}  // namespace detail

namespace {

using Node = detail::FieldNode;
using NodePtr = std::shared_ptr<const Node>;

NodePtr make(Node::Kind k, NodePtr a = nullptr, NodePtr b = nullptr) {
  auto n = std::make_shared<Node>();
  n->kind = k;
  n->a = std::move(a);
  n->b = std::move(b);
  return n;
}

NodePtr make_const(double v) {
  auto n = std::make_shared<Node>();
  n->kind = Node::Kind::Const;
  n->value = v;
  return n;
}

class FieldParser {
 public:
  FieldParser(std::string_view text, int dim) : text_(text), dim_(dim) {}

  NodePtr run() {
    skip_ws();
    if (pos_ >= text_.size()) throw ValidationError("empty field expression");
    NodePtr n = expr();
    skip_ws();
    if (pos_ < text_.size()) fail("unexpected token");
    return n;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    std::string tok = pos_ < text_.size() ? std::string(1, text_[pos_]) : std::string("<end>");
    std::ostringstream os;
    os << what << " '" << tok << "' at column " << (pos_ + 1) << " in \"" << text_ << "\"";
    throw ValidationError(os.str());
  }

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  NodePtr expr() {
    NodePtr acc = term();
    for (;;) {
      if (accept('+')) {
        acc = make(Node::Kind::Add, acc, term());
      } else if (accept('-')) {
        acc = make(Node::Kind::Sub, acc, term());
      } else {
        return acc;
      }
    }
  }

  NodePtr term() {
    NodePtr acc = unary();
    for (;;) {
      if (accept('*')) {
        acc = make(Node::Kind::Mul, acc, unary());
      } else if (accept('/')) {
        acc = make(Node::Kind::Div, acc, unary());
      } else {
        return acc;
      }
    }
  }

  NodePtr unary() {
    if (accept('-')) return make(Node::Kind::Neg, unary());
    if (accept('+')) return unary();
    return power();
  }

  NodePtr power() {
    NodePtr base = primary();
    if (accept('^')) {
      NodePtr ex = unary();  // right associative
      if (ex->kind == Node::Kind::Const) {
        auto n = std::make_shared<Node>();
        n->kind = Node::Kind::PowConst;
        n->a = base;
        n->value = ex->value;
        return n;
      }
      if (ex->kind == Node::Kind::Neg && ex->a->kind == Node::Kind::Const) {
        auto n = std::make_shared<Node>();
        n->kind = Node::Kind::PowConst;
        n->a = base;
        n->value = -ex->a->value;
        return n;
      }
      if (ex->kind == Node::Kind::Div && ex->a->kind == Node::Kind::Const &&
          ex->b->kind == Node::Kind::Const) {
        auto n = std::make_shared<Node>();
        n->kind = Node::Kind::PowConst;
        n->a = base;
        n->value = ex->a->value / ex->b->value;
        return n;
      }
      return make(Node::Kind::Pow, base, ex);
    }
    return base;
  }

  NodePtr primary() {
    skip_ws();
    if (pos_ >= text_.size()) fail("unexpected end of expression at");
    const char c = text_[pos_];
    if (c == '(') {
      ++pos_;
      NodePtr inner = expr();
      if (!accept(')')) fail("expected ')', got");
      return inner;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (std::isalpha(static_cast<unsigned char>(c))) {
      const std::size_t start = pos_;
      while (pos_ < text_.size() && (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
        ++pos_;
      const std::string id(text_.substr(start, pos_ - start));
      if (id == "x" || id == "y" || id == "z") {
        const int idx = id[0] - 'x';
        if (idx >= dim_) {
          pos_ = start;
          fail("variable not available in this dimension:");
        }
        auto n = std::make_shared<Node>();
        n->kind = Node::Kind::Var;
        n->index = idx;
        return n;
      }
      if (id == "r") return make(Node::Kind::Radius);
      if (id == "theta") {
        if (dim_ < 2) {
          pos_ = start;
          fail("theta needs at least two variables:");
        }
        return make(Node::Kind::Theta);
      }
      if (id == "pi") return make_const(std::numbers::pi);
      if (id == "atan2") {
        if (!accept('(')) fail("expected '(' after atan2, got");
        NodePtr y = expr();
        if (!accept(',')) fail("expected ',' in atan2, got");
        NodePtr x = expr();
        if (!accept(')')) fail("expected ')', got");
        return make(Node::Kind::Atan2, y, x);
      }
      static const char* kFuncs[] = {"sin", "cos", "tan", "exp", "log", "sqrt", "abs"};
      for (const char* f : kFuncs) {
        if (id == f) {
          if (!accept('(')) fail("expected '(' after function name, got");
          NodePtr arg = expr();
          if (!accept(')')) fail("expected ')', got");
          auto n = std::make_shared<Node>();
          n->kind = Node::Kind::Func;
          n->func = id;
          n->a = arg;
          return n;
        }
      }
      pos_ = start;
      fail("unknown identifier starting at");
    }
    fail("unexpected token");
  }

  NodePtr number() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() && (std::isdigit(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '.'))
      ++pos_;
    if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
      const std::size_t save = pos_++;
      if (pos_ < text_.size() && (text_[pos_] == '+' || text_[pos_] == '-')) ++pos_;
      if (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
        while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
      } else {
        pos_ = save;
      }
    }
    const std::string num(text_.substr(start, pos_ - start));
    try {
      std::size_t used = 0;
      const double v = std::stod(num, &used);
      if (used != num.size()) throw std::invalid_argument(num);
      return make_const(v);
    } catch (const std::logic_error&) {
      pos_ = start;
      fail("malformed number");
    }
  }

  std::string_view text_;
  int dim_;
  std::size_t pos_ = 0;
};

}  // namespace

ScalarField::ScalarField() : root_(make_const(0.0)), source_("0"), dim_(3), poly_(Polynomial(3)) {}

ScalarField ScalarField::parse(std::string_view text, int dim) {
  if (dim < 1 || dim > 3) throw ValidationError("field dimension must be 1, 2 or 3");
  ScalarField f;
  f.root_ = FieldParser(text, dim).run();
  f.source_ = std::string(text);
  f.dim_ = dim;
  f.poly_.reset();
  try {
    f.poly_ = Polynomial::parse(text, dim);
  } catch (const ValidationError&) {
  }
  return f;
}

ScalarField ScalarField::constant(double c, int dim) {
  std::ostringstream os;
  os.precision(17);
  os << c;
  ScalarField f;
  f.root_ = make_const(c);
  f.source_ = os.str();
  f.dim_ = dim;
  f.poly_ = Polynomial::constant(dim, c);
  return f;
}

ScalarField ScalarField::from_polynomial(const Polynomial& p) {
  ScalarField f = parse(p.to_string(), p.dimension());
  f.poly_ = p;
  return f;
}

double ScalarField::operator()(const Eigen::Vector3d& x) const {
  if (poly_) return poly_->eval(x);
  const std::array<double, 3> v{x[0], x[1], x[2]};
  return root_->eval(v, dim_);
}

double ScalarField::value_and_gradient(const Eigen::Vector3d& x, Eigen::Vector3d& grad) const {
  if (poly_) return poly_->eval_with_gradient(x, grad);
  std::array<Dual, 3> v;
  for (int j = 0; j < 3; ++j) {
    v[j].v = x[j];
    v[j].d.setZero();
    if (j < dim_) v[j].d[j] = 1.0;
  }
  const Dual out = root_->eval(v, dim_);
  grad = out.d;
  return out.v;
}

Eigen::Vector3d ScalarField::gradient(const Eigen::Vector3d& x) const {
  Eigen::Vector3d g;
  value_and_gradient(x, g);
  return g;
}

std::optional<double> ScalarField::constant_value() const {
  if (poly_ && poly_->degree() <= 0) {
    return poly_->is_zero() ? 0.0 : poly_->coefficient(Exponent(poly_->dimension(), 0));
  }
  return std::nullopt;
}

Eigen::Vector3d VectorField::operator()(const Eigen::Vector3d& x) const {
  Eigen::Vector3d v = Eigen::Vector3d::Zero();
  for (std::size_t i = 0; i < components.size() && i < 3; ++i) v[static_cast<int>(i)] = components[i](x);
  return v;
}

double VectorField::divergence(const Eigen::Vector3d& x) const {
  double s = 0.0;
  for (std::size_t i = 0; i < components.size() && i < 3; ++i)
    s += components[i].gradient(x)[static_cast<int>(i)];
  return s;
}

}  // namespace conelab
