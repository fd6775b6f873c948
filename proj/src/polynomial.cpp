#include "conelab/polynomial.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <sstream>

#include "conelab/errors.hpp"

namespace conelab {

namespace {

constexpr std::string_view kVarNames = "xyz";

long long binomial(int n, int k) {
  long long r = 1;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

// Tokenizer/parser for polynomial text.
class PolyParser {
 public:
  PolyParser(std::string_view text, int dim) : text_(text), dim_(dim) {}

  Polynomial run() {
    if (dim_ < 1 || dim_ > 3) throw ValidationError("polynomial dimension must be 1, 2 or 3");
    skip_ws();
    if (pos_ >= text_.size()) throw ValidationError("empty polynomial expression");
    Polynomial p = expr();
    skip_ws();
    if (pos_ < text_.size()) fail("unexpected token");
    return p;
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

  Polynomial expr() {
    Polynomial acc = term();
    for (;;) {
      if (accept('+')) {
        acc = acc + term();
      } else if (accept('-')) {
        acc = acc - term();
      } else {
        return acc;
      }
    }
  }

  Polynomial term() {
    Polynomial acc = unary();
    for (;;) {
      if (accept('*')) {
        acc = acc * unary();
      } else if (accept('/')) {
        const std::size_t at = pos_;
        Polynomial d = unary();
        if (d.degree() != 0) {
          pos_ = at;
          fail("division by a non-constant");
        }
        acc = acc * (1.0 / d.coefficient(Exponent(dim_, 0)));
      } else {
        return acc;
      }
    }
  }

  Polynomial unary() {
    if (accept('-')) return -unary();
    if (accept('+')) return unary();
    return power();
  }

  Polynomial power() {
    Polynomial base = primary();
    if (accept('^')) {
      skip_ws();
      std::size_t start = pos_;
      while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
      if (start == pos_) fail("expected integer exponent, got");
      const int k = std::stoi(std::string(text_.substr(start, pos_ - start)));
      return base.pow(k);
    }
    return base;
  }

  Polynomial primary() {
    skip_ws();
    if (pos_ >= text_.size()) fail("unexpected end of expression at");
    const char c = text_[pos_];
    if (c == '(') {
      ++pos_;
      Polynomial inner = expr();
      if (!accept(')')) fail("expected ')', got");
      return inner;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      std::size_t start = pos_;
      while (pos_ < text_.size() &&
             (std::isdigit(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '.'))
        ++pos_;
      if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
        std::size_t save = pos_++;
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
        return Polynomial::constant(dim_, v);
      } catch (const std::logic_error&) {
        pos_ = start;
        fail("malformed number");
      }
    }
    const auto idx = kVarNames.find(c);
    if (idx != std::string_view::npos) {
      if (static_cast<int>(idx) >= dim_) fail("variable not available in this dimension:");
      ++pos_;
      return Polynomial::variable(dim_, static_cast<int>(idx));
    }
    fail("unexpected token");
  }

  std::string_view text_;
  int dim_;
  std::size_t pos_ = 0;
};

}  // namespace

Polynomial::Polynomial(int dim) : dim_(dim) {
  if (dim < 1) throw ValidationError("polynomial dimension must be positive");
}

Polynomial::Polynomial(int dim, std::initializer_list<std::pair<Exponent, double>> terms)
    : Polynomial(dim) {
  for (const auto& [e, c] : terms) add_term(e, c);
  rebuild_cache();
}

Polynomial Polynomial::constant(int dim, double c) {
  Polynomial p(dim);
  p.add_term(Exponent(dim, 0), c);
  p.rebuild_cache();
  return p;
}

Polynomial Polynomial::variable(int dim, int index) {
  if (index < 0 || index >= dim) throw ValidationError("variable index out of range");
  Polynomial p(dim);
  Exponent e(dim, 0);
  e[index] = 1;
  p.add_term(e, 1.0);
  p.rebuild_cache();
  return p;
}

Polynomial Polynomial::parse(std::string_view text, int dim) { return PolyParser(text, dim).run(); }

void Polynomial::add_term(const Exponent& e, double c) {
  if (static_cast<int>(e.size()) != dim_) throw ValidationError("exponent length does not match dimension");
  for (int k : e)
    if (k < 0) throw ValidationError("negative exponent");
  if (c == 0.0) return;
  auto [it, inserted] = terms_.emplace(e, c);
  if (!inserted) {
    it->second += c;
    if (it->second == 0.0) terms_.erase(it);
  }
}

void Polynomial::rebuild_cache() {
  exps_.clear();
  coeffs_.clear();
  max_exp_ = 0;
  exps_.reserve(terms_.size() * dim_);
  coeffs_.reserve(terms_.size());
  for (const auto& [e, c] : terms_) {
    for (int k : e) {
      exps_.push_back(k);
      max_exp_ = std::max(max_exp_, k);
    }
    coeffs_.push_back(c);
  }
}

int Polynomial::degree() const {
  if (terms_.empty()) return kZeroDegree;
  int d = 0;
  for (const auto& [e, c] : terms_) {
    int s = 0;
    for (int k : e) s += k;
    d = std::max(d, s);
  }
  return d;
}

int Polynomial::order() const {
  if (terms_.empty()) return kZeroDegree;
  int d = INT_MAX;
  for (const auto& [e, c] : terms_) {
    int s = 0;
    for (int k : e) s += k;
    d = std::min(d, s);
  }
  return d;
}

bool Polynomial::is_homogeneous() const { return terms_.empty() || order() == degree(); }

double Polynomial::coefficient(const Exponent& e) const {
  auto it = terms_.find(e);
  return it == terms_.end() ? 0.0 : it->second;
}

void Polynomial::check_point(std::size_t n) const {
  if (static_cast<int>(n) != dim_) {
    std::ostringstream os;
    os << "point has " << n << " coordinates, polynomial dimension is " << dim_;
    throw ValidationError(os.str());
  }
}

double Polynomial::eval(std::span<const double> x) const {
  check_point(x.size());
  if (coeffs_.empty()) return 0.0;
  // Powers table pw[j][k] = x_j^k.
  const int stride = max_exp_ + 1;
  std::array<double, 96> stack{};
  std::vector<double> heap;
  double* pw = stack.data();
  if (dim_ * stride > static_cast<int>(stack.size())) {
    heap.resize(static_cast<std::size_t>(dim_ * stride));
    pw = heap.data();
  }
  for (int j = 0; j < dim_; ++j) {
    double* row = pw + j * stride;
    row[0] = 1.0;
    for (int k = 1; k < stride; ++k) row[k] = row[k - 1] * x[j];
  }
  double sum = 0.0;
  const std::size_t nt = coeffs_.size();
  for (std::size_t t = 0; t < nt; ++t) {
    double m = coeffs_[t];
    const int* e = exps_.data() + t * dim_;
    for (int j = 0; j < dim_; ++j) m *= pw[j * stride + e[j]];
    sum += m;
  }
  return sum;
}

double Polynomial::eval(const Eigen::Vector3d& x) const {
  if (dim_ > 3) throw ValidationError("polynomial dimension exceeds 3");
  return eval(std::span<const double>(x.data(), static_cast<std::size_t>(dim_)));
}

double Polynomial::eval_with_gradient(const Eigen::Vector3d& x, Eigen::Vector3d& grad) const {
  if (dim_ > 3) throw ValidationError("polynomial dimension exceeds 3");
  grad.setZero();
  if (coeffs_.empty()) return 0.0;
  const int stride = max_exp_ + 1;
  std::array<double, 96> stack{};
  std::vector<double> heap;
  double* pw = stack.data();
  if (dim_ * stride > static_cast<int>(stack.size())) {
    heap.resize(static_cast<std::size_t>(dim_ * stride));
    pw = heap.data();
  }
  for (int j = 0; j < dim_; ++j) {
    double* row = pw + j * stride;
    row[0] = 1.0;
    for (int k = 1; k < stride; ++k) row[k] = row[k - 1] * x[j];
  }
  double sum = 0.0;
  const std::size_t nt = coeffs_.size();
  for (std::size_t t = 0; t < nt; ++t) {
    const int* e = exps_.data() + t * dim_;
    double f[3];
    double m = coeffs_[t];
    for (int j = 0; j < dim_; ++j) {
      f[j] = pw[j * stride + e[j]];
      m *= f[j];
    }
    sum += m;
    for (int j = 0; j < dim_; ++j) {
      if (e[j] == 0) continue;
      double d = coeffs_[t] * e[j] * pw[j * stride + e[j] - 1];
      for (int i = 0; i < dim_; ++i)
        if (i != j) d *= f[i];
      grad[j] += d;
    }
  }
  return sum;
}

Polynomial Polynomial::derivative(int index) const {
  if (index < 0 || index >= dim_) throw ValidationError("derivative index out of range");
  Polynomial out(dim_);
  for (const auto& [e, c] : terms_) {
    if (e[index] == 0) continue;
    Exponent d = e;
    d[index] -= 1;
    out.add_term(d, c * e[index]);
  }
  out.rebuild_cache();
  return out;
}

std::vector<Polynomial> Polynomial::gradient() const {
  std::vector<Polynomial> g;
  g.reserve(dim_);
  for (int i = 0; i < dim_; ++i) g.push_back(derivative(i));
  return g;
}

Polynomial Polynomial::translate(std::span<const double> t) const {
  check_point(t.size());
  // p(t + x) = sum_c c * prod_j (t_j + x_j)^{e_j}, expanded binomially.
  Polynomial out(dim_);
  for (const auto& [e, c] : terms_) {
    // Iterate over all sub-exponents k <= e.
    Exponent k(dim_, 0);
    for (;;) {
      double coef = c;
      for (int j = 0; j < dim_; ++j)
        coef *= static_cast<double>(binomial(e[j], k[j])) * std::pow(t[j], e[j] - k[j]);
      out.add_term(k, coef);
      int j = 0;
      while (j < dim_) {
        if (++k[j] <= e[j]) break;
        k[j] = 0;
        ++j;
      }
      if (j == dim_) break;
    }
  }
  out.rebuild_cache();
  return out;
}

Polynomial Polynomial::homogeneous_part(int d) const {
  Polynomial out(dim_);
  for (const auto& [e, c] : terms_) {
    int s = 0;
    for (int k : e) s += k;
    if (s == d) out.add_term(e, c);
  }
  out.rebuild_cache();
  return out;
}

double Polynomial::abs_bound(std::span<const double> box) const {
  check_point(box.size());
  double s = 0.0;
  for (const auto& [e, c] : terms_) {
    double m = std::abs(c);
    for (int j = 0; j < dim_; ++j) m *= std::pow(std::abs(box[j]), e[j]);
    s += m;
  }
  return s;
}

Polynomial Polynomial::operator+(const Polynomial& o) const {
  if (o.dim_ != dim_) throw ValidationError("polynomial dimension mismatch");
  Polynomial out = *this;
  for (const auto& [e, c] : o.terms_) out.add_term(e, c);
  out.rebuild_cache();
  return out;
}

Polynomial Polynomial::operator-(const Polynomial& o) const { return *this + (o * -1.0); }

Polynomial Polynomial::operator*(const Polynomial& o) const {
  if (o.dim_ != dim_) throw ValidationError("polynomial dimension mismatch");
  Polynomial out(dim_);
  for (const auto& [ea, ca] : terms_) {
    for (const auto& [eb, cb] : o.terms_) {
      Exponent e(dim_);
      for (int j = 0; j < dim_; ++j) e[j] = ea[j] + eb[j];
      out.add_term(e, ca * cb);
    }
  }
  out.rebuild_cache();
  return out;
}

Polynomial Polynomial::operator*(double s) const {
  Polynomial out(dim_);
  for (const auto& [e, c] : terms_) out.add_term(e, c * s);
  out.rebuild_cache();
  return out;
}

Polynomial Polynomial::pow(int k) const {
  if (k < 0) throw ValidationError("negative polynomial power");
  Polynomial result = constant(dim_, 1.0);
  Polynomial base = *this;
  while (k > 0) {
    if (k & 1) result = result * base;
    k >>= 1;
    if (k) base = base * base;
  }
  return result;
}

std::string Polynomial::to_string() const {
  if (terms_.empty()) return "0";
  std::ostringstream os;
  os.precision(17);
  bool first = true;
  // Highest degree first reads naturally; map order is lexicographic on exponents.
  for (auto it = terms_.rbegin(); it != terms_.rend(); ++it) {
    const auto& [e, c] = *it;
    double a = c;
    if (first) {
      if (a < 0) os << "-";
    } else {
      os << (a < 0 ? " - " : " + ");
    }
    a = std::abs(a);
    bool has_var = false;
    for (int k : e) has_var = has_var || k > 0;
    if (!has_var || a != 1.0) {
      os << a;
      if (has_var) os << "*";
    }
    bool first_var = true;
    for (int j = 0; j < dim_; ++j) {
      if (e[j] == 0) continue;
      if (!first_var) os << "*";
      os << kVarNames[j];
      if (e[j] > 1) os << "^" << e[j];
      first_var = false;
    }
    first = false;
  }
  return os.str();
}

Polynomial initial_form(const Polynomial& p, std::span<const double> t) {
  const double value = p.eval(t);
  double scale = 0.0;
  for (const auto& [e, c] : p.terms()) scale = std::max(scale, std::abs(c));
  double tn = 1.0;
  for (double v : t) tn = std::max(tn, std::abs(v));
  const double tol = 1e-12 * std::max(scale, 1.0) * std::pow(tn, std::max(p.degree(), 0));
  if (std::abs(value) > tol) {
    std::ostringstream os;
    os << "initial_form: point is not on the variety (p(t) = " << value << ")";
    throw ValidationError(os.str());
  }
  Polynomial shifted = p.translate(t);
  // Drop the constant term and the rounding residue that translation leaves
  // in coefficients which vanish exactly.
  double shifted_scale = 0.0;
  for (const auto& [e, c] : shifted.terms()) shifted_scale = std::max(shifted_scale, std::abs(c));
  Polynomial cleaned(p.dimension());
  for (const auto& [e, c] : shifted.terms()) {
    int s = 0;
    for (int k : e) s += k;
    if (s == 0 || std::abs(c) <= 1e-13 * shifted_scale) continue;
    cleaned = cleaned + Polynomial(p.dimension(), {{e, c}});
  }
  if (cleaned.is_zero()) return cleaned;
  return cleaned.homogeneous_part(cleaned.order());
}

}  // namespace conelab
