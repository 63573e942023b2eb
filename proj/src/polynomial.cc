#include "sosctrl/polynomial.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <numeric>

namespace sosctrl {

VariableSet::VariableSet(std::vector<std::string> names)
    : names_(std::move(names)) {
  SOSCTRL_REQUIRE(!names_.empty(), "VariableSet requires at least one name");
  for (size_t i = 0; i < names_.size(); ++i) {
    SOSCTRL_REQUIRE(!names_[i].empty(), "variable names must be nonempty");
    for (size_t j = i + 1; j < names_.size(); ++j) {
      SOSCTRL_REQUIRE(names_[i] != names_[j], "duplicate variable name");
    }
  }
}

std::shared_ptr<const VariableSet> VariableSet::Indexed(
    const std::string& prefix, int count) {
  std::vector<std::string> names;
  names.reserve(count);
  for (int i = 1; i <= count; ++i) {
    names.push_back(prefix + std::to_string(i));
  }
  return std::make_shared<const VariableSet>(std::move(names));
}

int VariableSet::IndexOf(const std::string& name) const {
  for (size_t i = 0; i < names_.size(); ++i) {
    if (names_[i] == name) return static_cast<int>(i);
  }
  return -1;
}

bool SameVariables(const VariableSetPtr& a, const VariableSetPtr& b) {
  if (a == b) return true;
  if (!a || !b) return false;
  return *a == *b;
}

Monomial::Monomial(std::vector<int> exponents)
    : exponents_(std::move(exponents)) {
  for (int e : exponents_) {
    SOSCTRL_REQUIRE(e >= 0, "monomial exponents must be non-negative");
  }
}

Monomial Monomial::Constant(int num_vars) {
  return Monomial(std::vector<int>(num_vars, 0));
}

Monomial Monomial::Single(int num_vars, int var, int power) {
  SOSCTRL_REQUIRE(var >= 0 && var < num_vars, "variable index out of range");
  std::vector<int> e(num_vars, 0);
  e[var] = power;
  return Monomial(std::move(e));
}

int Monomial::total_degree() const {
  return std::accumulate(exponents_.begin(), exponents_.end(), 0);
}

Monomial Monomial::operator*(const Monomial& other) const {
  SOSCTRL_REQUIRE(num_vars() == other.num_vars(),
                  "monomial product across different variable counts");
  std::vector<int> e(exponents_);
  for (int i = 0; i < other.num_vars(); ++i) e[i] += other.exponents_[i];
  return Monomial(std::move(e));
}

double Monomial::Evaluate(const Eigen::Ref<const Eigen::VectorXd>& point) const {
  SOSCTRL_REQUIRE(point.size() == num_vars(),
                  "evaluation point dimension mismatch");
  double value = 1.0;
  for (int i = 0; i < num_vars(); ++i) {
    for (int k = 0; k < exponents_[i]; ++k) value *= point[i];
  }
  return value;
}

bool GradedLexLess::operator()(const Monomial& a, const Monomial& b) const {
  SOSCTRL_DEMAND(a.num_vars() == b.num_vars());
  const int da = a.total_degree();
  const int db = b.total_degree();
  if (da != db) return da < db;
  // Same degree: earlier-variable-heavy monomials first.
  return a.exponents() > b.exponents();
}

namespace {

void AppendMonomials(int num_vars, int var, int remaining, std::vector<int>* e,
                     std::vector<Monomial>* out) {
  if (var == num_vars - 1) {
    (*e)[var] = remaining;
    out->emplace_back(*e);
    (*e)[var] = 0;
    return;
  }
  for (int d = remaining; d >= 0; --d) {
    (*e)[var] = d;
    AppendMonomials(num_vars, var + 1, remaining - d, e, out);
  }
  (*e)[var] = 0;
}

}  // namespace

std::vector<Monomial> MonomialBasis(int num_vars, int max_degree,
                                    const BasisOptions& options) {
  SOSCTRL_REQUIRE(num_vars >= 1, "basis requires at least one variable");
  SOSCTRL_REQUIRE(max_degree >= 0, "basis degree must be non-negative");
  std::vector<Monomial> basis;
  std::vector<int> e(num_vars, 0);
  for (int d = std::max(0, options.min_degree); d <= max_degree; ++d) {
    if (options.even_only && d % 2 != 0) continue;
    AppendMonomials(num_vars, 0, d, &e, &basis);
  }
  return basis;
}

Polynomial::Polynomial(VariableSetPtr vars) : vars_(std::move(vars)) {}

Polynomial::Polynomial(VariableSetPtr vars,
                       std::map<Monomial, double, GradedLexLess> terms)
    : vars_(std::move(vars)), terms_(std::move(terms)) {
  SOSCTRL_REQUIRE(vars_ != nullptr, "polynomial requires a variable set");
  for (const auto& [m, c] : terms_) {
    SOSCTRL_REQUIRE(m.num_vars() == vars_->size(),
                    "monomial arity does not match the variable set");
    (void)c;
  }
  Prune();
}

Polynomial Polynomial::Constant(VariableSetPtr vars, double value) {
  Polynomial p(std::move(vars));
  if (std::abs(value) > kCoefficientTolerance) {
    p.terms_.emplace(Monomial::Constant(p.vars_->size()), value);
  }
  return p;
}

Polynomial Polynomial::Variable(VariableSetPtr vars, int index) {
  SOSCTRL_REQUIRE(vars && index >= 0 && index < vars->size(),
                  "variable index out of range");
  Polynomial p(vars);
  p.terms_.emplace(Monomial::Single(vars->size(), index), 1.0);
  return p;
}

Polynomial Polynomial::FromMonomial(VariableSetPtr vars, const Monomial& m) {
  SOSCTRL_REQUIRE(vars && m.num_vars() == vars->size(),
                  "monomial arity does not match the variable set");
  Polynomial p(vars);
  p.terms_.emplace(m, 1.0);
  return p;
}

bool Polynomial::IsConstant() const {
  if (terms_.empty()) return true;
  return terms_.size() == 1 && terms_.begin()->first.total_degree() == 0;
}

int Polynomial::TotalDegree() const {
  int degree = 0;
  for (const auto& [m, c] : terms_) {
    (void)c;
    degree = std::max(degree, m.total_degree());
  }
  return degree;
}

double Polynomial::Coefficient(const Monomial& m) const {
  const auto it = terms_.find(m);
  return it == terms_.end() ? 0.0 : it->second;
}

double Polynomial::ConstantTerm() const {
  if (!vars_) return 0.0;
  return Coefficient(Monomial::Constant(vars_->size()));
}

double Polynomial::MaxAbsCoefficient() const {
  double value = 0.0;
  for (const auto& [m, c] : terms_) {
    (void)m;
    value = std::max(value, std::abs(c));
  }
  return value;
}

void Polynomial::Prune() {
  for (auto it = terms_.begin(); it != terms_.end();) {
    if (std::abs(it->second) <= kCoefficientTolerance) {
      it = terms_.erase(it);
    } else {
      ++it;
    }
  }
}

void Polynomial::AlignVariables(const Polynomial& other) {
  if (SameVariables(vars_, other.vars_)) return;
  if (!vars_ && terms_.empty()) {
    vars_ = other.vars_;
    return;
  }
  if (!other.vars_ && other.terms_.empty()) return;
  SOSCTRL_REQUIRE(false, "polynomial arithmetic across different variable sets");
}

Polynomial Polynomial::operator-() const {
  Polynomial result(*this);
  for (auto& [m, c] : result.terms_) {
    (void)m;
    c = -c;
  }
  return result;
}

Polynomial& Polynomial::operator+=(const Polynomial& other) {
  AlignVariables(other);
  for (const auto& [m, c] : other.terms_) {
    terms_[m] += c;
  }
  Prune();
  return *this;
}

Polynomial& Polynomial::operator-=(const Polynomial& other) {
  AlignVariables(other);
  for (const auto& [m, c] : other.terms_) {
    terms_[m] -= c;
  }
  Prune();
  return *this;
}

Polynomial& Polynomial::operator*=(const Polynomial& other) {
  AlignVariables(other);
  if (terms_.empty() || other.terms_.empty()) {
    terms_.clear();
    return *this;
  }
  std::map<Monomial, double, GradedLexLess> product;
  for (const auto& [ma, ca] : terms_) {
    for (const auto& [mb, cb] : other.terms_) {
      product[ma * mb] += ca * cb;
    }
  }
  terms_ = std::move(product);
  Prune();
  return *this;
}

Polynomial& Polynomial::operator+=(double c) {
  SOSCTRL_REQUIRE(vars_ != nullptr, "constant add on an unbound polynomial");
  terms_[Monomial::Constant(vars_->size())] += c;
  Prune();
  return *this;
}

Polynomial& Polynomial::operator-=(double c) { return *this += (-c); }

Polynomial& Polynomial::operator*=(double c) {
  for (auto& [m, coeff] : terms_) {
    (void)m;
    coeff *= c;
  }
  Prune();
  return *this;
}

Polynomial& Polynomial::operator/=(double c) {
  SOSCTRL_REQUIRE(c != 0.0, "division by zero");
  return *this *= (1.0 / c);
}

double Polynomial::Evaluate(
    const Eigen::Ref<const Eigen::VectorXd>& point) const {
  SOSCTRL_REQUIRE(point.size() == num_vars() || terms_.empty(),
                  "evaluation point dimension mismatch");
  double value = 0.0;
  for (const auto& [m, c] : terms_) {
    value += c * m.Evaluate(point);
  }
  return value;
}

Polynomial Polynomial::Differentiate(int var) const {
  SOSCTRL_REQUIRE(vars_ && var >= 0 && var < vars_->size(),
                  "differentiation variable out of range");
  Polynomial result(vars_);
  for (const auto& [m, c] : terms_) {
    const int e = m.degree(var);
    if (e == 0) continue;
    std::vector<int> exponents = m.exponents();
    exponents[var] -= 1;
    result.terms_[Monomial(std::move(exponents))] += c * e;
  }
  result.Prune();
  return result;
}

bool Polynomial::operator==(const Polynomial& other) const {
  return SameVariables(vars_, other.vars_) && terms_ == other.terms_;
}

double Polynomial::CoefficientDistance(const Polynomial& other) const {
  double dist = 0.0;
  for (const auto& [m, c] : terms_) {
    dist = std::max(dist, std::abs(c - other.Coefficient(m)));
  }
  for (const auto& [m, c] : other.terms_) {
    dist = std::max(dist, std::abs(c - Coefficient(m)));
  }
  return dist;
}

Polynomial operator+(Polynomial a, const Polynomial& b) { return a += b; }
Polynomial operator-(Polynomial a, const Polynomial& b) { return a -= b; }
Polynomial operator*(const Polynomial& a, const Polynomial& b) {
  Polynomial result(a);
  result *= b;
  return result;
}
Polynomial operator+(Polynomial a, double c) { return a += c; }
Polynomial operator+(double c, Polynomial a) { return a += c; }
Polynomial operator-(Polynomial a, double c) { return a -= c; }
Polynomial operator-(double c, const Polynomial& a) {
  Polynomial result = -a;
  result += c;
  return result;
}
Polynomial operator*(Polynomial a, double c) { return a *= c; }
Polynomial operator*(double c, Polynomial a) { return a *= c; }
Polynomial operator/(Polynomial a, double c) { return a /= c; }

Polynomial pow(const Polynomial& base, int exponent) {
  SOSCTRL_REQUIRE(exponent >= 0, "polynomial power must be non-negative");
  SOSCTRL_REQUIRE(base.variables() != nullptr, "power of unbound polynomial");
  Polynomial result = Polynomial::Constant(base.variables(), 1.0);
  for (int i = 0; i < exponent; ++i) result *= base;
  return result;
}

PolyRowVector Gradient(const Polynomial& p) {
  const int n = p.num_vars();
  PolyRowVector grad(n);
  for (int i = 0; i < n; ++i) grad[i] = p.Differentiate(i);
  return grad;
}

Polynomial LieDerivative(const Polynomial& V, const PolyVector& field) {
  SOSCTRL_REQUIRE(field.size() == V.num_vars(),
                  "vector field dimension mismatch");
  Polynomial result(V.variables());
  for (int i = 0; i < field.size(); ++i) {
    result += V.Differentiate(i) * field[i];
  }
  return result;
}

Eigen::VectorXd EvaluateVector(const PolyVector& polys,
                               const Eigen::Ref<const Eigen::VectorXd>& point) {
  Eigen::VectorXd values(polys.size());
  for (int i = 0; i < polys.size(); ++i) values[i] = polys[i].Evaluate(point);
  return values;
}

Eigen::MatrixXd EvaluateMatrix(const PolyMatrix& polys,
                               const Eigen::Ref<const Eigen::VectorXd>& point) {
  Eigen::MatrixXd values(polys.rows(), polys.cols());
  for (int i = 0; i < polys.rows(); ++i) {
    for (int j = 0; j < polys.cols(); ++j) {
      values(i, j) = polys(i, j).Evaluate(point);
    }
  }
  return values;
}

namespace {

std::string FormatCoefficient(double value) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.17g", value);
  return buffer;
}

std::string FormatTerm(const VariableSet& vars, const Monomial& m,
                       double coeff) {
  std::string term;
  const bool unit = std::abs(std::abs(coeff) - 1.0) < 1e-15;
  if (m.total_degree() == 0 || !unit) {
    term += FormatCoefficient(std::abs(coeff));
  }
  for (int i = 0; i < m.num_vars(); ++i) {
    if (m.degree(i) == 0) continue;
    if (!term.empty()) term += "*";
    term += vars.name(i);
    if (m.degree(i) > 1) term += "^" + std::to_string(m.degree(i));
  }
  return term;
}

}  // namespace

std::string ToExpressionString(const Polynomial& p) {
  if (p.IsZero()) return "0";
  std::string out;
  // Highest-degree terms first.
  for (auto it = p.terms().rbegin(); it != p.terms().rend(); ++it) {
    const double coeff = it->second;
    if (out.empty()) {
      if (coeff < 0) out += "-";
    } else {
      out += coeff < 0 ? " - " : " + ";
    }
    out += FormatTerm(*p.variables(), it->first, coeff);
  }
  return out;
}

namespace {

class PolynomialParser {
 public:
  PolynomialParser(const std::string& text, VariableSetPtr vars)
      : text_(text), vars_(std::move(vars)) {}

  Polynomial Parse() {
    Polynomial result(vars_);
    SkipSpace();
    bool first = true;
    while (pos_ < text_.size() || first) {
      double sign = 1.0;
      SkipSpace();
      if (pos_ < text_.size() && (text_[pos_] == '+' || text_[pos_] == '-')) {
        sign = text_[pos_] == '-' ? -1.0 : 1.0;
        ++pos_;
      } else if (!first) {
        Fail("expected '+' or '-' between terms");
      }
      result += sign * ParseTerm();
      first = false;
      SkipSpace();
      if (pos_ >= text_.size()) break;
    }
    if (first) Fail("empty polynomial expression");
    return result;
  }

 private:
  void SkipSpace() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) {
      ++pos_;
    }
  }

  [[noreturn]] void Fail(const std::string& message) const {
    throw std::invalid_argument("polynomial parse error at position " +
                                std::to_string(pos_) + ": " + message +
                                " in \"" + text_ + "\"");
  }

  Polynomial ParseTerm() {
    Polynomial term = Polynomial::Constant(vars_, 1.0);
    bool saw_factor = false;
    while (true) {
      SkipSpace();
      if (pos_ >= text_.size()) break;
      const char c = text_[pos_];
      if (c == '+' || c == '-') break;
      if (c == '*') {
        if (!saw_factor) Fail("unexpected '*'");
        ++pos_;
        SkipSpace();
      } else if (saw_factor) {
        Fail("expected '*', '+' or '-'");
      }
      term *= ParseFactor();
      saw_factor = true;
    }
    if (!saw_factor) Fail("expected a term");
    return term;
  }

  Polynomial ParseFactor() {
    SkipSpace();
    if (pos_ >= text_.size()) Fail("expected a factor");
    const char c = text_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      return Polynomial::Constant(vars_, ParseNumber());
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      const std::string name = ParseIdentifier();
      const int index = vars_->IndexOf(name);
      if (index < 0) Fail("unknown variable '" + name + "'");
      int power = 1;
      SkipSpace();
      if (pos_ < text_.size() && text_[pos_] == '^') {
        ++pos_;
        SkipSpace();
        power = ParseInteger();
      }
      return Polynomial::FromMonomial(
          vars_, Monomial::Single(vars_->size(), index, power));
    }
    Fail("unexpected character");
  }

  double ParseNumber() {
    size_t start = pos_;
    while (pos_ < text_.size() &&
           (std::isdigit(static_cast<unsigned char>(text_[pos_])) ||
            text_[pos_] == '.' || text_[pos_] == 'e' || text_[pos_] == 'E' ||
            ((text_[pos_] == '+' || text_[pos_] == '-') && pos_ > start &&
             (text_[pos_ - 1] == 'e' || text_[pos_ - 1] == 'E')))) {
      ++pos_;
    }
    try {
      size_t consumed = 0;
      const double value = std::stod(text_.substr(start, pos_ - start), &consumed);
      if (consumed != pos_ - start) Fail("malformed numeric literal");
      return value;
    } catch (const std::invalid_argument&) {
      Fail("malformed numeric literal");
    } catch (const std::out_of_range&) {
      Fail("numeric literal out of range");
    }
  }

  std::string ParseIdentifier() {
    size_t start = pos_;
    while (pos_ < text_.size() &&
           (std::isalnum(static_cast<unsigned char>(text_[pos_])) ||
            text_[pos_] == '_')) {
      ++pos_;
    }
    return text_.substr(start, pos_ - start);
  }

  int ParseInteger() {
    size_t start = pos_;
    while (pos_ < text_.size() &&
           std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
      ++pos_;
    }
    if (pos_ == start) Fail("expected an integer exponent");
    return std::stoi(text_.substr(start, pos_ - start));
  }

  const std::string& text_;
  VariableSetPtr vars_;
  size_t pos_{0};
};

}  // namespace

Polynomial ParsePolynomial(const std::string& text,
                           const VariableSetPtr& vars) {
  SOSCTRL_REQUIRE(vars != nullptr, "parser requires a variable set");
  return PolynomialParser(text, vars).Parse();
}

Polynomial SquaredNorm(const VariableSetPtr& vars) {
  Polynomial p(vars);
  for (int i = 0; i < vars->size(); ++i) {
    const Polynomial xi = Polynomial::Variable(vars, i);
    p += xi * xi;
  }
  return p;
}

}  // namespace sosctrl
