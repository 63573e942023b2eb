#pragma once

#include <initializer_list>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "sosctrl/common.h"

namespace sosctrl {

// Ordered set of named indeterminates. Polynomials refer to variables by
// index into one shared VariableSet; two sets are interchangeable iff their
// name lists are equal.
class VariableSet {
 public:
  explicit VariableSet(std::vector<std::string> names);

  // Builds {prefix1, ..., prefix<count>}.
  static std::shared_ptr<const VariableSet> Indexed(const std::string& prefix,
                                                    int count);

  int size() const { return static_cast<int>(names_.size()); }
  const std::string& name(int i) const { return names_.at(i); }
  const std::vector<std::string>& names() const { return names_; }
  // Returns -1 when the name is not present.
  int IndexOf(const std::string& name) const;

  bool operator==(const VariableSet& other) const {
    return names_ == other.names_;
  }
  bool operator!=(const VariableSet& other) const { return !(*this == other); }

 private:
  std::vector<std::string> names_;
};

using VariableSetPtr = std::shared_ptr<const VariableSet>;

// Returns true when both pointers refer to compatible variable sets (same
// object or equal name lists).
bool SameVariables(const VariableSetPtr& a, const VariableSetPtr& b);

// A power product of the ambient variables, stored as one exponent per
// variable.
class Monomial {
 public:
  Monomial() = default;
  explicit Monomial(std::vector<int> exponents);

  static Monomial Constant(int num_vars);
  static Monomial Single(int num_vars, int var, int power = 1);

  int num_vars() const { return static_cast<int>(exponents_.size()); }
  int degree(int var) const { return exponents_.at(var); }
  const std::vector<int>& exponents() const { return exponents_; }
  int total_degree() const;

  Monomial operator*(const Monomial& other) const;
  double Evaluate(const Eigen::Ref<const Eigen::VectorXd>& point) const;

  bool operator==(const Monomial& other) const {
    return exponents_ == other.exponents_;
  }
  bool operator!=(const Monomial& other) const { return !(*this == other); }

 private:
  std::vector<int> exponents_;
};

// Graded lexicographic order: lower total degree first; within a degree,
// higher power on earlier variables first, so that for two variables the
// basis enumerates {1, x1, x2, x1^2, x1*x2, x2^2}.
struct GradedLexLess {
  bool operator()(const Monomial& a, const Monomial& b) const;
};

// Options for monomial-basis generation.
struct BasisOptions {
  int min_degree{0};
  bool even_only{false};
};

// All monomials over `num_vars` variables with min_degree <= total degree <=
// max_degree, in graded lexicographic order.
std::vector<Monomial> MonomialBasis(int num_vars, int max_degree,
                                    const BasisOptions& options = {});

// Sparse multivariate polynomial with real coefficients. Immutable value
// type; every arithmetic result drops coefficients below the pruning
// tolerance so cancellation noise cannot accumulate.
class Polynomial {
 public:
  static constexpr double kCoefficientTolerance = 1e-12;

  // Zero polynomial with no ambient variables; adopts the other operand's
  // variable set on first arithmetic use.
  Polynomial() = default;

  // Zero polynomial over `vars`.
  explicit Polynomial(VariableSetPtr vars);

  Polynomial(VariableSetPtr vars, std::map<Monomial, double, GradedLexLess> terms);

  static Polynomial Constant(VariableSetPtr vars, double value);
  static Polynomial Variable(VariableSetPtr vars, int index);
  // Monomial with coefficient 1.
  static Polynomial FromMonomial(VariableSetPtr vars, const Monomial& m);

  const VariableSetPtr& variables() const { return vars_; }
  int num_vars() const { return vars_ ? vars_->size() : 0; }
  const std::map<Monomial, double, GradedLexLess>& terms() const {
    return terms_;
  }
  int num_terms() const { return static_cast<int>(terms_.size()); }
  bool IsZero() const { return terms_.empty(); }
  // True when the polynomial is a constant (including zero).
  bool IsConstant() const;
  int TotalDegree() const;
  double Coefficient(const Monomial& m) const;
  double ConstantTerm() const;
  double MaxAbsCoefficient() const;

  Polynomial operator-() const;
  Polynomial& operator+=(const Polynomial& other);
  Polynomial& operator-=(const Polynomial& other);
  Polynomial& operator*=(const Polynomial& other);
  Polynomial& operator+=(double c);
  Polynomial& operator-=(double c);
  Polynomial& operator*=(double c);
  Polynomial& operator/=(double c);

  double Evaluate(const Eigen::Ref<const Eigen::VectorXd>& point) const;
  Polynomial Differentiate(int var) const;

  bool operator==(const Polynomial& other) const;
  bool operator!=(const Polynomial& other) const { return !(*this == other); }
  // Max absolute coefficient difference.
  double CoefficientDistance(const Polynomial& other) const;

 private:
  void Prune();
  // Adopts `other`'s variable set when this polynomial is an unbound
  // constant; throws on a genuine mismatch.
  void AlignVariables(const Polynomial& other);

  VariableSetPtr vars_;
  std::map<Monomial, double, GradedLexLess> terms_;
};

Polynomial operator+(Polynomial a, const Polynomial& b);
Polynomial operator-(Polynomial a, const Polynomial& b);
Polynomial operator*(const Polynomial& a, const Polynomial& b);
Polynomial operator+(Polynomial a, double c);
Polynomial operator+(double c, Polynomial a);
Polynomial operator-(Polynomial a, double c);
Polynomial operator-(double c, const Polynomial& a);
Polynomial operator*(Polynomial a, double c);
Polynomial operator*(double c, Polynomial a);
Polynomial operator/(Polynomial a, double c);

Polynomial pow(const Polynomial& base, int exponent);

using PolyVector = Eigen::Matrix<Polynomial, Eigen::Dynamic, 1>;
using PolyRowVector = Eigen::Matrix<Polynomial, 1, Eigen::Dynamic>;
using PolyMatrix = Eigen::Matrix<Polynomial, Eigen::Dynamic, Eigen::Dynamic>;

// Row vector [dp/dx1, ..., dp/dxn].
PolyRowVector Gradient(const Polynomial& p);

// Directional derivative dV/dx . field. `field` must have one entry per
// ambient variable.
Polynomial LieDerivative(const Polynomial& V, const PolyVector& field);

Eigen::VectorXd EvaluateVector(const PolyVector& polys,
                               const Eigen::Ref<const Eigen::VectorXd>& point);
Eigen::MatrixXd EvaluateMatrix(const PolyMatrix& polys,
                               const Eigen::Ref<const Eigen::VectorXd>& point);

// Human-readable expression such as "1.5*x1^2*x2 - 0.3", highest-degree
// terms first. Round-trips through ParsePolynomial.
std::string ToExpressionString(const Polynomial& p);

// Parses expressions made of +, -, *, ^, parentheses-free products of
// numeric literals and variable powers. Throws std::invalid_argument with a
// character position on malformed input.
Polynomial ParsePolynomial(const std::string& text, const VariableSetPtr& vars);

// x1^2 + ... + xn^2 over `vars`.
Polynomial SquaredNorm(const VariableSetPtr& vars);

}  // namespace sosctrl

namespace Eigen {

template <>
struct NumTraits<sosctrl::Polynomial> : GenericNumTraits<sosctrl::Polynomial> {
  using Real = sosctrl::Polynomial;
  using NonInteger = sosctrl::Polynomial;
  using Nested = sosctrl::Polynomial;
  using Literal = double;

  enum {
    IsComplex = 0,
    IsInteger = 0,
    IsSigned = 1,
    RequireInitialization = 1,
    ReadCost = 1,
    AddCost = 4,
    MulCost = 16,
  };

  static int digits10() { return 0; }
};

}  // namespace Eigen
