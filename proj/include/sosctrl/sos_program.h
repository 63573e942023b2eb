#pragma once

#include <map>
#include <string>
#include <tuple>
#include <vector>

#include <Eigen/Core>

#include "sosctrl/polynomial.h"
#include "sosctrl/sdp.h"

namespace sosctrl {

// Handle to a scalar decision variable of a SosProgram.
struct ScalarVariable {
  int index{-1};
};

// Affine expression c0 + sum_i c_i w_i over scalar decision variables.
class LinearExpr {
 public:
  LinearExpr() = default;
  LinearExpr(double constant) : constant_(constant) {}  // NOLINT
  LinearExpr(ScalarVariable v) { coeffs_[v.index] = 1.0; }  // NOLINT

  double constant() const { return constant_; }
  const std::map<int, double>& coeffs() const { return coeffs_; }

  LinearExpr& operator+=(const LinearExpr& other);
  LinearExpr& operator-=(const LinearExpr& other);
  LinearExpr& operator*=(double c);

 private:
  double constant_{0.0};
  std::map<int, double> coeffs_;
};

LinearExpr operator+(LinearExpr a, const LinearExpr& b);
LinearExpr operator-(LinearExpr a, const LinearExpr& b);
LinearExpr operator-(const LinearExpr& a);
LinearExpr operator*(double c, LinearExpr a);
LinearExpr operator*(LinearExpr a, double c);

// Key of one Gram-matrix entry: (gram block, row, col) with row <= col.
using GramEntry = std::tuple<int, int, int>;

// One polynomial coefficient that is affine in the program's decision
// variables. A gram coefficient c on entry (g,i,j) stands for c * S_ii on
// the diagonal and c * (S_ij + S_ji) off it, matching the symmetric-pair
// convention of SdpProblem terms.
struct CoefExpr {
  double constant{0.0};
  std::map<int, double> scalars;
  std::map<GramEntry, double> grams;

  bool IsEmpty() const { return scalars.empty() && grams.empty(); }
  void Add(const CoefExpr& other, double weight);
};

// Polynomial whose coefficients are affine in decision variables. Products
// are only defined against fixed polynomials, keeping every program linear.
class AffinePolynomial {
 public:
  AffinePolynomial() = default;
  AffinePolynomial(const Polynomial& fixed);  // NOLINT

  const VariableSetPtr& variables() const { return vars_; }
  const std::map<Monomial, CoefExpr, GradedLexLess>& terms() const {
    return terms_;
  }

  AffinePolynomial& operator+=(const AffinePolynomial& other);
  AffinePolynomial& operator-=(const AffinePolynomial& other);
  AffinePolynomial& operator*=(double c);

  // Evaluates the indeterminates at `point`, leaving an affine expression in
  // the decision variables. Gram terms must be absent unless the caller
  // accepts their diagonal-pair encoding; they are folded in exactly.
  LinearExpr EvaluateIndeterminates(
      const Eigen::Ref<const Eigen::VectorXd>& point) const;

  // Internal builders used by SosProgram.
  void AddTerm(const Monomial& m, const CoefExpr& coef);
  void SetVariables(const VariableSetPtr& vars);

 private:
  void Align(const AffinePolynomial& other);

  VariableSetPtr vars_;
  std::map<Monomial, CoefExpr, GradedLexLess> terms_;
};

AffinePolynomial operator+(AffinePolynomial a, const AffinePolynomial& b);
AffinePolynomial operator-(AffinePolynomial a, const AffinePolynomial& b);
AffinePolynomial operator-(const AffinePolynomial& a);
AffinePolynomial operator*(const AffinePolynomial& a, const Polynomial& b);
AffinePolynomial operator*(const Polynomial& a, const AffinePolynomial& b);
AffinePolynomial operator*(double c, AffinePolynomial a);
AffinePolynomial operator*(const LinearExpr& e, const Polynomial& p);

// Mapping information produced by SosProgram::Compile.
struct CompiledProgram {
  SdpProblem sdp;
  // Row provenance: owning constraint index and matched monomial (the
  // monomial is meaningful for polynomial constraints only).
  struct RowInfo {
    int constraint{-1};
    Monomial monomial;
    bool is_polynomial_row{false};
  };
  std::vector<RowInfo> rows;
  double objective_offset{0.0};
  double objective_sense{1.0};  // +1 minimize, -1 maximize
  // Pure feasibility programs are compiled with a minimum-trace objective
  // over the gram blocks and slacks. This keeps the dual strictly feasible,
  // which the homogeneous embedding needs to classify reliably, and biases
  // the recovered grams toward low rank.
  bool synthesized_objective{false};
};

// Solution of a SosProgram, with gram blocks checked against the PSD
// acceptance tolerance min_eig >= -1e-7 * (1 + ||S||_2).
struct SosSolveResult {
  SdpStatus status{SdpStatus::kSlowProgress};
  SdpSolution sdp;
  Eigen::VectorXd scalar_values;
  std::vector<Eigen::MatrixXd> gram_values;
  double objective{0.0};
  bool grams_psd{false};
  double min_gram_eigenvalue{0.0};

  double Value(ScalarVariable v) const { return scalar_values(v.index); }
  double Value(const LinearExpr& e) const;
  Polynomial Realize(const AffinePolynomial& p) const;
};

// Builds semidefinite programs from sum-of-squares and linear constraints
// over polynomial decision variables, in deterministic construction order.
class SosProgram {
 public:
  ScalarVariable NewScalar(const std::string& name);
  std::vector<ScalarVariable> NewScalars(int count, const std::string& prefix);

  // Polynomial with one fresh scalar coefficient per basis monomial.
  AffinePolynomial NewFreePolynomial(const VariableSetPtr& vars,
                                     const std::vector<Monomial>& basis,
                                     const std::string& name);

  // m(x)^T S m(x) for a fresh PSD-constrained Gram matrix S.
  AffinePolynomial NewSosPolynomial(const VariableSetPtr& vars,
                                    const std::vector<Monomial>& gram_basis,
                                    const std::string& name);

  // Constrains p to equal m^T S m for a fresh Gram matrix over `gram_basis`
  // (or over the default basis of degree ceil(deg(p)/2)).
  void AddSos(const AffinePolynomial& p,
              const std::vector<Monomial>& gram_basis);
  void AddSos(const AffinePolynomial& p);

  // Constrains every coefficient of p to vanish.
  void AddIdenticallyZero(const AffinePolynomial& p);

  void AddLinearEquality(const LinearExpr& e);    // e == 0
  void AddLinearInequality(const LinearExpr& e);  // e >= 0

  void Minimize(const LinearExpr& objective);
  void Maximize(const LinearExpr& objective);

  // expr - sum_i sigma_i * domain_i with fresh SOS multipliers sigma_i over
  // the given gram bases; the usual S-procedure combination.
  AffinePolynomial SProcedure(
      const AffinePolynomial& expr, const std::vector<Polynomial>& domain,
      const std::vector<std::vector<Monomial>>& multiplier_bases,
      const std::string& name);

  int num_scalars() const { return static_cast<int>(scalar_names_.size()); }
  int num_grams() const { return static_cast<int>(grams_.size()); }
  const std::vector<Monomial>& gram_basis(int gram) const {
    return grams_.at(gram).basis;
  }

  CompiledProgram Compile() const;
  // Compiles and solves. Programs without an explicit objective are solved
  // with a relaxed duality-gap tolerance (at least 1e-7): the synthesized
  // trace objective only regularizes the Gram matrices, so feasibility
  // tolerances are the binding ones.
  SosSolveResult Solve(const SdpSolverSettings& settings = {}) const;

 private:
  struct GramBlock {
    std::vector<Monomial> basis;
    VariableSetPtr vars;
    std::string name;
  };
  struct PolyConstraint {
    AffinePolynomial expr;  // constrained to be identically zero
  };
  struct LinConstraint {
    LinearExpr expr;
    bool inequality{false};  // expr >= 0 via a nonnegative slack
  };
  enum ConstraintKind { kPolyConstraint, kLinConstraint };
  struct ConstraintRef {
    ConstraintKind kind;
    int index;
  };

  int AddGram(const VariableSetPtr& vars, std::vector<Monomial> basis,
              const std::string& name);
  static AffinePolynomial GramQuadraticForm(const VariableSetPtr& vars,
                                            const std::vector<Monomial>& basis,
                                            int gram_id);

  std::vector<std::string> scalar_names_;
  std::vector<GramBlock> grams_;
  std::vector<PolyConstraint> poly_constraints_;
  std::vector<LinConstraint> lin_constraints_;
  std::vector<ConstraintRef> order_;
  LinearExpr objective_;
  double objective_sense_{1.0};
};

// Default gram basis covering polynomials of total degree <= degree.
std::vector<Monomial> GramBasisFor(int num_vars, int degree,
                                   const BasisOptions& options = {});

// m(x)^T S m(x) as a concrete polynomial.
Polynomial GramPolynomial(const VariableSetPtr& vars,
                          const std::vector<Monomial>& basis,
                          const Eigen::MatrixXd& S);

}  // namespace sosctrl
