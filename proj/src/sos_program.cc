#include "sosctrl/sos_program.h"

#include <algorithm>
#include <cmath>
#include <utility>

#include <Eigen/Dense>

#include "sosctrl/common.h"

namespace sosctrl {
namespace {

constexpr double kPrune = Polynomial::kCoefficientTolerance;

void AddScaled(std::map<int, double>* into, const std::map<int, double>& from,
               double weight) {
  for (const auto& [k, v] : from) (*into)[k] += weight * v;
}

void AddScaled(std::map<GramEntry, double>* into,
               const std::map<GramEntry, double>& from, double weight) {
  for (const auto& [k, v] : from) (*into)[k] += weight * v;
}

}  // namespace

LinearExpr& LinearExpr::operator+=(const LinearExpr& other) {
  constant_ += other.constant_;
  AddScaled(&coeffs_, other.coeffs_, 1.0);
  return *this;
}

LinearExpr& LinearExpr::operator-=(const LinearExpr& other) {
  constant_ -= other.constant_;
  AddScaled(&coeffs_, other.coeffs_, -1.0);
  return *this;
}

LinearExpr& LinearExpr::operator*=(double c) {
  constant_ *= c;
  for (auto& [k, v] : coeffs_) v *= c;
  return *this;
}

LinearExpr operator+(LinearExpr a, const LinearExpr& b) { return a += b; }
LinearExpr operator-(LinearExpr a, const LinearExpr& b) { return a -= b; }
LinearExpr operator-(const LinearExpr& a) {
  LinearExpr r = a;
  return r *= -1.0;
}
LinearExpr operator*(double c, LinearExpr a) { return a *= c; }
LinearExpr operator*(LinearExpr a, double c) { return a *= c; }

void CoefExpr::Add(const CoefExpr& other, double weight) {
  constant += weight * other.constant;
  AddScaled(&scalars, other.scalars, weight);
  AddScaled(&grams, other.grams, weight);
}

AffinePolynomial::AffinePolynomial(const Polynomial& fixed)
    : vars_(fixed.variables()) {
  for (const auto& [m, c] : fixed.terms()) {
    CoefExpr ce;
    ce.constant = c;
    terms_.emplace(m, std::move(ce));
  }
}

void AffinePolynomial::Align(const AffinePolynomial& other) {
  if (vars_ == nullptr) {
    vars_ = other.vars_;
  } else if (other.vars_ != nullptr) {
    SOSCTRL_REQUIRE(SameVariables(vars_, other.vars_),
                    "affine polynomials are over different variable sets");
  }
}

AffinePolynomial& AffinePolynomial::operator+=(const AffinePolynomial& other) {
  Align(other);
  for (const auto& [m, ce] : other.terms_) terms_[m].Add(ce, 1.0);
  return *this;
}

AffinePolynomial& AffinePolynomial::operator-=(const AffinePolynomial& other) {
  Align(other);
  for (const auto& [m, ce] : other.terms_) terms_[m].Add(ce, -1.0);
  return *this;
}

AffinePolynomial& AffinePolynomial::operator*=(double c) {
  for (auto& [m, ce] : terms_) {
    CoefExpr scaled;
    scaled.Add(ce, c);
    ce = std::move(scaled);
  }
  return *this;
}

LinearExpr AffinePolynomial::EvaluateIndeterminates(
    const Eigen::Ref<const Eigen::VectorXd>& point) const {
  LinearExpr out;
  for (const auto& [m, ce] : terms_) {
    const double mv = m.Evaluate(point);
    if (mv == 0.0) continue;
    LinearExpr part(mv * ce.constant);
    for (const auto& [k, v] : ce.scalars) {
      LinearExpr term = ScalarVariable{k};
      part += mv * v * term;
    }
    SOSCTRL_REQUIRE(ce.grams.empty(),
                    "EvaluateIndeterminates does not support gram terms");
    out += part;
  }
  return out;
}

void AffinePolynomial::AddTerm(const Monomial& m, const CoefExpr& coef) {
  terms_[m].Add(coef, 1.0);
}

void AffinePolynomial::SetVariables(const VariableSetPtr& vars) {
  vars_ = vars;
}

AffinePolynomial operator+(AffinePolynomial a, const AffinePolynomial& b) {
  return a += b;
}
AffinePolynomial operator-(AffinePolynomial a, const AffinePolynomial& b) {
  return a -= b;
}
AffinePolynomial operator-(const AffinePolynomial& a) {
  AffinePolynomial r = a;
  return r *= -1.0;
}
AffinePolynomial operator*(double c, AffinePolynomial a) { return a *= c; }

AffinePolynomial operator*(const AffinePolynomial& a, const Polynomial& b) {
  AffinePolynomial out;
  if (a.variables() != nullptr) {
    out.SetVariables(a.variables());
    if (b.variables() != nullptr) {
      SOSCTRL_REQUIRE(SameVariables(a.variables(), b.variables()),
                      "product factors are over different variable sets");
    }
  } else {
    out.SetVariables(b.variables());
  }
  for (const auto& [ma, ce] : a.terms()) {
    for (const auto& [mb, cb] : b.terms()) {
      CoefExpr scaled;
      scaled.Add(ce, cb);
      out.AddTerm(ma * mb, scaled);
    }
  }
  return out;
}

AffinePolynomial operator*(const Polynomial& a, const AffinePolynomial& b) {
  return b * a;
}

AffinePolynomial operator*(const LinearExpr& e, const Polynomial& p) {
  AffinePolynomial out;
  out.SetVariables(p.variables());
  for (const auto& [m, c] : p.terms()) {
    CoefExpr ce;
    ce.constant = e.constant() * c;
    for (const auto& [k, v] : e.coeffs()) ce.scalars[k] = v * c;
    out.AddTerm(m, ce);
  }
  return out;
}

double SosSolveResult::Value(const LinearExpr& e) const {
  double v = e.constant();
  for (const auto& [k, c] : e.coeffs()) v += c * scalar_values(k);
  return v;
}

Polynomial SosSolveResult::Realize(const AffinePolynomial& p) const {
  std::map<Monomial, double, GradedLexLess> terms;
  for (const auto& [m, ce] : p.terms()) {
    double v = ce.constant;
    for (const auto& [k, c] : ce.scalars) v += c * scalar_values(k);
    for (const auto& [key, c] : ce.grams) {
      const auto& [g, i, j] = key;
      const Eigen::MatrixXd& S = gram_values.at(g);
      v += c * (i == j ? S(i, i) : 2.0 * S(i, j));
    }
    if (std::abs(v) > kPrune) terms.emplace(m, v);
  }
  return Polynomial(p.variables(), std::move(terms));
}

ScalarVariable SosProgram::NewScalar(const std::string& name) {
  scalar_names_.push_back(name);
  return ScalarVariable{static_cast<int>(scalar_names_.size()) - 1};
}

std::vector<ScalarVariable> SosProgram::NewScalars(int count,
                                                   const std::string& prefix) {
  std::vector<ScalarVariable> vars;
  vars.reserve(count);
  for (int i = 0; i < count; ++i) {
    vars.push_back(NewScalar(prefix + "[" + std::to_string(i) + "]"));
  }
  return vars;
}

AffinePolynomial SosProgram::NewFreePolynomial(
    const VariableSetPtr& vars, const std::vector<Monomial>& basis,
    const std::string& name) {
  SOSCTRL_REQUIRE(vars != nullptr, "free polynomial needs a variable set");
  AffinePolynomial out;
  out.SetVariables(vars);
  const std::vector<ScalarVariable> coeffs =
      NewScalars(static_cast<int>(basis.size()), name);
  for (size_t i = 0; i < basis.size(); ++i) {
    CoefExpr ce;
    ce.scalars[coeffs[i].index] = 1.0;
    out.AddTerm(basis[i], ce);
  }
  return out;
}

int SosProgram::AddGram(const VariableSetPtr& vars,
                        std::vector<Monomial> basis, const std::string& name) {
  SOSCTRL_REQUIRE(!basis.empty(), "gram basis must be nonempty");
  for (const Monomial& m : basis) {
    SOSCTRL_REQUIRE(m.num_vars() == basis.front().num_vars(),
                    "gram basis monomials disagree on variable count");
  }
  grams_.push_back(GramBlock{std::move(basis), vars, name});
  return static_cast<int>(grams_.size()) - 1;
}

AffinePolynomial SosProgram::GramQuadraticForm(
    const VariableSetPtr& vars, const std::vector<Monomial>& basis,
    int gram_id) {
  AffinePolynomial out;
  out.SetVariables(vars);
  const int n = static_cast<int>(basis.size());
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j) {
      CoefExpr ce;
      ce.grams[GramEntry{gram_id, i, j}] = 1.0;
      out.AddTerm(basis[i] * basis[j], ce);
    }
  }
  return out;
}

AffinePolynomial SosProgram::NewSosPolynomial(
    const VariableSetPtr& vars, const std::vector<Monomial>& gram_basis,
    const std::string& name) {
  const int id = AddGram(vars, gram_basis, name);
  return GramQuadraticForm(vars, grams_[id].basis, id);
}

void SosProgram::AddSos(const AffinePolynomial& p,
                        const std::vector<Monomial>& gram_basis) {
  const int id = AddGram(p.variables(), gram_basis, "sos_constraint");
  AffinePolynomial residual =
      GramQuadraticForm(p.variables(), grams_[id].basis, id) - p;
  poly_constraints_.push_back(PolyConstraint{std::move(residual)});
  order_.push_back(ConstraintRef{kPolyConstraint,
                                 static_cast<int>(poly_constraints_.size()) -
                                     1});
}

void SosProgram::AddSos(const AffinePolynomial& p) {
  int degree = 0;
  int num_vars = -1;
  for (const auto& [m, ce] : p.terms()) {
    degree = std::max(degree, m.total_degree());
    num_vars = m.num_vars();
  }
  SOSCTRL_REQUIRE(num_vars >= 0, "cannot infer a gram basis for an empty sum");
  AddSos(p, GramBasisFor(num_vars, degree));
}

void SosProgram::AddIdenticallyZero(const AffinePolynomial& p) {
  poly_constraints_.push_back(PolyConstraint{p});
  order_.push_back(ConstraintRef{kPolyConstraint,
                                 static_cast<int>(poly_constraints_.size()) -
                                     1});
}

void SosProgram::AddLinearEquality(const LinearExpr& e) {
  lin_constraints_.push_back(LinConstraint{e, false});
  order_.push_back(ConstraintRef{kLinConstraint,
                                 static_cast<int>(lin_constraints_.size()) -
                                     1});
}

void SosProgram::AddLinearInequality(const LinearExpr& e) {
  lin_constraints_.push_back(LinConstraint{e, true});
  order_.push_back(ConstraintRef{kLinConstraint,
                                 static_cast<int>(lin_constraints_.size()) -
                                     1});
}

void SosProgram::Minimize(const LinearExpr& objective) {
  objective_ = objective;
  objective_sense_ = 1.0;
}

void SosProgram::Maximize(const LinearExpr& objective) {
  objective_ = objective;
  objective_sense_ = -1.0;
}

AffinePolynomial SosProgram::SProcedure(
    const AffinePolynomial& expr, const std::vector<Polynomial>& domain,
    const std::vector<std::vector<Monomial>>& multiplier_bases,
    const std::string& name) {
  SOSCTRL_REQUIRE(domain.size() == multiplier_bases.size(),
                  "one multiplier basis is needed per domain polynomial");
  AffinePolynomial out = expr;
  for (size_t i = 0; i < domain.size(); ++i) {
    const AffinePolynomial sigma = NewSosPolynomial(
        expr.variables(), multiplier_bases[i],
        name + "_sigma" + std::to_string(i));
    out -= sigma * domain[i];
  }
  return out;
}

CompiledProgram SosProgram::Compile() const {
  CompiledProgram out;
  SdpProblem& sdp = out.sdp;
  for (const GramBlock& g : grams_) {
    sdp.psd_dims.push_back(static_cast<int>(g.basis.size()));
  }
  sdp.free_dim = num_scalars();
  int num_slacks = 0;
  for (const LinConstraint& lc : lin_constraints_) {
    if (lc.inequality) ++num_slacks;
  }
  sdp.nonneg_dim = num_slacks;

  std::vector<double> rhs;
  int slack_cursor = 0;
  for (size_t ci = 0; ci < order_.size(); ++ci) {
    const ConstraintRef& ref = order_[ci];
    if (ref.kind == kPolyConstraint) {
      const AffinePolynomial& p = poly_constraints_[ref.index].expr;
      for (const auto& [m, ce] : p.terms()) {
        std::vector<SdpProblem::Term> row;
        for (const auto& [key, c] : ce.grams) {
          if (std::abs(c) <= kPrune) continue;
          const auto& [g, i, j] = key;
          row.push_back(SdpProblem::Term{g, i, j, c});
        }
        for (const auto& [k, c] : ce.scalars) {
          if (std::abs(c) <= kPrune) continue;
          row.push_back(SdpProblem::Term{SdpProblem::kFreeBlock, k, k, c});
        }
        const double b = -ce.constant;
        if (row.empty() && std::abs(b) <= kPrune) continue;
        sdp.constraints.push_back(std::move(row));
        rhs.push_back(b);
        out.rows.push_back(
            CompiledProgram::RowInfo{static_cast<int>(ci), m, true});
      }
    } else {
      const LinConstraint& lc = lin_constraints_[ref.index];
      std::vector<SdpProblem::Term> row;
      for (const auto& [k, c] : lc.expr.coeffs()) {
        if (std::abs(c) <= kPrune) continue;
        row.push_back(SdpProblem::Term{SdpProblem::kFreeBlock, k, k, c});
      }
      if (lc.inequality) {
        const int s = slack_cursor++;
        row.push_back(SdpProblem::Term{SdpProblem::kNonnegBlock, s, s, -1.0});
      }
      sdp.constraints.push_back(std::move(row));
      rhs.push_back(-lc.expr.constant());
      out.rows.push_back(CompiledProgram::RowInfo{static_cast<int>(ci),
                                                  Monomial(), false});
    }
  }
  sdp.b = Eigen::Map<const Eigen::VectorXd>(rhs.data(),
                                            static_cast<int>(rhs.size()));

  if (objective_.coeffs().empty()) {
    for (int g = 0; g < num_grams(); ++g) {
      const int dim = static_cast<int>(grams_[g].basis.size());
      for (int i = 0; i < dim; ++i) sdp.AddObjectiveTerm(g, i, i, 1.0);
    }
    for (int s = 0; s < num_slacks; ++s) {
      sdp.AddObjectiveTerm(SdpProblem::kNonnegBlock, s, s, 1.0);
    }
    out.objective_offset = 0.0;
    out.objective_sense = 1.0;
    out.synthesized_objective = true;
  } else {
    for (const auto& [k, c] : objective_.coeffs()) {
      if (std::abs(c) <= kPrune) continue;
      sdp.AddObjectiveTerm(SdpProblem::kFreeBlock, k, k, objective_sense_ * c);
    }
    out.objective_offset = objective_.constant();
    out.objective_sense = objective_sense_;
  }
  sdp.Validate();
  return out;
}

SosSolveResult SosProgram::Solve(const SdpSolverSettings& settings) const {
  const CompiledProgram compiled = Compile();
  SdpSolverSettings effective = settings;
  if (compiled.synthesized_objective) {
    // The trace objective is a regularizer, not part of the feasibility
    // question being asked.  Chasing its last digits is hopeless on programs
    // whose Gram spectrahedron has an empty interior (strict complementarity
    // fails and the duality gap stalls near 1e-6), so only the feasibility
    // tolerances are kept tight; the realized certificate is what callers
    // should audit.
    effective.tol_gap = std::max(effective.tol_gap, 1e-6);
  }
  SosSolveResult result;
  result.sdp = sosctrl::Solve(compiled.sdp, effective);
  result.status = result.sdp.status;
  result.scalar_values = result.sdp.free;
  result.gram_values = result.sdp.psd;
  result.objective = compiled.synthesized_objective
                         ? 0.0
                         : compiled.objective_sense *
                                   result.sdp.primal_objective +
                               compiled.objective_offset;
  result.grams_psd = true;
  result.min_gram_eigenvalue = 0.0;
  if (result.status == SdpStatus::kOptimal) {
    for (const Eigen::MatrixXd& S : result.gram_values) {
      if (S.size() == 0) continue;
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
      const double min_eig = es.eigenvalues().minCoeff();
      const double norm2 = es.eigenvalues().cwiseAbs().maxCoeff();
      result.min_gram_eigenvalue =
          std::min(result.min_gram_eigenvalue, min_eig);
      if (min_eig < -1e-7 * (1.0 + norm2)) result.grams_psd = false;
    }
  } else {
    result.grams_psd = false;
  }
  return result;
}

std::vector<Monomial> GramBasisFor(int num_vars, int degree,
                                   const BasisOptions& options) {
  SOSCTRL_REQUIRE(degree >= 0, "gram basis degree must be nonnegative");
  return MonomialBasis(num_vars, (degree + 1) / 2, options);
}

Polynomial GramPolynomial(const VariableSetPtr& vars,
                          const std::vector<Monomial>& basis,
                          const Eigen::MatrixXd& S) {
  SOSCTRL_REQUIRE(S.rows() == static_cast<Eigen::Index>(basis.size()) &&
                      S.cols() == S.rows(),
                  "gram matrix size must match the basis");
  std::map<Monomial, double, GradedLexLess> terms;
  const int n = static_cast<int>(basis.size());
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j) {
      const double v = (i == j ? S(i, i) : 2.0 * S(i, j));
      if (v == 0.0) continue;
      terms[basis[i] * basis[j]] += v;
    }
  }
  for (auto it = terms.begin(); it != terms.end();) {
    if (std::abs(it->second) <= Polynomial::kCoefficientTolerance) {
      it = terms.erase(it);
    } else {
      ++it;
    }
  }
  return Polynomial(vars, std::move(terms));
}

}  // namespace sosctrl
