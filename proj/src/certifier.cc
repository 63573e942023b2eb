#include "sosctrl/certifier.h"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <iterator>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <utility>

#include <Eigen/Dense>

#include "json.hpp"
#include "sosctrl/common.h"
#include "sosctrl/sos_program.h"

namespace sosctrl {
namespace {

int EvenCeil(int d) { return (d % 2 == 0) ? d : d + 1; }
int EvenFloor(int d) { return d - (d % 2); }

// f(x) + g(x) * u for a fixed input vertex.
PolyVector ClosedLoopField(const PlantModel& plant, const Eigen::VectorXd& u) {
  PolyVector field = plant.f;
  for (int i = 0; i < plant.num_states(); ++i) {
    for (int k = 0; k < plant.num_inputs(); ++k) {
      field(i) += plant.g(i, k) * u(k);
    }
  }
  return field;
}

std::vector<Polynomial> DedupPolynomials(std::vector<Polynomial> polys) {
  std::vector<Polynomial> unique;
  for (auto& p : polys) {
    bool seen = false;
    for (const auto& q : unique) {
      if (q.CoefficientDistance(p) <= 1e-12) {
        seen = true;
        break;
      }
    }
    if (!seen) unique.push_back(std::move(p));
  }
  return unique;
}

// Failure-set generators of the CLF contrapositive: b_i = Vdot(x, u^i) +
// kappa * V, one per distinct input vertex.
std::vector<Polynomial> ClfGenerators(const Polynomial& V, double kappa,
                                      const PlantModel& plant) {
  std::vector<Polynomial> gens;
  gens.reserve(plant.input_vertices.cols());
  for (int j = 0; j < plant.input_vertices.cols(); ++j) {
    const PolyVector field = ClosedLoopField(plant, plant.input_vertices.col(j));
    gens.push_back(LieDerivative(V, field) + kappa * V);
  }
  return DedupPolynomials(std::move(gens));
}

// CBF failure-set generators: b_i = -(hdot(x, u^i) + kappa * h).
std::vector<Polynomial> CbfGenerators(const Polynomial& h, double kappa,
                                      const PlantModel& plant) {
  std::vector<Polynomial> gens;
  gens.reserve(plant.input_vertices.cols());
  for (int j = 0; j < plant.input_vertices.cols(); ++j) {
    const PolyVector field = ClosedLoopField(plant, plant.input_vertices.col(j));
    gens.push_back(-(LieDerivative(h, field) + kappa * h));
  }
  return DedupPolynomials(std::move(gens));
}

// Outcome of one emitted SOS program, with the audit replay of its
// certificate when the solve succeeded.
struct ProgramOutcome {
  std::string name;
  SosSolveResult result;
  std::vector<std::pair<std::string, Polynomial>> multipliers;
  double audit_residual{0.0};
};

// expr >= 0 on the equality manifold: expr - sum_l t_l * e_l is SOS with
// free multipliers t_l filling the degree budget.
ProgramOutcome SolveSosOnManifold(const std::string& name,
                                  const Polynomial& expr,
                                  const std::vector<Polynomial>& equalities,
                                  int equality_degree,
                                  const SdpSolverSettings& solver) {
  const VariableSetPtr& vars = expr.variables();
  const int n = vars->size();
  int main_deg = expr.TotalDegree();
  if (equality_degree >= 0) {
    for (const auto& e : equalities) {
      main_deg = std::max(main_deg, equality_degree + e.TotalDegree());
    }
  }
  SOSCTRL_REQUIRE(main_deg % 2 == 0,
                  "degree configuration leaves the constraint '" + name +
                      "' at odd degree " + std::to_string(main_deg));

  SosProgram prog;
  AffinePolynomial shifted(expr);
  std::vector<AffinePolynomial> eq_mults;
  for (std::size_t l = 0; l < equalities.size(); ++l) {
    const int deg = equality_degree >= 0
                        ? equality_degree
                        : main_deg - equalities[l].TotalDegree();
    if (deg < 0) continue;
    auto t = prog.NewFreePolynomial(vars, MonomialBasis(n, deg),
                                    name + "_eq_" + std::to_string(l));
    shifted -= t * equalities[l];
    eq_mults.push_back(t);
  }
  const int sigma_gram = prog.num_grams();
  prog.AddSos(shifted, GramBasisFor(n, main_deg));

  ProgramOutcome out;
  out.name = name;
  out.result = prog.Solve(solver);
  if (out.result.status == SdpStatus::kOptimal) {
    Polynomial realized = expr;
    for (std::size_t l = 0, used = 0; l < equalities.size(); ++l) {
      const int deg = equality_degree >= 0
                          ? equality_degree
                          : main_deg - equalities[l].TotalDegree();
      if (deg < 0) continue;
      const Polynomial t_hat = out.result.Realize(eq_mults[used++]);
      out.multipliers.emplace_back(name + "_eq_" + std::to_string(l), t_hat);
      realized = realized - t_hat * equalities[l];
    }
    const Polynomial sigma = GramPolynomial(
        vars, prog.gram_basis(sigma_gram), out.result.gram_values[sigma_gram]);
    out.audit_residual = (realized - sigma).MaxAbsCoefficient() /
                         std::max(1.0, realized.MaxAbsCoefficient());
  }
  return out;
}

// Level-1 derivative condition: (1 + l0) * target - sum_i l_i * b_i -
// sum_l t_l * e_l is SOS with l_i SOS.
ProgramOutcome SolveSProcedureForm(const Polynomial& target,
                                   const std::vector<Polynomial>& generators,
                                   const std::vector<Polynomial>& equalities,
                                   const CertifyOptions& options) {
  const VariableSetPtr& vars = target.variables();
  const int n = vars->size();
  const int dp = target.TotalDegree();

  int lam_deg = options.multiplier_degree;
  if (lam_deg < 0) {
    int need = 2;
    for (const auto& b : generators) {
      need = std::max(need, dp - b.TotalDegree());
    }
    lam_deg = EvenCeil(need);
  }
  SOSCTRL_REQUIRE(lam_deg % 2 == 0, "multiplier degrees must be even");

  int other_max = 0;
  for (const auto& b : generators) {
    other_max = std::max(other_max, lam_deg + b.TotalDegree());
  }
  const int lam0_deg = EvenCeil(std::max(0, other_max - dp));
  int main_deg = std::max(dp + lam0_deg, other_max);
  if (options.equality_degree >= 0) {
    for (const auto& e : equalities) {
      main_deg = std::max(main_deg,
                          options.equality_degree + e.TotalDegree());
    }
  }
  SOSCTRL_REQUIRE(main_deg % 2 == 0,
                  "degree configuration leaves the derivative constraint at "
                  "odd degree " + std::to_string(main_deg));

  SosProgram prog;
  AffinePolynomial expr(target);
  auto lam0 = prog.NewSosPolynomial(vars, GramBasisFor(n, lam0_deg),
                                    "lambda_0");
  expr += lam0 * target;
  std::vector<AffinePolynomial> lams;
  for (std::size_t i = 0; i < generators.size(); ++i) {
    auto li = prog.NewSosPolynomial(vars, GramBasisFor(n, lam_deg),
                                    "lambda_" + std::to_string(i + 1));
    expr -= li * generators[i];
    lams.push_back(li);
  }
  std::vector<AffinePolynomial> eq_mults;
  std::vector<int> eq_used;
  for (std::size_t l = 0; l < equalities.size(); ++l) {
    const int deg = options.equality_degree >= 0
                        ? options.equality_degree
                        : main_deg - equalities[l].TotalDegree();
    if (deg < 0) continue;
    auto t = prog.NewFreePolynomial(vars, MonomialBasis(n, deg),
                                    "eq_" + std::to_string(l));
    expr -= t * equalities[l];
    eq_mults.push_back(t);
    eq_used.push_back(static_cast<int>(l));
  }
  const int sigma_gram = prog.num_grams();
  prog.AddSos(expr, GramBasisFor(n, main_deg));

  ProgramOutcome out;
  out.name = "derivative";
  out.result = prog.Solve(options.solver);
  if (out.result.status == SdpStatus::kOptimal) {
    const Polynomial lam0_hat = out.result.Realize(lam0);
    out.multipliers.emplace_back("lambda_0", lam0_hat);
    Polynomial realized = target + lam0_hat * target;
    for (std::size_t i = 0; i < generators.size(); ++i) {
      const Polynomial li_hat = out.result.Realize(lams[i]);
      out.multipliers.emplace_back("lambda_" + std::to_string(i + 1), li_hat);
      realized = realized - li_hat * generators[i];
    }
    for (std::size_t j = 0; j < eq_mults.size(); ++j) {
      const Polynomial t_hat = out.result.Realize(eq_mults[j]);
      out.multipliers.emplace_back("eq_" + std::to_string(eq_used[j]), t_hat);
      realized = realized - t_hat * equalities[eq_used[j]];
    }
    const Polynomial sigma = GramPolynomial(
        vars, prog.gram_basis(sigma_gram), out.result.gram_values[sigma_gram]);
    out.audit_residual = (realized - sigma).MaxAbsCoefficient() /
                         std::max(1.0, realized.MaxAbsCoefficient());
  }
  return out;
}

std::string SubsetName(const char* stem, const std::vector<int>& subset) {
  std::ostringstream os;
  os << stem << "_{";
  for (std::size_t i = 0; i < subset.size(); ++i) {
    if (i > 0) os << ",";
    os << subset[i] + 1;
  }
  os << "}";
  return os.str();
}

// Derivative condition at truncation >= 2: the identity
//   q * target = target^(2k) + r + sum_l t_l * e_l
// with q, r combinations sum_S m_S(x) * prod_{i in S} b_i over subsets of at
// most `level` generators, m_S SOS.
ProgramOutcome SolveIdentityForm(const Polynomial& target,
                                 const std::vector<Polynomial>& generators,
                                 const std::vector<Polynomial>& equalities,
                                 const CertifyOptions& options) {
  const VariableSetPtr& vars = target.variables();
  const int n = vars->size();
  const int m = static_cast<int>(generators.size());
  const int dp = target.TotalDegree();
  const int k = options.identity_power;
  const int D = 2 * k * dp;

  SOSCTRL_REQUIRE(options.truncation_level < CertifyOptions::kFullPreorder ||
                      m <= 4,
                  "full preorder certificates are limited to 4 distinct "
                  "generators");
  const int level = std::min(options.truncation_level, m);

  // Subsets of {0..m-1} with at most `level` elements, empty set first.
  std::vector<std::vector<int>> subsets{{}};
  std::vector<int> stack;
  const std::function<void(int)> extend = [&](int start) {
    if (static_cast<int>(stack.size()) == level) return;
    for (int i = start; i < m; ++i) {
      stack.push_back(i);
      subsets.push_back(stack);
      extend(i + 1);
      stack.pop_back();
    }
  };
  extend(0);

  SosProgram prog;
  const Polynomial rhs_power = pow(target, 2 * k);
  AffinePolynomial identity = -AffinePolynomial(rhs_power);
  struct Piece {
    std::string name;
    AffinePolynomial mult;
    Polynomial factor;  // b_S * target for q pieces, b_S for r pieces
    Polynomial b_S;
    bool is_q{false};
  };
  std::vector<Piece> pieces;
  for (const auto& subset : subsets) {
    Polynomial b_S = Polynomial::Constant(vars, 1.0);
    for (int i : subset) b_S = b_S * generators[i];
    const int deg_S = b_S.TotalDegree();
    const int qd = D - dp - deg_S;
    if (qd >= 0) {
      Piece piece;
      piece.name = SubsetName("q", subset);
      piece.mult = prog.NewSosPolynomial(vars, GramBasisFor(n, EvenFloor(qd)),
                                         piece.name);
      piece.factor = b_S * target;
      piece.b_S = b_S;
      piece.is_q = true;
      identity += piece.mult * piece.factor;
      pieces.push_back(std::move(piece));
    }
    const int rd = D - deg_S;
    if (rd >= 0) {
      Piece piece;
      piece.name = SubsetName("r", subset);
      piece.mult = prog.NewSosPolynomial(vars, GramBasisFor(n, EvenFloor(rd)),
                                         piece.name);
      piece.factor = b_S;
      piece.b_S = b_S;
      identity -= piece.mult * piece.factor;
      pieces.push_back(std::move(piece));
    }
  }
  std::vector<AffinePolynomial> eq_mults;
  std::vector<int> eq_used;
  for (std::size_t l = 0; l < equalities.size(); ++l) {
    const int deg = options.equality_degree >= 0
                        ? options.equality_degree
                        : D - equalities[l].TotalDegree();
    if (deg < 0) continue;
    auto t = prog.NewFreePolynomial(vars, MonomialBasis(n, deg),
                                    "eq_" + std::to_string(l));
    identity -= t * equalities[l];
    eq_mults.push_back(t);
    eq_used.push_back(static_cast<int>(l));
  }
  prog.AddIdenticallyZero(identity);

  ProgramOutcome out;
  out.name = "derivative";
  out.result = prog.Solve(options.solver);
  if (out.result.status == SdpStatus::kOptimal) {
    Polynomial realized = -rhs_power;
    for (const auto& piece : pieces) {
      const Polynomial m_hat = out.result.Realize(piece.mult);
      out.multipliers.emplace_back(piece.name, m_hat);
      realized = piece.is_q ? realized + m_hat * piece.factor
                            : realized - m_hat * piece.factor;
    }
    for (std::size_t j = 0; j < eq_mults.size(); ++j) {
      const Polynomial t_hat = out.result.Realize(eq_mults[j]);
      out.multipliers.emplace_back("eq_" + std::to_string(eq_used[j]), t_hat);
      realized = realized - t_hat * equalities[eq_used[j]];
    }
    out.audit_residual = realized.MaxAbsCoefficient() /
                         std::max(1.0, rhs_power.MaxAbsCoefficient());
  }
  return out;
}

// Containment of one unsafe piece in {h <= 0}:
//   -(1 + phi_0) * h + sum_j phi_j * p_j - sum_l t_l * e_l is SOS.
ProgramOutcome SolveUnsafeContainment(int piece_index, const Polynomial& h,
                                      const std::vector<Polynomial>& piece,
                                      const std::vector<Polynomial>& equalities,
                                      const CertifyOptions& options) {
  const VariableSetPtr& vars = h.variables();
  const int n = vars->size();
  const int dh = h.TotalDegree();
  const std::string stem = "unsafe_" + std::to_string(piece_index);

  int phi_deg = options.unsafe_degree;
  if (phi_deg < 0) phi_deg = EvenCeil(dh);
  SOSCTRL_REQUIRE(phi_deg % 2 == 0, "multiplier degrees must be even");

  int other_max = 0;
  for (const auto& p : piece) {
    other_max = std::max(other_max, phi_deg + p.TotalDegree());
  }
  const int phi0_deg = EvenCeil(std::max(0, other_max - dh));
  int main_deg = std::max(dh + phi0_deg, other_max);
  if (options.equality_degree >= 0) {
    for (const auto& e : equalities) {
      main_deg = std::max(main_deg,
                          options.equality_degree + e.TotalDegree());
    }
  }
  SOSCTRL_REQUIRE(main_deg % 2 == 0,
                  "degree configuration leaves the containment constraint at "
                  "odd degree " + std::to_string(main_deg));

  SosProgram prog;
  AffinePolynomial expr(-h);
  auto phi0 = prog.NewSosPolynomial(vars, GramBasisFor(n, phi0_deg),
                                    stem + "_phi_0");
  expr -= phi0 * h;
  std::vector<AffinePolynomial> phis;
  for (std::size_t j = 0; j < piece.size(); ++j) {
    auto pj = prog.NewSosPolynomial(vars, GramBasisFor(n, phi_deg),
                                    stem + "_phi_" + std::to_string(j + 1));
    expr += pj * piece[j];
    phis.push_back(pj);
  }
  std::vector<AffinePolynomial> eq_mults;
  std::vector<int> eq_used;
  for (std::size_t l = 0; l < equalities.size(); ++l) {
    const int deg = options.equality_degree >= 0
                        ? options.equality_degree
                        : main_deg - equalities[l].TotalDegree();
    if (deg < 0) continue;
    auto t = prog.NewFreePolynomial(vars, MonomialBasis(n, deg),
                                    stem + "_eq_" + std::to_string(l));
    expr -= t * equalities[l];
    eq_mults.push_back(t);
    eq_used.push_back(static_cast<int>(l));
  }
  const int sigma_gram = prog.num_grams();
  prog.AddSos(expr, GramBasisFor(n, main_deg));

  ProgramOutcome out;
  out.name = stem;
  out.result = prog.Solve(options.solver);
  if (out.result.status == SdpStatus::kOptimal) {
    const Polynomial phi0_hat = out.result.Realize(phi0);
    out.multipliers.emplace_back(stem + "_phi_0", phi0_hat);
    Polynomial realized = -h - phi0_hat * h;
    for (std::size_t j = 0; j < piece.size(); ++j) {
      const Polynomial pj_hat = out.result.Realize(phis[j]);
      out.multipliers.emplace_back(stem + "_phi_" + std::to_string(j + 1),
                                   pj_hat);
      realized = realized + pj_hat * piece[j];
    }
    for (std::size_t j = 0; j < eq_mults.size(); ++j) {
      const Polynomial t_hat = out.result.Realize(eq_mults[j]);
      out.multipliers.emplace_back(stem + "_eq_" + std::to_string(eq_used[j]),
                                   t_hat);
      realized = realized - t_hat * equalities[eq_used[j]];
    }
    const Polynomial sigma = GramPolynomial(
        vars, prog.gram_basis(sigma_gram), out.result.gram_values[sigma_gram]);
    out.audit_residual = (realized - sigma).MaxAbsCoefficient() /
                         std::max(1.0, realized.MaxAbsCoefficient());
  }
  return out;
}

// Merges per-program outcomes into the report: any infeasible program
// refutes the candidate; any other non-optimal answer is inconclusive; a
// full set of optimal answers certifies, subject to the audit replay.
void CombineOutcomes(const std::vector<ProgramOutcome>& outcomes,
                     CertificateReport& report) {
  bool any_infeasible = false;
  bool all_optimal = true;
  const ProgramOutcome* deciding = &outcomes.front();
  for (const auto& out : outcomes) {
    report.solver_iterations += out.result.sdp.iterations;
    if (out.result.status == SdpStatus::kInfeasible) {
      if (!any_infeasible) deciding = &out;
      any_infeasible = true;
      report.notes += (report.notes.empty() ? "" : "; ") + out.name +
                      " condition infeasible";
    }
    if (out.result.status != SdpStatus::kOptimal) {
      all_optimal = false;
      if (!any_infeasible) deciding = &out;
    }
  }
  report.solver_status = deciding->result.status;
  report.solver_message = deciding->result.sdp.message;

  if (any_infeasible) {
    report.status = CertificateStatus::kNotCertified;
    return;
  }
  if (!all_optimal) {
    report.status = CertificateStatus::kInconclusive;
    report.notes += (report.notes.empty() ? "" : "; ");
    report.notes += "solver returned no definite answer (" +
                    ToString(deciding->result.status) + ")";
    return;
  }

  report.status = CertificateStatus::kCertified;
  report.min_gram_eigenvalue = std::numeric_limits<double>::infinity();
  for (const auto& out : outcomes) {
    for (const auto& named : out.multipliers) {
      report.multipliers.push_back(named);
    }
    report.identity_residual =
        std::max(report.identity_residual, out.audit_residual);
    report.min_gram_eigenvalue =
        std::min(report.min_gram_eigenvalue, out.result.min_gram_eigenvalue);
    if (!out.result.grams_psd || out.audit_residual > 1e-6) {
      report.status = CertificateStatus::kInconclusive;
      report.notes += (report.notes.empty() ? "" : "; ") +
                      out.name + " certificate failed the audit replay";
    }
  }
}

// Smallest t > 0 at which fn(sign * t * e_axis) crosses `level`; `above`
// selects the crossing direction. Returns fallback when none is found.
double AxisCrossing(const Polynomial& fn, int dim, int axis, double sign,
                    double level, bool above, double fallback) {
  Eigen::VectorXd x = Eigen::VectorXd::Zero(dim);
  const auto crossed = [&](double t) {
    x.setZero();
    x(axis) = sign * t;
    const double v = fn.Evaluate(x);
    return above ? v >= level : v <= level;
  };
  double t = 1.0 / 64.0;
  while (t <= 1024.0 && !crossed(t)) t *= 2.0;
  if (t > 1024.0) return fallback;
  double lo = t / 2.0, hi = t;
  if (crossed(lo)) return lo;
  for (int i = 0; i < 40; ++i) {
    const double mid = 0.5 * (lo + hi);
    (crossed(mid) ? hi : lo) = mid;
  }
  return hi;
}

struct SampleRegionSpec {
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;
  const ManifoldProjector* projector{nullptr};
  std::function<bool(const Eigen::VectorXd&)> keep;
  std::function<double(const Eigen::VectorXd&)> margin;
  // true: soundness wants margin < 1e-6 at every point (track the max);
  // false: wants margin > -1e-6 (track the min).
  bool upper_bounded{true};
};

SoundnessSample SampleRegion(const SampleRegionSpec& spec, int points) {
  SoundnessSample sample;
  sample.requested = points;
  const int dim = static_cast<int>(spec.lo.size());
  HaltonSampler halton(dim);
  const long long max_draws = 200LL * points;
  double worst = spec.upper_bounded ? -std::numeric_limits<double>::infinity()
                                    : std::numeric_limits<double>::infinity();
  for (long long draw = 0; draw < max_draws && sample.evaluated < points;
       ++draw) {
    const Eigen::VectorXd u = halton.Next();
    Eigen::VectorXd x = spec.lo + u.cwiseProduct(spec.hi - spec.lo);
    if (spec.projector != nullptr && !spec.projector->empty() &&
        !spec.projector->Project(x)) {
      continue;
    }
    if (!spec.keep(x)) continue;
    const double m = spec.margin(x);
    worst = spec.upper_bounded ? std::max(worst, m) : std::min(worst, m);
    ++sample.evaluated;
  }
  if (sample.evaluated == 0) {
    sample.worst_margin = 0.0;
    sample.passed = true;
    return sample;
  }
  sample.worst_margin = worst;
  sample.passed = spec.upper_bounded ? (worst < 1e-6) : (worst > -1e-6);
  return sample;
}

}  // namespace

std::string ToString(CertificateStatus status) {
  switch (status) {
    case CertificateStatus::kCertified:
      return "Certified";
    case CertificateStatus::kNotCertified:
      return "NotCertified";
    case CertificateStatus::kInconclusive:
      return "Inconclusive";
  }
  return "Inconclusive";
}

HaltonSampler::HaltonSampler(int dim) {
  SOSCTRL_REQUIRE(dim >= 1, "sampler dimension must be positive");
  static constexpr int kPrimes[] = {2,  3,  5,  7,  11, 13, 17, 19,
                                    23, 29, 31, 37, 41, 43, 47, 53};
  SOSCTRL_REQUIRE(dim <= static_cast<int>(std::size(kPrimes)),
                  "sampler dimension exceeds the prime table");
  bases_.assign(kPrimes, kPrimes + dim);
  index_ = 16;  // skip the strongly correlated leading points
}

Eigen::VectorXd HaltonSampler::Next() {
  Eigen::VectorXd point(bases_.size());
  for (std::size_t d = 0; d < bases_.size(); ++d) {
    const int base = bases_[d];
    double f = 1.0, r = 0.0;
    for (long long i = index_; i > 0; i /= base) {
      f /= base;
      r += f * static_cast<double>(i % base);
    }
    point(static_cast<int>(d)) = r;
  }
  ++index_;
  return point;
}

ManifoldProjector::ManifoldProjector(std::vector<Polynomial> equalities)
    : equalities_(std::move(equalities)) {
  gradients_.reserve(equalities_.size());
  for (const auto& e : equalities_) gradients_.push_back(Gradient(e));
}

bool ManifoldProjector::Project(Eigen::VectorXd& x) const {
  if (equalities_.empty()) return true;
  const int m = static_cast<int>(equalities_.size());
  const int n = static_cast<int>(x.size());
  Eigen::VectorXd residual(m);
  Eigen::MatrixXd jacobian(m, n);
  for (int iter = 0; iter < 50; ++iter) {
    for (int l = 0; l < m; ++l) {
      residual(l) = equalities_[l].Evaluate(x);
      for (int j = 0; j < n; ++j) {
        jacobian(l, j) = gradients_[l](j).Evaluate(x);
      }
    }
    if (residual.cwiseAbs().maxCoeff() <= 1e-12) return true;
    // Minimum-norm Gauss-Newton step.
    const Eigen::VectorXd step =
        jacobian.completeOrthogonalDecomposition().solve(residual);
    if (!step.allFinite()) return false;
    x -= step;
  }
  for (int l = 0; l < m; ++l) {
    if (std::abs(equalities_[l].Evaluate(x)) > 1e-10) return false;
  }
  return true;
}

SoundnessSample SampleClfSoundness(const ClfCandidate& candidate,
                                   const PlantModel& plant, int points) {
  const int n = plant.num_states();
  SampleRegionSpec spec;
  spec.lo.resize(n);
  spec.hi.resize(n);
  for (int j = 0; j < n; ++j) {
    spec.hi(j) = 1.05 * AxisCrossing(candidate.V, n, j, +1.0, candidate.rho,
                                     /*above=*/true, /*fallback=*/10.0);
    spec.lo(j) = -1.05 * AxisCrossing(candidate.V, n, j, -1.0, candidate.rho,
                                      /*above=*/true, /*fallback=*/10.0);
  }
  const ManifoldProjector projector(plant.state_equalities);
  spec.projector = &projector;
  const std::vector<Polynomial> gens =
      ClfGenerators(candidate.V, candidate.kappa, plant);
  spec.keep = [&](const Eigen::VectorXd& x) {
    return candidate.V.Evaluate(x) < candidate.rho && x.norm() > 1e-4;
  };
  spec.margin = [&](const Eigen::VectorXd& x) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& b : gens) best = std::min(best, b.Evaluate(x));
    return best;
  };
  spec.upper_bounded = true;
  return SampleRegion(spec, points);
}

SoundnessSample SampleCbfSoundness(const CbfCandidate& candidate,
                                   const PlantModel& plant, int points) {
  const int n = plant.num_states();
  SampleRegionSpec spec;
  spec.lo.resize(n);
  spec.hi.resize(n);
  for (int j = 0; j < n; ++j) {
    spec.hi(j) = 1.05 * AxisCrossing(candidate.h, n, j, +1.0,
                                     candidate.beta_minus,
                                     /*above=*/false, /*fallback=*/10.0);
    spec.lo(j) = -1.05 * AxisCrossing(candidate.h, n, j, -1.0,
                                      candidate.beta_minus,
                                      /*above=*/false, /*fallback=*/10.0);
  }
  const ManifoldProjector projector(plant.state_equalities);
  spec.projector = &projector;
  const std::vector<Polynomial> gens =
      CbfGenerators(candidate.h, candidate.kappa, plant);
  spec.keep = [&](const Eigen::VectorXd& x) {
    return candidate.h.Evaluate(x) > candidate.beta_minus;
  };
  spec.margin = [&](const Eigen::VectorXd& x) {
    // max over vertices of hdot + kappa*h, which is max of -b_i.
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& b : gens) best = std::max(best, -b.Evaluate(x));
    return best;
  };
  spec.upper_bounded = false;
  return SampleRegion(spec, points);
}

CertificateReport CertifyClf(const ClfCandidate& candidate,
                             const PlantModel& plant,
                             const CertifyOptions& options) {
  SOSCTRL_REQUIRE(candidate.kappa > 0.0, "kappa must be positive");
  SOSCTRL_REQUIRE(candidate.rho > 0.0, "rho must be positive");
  SOSCTRL_REQUIRE(candidate.epsilon > 0.0, "epsilon must be positive");
  SOSCTRL_REQUIRE(candidate.alpha >= 1, "alpha must be a positive integer");
  SOSCTRL_REQUIRE(options.truncation_level >= 1,
                  "truncation level must be at least 1");
  SOSCTRL_REQUIRE(options.identity_power >= 1,
                  "identity power must be at least 1");
  SOSCTRL_REQUIRE(SameVariables(candidate.V.variables(), plant.vars),
                  "V must be over the plant's state variables");
  SOSCTRL_REQUIRE(
      std::abs(candidate.V.Evaluate(Eigen::VectorXd::Zero(plant.num_states()))) <=
          1e-12,
      "V must vanish at the origin");

  CertificateReport report;
  report.truncation_level = options.truncation_level;
  report.identity_power = options.identity_power;
  report.epsilon = candidate.epsilon;
  report.alpha = candidate.alpha;

  const Polynomial xx = SquaredNorm(plant.vars);
  const Polynomial positivity =
      candidate.V - candidate.epsilon * pow(xx, candidate.alpha);
  const Polynomial target =
      (candidate.V - Polynomial::Constant(plant.vars, candidate.rho)) * xx;
  const std::vector<Polynomial> generators =
      ClfGenerators(candidate.V, candidate.kappa, plant);

  std::vector<ProgramOutcome> outcomes;
  outcomes.push_back(SolveSosOnManifold("positivity", positivity,
                                        plant.state_equalities,
                                        options.equality_degree,
                                        options.solver));
  outcomes.push_back(options.truncation_level == 1
                         ? SolveSProcedureForm(target, generators,
                                               plant.state_equalities, options)
                         : SolveIdentityForm(target, generators,
                                             plant.state_equalities, options));
  CombineOutcomes(outcomes, report);
  report.positivity_ok =
      outcomes.front().result.status == SdpStatus::kOptimal;

  if (report.status == CertificateStatus::kCertified &&
      options.check_soundness) {
    report.soundness =
        SampleClfSoundness(candidate, plant, options.soundness_points);
    if (!report.soundness.passed) {
      report.status = CertificateStatus::kInconclusive;
      report.notes += (report.notes.empty() ? "" : "; ");
      report.notes += "sampled soundness check failed";
    }
  }
  return report;
}

CertificateReport CertifyCbf(const CbfCandidate& candidate,
                             const PlantModel& plant,
                             const CertifyOptions& options) {
  SOSCTRL_REQUIRE(candidate.kappa > 0.0, "kappa must be positive");
  SOSCTRL_REQUIRE(candidate.beta_minus < 0.0,
                  "beta_minus must be strictly negative");
  SOSCTRL_REQUIRE(!candidate.unsafe_pieces.empty(),
                  "the unsafe region needs at least one piece");
  for (const auto& piece : candidate.unsafe_pieces) {
    SOSCTRL_REQUIRE(!piece.empty(), "unsafe pieces must be nonempty");
  }
  SOSCTRL_REQUIRE(options.truncation_level >= 1,
                  "truncation level must be at least 1");
  SOSCTRL_REQUIRE(options.identity_power >= 1,
                  "identity power must be at least 1");
  SOSCTRL_REQUIRE(SameVariables(candidate.h.variables(), plant.vars),
                  "h must be over the plant's state variables");

  CertificateReport report;
  report.truncation_level = options.truncation_level;
  report.identity_power = options.identity_power;

  const Polynomial target =
      Polynomial::Constant(plant.vars, candidate.beta_minus) - candidate.h;
  const std::vector<Polynomial> generators =
      CbfGenerators(candidate.h, candidate.kappa, plant);

  std::vector<ProgramOutcome> outcomes;
  outcomes.push_back(options.truncation_level == 1
                         ? SolveSProcedureForm(target, generators,
                                               plant.state_equalities, options)
                         : SolveIdentityForm(target, generators,
                                             plant.state_equalities, options));
  for (std::size_t i = 0; i < candidate.unsafe_pieces.size(); ++i) {
    outcomes.push_back(SolveUnsafeContainment(
        static_cast<int>(i), candidate.h, candidate.unsafe_pieces[i],
        plant.state_equalities, options));
  }
  CombineOutcomes(outcomes, report);

  if (report.status == CertificateStatus::kCertified &&
      options.check_soundness) {
    report.soundness =
        SampleCbfSoundness(candidate, plant, options.soundness_points);
    if (!report.soundness.passed) {
      report.status = CertificateStatus::kInconclusive;
      report.notes += (report.notes.empty() ? "" : "; ");
      report.notes += "sampled soundness check failed";
    }
  }
  return report;
}

BisectionResult MaximizeRho(const ClfCandidate& shape, const PlantModel& plant,
                            const CertifyOptions& options,
                            const BisectionConfig& config) {
  SOSCTRL_REQUIRE(config.rho_lo > 0.0, "rho_lo must be positive");
  SOSCTRL_REQUIRE(config.rho_hi > config.rho_lo,
                  "rho_hi must exceed rho_lo");
  SOSCTRL_REQUIRE(config.max_iterations >= 1,
                  "bisection needs at least one iteration");
  const double tolerance =
      config.tolerance > 0.0 ? config.tolerance : 1e-3 * config.rho_hi;

  BisectionResult result;
  ClfCandidate probe = shape;
  const auto certify = [&](double rho) {
    probe.rho = rho;
    CertificateReport rep = CertifyClf(probe, plant, options);
    result.probes.emplace_back(rho, rep.status);
    return rep;
  };

  CertificateReport rep_lo = certify(config.rho_lo);
  SOSCTRL_REQUIRE(rep_lo.status == CertificateStatus::kCertified,
                  "rho_lo is not certifiable");
  CertificateReport rep_hi = certify(config.rho_hi);
  if (rep_hi.status == CertificateStatus::kCertified) {
    result.rho_star = config.rho_hi;
    result.report = std::move(rep_hi);
    return result;
  }

  double lo = config.rho_lo;
  double hi = config.rho_hi;
  result.rho_star = lo;
  result.report = std::move(rep_lo);
  for (int iter = 0; iter < config.max_iterations && hi - lo > tolerance;
       ++iter) {
    const double mid = 0.5 * (lo + hi);
    CertificateReport rep = certify(mid);
    if (rep.status == CertificateStatus::kCertified) {
      lo = mid;
      result.rho_star = mid;
      result.report = std::move(rep);
    } else {
      hi = mid;
    }
  }
  return result;
}

std::string ReportToJsonText(const CertificateReport& report) {
  nlohmann::json j;
  j["status"] = ToString(report.status);
  j["truncation_level"] = report.truncation_level;
  j["identity_power"] = report.identity_power;
  j["solver"] = {{"status", ToString(report.solver_status)},
                 {"message", report.solver_message},
                 {"iterations", report.solver_iterations}};
  j["identity_residual"] = report.identity_residual;
  j["min_gram_eigenvalue"] = report.min_gram_eigenvalue;
  j["positivity_ok"] = report.positivity_ok;
  j["epsilon"] = report.epsilon;
  j["alpha"] = report.alpha;
  j["soundness"] = {{"requested", report.soundness.requested},
                    {"evaluated", report.soundness.evaluated},
                    {"worst_margin", report.soundness.worst_margin},
                    {"passed", report.soundness.passed}};
  nlohmann::json mults = nlohmann::json::array();
  for (const auto& [name, poly] : report.multipliers) {
    mults.push_back({{"name", name}, {"expression", ToExpressionString(poly)}});
  }
  j["multipliers"] = std::move(mults);
  j["notes"] = report.notes;
  return j.dump(2) + "\n";
}

}  // namespace sosctrl
