#pragma once

#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "sosctrl/plant.h"
#include "sosctrl/polynomial.h"
#include "sosctrl/sdp.h"

namespace sosctrl {

// Control Lyapunov candidate for a plant whose goal sits at the origin:
// V(0) = 0, V dominates epsilon*(x'x)^alpha, and inside the rho sublevel set
// some admissible input should achieve Vdot <= -kappa * V.
struct ClfCandidate {
  Polynomial V;
  double rho{0.0};
  double kappa{0.1};
  double epsilon{1e-4};
  int alpha{1};
};

// Control barrier candidate: wherever h(x) > beta_minus some admissible
// input achieves hdot >= -kappa * h, and h <= 0 on every unsafe piece
// {x : p_i1(x) <= 0, ..., p_is(x) <= 0}.
struct CbfCandidate {
  Polynomial h;
  double beta_minus{-1.0};
  double kappa{0.1};
  std::vector<std::vector<Polynomial>> unsafe_pieces;
};

enum class CertificateStatus { kCertified, kNotCertified, kInconclusive };

std::string ToString(CertificateStatus status);

struct CertifyOptions {
  // Certificate family for the derivative condition. Level 1 is the
  // S-procedure form (1 + l0)*target - sum_i l_i * b_i over the failure
  // generators b_i; level 2 and up switch to the identity
  //   q * target = target^(2k) + r
  // with q, r combinations of generator products of at most `level` factors.
  // kFullPreorder takes every product (at most 4 distinct generators).
  static constexpr int kFullPreorder = 1 << 20;
  int truncation_level{1};
  // The power 2k in the identity form.
  int identity_power{1};

  // Degrees; -1 picks them from the constraint degrees (documented at the
  // certify calls). Explicit values that leave an SOS constraint with an odd
  // top degree are rejected.
  int multiplier_degree{-1};
  int unsafe_degree{-1};
  int equality_degree{-1};

  // Quasi-random spot check of every certified condition (soundness field of
  // the report); certificates that fail it are demoted to inconclusive.
  bool check_soundness{true};
  int soundness_points{10000};

  SdpSolverSettings solver;
};

// Result of the quasi-random spot check. For CLFs the margin at a sampled
// point is min over input vertices of Vdot + kappa*V, which certification
// promises to be < 1e-6 on the sublevel set; worst_margin is the largest
// sampled value. For CBFs the margin is max over vertices of
// hdot + kappa*h, promised > -1e-6 where h > beta_minus; worst_margin is the
// smallest sampled value.
struct SoundnessSample {
  int requested{0};
  int evaluated{0};
  double worst_margin{0.0};
  bool passed{true};
};

struct CertificateReport {
  CertificateStatus status{CertificateStatus::kInconclusive};
  int truncation_level{1};
  int identity_power{1};

  // Realized multiplier polynomials, named after their role ("lambda_1",
  // "q_{1,2}", "eq_0", ...).
  std::vector<std::pair<std::string, Polynomial>> multipliers;

  // Worst diagnostics over the emitted programs.
  SdpStatus solver_status{SdpStatus::kSlowProgress};
  std::string solver_message;
  int solver_iterations{0};

  // Audit replay: the certificate identity recomposed from the realized
  // multipliers and Gram matrices, as a max-abs coefficient residual. A
  // certificate only counts as Certified when this replay passes.
  double identity_residual{0.0};
  double min_gram_eigenvalue{0.0};

  // Positivity side-condition V >= epsilon*(x'x)^alpha as checked (CLF only).
  bool positivity_ok{true};
  double epsilon{0.0};
  int alpha{0};

  SoundnessSample soundness;
  std::string notes;
};

// JSON rendering of a report, multipliers spelled out as expressions.
std::string ReportToJsonText(const CertificateReport& report);

// Checks the derivative condition "Vdot(x, u^i) >= -kappa*V for every input
// vertex implies (V - rho)*x'x >= 0" together with the positivity
// side-condition, both restricted to the plant's equality manifold through
// free multipliers. Auto degrees: multipliers even_ceil(max(2,
// deg((V-rho)x'x) - deg b_i)), equality multipliers filling up to the
// constraint degree. Throws std::invalid_argument on malformed candidates
// (kappa, epsilon, rho not positive, alpha < 1, V(0) != 0) and on odd-degree
// configurations; solver non-answers surface as kInconclusive.
CertificateReport CertifyClf(const ClfCandidate& candidate,
                             const PlantModel& plant,
                             const CertifyOptions& options = {});

// Checks the derivative condition "hdot(x, u^i) <= -kappa*h for every input
// vertex implies h <= beta_minus" plus containment h <= 0 on every unsafe
// piece. Degree defaults mirror CertifyClf; unsafe-piece multipliers default
// to even_ceil(deg h).
CertificateReport CertifyCbf(const CbfCandidate& candidate,
                             const PlantModel& plant,
                             const CertifyOptions& options = {});

struct BisectionConfig {
  double rho_lo{0.0};
  double rho_hi{1.0};
  // Absolute width at which bisection stops; -1 picks 1e-3 * rho_hi.
  double tolerance{-1.0};
  int max_iterations{30};
};

struct BisectionResult {
  double rho_star{0.0};
  // Report of the certified run at rho_star.
  CertificateReport report;
  // Every probe in evaluation order.
  std::vector<std::pair<double, CertificateStatus>> probes;
};

// Largest certifiable rho in [rho_lo, rho_hi] by bisection, treating the
// certifiable set as an interval anchored at rho_lo. The candidate's own rho
// field is ignored. Throws std::invalid_argument when rho_lo itself does not
// certify. Inconclusive probes shrink the interval from above (conservative).
BisectionResult MaximizeRho(const ClfCandidate& shape, const PlantModel& plant,
                            const CertifyOptions& options,
                            const BisectionConfig& config);

// Deterministic low-discrepancy points in [0,1)^dim (radical-inverse Halton
// sequence over the first dim primes, leading entries skipped).
class HaltonSampler {
 public:
  explicit HaltonSampler(int dim);
  Eigen::VectorXd Next();

 private:
  std::vector<int> bases_;
  long long index_{0};
};

// Gauss-Newton projection onto the common zero set of `equalities`.
class ManifoldProjector {
 public:
  explicit ManifoldProjector(std::vector<Polynomial> equalities);

  bool empty() const { return equalities_.empty(); }
  // Projects x in place; false when the residual fails to reach 1e-10.
  bool Project(Eigen::VectorXd& x) const;

 private:
  std::vector<Polynomial> equalities_;
  std::vector<PolyRowVector> gradients_;
};

// Standalone soundness samplers (the certify calls run them on success).
SoundnessSample SampleClfSoundness(const ClfCandidate& candidate,
                                   const PlantModel& plant, int points);
SoundnessSample SampleCbfSoundness(const CbfCandidate& candidate,
                                   const PlantModel& plant, int points);

}  // namespace sosctrl
