#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "sosctrl/common.h"

namespace sosctrl {

// Standard-form semidefinite program
//
//   minimize    sum_k <C_k, X_k> + c_nn . x_nn + c_free . x_free
//   subject to  sum_k <A_ik, X_k> + a_nn_i . x_nn + a_free_i . x_free = b_i
//               X_k  >= 0 (PSD),   x_nn >= 0,   x_free unrestricted,
//
// stored sparsely. Symmetric matrix entries are kept upper-triangle only
// (row <= col); an off-diagonal entry with value v stands for the symmetric
// pair A_rc = A_cr = v, so it contributes 2*v*X_rc to an inner product.
struct SdpProblem {
  // Block identifiers for Term::block beyond the PSD blocks.
  static constexpr int kNonnegBlock = -1;
  static constexpr int kFreeBlock = -2;

  struct Term {
    int block{0};  // 0..num_psd-1, kNonnegBlock, or kFreeBlock
    int row{0};
    int col{0};  // for diagonal blocks row == col
    double value{0.0};
  };

  std::vector<int> psd_dims;
  int nonneg_dim{0};
  int free_dim{0};

  std::vector<Term> objective;
  std::vector<std::vector<Term>> constraints;
  Eigen::VectorXd b;

  int num_psd_blocks() const { return static_cast<int>(psd_dims.size()); }
  int num_constraints() const { return static_cast<int>(constraints.size()); }

  void AddObjectiveTerm(int block, int row, int col, double value);
  void AddConstraintTerm(int constraint, int block, int row, int col,
                         double value);
  // Appends an empty constraint with right-hand side `rhs`; returns its index.
  int AddConstraint(double rhs);

  // Throws std::invalid_argument on inconsistent dimensions or indices.
  void Validate() const;

  // Dense symmetric realizations (for solvers and tests).
  std::vector<Eigen::MatrixXd> DenseObjectivePsd() const;
  std::vector<Eigen::MatrixXd> DenseConstraintPsd(int constraint) const;
  Eigen::VectorXd DenseVector(const std::vector<Term>& terms, int block,
                              int dim) const;
};

// kOptimal guarantees relative residuals (primal, dual, gap) within the
// requested tolerances, or within 10x of them when the run stalled close to
// the solution; the latter is flagged by message "terminated at reduced
// accuracy". kSlowProgress / kIterationLimit return the best iterate seen.
// kInfeasible / kUnbounded are only reported with a ray that re-verifies
// against the original problem data to certificate_residual <= 1e-6 after
// normalizing the improvement to one; runs that collapse without producing
// such a ray come back as kSlowProgress.
enum class SdpStatus {
  kOptimal,
  kInfeasible,
  kUnbounded,
  kSlowProgress,
  kIterationLimit,
};

std::string ToString(SdpStatus status);

struct SdpSolution {
  SdpStatus status{SdpStatus::kSlowProgress};

  // Primal solution (for kUnbounded these hold the improving ray).
  std::vector<Eigen::MatrixXd> psd;
  Eigen::VectorXd nonneg;
  Eigen::VectorXd free;

  // Dual solution (for kInfeasible, y holds the improving ray with b.y = 1).
  Eigen::VectorXd y;
  std::vector<Eigen::MatrixXd> dual_psd;
  Eigen::VectorXd dual_nonneg;

  double primal_objective{0.0};
  double dual_objective{0.0};
  double duality_gap{0.0};
  double primal_residual{0.0};
  double dual_residual{0.0};
  // Quality of the infeasibility / unboundedness certificate: how far the
  // ray is from exactly satisfying the Farkas conditions.
  double certificate_residual{0.0};
  int iterations{0};
  std::string message;
};

struct SdpIterationStats {
  int iteration{0};
  double mu{0.0};
  double tau{0.0};
  double kappa{0.0};
  double step_length{0.0};
  double primal_objective{0.0};
  double dual_objective{0.0};
  double primal_residual{0.0};  // relative, on the tau-normalized iterate
  double dual_residual{0.0};
};

struct SdpSolverSettings {
  double tol_gap{1e-8};
  double tol_feas{1e-8};
  int max_iterations{200};
  bool verbose{false};
  std::function<void(const SdpIterationStats&)> iteration_callback;
};

// Embedded primal-dual interior-point solver (Nesterov-Todd scaling,
// Mehrotra predictor-corrector, homogeneous self-dual embedding). Intended
// for desk-scale problems with dense blocks up to a few hundred rows.
SdpSolution Solve(const SdpProblem& problem,
                  const SdpSolverSettings& settings = {});

// --- SDPA sparse-format interop -------------------------------------------
//
// The exported file uses the standard SDPA sparse (.dat-s) convention: the
// file encodes  min c.x  s.t.  sum_i x_i F_i - F_0 >= 0  whose dual is our
// primal standard form with F_0 = -C, F_i = A_i and c = b. The free block,
// which SDPA cannot express, is exported as a +/- split into a diagonal
// block; problems with free_dim == 0 round-trip bit-exactly.
std::string ExportSdpa(const SdpProblem& problem);

// Inverse of ExportSdpa for files without free-variable splits. Diagonal
// blocks are gathered into the nonnegative-orthant block. Throws
// std::invalid_argument with a line number on malformed input; entries below
// the diagonal are rejected.
SdpProblem ImportSdpa(const std::string& text);

// Reads an externally computed solution as whitespace-separated numbers:
// first the m dual values y, then for each PSD block its upper triangle
// (row-major), then the nonnegative block, then the free block. Residuals
// and objectives are recomputed against `problem`.
SdpSolution ImportSolutionText(const SdpProblem& problem,
                               const std::string& text);

}  // namespace sosctrl
