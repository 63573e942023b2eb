#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SVD>

#include "sosctrl/sdp.h"

namespace sosctrl {
namespace {

constexpr double kSqrt2 = 1.4142135623730951;

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                             Eigen::RowMajor>;

int SvecSize(int n) { return n * (n + 1) / 2; }

// Cone iterate layout: the svec of each PSD block (upper triangle,
// column-major, off-diagonals scaled by sqrt(2)) followed by the
// nonnegative-orthant entries. Inner products of symmetric matrices equal
// dot products of their svecs.
struct ConeLayout {
  std::vector<int> dims;
  std::vector<int> offs;
  int lp{0};
  int lp_off{0};
  int total{0};
  int nu{0};  // barrier parameter: sum of block dims plus lp dim
};

ConeLayout MakeLayout(const std::vector<int>& dims, int lp) {
  ConeLayout lay;
  lay.dims = dims;
  lay.lp = lp;
  int off = 0;
  for (const int n : dims) {
    lay.offs.push_back(off);
    off += SvecSize(n);
    lay.nu += n;
  }
  lay.lp_off = off;
  lay.total = off + lp;
  lay.nu += lp;
  return lay;
}

void PackBlock(const Eigen::MatrixXd& M, double* out) {
  const int n = static_cast<int>(M.rows());
  int idx = 0;
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i <= j; ++i, ++idx) {
      out[idx] = (i == j) ? M(j, j) : kSqrt2 * M(i, j);
    }
  }
}

Eigen::MatrixXd UnpackBlock(const double* v, int n) {
  Eigen::MatrixXd M(n, n);
  int idx = 0;
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i <= j; ++i, ++idx) {
      if (i == j) {
        M(j, j) = v[idx];
      } else {
        M(i, j) = v[idx] / kSqrt2;
        M(j, i) = M(i, j);
      }
    }
  }
  return M;
}

std::vector<Eigen::MatrixXd> UnpackAll(const ConeLayout& lay,
                                       const Eigen::VectorXd& v) {
  std::vector<Eigen::MatrixXd> blocks;
  blocks.reserve(lay.dims.size());
  for (size_t k = 0; k < lay.dims.size(); ++k) {
    blocks.push_back(UnpackBlock(v.data() + lay.offs[k], lay.dims[k]));
  }
  return blocks;
}

Eigen::VectorXd IdentityVec(const ConeLayout& lay) {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(lay.total);
  for (size_t k = 0; k < lay.dims.size(); ++k) {
    for (int j = 0; j < lay.dims[k]; ++j) {
      v(lay.offs[k] + j * (j + 3) / 2) = 1.0;
    }
  }
  v.segment(lay.lp_off, lay.lp).setOnes();
  return v;
}

// Largest alpha with X + alpha*D >= 0, given the Cholesky factor L of X.
double MaxStepPsd(const Eigen::MatrixXd& L, const Eigen::MatrixXd& D) {
  const Eigen::MatrixXd M1 = L.triangularView<Eigen::Lower>().solve(D);
  const Eigen::MatrixXd S =
      L.triangularView<Eigen::Lower>().solve(M1.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S, Eigen::EigenvaluesOnly);
  const double lmin = es.eigenvalues().minCoeff();
  if (lmin >= -1e-14) return std::numeric_limits<double>::infinity();
  return -1.0 / lmin;
}

struct BlockScaling {
  // Nesterov-Todd scaling per PSD block: W = G G^T with G^{-1} X G^{-T}
  // = G^T Z G = diag(omega).
  std::vector<Eigen::MatrixXd> G, Ginv, Lx, Lz;
  std::vector<Eigen::VectorXd> omega;
  Eigen::VectorXd wlp;       // LP scaling W = diag(sqrt(x/z))
  Eigen::VectorXd omega_lp;  // sqrt(x.*z)
  bool ok{true};
  std::string error;
};

Eigen::MatrixXd JitteredCholesky(Eigen::MatrixXd M, bool* ok) {
  const int n = static_cast<int>(M.rows());
  double jitter = 1e-14 * (1.0 + std::abs(M.trace()) / std::max(1, n));
  for (int attempt = 0; attempt < 4; ++attempt) {
    Eigen::LLT<Eigen::MatrixXd> llt(M);
    if (llt.info() == Eigen::Success) {
      *ok = true;
      return llt.matrixL();
    }
    M += jitter * Eigen::MatrixXd::Identity(n, n);
    jitter *= 1e3;
  }
  *ok = false;
  return Eigen::MatrixXd::Identity(n, n);
}

BlockScaling ComputeScaling(const ConeLayout& lay, const Eigen::VectorXd& x,
                            const Eigen::VectorXd& z) {
  BlockScaling s;
  const std::vector<Eigen::MatrixXd> X = UnpackAll(lay, x);
  const std::vector<Eigen::MatrixXd> Z = UnpackAll(lay, z);
  // Pairs without strict complementarity underflow their singular values;
  // clamp them a few orders below the live pairs (omega^2 ~ mu) so they stay
  // negligible in the gap without making the scaling numerically singular.
  const double mu_xz = x.dot(z) / std::max(1, lay.nu);
  const double omega_floor = 1e-4 * std::sqrt(std::max(mu_xz, 0.0));
  for (size_t k = 0; k < lay.dims.size(); ++k) {
    bool ok = true;
    const Eigen::MatrixXd L = JitteredCholesky(X[k], &ok);
    if (!ok) {
      s.ok = false;
      s.error = "primal block factorization failed";
      return s;
    }
    const Eigen::MatrixXd R = JitteredCholesky(Z[k], &ok);
    if (!ok) {
      s.ok = false;
      s.error = "dual block factorization failed";
      return s;
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(
        R.transpose() * L, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Eigen::VectorXd sigma = svd.singularValues();
    if (!(sigma.maxCoeff() > 0.0)) {
      s.ok = false;
      s.error = "scaling became singular";
      return s;
    }
    if (omega_floor > 0.0) sigma = sigma.cwiseMax(omega_floor);
    if (!(sigma.minCoeff() > 0.0)) {
      s.ok = false;
      s.error = "scaling became singular";
      return s;
    }
    const int n = lay.dims[k];
    const Eigen::MatrixXd G =
        L * svd.matrixV() * sigma.cwiseSqrt().cwiseInverse().asDiagonal();
    const Eigen::MatrixXd Linv =
        L.triangularView<Eigen::Lower>().solve(Eigen::MatrixXd::Identity(n, n));
    const Eigen::MatrixXd Ginv =
        sigma.cwiseSqrt().asDiagonal() * svd.matrixV().transpose() * Linv;
    s.G.push_back(G);
    s.Ginv.push_back(Ginv);
    s.Lx.push_back(L);
    s.Lz.push_back(R);
    s.omega.push_back(sigma);
  }
  if (lay.lp > 0) {
    const auto xl = x.segment(lay.lp_off, lay.lp).array();
    const auto zl = z.segment(lay.lp_off, lay.lp).array();
    if (xl.minCoeff() <= 0.0 || zl.minCoeff() <= 0.0) {
      s.ok = false;
      s.error = "LP iterate left the cone";
      return s;
    }
    s.wlp = (xl / zl).sqrt();
    s.omega_lp = (xl * zl).sqrt();
  } else {
    s.wlp.resize(0);
    s.omega_lp.resize(0);
  }
  return s;
}

// v -> svec(W smat(v) W) over all blocks (W = G G^T, diag(wlp) on LP part).
Eigen::VectorXd ApplyW(const ConeLayout& lay, const BlockScaling& s,
                       const Eigen::VectorXd& v) {
  Eigen::VectorXd out(lay.total);
  for (size_t k = 0; k < lay.dims.size(); ++k) {
    const Eigen::MatrixXd M = UnpackBlock(v.data() + lay.offs[k], lay.dims[k]);
    const Eigen::MatrixXd T = s.G[k].transpose() * M * s.G[k];
    const Eigen::MatrixXd R = s.G[k] * T * s.G[k].transpose();
    PackBlock(R, out.data() + lay.offs[k]);
  }
  if (lay.lp > 0) {
    out.segment(lay.lp_off, lay.lp) =
        (s.wlp.array().square() * v.segment(lay.lp_off, lay.lp).array())
            .matrix();
  }
  return out;
}

// v -> svec(G smat(v) G^T): maps a scaled-space quantity back to the
// original space.
Eigen::VectorXd ApplyGVGt(const ConeLayout& lay, const BlockScaling& s,
                          const Eigen::VectorXd& v) {
  Eigen::VectorXd out(lay.total);
  for (size_t k = 0; k < lay.dims.size(); ++k) {
    const Eigen::MatrixXd M = UnpackBlock(v.data() + lay.offs[k], lay.dims[k]);
    const Eigen::MatrixXd R = s.G[k] * M * s.G[k].transpose();
    PackBlock(R, out.data() + lay.offs[k]);
  }
  if (lay.lp > 0) {
    out.segment(lay.lp_off, lay.lp) =
        (s.wlp.array() * v.segment(lay.lp_off, lay.lp).array()).matrix();
  }
  return out;
}

// Strict cone membership, decided by an unperturbed Cholesky per block.
// Cholesky lets NaN entries through, so check finiteness explicitly.
bool StrictlyInCone(const ConeLayout& lay, const Eigen::VectorXd& v) {
  if (!v.allFinite()) return false;
  for (size_t k = 0; k < lay.dims.size(); ++k) {
    const Eigen::MatrixXd M = UnpackBlock(v.data() + lay.offs[k], lay.dims[k]);
    Eigen::LLT<Eigen::MatrixXd> llt(M);
    if (llt.info() != Eigen::Success) return false;
  }
  if (lay.lp > 0 && v.segment(lay.lp_off, lay.lp).minCoeff() <= 0.0) {
    return false;
  }
  return true;
}

double MaxStep(const ConeLayout& lay, const std::vector<Eigen::MatrixXd>& L,
               const Eigen::VectorXd& iterate, const Eigen::VectorXd& delta) {
  double alpha = std::numeric_limits<double>::infinity();
  for (size_t k = 0; k < lay.dims.size(); ++k) {
    const Eigen::MatrixXd D =
        UnpackBlock(delta.data() + lay.offs[k], lay.dims[k]);
    alpha = std::min(alpha, MaxStepPsd(L[k], D));
  }
  for (int i = 0; i < lay.lp; ++i) {
    const double d = delta(lay.lp_off + i);
    if (d < 0.0) alpha = std::min(alpha, -iterate(lay.lp_off + i) / d);
  }
  return alpha;
}

// Positive part of the largest eigenvalue over all blocks of smat(v); a
// Farkas certificate needs A*(y) <= 0, so this grades its violation.
double ConePositivePart(const ConeLayout& lay, const Eigen::VectorXd& v) {
  double worst = 0.0;
  for (size_t k = 0; k < lay.dims.size(); ++k) {
    const Eigen::MatrixXd M = UnpackBlock(v.data() + lay.offs[k], lay.dims[k]);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M,
                                                      Eigen::EigenvaluesOnly);
    worst = std::max(worst, es.eigenvalues().maxCoeff());
  }
  if (lay.lp > 0) {
    worst = std::max(worst, v.segment(lay.lp_off, lay.lp).maxCoeff());
  }
  return std::max(0.0, worst);
}

double ConeNegativePart(const ConeLayout& lay, const Eigen::VectorXd& v) {
  double worst = 0.0;
  for (size_t k = 0; k < lay.dims.size(); ++k) {
    const Eigen::MatrixXd M = UnpackBlock(v.data() + lay.offs[k], lay.dims[k]);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M,
                                                      Eigen::EigenvaluesOnly);
    worst = std::max(worst, -es.eigenvalues().minCoeff());
  }
  if (lay.lp > 0) {
    worst = std::max(worst, -v.segment(lay.lp_off, lay.lp).minCoeff());
  }
  return std::max(0.0, worst);
}

// --- presolve ---------------------------------------------------------------

struct Presolved {
  ConeLayout lay;
  Eigen::MatrixXd A;  // reduced and row/cost scaled
  Eigen::VectorXd b;
  Eigen::VectorXd c;
  double cost_scale{1.0};
  double obj_shift{0.0};
  Eigen::VectorXd row_norm;  // per reduced row, before scaling
  int nf{0};

  std::vector<int> kept;        // original constraint index per pre-QR row
  std::vector<int> kept_final;  // reduced row index -> post-QR row index

  bool eliminated_free{false};
  int free_rank{0};
  Eigen::MatrixXd Q;        // orthogonal factor over kept rows
  Eigen::MatrixXd R1;       // rank x rank upper triangular
  Eigen::MatrixXd QtA_top;  // rank x N, unscaled
  Eigen::VectorXd Qtb_top;  // rank
  Eigen::VectorXd u;        // R1^{-T} (P^T c_free).head(rank)
  Eigen::PermutationMatrix<Eigen::Dynamic> perm;
  bool has_free_ray{false};
  Eigen::VectorXd free_ray;

  bool immediate{false};
  SdpStatus immediate_status{SdpStatus::kOptimal};
  Eigen::VectorXd immediate_y;
  std::string immediate_message;
};

int SvecIndex(const ConeLayout& lay, int block, int row, int col) {
  return lay.offs[block] + row + col * (col + 1) / 2;
}

void ScatterTerms(const ConeLayout& lay,
                  const std::vector<SdpProblem::Term>& terms,
                  Eigen::VectorXd* cone, Eigen::VectorXd* free_part) {
  for (const SdpProblem::Term& term : terms) {
    if (term.block == SdpProblem::kFreeBlock) {
      (*free_part)(term.row) += term.value;
    } else if (term.block == SdpProblem::kNonnegBlock) {
      (*cone)(lay.lp_off + term.row) += term.value;
    } else if (term.row == term.col) {
      (*cone)(SvecIndex(lay, term.block, term.row, term.col)) += term.value;
    } else {
      (*cone)(SvecIndex(lay, term.block, term.row, term.col)) +=
          kSqrt2 * term.value;
    }
  }
}

Presolved BuildPresolved(const SdpProblem& problem) {
  problem.Validate();
  Presolved pre;
  pre.lay = MakeLayout(problem.psd_dims, problem.nonneg_dim);
  const int N = pre.lay.total;
  const int nf = problem.free_dim;
  const int m = problem.num_constraints();
  pre.nf = nf;

  Eigen::VectorXd c0 = Eigen::VectorXd::Zero(N);
  Eigen::VectorXd cf = Eigen::VectorXd::Zero(nf);
  ScatterTerms(pre.lay, problem.objective, &c0, &cf);

  // Assemble rows, dropping structurally empty ones. An empty row with a
  // markedly nonzero right-hand side is an immediate infeasibility.
  const double bscale = 1.0 + (m > 0 ? problem.b.cwiseAbs().maxCoeff() : 0.0);
  std::vector<int> rows;
  rows.reserve(m);
  for (int i = 0; i < m; ++i) {
    if (!problem.constraints[i].empty()) {
      rows.push_back(i);
      continue;
    }
    if (std::abs(problem.b(i)) <= 1e-12 * bscale) continue;
    pre.immediate = true;
    pre.immediate_status = SdpStatus::kInfeasible;
    pre.immediate_y = Eigen::VectorXd::Zero(m);
    pre.immediate_y(i) = 1.0 / problem.b(i);
    pre.immediate_message =
        "constraint " + std::to_string(i) + " is empty with nonzero rhs";
    return pre;
  }
  pre.kept = rows;
  const int mk = static_cast<int>(rows.size());
  Eigen::MatrixXd A0 = Eigen::MatrixXd::Zero(mk, N);
  Eigen::MatrixXd F = Eigen::MatrixXd::Zero(mk, nf);
  Eigen::VectorXd b0(mk);
  {
    Eigen::VectorXd cone_row(N), free_row(nf);
    for (int r = 0; r < mk; ++r) {
      cone_row.setZero();
      free_row.setZero();
      ScatterTerms(pre.lay, problem.constraints[rows[r]], &cone_row,
                   &free_row);
      A0.row(r) = cone_row.transpose();
      F.row(r) = free_row.transpose();
      b0(r) = problem.b(rows[r]);
    }
  }

  Eigen::MatrixXd A_red;
  Eigen::VectorXd b_red, c_red;
  if (nf > 0 && mk > 0) {
    pre.eliminated_free = true;
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(F);
    qr.setThreshold(1e-11);
    const int r = static_cast<int>(qr.rank());
    pre.free_rank = r;
    pre.perm = qr.colsPermutation();
    pre.Q = qr.householderQ() * Eigen::MatrixXd::Identity(mk, mk);
    Eigen::MatrixXd QtA = A0;
    QtA.applyOnTheLeft(qr.householderQ().transpose());
    const Eigen::VectorXd Qtb = pre.Q.transpose() * b0;
    Eigen::MatrixXd R(r, nf);
    R = qr.matrixR().topRows(r).triangularView<Eigen::Upper>();
    pre.R1 = R.leftCols(r);
    pre.QtA_top = QtA.topRows(r);
    pre.Qtb_top = Qtb.head(r);

    const Eigen::VectorXd cperm = pre.perm.transpose() * cf;
    if (r > 0) {
      pre.u = pre.R1.transpose().triangularView<Eigen::Lower>().solve(
          cperm.head(r));
    } else {
      pre.u.resize(0);
    }
    if (nf > r) {
      const Eigen::MatrixXd R2 = R.rightCols(nf - r);
      Eigen::VectorXd mismatch = -cperm.tail(nf - r);
      if (r > 0) mismatch += R2.transpose() * pre.u;
      if (mismatch.cwiseAbs().maxCoeff() >
          1e-9 * (1.0 + cf.cwiseAbs().maxCoeff())) {
        pre.has_free_ray = true;
        Eigen::VectorXd wperm = Eigen::VectorXd::Zero(nf);
        wperm.tail(nf - r) = mismatch;
        if (r > 0) {
          wperm.head(r) =
              -pre.R1.triangularView<Eigen::Upper>().solve(R2 * mismatch);
        }
        pre.free_ray = pre.perm * wperm;
      }
    }
    A_red = QtA.bottomRows(mk - r);
    b_red = Qtb.tail(mk - r);
    c_red = c0;
    if (r > 0) c_red -= pre.QtA_top.transpose() * pre.u;
    pre.obj_shift = r > 0 ? pre.u.dot(pre.Qtb_top) : 0.0;
  } else {
    if (nf > 0 && cf.size() > 0 && cf.cwiseAbs().maxCoeff() > 0.0) {
      pre.has_free_ray = true;
      pre.free_ray = -cf;
    }
    A_red = A0;
    b_red = b0;
    c_red = c0;
  }

  // Drop numerically zero reduced rows; an inconsistent one certifies
  // infeasibility through the orthogonal factor.
  const int mr = static_cast<int>(A_red.rows());
  Eigen::VectorXd norms(mr);
  double max_norm = 0.0;
  for (int i = 0; i < mr; ++i) {
    norms(i) = A_red.row(i).norm();
    max_norm = std::max(max_norm, norms(i));
  }
  std::vector<int> keep2;
  for (int i = 0; i < mr; ++i) {
    if (norms(i) > 1e-13 * (1.0 + max_norm)) {
      keep2.push_back(i);
      continue;
    }
    if (std::abs(b_red(i)) <= 1e-10 * bscale) continue;
    Eigen::VectorXd y_red = Eigen::VectorXd::Zero(mr);
    y_red(i) = 1.0 / b_red(i);
    Eigen::VectorXd y_kept;
    if (pre.eliminated_free) {
      Eigen::VectorXd stacked = Eigen::VectorXd::Zero(mk);
      stacked.tail(mk - pre.free_rank) = y_red;
      y_kept = pre.Q * stacked;
    } else {
      y_kept = y_red;
    }
    pre.immediate = true;
    pre.immediate_status = SdpStatus::kInfeasible;
    pre.immediate_y = Eigen::VectorXd::Zero(m);
    for (int rr = 0; rr < mk; ++rr) pre.immediate_y(pre.kept[rr]) = y_kept(rr);
    pre.immediate_message = "dependent constraints are inconsistent";
    return pre;
  }
  pre.kept_final = keep2;
  const int m2 = static_cast<int>(keep2.size());
  pre.A.resize(m2, N);
  pre.b.resize(m2);
  pre.row_norm.resize(m2);
  for (int i = 0; i < m2; ++i) {
    pre.row_norm(i) = norms(keep2[i]);
    pre.A.row(i) = A_red.row(keep2[i]) / pre.row_norm(i);
    pre.b(i) = b_red(keep2[i]) / pre.row_norm(i);
  }
  pre.cost_scale =
      N > 0 ? std::max(1.0, c_red.cwiseAbs().maxCoeff()) : 1.0;
  pre.c = c_red / pre.cost_scale;
  return pre;
}

// Lifts a reduced-system dual vector back over the original constraints.
// `top` supplies the first free_rank coordinates in the rotated basis: the
// fixed multipliers for optimal points, zero for homogeneous certificates.
Eigen::VectorXd LiftDual(const Presolved& pre, int num_original,
                         const Eigen::VectorXd& y_solved,
                         const Eigen::VectorXd& top) {
  const int mk = static_cast<int>(pre.kept.size());
  const int mr = pre.eliminated_free ? mk - pre.free_rank : mk;
  Eigen::VectorXd y_red = Eigen::VectorXd::Zero(mr);
  for (size_t i = 0; i < pre.kept_final.size(); ++i) {
    y_red(pre.kept_final[i]) = y_solved(static_cast<int>(i));
  }
  Eigen::VectorXd y_kept;
  if (pre.eliminated_free) {
    Eigen::VectorXd stacked(mk);
    stacked.head(pre.free_rank) = top;
    stacked.tail(mr) = y_red;
    y_kept = pre.Q * stacked;
  } else {
    y_kept = y_red;
  }
  Eigen::VectorXd y = Eigen::VectorXd::Zero(num_original);
  for (int r = 0; r < mk; ++r) y(pre.kept[r]) = y_kept(r);
  return y;
}

Eigen::VectorXd RecoverFree(const Presolved& pre, const Eigen::VectorXd& xhat,
                            bool homogeneous) {
  if (pre.nf == 0) return Eigen::VectorXd::Zero(0);
  if (!pre.eliminated_free) return Eigen::VectorXd::Zero(pre.nf);
  const int r = pre.free_rank;
  Eigen::VectorXd wperm = Eigen::VectorXd::Zero(pre.nf);
  if (r > 0) {
    Eigen::VectorXd rhs = -(pre.QtA_top * xhat);
    if (!homogeneous) rhs += pre.Qtb_top;
    wperm.head(r) = pre.R1.triangularView<Eigen::Upper>().solve(rhs);
  }
  return pre.perm * wperm;
}

// --- interior-point core ----------------------------------------------------

struct IpmOutcome {
  SdpStatus status{SdpStatus::kSlowProgress};
  Eigen::VectorXd x, y, z;
  double tau{1.0}, kappa{1.0};
  int iterations{0};
  std::string message;
};

struct Direction {
  Eigen::VectorXd dx, dy, dz;
  double dtau{0.0}, dkappa{0.0};
};

IpmOutcome RunIpm(const ConeLayout& lay, const RowMat& A,
                  const Eigen::VectorXd& b, const Eigen::VectorXd& c,
                  const SdpSolverSettings& settings, double obj_scale,
                  double obj_shift) {
  const int m = static_cast<int>(A.rows());
  const int N = lay.total;
  IpmOutcome out;
  out.x = IdentityVec(lay);
  out.z = IdentityVec(lay);
  out.y = Eigen::VectorXd::Zero(m);
  out.tau = 1.0;
  out.kappa = 1.0;

  const double bnorm = b.norm();
  const double cnorm = c.norm();
  const double mu0 = 1.0;
  int stalls = 0;

  // Factored once: A is fixed, so the minimum-norm feasibility correction
  // A^T (A A^T)^{-1} rp used by the endgame polish reuses this QR.
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> aqr(A.transpose());
  const Eigen::MatrixXd Raqr = aqr.matrixR()
                                   .topLeftCorner(m, m)
                                   .triangularView<Eigen::Upper>();

  // Track the iterate with the best scaled worst-case residual.  Degenerate
  // problems can wander after their best point: without strict
  // complementarity every Newton system is near-singular, and roundoff then
  // feeds a random walk in the equality residuals.
  IpmOutcome best = out;
  double best_merit = std::numeric_limits<double>::infinity();
  int best_iter = -1;

  // A run that stagnates is finished from the best iterate: full tolerance
  // gives Optimal, a 10x relaxation gives Optimal with a note (this is the
  // documented residual bound for the status), anything worse keeps the
  // failure status.
  auto finish = [&](SdpStatus bad, const std::string& msg) {
    const int iterations = out.iterations;
    if (best_iter >= 0) out = best;
    out.iterations = iterations;
    if (best_merit <= 10.0) {
      out.status = SdpStatus::kOptimal;
      out.message = best_merit <= 1.0 ? "" : "terminated at reduced accuracy";
    } else {
      out.status = bad;
      out.message = msg;
    }
    return out;
  };

  for (int iter = 0; iter < settings.max_iterations; ++iter) {
    out.iterations = iter + 1;
    // The embedding is homogeneous of degree one, so rescaling the whole
    // iterate is exact up to one rounding each.  Without it, tau can drift
    // small on nearly degenerate feasible problems and the tau-scaled
    // residuals then stall on an absolute-roundoff floor.  kappa < tau keeps
    // genuine infeasibility rays (kappa bounded away from zero) untouched.
    if ((out.tau < 0.5 && out.kappa < out.tau) || out.tau > 2.0) {
      const double s = 1.0 / out.tau;
      out.x *= s;
      out.y *= s;
      out.z *= s;
      out.kappa *= s;
      out.tau = 1.0;
    }
    const double mu = (out.x.dot(out.z) + out.tau * out.kappa) / (lay.nu + 1.0);

    Eigen::VectorXd rp = A * out.x - b * out.tau;
    const Eigen::VectorXd rd = -A.transpose() * out.y + c * out.tau - out.z;

    double pobj = c.dot(out.x) / out.tau;
    const double dobj = b.dot(out.y) / out.tau;
    double relp = rp.norm() / out.tau / (1.0 + bnorm);
    const double reld = rd.norm() / out.tau / (1.0 + cnorm);
    double relgap =
        std::abs(pobj - dobj) / (1.0 + std::abs(pobj) + std::abs(dobj));

    // Endgame polish.  The scaled Newton steps reinject roundoff of size
    // eps * cond(W) into the primal equalities, which can hold relp just
    // above tolerance after everything else has converged.  Projecting x
    // back onto the affine set removes it; backtrack if the full correction
    // would leave the cone interior.
    if (relp > settings.tol_feas && mu < 1e-6 * mu0) {
      Eigen::VectorXd u = aqr.colsPermutation().transpose() * rp;
      Raqr.transpose().triangularView<Eigen::Lower>().solveInPlace(u);
      Raqr.triangularView<Eigen::Upper>().solveInPlace(u);
      const Eigen::VectorXd delta =
          -A.transpose() * (aqr.colsPermutation() * u);
      for (double theta : {1.0, 0.5, 0.25}) {
        const Eigen::VectorXd xp = out.x + theta * delta;
        if (!StrictlyInCone(lay, xp)) continue;
        out.x = xp;
        rp = A * out.x - b * out.tau;
        pobj = c.dot(out.x) / out.tau;
        relp = rp.norm() / out.tau / (1.0 + bnorm);
        relgap =
            std::abs(pobj - dobj) / (1.0 + std::abs(pobj) + std::abs(dobj));
        break;
      }
    }

    const double merit =
        std::max({relp / settings.tol_feas, reld / settings.tol_feas,
                  relgap / settings.tol_gap});
    if (merit < 0.999 * best_merit) {
      best_merit = merit;
      best = out;
      best_iter = iter;
    }
    if (iter >= 30 && iter - best_iter >= 20) {
      return finish(SdpStatus::kSlowProgress,
                    "no residual progress over 20 iterations");
    }

    const double rg = b.dot(out.y) - c.dot(out.x) - out.kappa;

    if (settings.iteration_callback) {
      SdpIterationStats stats;
      stats.iteration = iter;
      stats.mu = mu;
      stats.tau = out.tau;
      stats.kappa = out.kappa;
      stats.primal_objective = obj_scale * pobj + obj_shift;
      stats.dual_objective = obj_scale * dobj + obj_shift;
      stats.primal_residual = relp;
      stats.dual_residual = reld;
      settings.iteration_callback(stats);
    }
    if (settings.verbose) {
      std::printf("iter %3d  mu %9.2e  tau %8.2e  kap %8.2e  rp %8.2e  "
                  "rd %8.2e  gap %8.2e\n",
                  iter, mu, out.tau, out.kappa, relp, reld, relgap);
    }

    if (relp <= settings.tol_feas && reld <= settings.tol_feas &&
        relgap <= settings.tol_gap) {
      out.status = SdpStatus::kOptimal;
      return out;
    }

    // Homogeneous certificates: a dual ray with b.y > 0 and A*(y) <= 0
    // proves primal infeasibility; a primal ray with <C,X> < 0 and A(X) = 0
    // proves unboundedness.  Certificates only exist in the kappa-dominant
    // limit of the embedding; on feasible problems without interior the
    // iterates also develop tiny mu and enormous y, so a kappa > tau gate
    // and an absolute violation bound are both required to avoid declaring
    // a boundary-feasible problem infeasible.
    const double bty = b.dot(out.y);
    const double ctx = c.dot(out.x);
    const bool late = out.tau < 1e-3 || mu < 1e-5 * mu0;
    const bool ray_regime = out.kappa > out.tau;
    if (late && ray_regime && bty > 0.0) {
      // Gauge the violation on the ray normalized to unit improvement;
      // measuring it against ||A'y|| would let a ray with massive internal
      // cancellation slip through.
      const Eigen::VectorXd yc = out.y / bty;
      const double viol = ConePositivePart(lay, A.transpose() * yc);
      if (settings.verbose) {
        std::printf("    RAYTEST tau %8.2e kappa %8.2e bty %8.2e viol %8.2e "
                    "ycmax %8.2e\n",
                    out.tau, out.kappa, bty, viol, yc.cwiseAbs().maxCoeff());
      }
      if (viol <= 1e2 * settings.tol_feas) {
        out.status = SdpStatus::kInfeasible;
        out.message = "dual improving ray found";
        return out;
      }
    }
    if (late && ray_regime && ctx < 0.0) {
      const Eigen::VectorXd xc = out.x / (-ctx);
      const double viol = (A * xc).cwiseAbs().maxCoeff();
      if (viol <= 1e2 * settings.tol_feas) {
        out.status = SdpStatus::kUnbounded;
        out.message = "primal improving ray found";
        return out;
      }
    }
    if (mu < 1e-14 * mu0 && out.tau < 1e-10) {
      return finish(SdpStatus::kSlowProgress,
                    "embedding converged without a definite classification");
    }
    if (mu <= 0.0) {
      // Roundoff pushed the iterate out of the cone; no further Newton step
      // is trustworthy.
      return finish(SdpStatus::kSlowProgress,
                    "complementarity lost to roundoff");
    }

    const BlockScaling sc = ComputeScaling(lay, out.x, out.z);
    if (!sc.ok) {
      return finish(SdpStatus::kSlowProgress, sc.error);
    }
    if (settings.verbose) {
      for (size_t k = 0; k < lay.dims.size(); ++k) {
        std::printf("    blk %zu  omega [%9.2e, %9.2e]\n", k,
                    sc.omega[k].minCoeff(), sc.omega[k].maxCoeff());
      }
    }

    // Schur complement in the Nesterov-Todd scaling: M_ij = <A_i, W A_j W>
    // formed as Tm Tm^T with Tm rows svec(G^T A_i G).
    RowMat Tm(m, N);
    {
      Eigen::VectorXd row(N);
      for (int i = 0; i < m; ++i) {
        for (size_t k = 0; k < lay.dims.size(); ++k) {
          const Eigen::MatrixXd Ak =
              UnpackBlock(A.row(i).data() + lay.offs[k], lay.dims[k]);
          const Eigen::MatrixXd S = sc.G[k].transpose() * Ak * sc.G[k];
          PackBlock(S, row.data() + lay.offs[k]);
        }
        if (lay.lp > 0) {
          row.segment(lay.lp_off, lay.lp) =
              (sc.wlp.array() *
               A.row(i).segment(lay.lp_off, lay.lp).transpose().array())
                  .matrix();
        }
        Tm.row(i) = row.transpose();
      }
    }
    Eigen::MatrixXd M = Tm * Tm.transpose();
    // Factor without regularization first; a diagonal shift larger than
    // lambda_min(M) would cap the accuracy of iterative refinement right
    // when the endgame needs it.
    Eigen::LDLT<Eigen::MatrixXd> ldlt(M);
    if (ldlt.info() != Eigen::Success) {
      double reg = 1e-14 * std::max(1.0, M.diagonal().maxCoeff());
      for (int attempt = 0; attempt < 4; ++attempt) {
        ldlt.compute(M + reg * Eigen::MatrixXd::Identity(m, m));
        if (ldlt.info() == Eigen::Success) break;
        reg *= 1e4;
      }
    }
    if (ldlt.info() != Eigen::Success) {
      return finish(SdpStatus::kSlowProgress,
                    "Schur complement factorization failed");
    }

    // Refine against the unregularized matrix: the normal equations shed
    // digits exactly when mu is small, and the diagonal shift perturbs the
    // ill-conditioned directions the most.
    auto solve_schur = [&](const Eigen::VectorXd& r) -> Eigen::VectorXd {
      Eigen::VectorXd v = ldlt.solve(r);
      for (int round = 0; round < 2; ++round) {
        const Eigen::VectorXd res = r - M * v;
        v += ldlt.solve(res);
      }
      return v;
    };

    const Eigen::VectorXd wcw = ApplyW(lay, sc, c);
    const Eigen::VectorXd uc = A * wcw;
    const Eigen::VectorXd vb = solve_schur(b);
    const Eigen::VectorXd vu = solve_schur(uc);
    const Eigen::VectorXd wq = vb + vu;
    const double cww = c.dot(wcw);
    // In exact arithmetic the dtau denominator is b'M^{-1}b plus the
    // complement of a W-metric projection plus kappa/tau, all nonnegative.
    // Evaluate the three terms separately so cancellation cannot flip the
    // sign and blow up the direction.
    const double denom = std::max(0.0, b.dot(vb)) +
                         std::max(0.0, cww - uc.dot(vu)) +
                         out.kappa / out.tau;

    auto newton = [&](const Eigen::VectorXd& dvec, double rtk,
                      double eta) -> Direction {
      Direction dir;
      const Eigen::VectorXd gd = ApplyGVGt(lay, sc, dvec);
      const Eigen::VectorXd wrdw = ApplyW(lay, sc, rd);
      const Eigen::VectorXd r1 = -eta * rp - A * gd + eta * (A * wrdw);
      const double r2 = -eta * rg + c.dot(gd) - eta * wcw.dot(rd);
      const Eigen::VectorXd v = solve_schur(r1);
      const double num = r2 - (b - uc).dot(v) + rtk / out.tau;
      dir.dtau = num / denom;
      dir.dy = v + wq * dir.dtau;
      dir.dz = -A.transpose() * dir.dy + c * dir.dtau + eta * rd;
      dir.dx = gd - ApplyW(lay, sc, dir.dz);
      dir.dkappa = (rtk - out.kappa * dir.dtau) / out.tau;
      return dir;
    };

    auto max_step = [&](const Direction& dir) -> double {
      double alpha = MaxStep(lay, sc.Lx, out.x, dir.dx);
      alpha = std::min(alpha, MaxStep(lay, sc.Lz, out.z, dir.dz));
      if (dir.dtau < 0.0) alpha = std::min(alpha, -out.tau / dir.dtau);
      if (dir.dkappa < 0.0) alpha = std::min(alpha, -out.kappa / dir.dkappa);
      return alpha;
    };

    // Predictor: the scaled complementarity target is -omega.
    Eigen::VectorXd daff = Eigen::VectorXd::Zero(N);
    for (size_t k = 0; k < lay.dims.size(); ++k) {
      for (int j = 0; j < lay.dims[k]; ++j) {
        daff(lay.offs[k] + j * (j + 3) / 2) = -sc.omega[k](j);
      }
    }
    if (lay.lp > 0) daff.segment(lay.lp_off, lay.lp) = -sc.omega_lp;
    const Direction aff = newton(daff, -out.tau * out.kappa, 1.0);
    const double alpha_aff = std::min(1.0, max_step(aff));
    const double mu_aff =
        ((out.x + alpha_aff * aff.dx).dot(out.z + alpha_aff * aff.dz) +
         (out.tau + alpha_aff * aff.dtau) *
             (out.kappa + alpha_aff * aff.dkappa)) /
        (lay.nu + 1.0);
    double sigma = std::pow(std::max(0.0, mu_aff / mu), 3.0);
    sigma = std::min(std::max(sigma, 1e-10), 1.0 - 1e-10);
    // Endgame safeguards. Once mu is small the Schur complement is already
    // badly conditioned: cap how fast mu may fall, and once the gap is below
    // threshold while feasibility is not, hold the barrier so the residuals
    // can catch up at a bounded condition number.
    if (mu < 1e-7) sigma = std::max(sigma, 0.05);
    if (relgap <= 0.5 * settings.tol_gap &&
        std::max(relp, reld) > settings.tol_feas) {
      sigma = std::max(sigma, 0.9);
    }

    // Mehrotra corrector in the scaled space.
    Eigen::VectorXd dcomb(N);
    for (size_t k = 0; k < lay.dims.size(); ++k) {
      const int n = lay.dims[k];
      const Eigen::MatrixXd dXa = UnpackBlock(aff.dx.data() + lay.offs[k], n);
      const Eigen::MatrixXd dZa = UnpackBlock(aff.dz.data() + lay.offs[k], n);
      const Eigen::MatrixXd dXt = sc.Ginv[k] * dXa * sc.Ginv[k].transpose();
      const Eigen::MatrixXd dZt = sc.G[k].transpose() * dZa * sc.G[k];
      const Eigen::MatrixXd corr = 0.5 * (dXt * dZt + dZt * dXt);
      Eigen::MatrixXd D(n, n);
      const Eigen::VectorXd& w = sc.omega[k];
      for (int jj = 0; jj < n; ++jj) {
        for (int ii = 0; ii < n; ++ii) {
          // Cap the lift of each pair at a fixed multiple of its current
          // value: pairs that converge to zero (no strict complementarity)
          // must not be chased up to sigma*mu, or the direction blows up
          // along exactly the eigenvectors that cannot move.
          const double target = std::min(sigma * mu, 1e2 * w(ii) * w(jj));
          const double rc = (ii == jj ? target - w(ii) * w(ii) : 0.0) -
                            corr(ii, jj);
          D(ii, jj) = 2.0 * rc / (w(ii) + w(jj));
        }
      }
      const Eigen::MatrixXd Dsym = 0.5 * (D + D.transpose());
      PackBlock(Dsym, dcomb.data() + lay.offs[k]);
    }
    if (lay.lp > 0) {
      const auto dxl = aff.dx.segment(lay.lp_off, lay.lp).array();
      const auto dzl = aff.dz.segment(lay.lp_off, lay.lp).array();
      const auto om = sc.omega_lp.array();
      dcomb.segment(lay.lp_off, lay.lp) =
          (((1e2 * om.square()).min(sigma * mu) - om * om - dxl * dzl) / om)
              .matrix();
    }
    const double rtk = std::min(sigma * mu, 1e2 * out.tau * out.kappa) -
                       out.tau * out.kappa - aff.dtau * aff.dkappa;
    const Direction dir = newton(dcomb, rtk, 1.0 - sigma);

    // The eigenvalue-based step bound turns unreliable near the boundary.
    // Accept a step only if the scaling stays computable at the new point;
    // without strict complementarity the scaled eigenvalue pairs legitimately
    // spread many orders around mu, so no fixed neighborhood is imposed.
    auto try_step = [&](const Direction& d) -> double {
      if (!(d.dx.allFinite() && d.dy.allFinite() && d.dz.allFinite() &&
            std::isfinite(d.dtau) && std::isfinite(d.dkappa))) {
        if (settings.verbose) std::printf("    step rejected: not finite\n");
        return 0.0;
      }
      const double alpha0 = std::min(1.0, 0.99 * max_step(d));
      double alpha = alpha0;
      std::string reason = "max_step zero";
      for (int backtrack = 0; backtrack < 30 && alpha > 0.0; ++backtrack) {
        Eigen::VectorXd xn = out.x + alpha * d.dx;
        Eigen::VectorXd zn = out.z + alpha * d.dz;
        const double taun = out.tau + alpha * d.dtau;
        const double kappan = out.kappa + alpha * d.dkappa;
        if (taun <= 0.0 || kappan <= 0.0) {
          reason = "tau/kappa";
        } else if (!StrictlyInCone(lay, xn)) {
          reason = "x cone";
        } else if (!StrictlyInCone(lay, zn)) {
          reason = "z cone";
        } else {
          const double mun = (xn.dot(zn) + taun * kappan) / (lay.nu + 1.0);
          const BlockScaling scn = ComputeScaling(lay, xn, zn);
          if (!scn.ok) {
            reason = "scaling: " + scn.error;
          } else if (mun <= 0.0) {
            reason = "mu nonpositive";
          } else {
            out.x = std::move(xn);
            out.z = std::move(zn);
            out.y += alpha * d.dy;
            out.tau = taun;
            out.kappa = kappan;
            return alpha;
          }
        }
        alpha *= 0.8;
      }
      if (settings.verbose) {
        std::printf("    step rejected  alpha0 %9.2e  last reason: %s\n",
                    alpha0, reason.c_str());
      }
      return 0.0;
    };

    double alpha = try_step(dir);
    const bool used_mehrotra = alpha >= 1e-7;
    if (alpha < 1e-7) {
      // The second-order corrector is the usual culprit near a degenerate
      // boundary; retry with plain damped-Newton directions at increasing
      // centering weight, keeping eta = 1 - sigma so the residuals still
      // shrink whenever a step goes through.
      for (double sf : {0.5, 0.9, 1.0}) {
        Eigen::VectorXd dc = Eigen::VectorXd::Zero(N);
        for (size_t k = 0; k < lay.dims.size(); ++k) {
          const int n = lay.dims[k];
          Eigen::MatrixXd D = Eigen::MatrixXd::Zero(n, n);
          for (int jj = 0; jj < n; ++jj) {
            const double w = sc.omega[k](jj);
            D(jj, jj) = (std::min(sf * mu, 1e2 * w * w) - w * w) / w;
          }
          PackBlock(D, dc.data() + lay.offs[k]);
        }
        if (lay.lp > 0) {
          const auto om = sc.omega_lp.array();
          dc.segment(lay.lp_off, lay.lp) =
              (((1e2 * om.square()).min(sf * mu) - om * om) / om).matrix();
        }
        const double tk = out.tau * out.kappa;
        const Direction dn =
            newton(dc, std::min(sf * mu, 1e2 * tk) - tk, 1.0 - sf);
        alpha = std::max(alpha, try_step(dn));
        if (alpha >= 1e-7) break;
      }
    }
    if (settings.verbose) {
      std::printf("    step alpha %9.2e  sigma %9.2e  %s\n", alpha, sigma,
                  used_mehrotra ? "mehrotra" : "ladder");
    }
    if (alpha < 1e-7) {
      if (++stalls >= 5) {
        return finish(SdpStatus::kSlowProgress, "step length collapsed");
      }
    } else {
      stalls = 0;
    }
  }
  return finish(SdpStatus::kIterationLimit, "iteration limit reached");
}

// --- packaging against the original problem ---------------------------------

double InnerProduct(const std::vector<SdpProblem::Term>& terms,
                    const std::vector<Eigen::MatrixXd>& psd,
                    const Eigen::VectorXd& nonneg,
                    const Eigen::VectorXd& free_part) {
  double total = 0.0;
  for (const SdpProblem::Term& t : terms) {
    if (t.block == SdpProblem::kFreeBlock) {
      total += t.value * free_part(t.row);
    } else if (t.block == SdpProblem::kNonnegBlock) {
      total += t.value * nonneg(t.row);
    } else if (t.row == t.col) {
      total += t.value * psd[t.block](t.row, t.col);
    } else {
      total += 2.0 * t.value * psd[t.block](t.row, t.col);
    }
  }
  return total;
}

void FillDual(const SdpProblem& problem, SdpSolution* sol) {
  sol->dual_psd = problem.DenseObjectivePsd();
  sol->dual_nonneg = problem.DenseVector(
      problem.objective, SdpProblem::kNonnegBlock, problem.nonneg_dim);
  for (int i = 0; i < problem.num_constraints(); ++i) {
    const double yi = sol->y(i);
    if (yi == 0.0) continue;
    for (const SdpProblem::Term& t : problem.constraints[i]) {
      if (t.block == SdpProblem::kFreeBlock) continue;
      if (t.block == SdpProblem::kNonnegBlock) {
        sol->dual_nonneg(t.row) -= yi * t.value;
      } else {
        sol->dual_psd[t.block](t.row, t.col) -= yi * t.value;
        if (t.row != t.col) {
          sol->dual_psd[t.block](t.col, t.row) -= yi * t.value;
        }
      }
    }
  }
}

void FillResiduals(const SdpProblem& problem, SdpSolution* sol) {
  const int m = problem.num_constraints();
  double worst = 0.0;
  for (int i = 0; i < m; ++i) {
    const double lhs = InnerProduct(problem.constraints[i], sol->psd,
                                    sol->nonneg, sol->free);
    worst = std::max(worst, std::abs(lhs - problem.b(i)));
  }
  const double bscale = 1.0 + (m > 0 ? problem.b.cwiseAbs().maxCoeff() : 0.0);
  sol->primal_residual = worst / bscale;

  double dviol = 0.0;
  for (const Eigen::MatrixXd& Zk : sol->dual_psd) {
    if (Zk.rows() == 0) continue;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Zk,
                                                      Eigen::EigenvaluesOnly);
    dviol = std::max(dviol, std::max(0.0, -es.eigenvalues().minCoeff()));
  }
  if (sol->dual_nonneg.size() > 0) {
    dviol = std::max(dviol, std::max(0.0, -sol->dual_nonneg.minCoeff()));
  }
  Eigen::VectorXd free_slack = problem.DenseVector(
      problem.objective, SdpProblem::kFreeBlock, problem.free_dim);
  for (int i = 0; i < m; ++i) {
    if (sol->y(i) == 0.0) continue;
    free_slack -= sol->y(i) * problem.DenseVector(problem.constraints[i],
                                                  SdpProblem::kFreeBlock,
                                                  problem.free_dim);
  }
  if (free_slack.size() > 0) {
    dviol = std::max(dviol, free_slack.cwiseAbs().maxCoeff());
  }
  double cmax = 0.0;
  for (const SdpProblem::Term& t : problem.objective) {
    cmax = std::max(cmax, std::abs(t.value));
  }
  sol->dual_residual = dviol / (1.0 + cmax);
}

SdpSolution PackageZero(const SdpProblem& problem) {
  SdpSolution sol;
  for (const int dim : problem.psd_dims) {
    sol.psd.push_back(Eigen::MatrixXd::Zero(dim, dim));
  }
  sol.nonneg = Eigen::VectorXd::Zero(problem.nonneg_dim);
  sol.free = Eigen::VectorXd::Zero(problem.free_dim);
  sol.y = Eigen::VectorXd::Zero(problem.num_constraints());
  return sol;
}

// Certificate quality of a Farkas ray: positive part of A*(y) over the
// cones and the magnitude of its free components.
double InfeasibilityCertificateResidual(const SdpProblem& problem,
                                        const Eigen::VectorXd& y) {
  std::vector<Eigen::MatrixXd> Ay;
  for (const int dim : problem.psd_dims) {
    Ay.push_back(Eigen::MatrixXd::Zero(dim, dim));
  }
  Eigen::VectorXd ay_nn = Eigen::VectorXd::Zero(problem.nonneg_dim);
  Eigen::VectorXd ay_free = Eigen::VectorXd::Zero(problem.free_dim);
  for (int i = 0; i < problem.num_constraints(); ++i) {
    const double yi = y(i);
    if (yi == 0.0) continue;
    for (const SdpProblem::Term& t : problem.constraints[i]) {
      if (t.block == SdpProblem::kFreeBlock) {
        ay_free(t.row) += yi * t.value;
      } else if (t.block == SdpProblem::kNonnegBlock) {
        ay_nn(t.row) += yi * t.value;
      } else {
        Ay[t.block](t.row, t.col) += yi * t.value;
        if (t.row != t.col) Ay[t.block](t.col, t.row) += yi * t.value;
      }
    }
  }
  double viol = 0.0;
  for (const Eigen::MatrixXd& Mk : Ay) {
    if (Mk.rows() == 0) continue;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Mk,
                                                      Eigen::EigenvaluesOnly);
    viol = std::max(viol, std::max(0.0, es.eigenvalues().maxCoeff()));
  }
  if (ay_nn.size() > 0) viol = std::max(viol, std::max(0.0, ay_nn.maxCoeff()));
  if (ay_free.size() > 0) viol = std::max(viol, ay_free.cwiseAbs().maxCoeff());
  return viol;
}

}  // namespace

SdpSolution Solve(const SdpProblem& problem,
                  const SdpSolverSettings& settings) {
  Presolved pre = BuildPresolved(problem);
  const int m = problem.num_constraints();

  if (pre.immediate) {
    SdpSolution sol = PackageZero(problem);
    sol.status = pre.immediate_status;
    sol.message = pre.immediate_message;
    sol.y = pre.immediate_y;
    const double bty = problem.b.dot(sol.y);
    if (bty > 0.0) sol.y /= bty;
    FillDual(problem, &sol);
    sol.dual_objective = problem.b.dot(sol.y);
    sol.certificate_residual =
        InfeasibilityCertificateResidual(problem, sol.y);
    return sol;
  }

  const int m_red = static_cast<int>(pre.A.rows());
  const int N = pre.lay.total;

  IpmOutcome ipm;
  if (m_red == 0 || N == 0) {
    // Degenerate shapes: no coupling rows or no cone variables remain.
    if (N == 0) {
      ipm.status = SdpStatus::kOptimal;
      ipm.x.resize(0);
      ipm.z.resize(0);
      ipm.y = Eigen::VectorXd::Zero(m_red);
      ipm.tau = 1.0;
    } else if (ConeNegativePart(pre.lay, pre.c) >
               1e-12 * (1.0 + pre.c.cwiseAbs().maxCoeff())) {
      // The cost has a strictly negative cone direction; the most negative
      // eigenvector provides the improving ray.
      ipm.status = SdpStatus::kUnbounded;
      Eigen::VectorXd ray = Eigen::VectorXd::Zero(N);
      const std::vector<Eigen::MatrixXd> C = UnpackAll(pre.lay, pre.c);
      double best = 0.0;
      int best_block = -1;
      int best_lp = -1;
      Eigen::VectorXd best_vec;
      for (size_t k = 0; k < C.size(); ++k) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(C[k]);
        if (es.eigenvalues().minCoeff() < best) {
          best = es.eigenvalues().minCoeff();
          best_block = static_cast<int>(k);
          best_vec = es.eigenvectors().col(0);
        }
      }
      for (int i = 0; i < pre.lay.lp; ++i) {
        if (pre.c(pre.lay.lp_off + i) < best) {
          best = pre.c(pre.lay.lp_off + i);
          best_block = -1;
          best_lp = i;
        }
      }
      if (best_lp >= 0) {
        ray(pre.lay.lp_off + best_lp) = 1.0;
      } else if (best_block >= 0) {
        PackBlock(best_vec * best_vec.transpose(),
                  ray.data() + pre.lay.offs[best_block]);
      }
      ipm.x = ray;
      ipm.z = Eigen::VectorXd::Zero(N);
      ipm.y = Eigen::VectorXd::Zero(m_red);
      ipm.tau = 0.0;
    } else {
      ipm.status = SdpStatus::kOptimal;
      ipm.x = Eigen::VectorXd::Zero(N);
      ipm.z = pre.c;
      ipm.y = Eigen::VectorXd::Zero(m_red);
      ipm.tau = 1.0;
    }
  } else {
    const RowMat Arm = pre.A;
    ipm = RunIpm(pre.lay, Arm, pre.b, pre.c, settings, pre.cost_scale,
                 pre.obj_shift);
  }

  // A strictly improving free direction turns any feasible outcome into
  // unboundedness; infeasibility still dominates.
  if (pre.has_free_ray && ipm.status != SdpStatus::kInfeasible) {
    SdpSolution sol = PackageZero(problem);
    sol.status = SdpStatus::kUnbounded;
    sol.message = "objective improves along a free direction in the "
                  "constraint kernel";
    sol.free = pre.free_ray;
    const Eigen::VectorXd cf = problem.DenseVector(
        problem.objective, SdpProblem::kFreeBlock, problem.free_dim);
    const double along = cf.dot(sol.free);
    if (along < 0.0) sol.free /= -along;
    sol.primal_objective = -1.0;
    double worst = 0.0;
    for (int i = 0; i < m; ++i) {
      const double lhs = InnerProduct(problem.constraints[i], sol.psd,
                                      sol.nonneg, sol.free);
      worst = std::max(worst, std::abs(lhs));
    }
    sol.certificate_residual = worst;
    FillDual(problem, &sol);
    sol.iterations = ipm.iterations;
    return sol;
  }

  SdpSolution sol = PackageZero(problem);
  sol.iterations = ipm.iterations;
  sol.message = ipm.message;
  sol.status = ipm.status;

  auto unscale_dual = [&](const Eigen::VectorXd& y_scaled,
                          double extra) -> Eigen::VectorXd {
    Eigen::VectorXd y = y_scaled;
    for (int i = 0; i < y.size(); ++i) y(i) *= extra / pre.row_norm(i);
    return y;
  };

  switch (ipm.status) {
    case SdpStatus::kOptimal: {
      const Eigen::VectorXd xhat = N > 0
                                       ? Eigen::VectorXd(ipm.x / ipm.tau)
                                       : Eigen::VectorXd(Eigen::VectorXd::Zero(0));
      sol.psd = UnpackAll(pre.lay, xhat);
      sol.nonneg = xhat.segment(pre.lay.lp_off, pre.lay.lp);
      sol.free = RecoverFree(pre, xhat, /*homogeneous=*/false);
      const Eigen::VectorXd y_red =
          m_red > 0 ? unscale_dual(ipm.y / ipm.tau, pre.cost_scale)
                    : Eigen::VectorXd::Zero(0);
      Eigen::VectorXd top = Eigen::VectorXd::Zero(pre.free_rank);
      if (pre.eliminated_free && pre.free_rank > 0) top = pre.u;
      sol.y = LiftDual(pre, m, y_red, top);
      FillDual(problem, &sol);
      sol.primal_objective =
          InnerProduct(problem.objective, sol.psd, sol.nonneg, sol.free);
      sol.dual_objective = problem.b.dot(sol.y);
      sol.duality_gap = sol.primal_objective - sol.dual_objective;
      FillResiduals(problem, &sol);
      sol.certificate_residual = 0.0;
      break;
    }
    case SdpStatus::kInfeasible: {
      const Eigen::VectorXd y_red = unscale_dual(ipm.y, 1.0);
      sol.y = LiftDual(pre, m, y_red, Eigen::VectorXd::Zero(pre.free_rank));
      const double bty = problem.b.dot(sol.y);
      if (bty > 0.0) sol.y /= bty;
      FillDual(problem, &sol);
      sol.dual_objective = problem.b.dot(sol.y);
      sol.certificate_residual =
          InfeasibilityCertificateResidual(problem, sol.y);
      // Never report infeasibility on the strength of a ray that does not
      // verify against the original problem data.  The bound on the ray's
      // cone violation is absolute, with the improvement normalized to one:
      // scaling it by the ray norm would accept junk rays whenever b.y is
      // small relative to y.
      if (bty <= 0.0 || sol.certificate_residual > 1e-6) {
        sol.status = SdpStatus::kSlowProgress;
        sol.message = "infeasibility certificate failed verification";
      }
      break;
    }
    case SdpStatus::kUnbounded: {
      sol.psd = UnpackAll(pre.lay, ipm.x);
      sol.nonneg = ipm.x.segment(pre.lay.lp_off, pre.lay.lp);
      sol.free = RecoverFree(pre, ipm.x, /*homogeneous=*/true);
      double along =
          InnerProduct(problem.objective, sol.psd, sol.nonneg, sol.free);
      if (along < 0.0) {
        const double scale = -1.0 / along;
        for (Eigen::MatrixXd& Xk : sol.psd) Xk *= scale;
        sol.nonneg *= scale;
        sol.free *= scale;
        along = -1.0;
      }
      sol.primal_objective = along;
      double worst = 0.0;
      for (int i = 0; i < m; ++i) {
        const double lhs = InnerProduct(problem.constraints[i], sol.psd,
                                        sol.nonneg, sol.free);
        worst = std::max(worst, std::abs(lhs));
      }
      sol.certificate_residual = worst;
      FillDual(problem, &sol);
      if (along >= 0.0 || sol.certificate_residual > 1e-6) {
        sol.status = SdpStatus::kSlowProgress;
        sol.message = "unboundedness certificate failed verification";
      }
      break;
    }
    default: {
      // Report the tau-normalized iterate for diagnostics.
      if (ipm.tau > 0.0 && ipm.x.size() == N && N > 0 && m_red > 0) {
        const Eigen::VectorXd xhat = ipm.x / ipm.tau;
        sol.psd = UnpackAll(pre.lay, xhat);
        sol.nonneg = xhat.segment(pre.lay.lp_off, pre.lay.lp);
        sol.free = RecoverFree(pre, xhat, /*homogeneous=*/false);
        const Eigen::VectorXd y_red =
            unscale_dual(ipm.y / ipm.tau, pre.cost_scale);
        Eigen::VectorXd top = Eigen::VectorXd::Zero(pre.free_rank);
        if (pre.eliminated_free && pre.free_rank > 0) top = pre.u;
        sol.y = LiftDual(pre, m, y_red, top);
        FillDual(problem, &sol);
        sol.primal_objective =
            InnerProduct(problem.objective, sol.psd, sol.nonneg, sol.free);
        sol.dual_objective = problem.b.dot(sol.y);
        sol.duality_gap = sol.primal_objective - sol.dual_objective;
        FillResiduals(problem, &sol);
      }
      break;
    }
  }
  return sol;
}

}  // namespace sosctrl
