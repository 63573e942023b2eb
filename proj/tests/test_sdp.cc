#include <cmath>
#include <random>
#include <vector>

#include <doctest.h>

#include <Eigen/Dense>

#include "sosctrl/sdp.h"

namespace sosctrl {
namespace {

Eigen::MatrixXd RandomOrthogonal(int n, std::mt19937* rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::MatrixXd M(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) M(i, j) = gauss(*rng);
  }
  return Eigen::HouseholderQR<Eigen::MatrixXd>(M).householderQ();
}

Eigen::MatrixXd RandomSymmetric(int n, std::mt19937* rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::MatrixXd M(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) M(i, j) = gauss(*rng);
  }
  return 0.5 * (M + M.transpose());
}

void AddDensePsdTerms(SdpProblem* problem, int constraint, int block,
                      const Eigen::MatrixXd& M) {
  for (int i = 0; i < M.rows(); ++i) {
    for (int j = i; j < M.cols(); ++j) {
      if (M(i, j) == 0.0) continue;
      if (constraint < 0) {
        problem->AddObjectiveTerm(block, i, j, M(i, j));
      } else {
        problem->AddConstraintTerm(constraint, block, i, j, M(i, j));
      }
    }
  }
}

// Builds an SDP with a known optimal pair by choosing complementary primal
// and dual solutions first and deriving the data from them.
struct ConstructedSdp {
  SdpProblem problem;
  double optimal_value{0.0};
};

ConstructedSdp BuildConstructed(int n, int m, int rank, unsigned seed,
                                int nonneg_dim, int free_dim) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> positive(0.5, 2.0);

  const Eigen::MatrixXd Q = RandomOrthogonal(n, &rng);
  Eigen::VectorXd lx = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd lz = Eigen::VectorXd::Zero(n);
  for (int i = 0; i < rank; ++i) lx(i) = positive(rng);
  for (int i = rank; i < n; ++i) lz(i) = positive(rng);
  const Eigen::MatrixXd Xstar = Q * lx.asDiagonal() * Q.transpose();
  const Eigen::MatrixXd Zstar = Q * lz.asDiagonal() * Q.transpose();

  Eigen::VectorXd xnn(nonneg_dim), znn(nonneg_dim);
  for (int i = 0; i < nonneg_dim; ++i) {
    if (i % 2 == 0) {
      xnn(i) = positive(rng);
      znn(i) = 0.0;
    } else {
      xnn(i) = 0.0;
      znn(i) = positive(rng);
    }
  }
  Eigen::VectorXd wstar(free_dim);
  for (int i = 0; i < free_dim; ++i) wstar(i) = gauss(rng);
  Eigen::VectorXd ystar(m);
  for (int i = 0; i < m; ++i) ystar(i) = gauss(rng);

  ConstructedSdp out;
  out.problem.psd_dims = {n};
  out.problem.nonneg_dim = nonneg_dim;
  out.problem.free_dim = free_dim;
  out.problem.b.resize(m);
  out.problem.constraints.resize(m);

  Eigen::MatrixXd Cpsd = Zstar;
  Eigen::VectorXd cnn = znn;
  Eigen::VectorXd cfree = Eigen::VectorXd::Zero(free_dim);
  for (int i = 0; i < m; ++i) {
    const Eigen::MatrixXd Ai = RandomSymmetric(n, &rng);
    AddDensePsdTerms(&out.problem, i, 0, Ai);
    Eigen::VectorXd ann(nonneg_dim), afree(free_dim);
    for (int k = 0; k < nonneg_dim; ++k) ann(k) = gauss(rng);
    for (int k = 0; k < free_dim; ++k) afree(k) = gauss(rng);
    for (int k = 0; k < nonneg_dim; ++k) {
      out.problem.AddConstraintTerm(i, SdpProblem::kNonnegBlock, k, k, ann(k));
    }
    for (int k = 0; k < free_dim; ++k) {
      out.problem.AddConstraintTerm(i, SdpProblem::kFreeBlock, k, k, afree(k));
    }
    out.problem.b(i) = (Ai.array() * Xstar.array()).sum() + ann.dot(xnn) +
                       afree.dot(wstar);
    Cpsd += ystar(i) * Ai;
    cnn += ystar(i) * ann;
    cfree += ystar(i) * afree;
  }
  AddDensePsdTerms(&out.problem, -1, 0, Cpsd);
  for (int k = 0; k < nonneg_dim; ++k) {
    out.problem.AddObjectiveTerm(SdpProblem::kNonnegBlock, k, k, cnn(k));
  }
  for (int k = 0; k < free_dim; ++k) {
    out.problem.AddObjectiveTerm(SdpProblem::kFreeBlock, k, k, cfree(k));
  }
  out.optimal_value = out.problem.b.dot(ystar);
  // Cross-check the construction: <C, X*> + c.w* must equal b.y*.
  const double direct = (Cpsd.array() * Xstar.array()).sum() + cnn.dot(xnn) +
                        cfree.dot(wstar);
  REQUIRE(std::abs(direct - out.optimal_value) <
          1e-8 * (1.0 + std::abs(direct)));
  return out;
}

TEST_CASE("bounded diagonal pair attains its analytic optimum") {
  // minimize x11 with x11 = x22 and x12 = 1: the optimum is the all-ones
  // rank-one matrix with objective 1.
  SdpProblem p;
  p.psd_dims = {2};
  p.AddObjectiveTerm(0, 0, 0, 1.0);
  p.AddConstraint(0.0);
  p.AddConstraintTerm(0, 0, 0, 0, 1.0);
  p.AddConstraintTerm(0, 0, 1, 1, -1.0);
  p.AddConstraint(1.0);
  p.AddConstraintTerm(1, 0, 0, 1, 0.5);
  const SdpSolution sol = Solve(p);
  REQUIRE(sol.status == SdpStatus::kOptimal);
  CHECK(std::abs(sol.primal_objective - 1.0) < 1e-6);
  CHECK(std::abs(sol.dual_objective - 1.0) < 1e-6);
  CHECK(std::abs(sol.psd[0](0, 1) - 1.0) < 1e-5);
  CHECK(sol.primal_residual < 1e-7);
  CHECK(sol.dual_residual < 1e-7);
}

TEST_CASE("trace minimization with all unit off-diagonals gives the all-ones matrix") {
  SdpProblem p;
  p.psd_dims = {3};
  for (int i = 0; i < 3; ++i) p.AddObjectiveTerm(0, i, i, 1.0);
  int c = 0;
  for (int i = 0; i < 3; ++i) {
    for (int j = i + 1; j < 3; ++j) {
      c = p.AddConstraint(1.0);
      p.AddConstraintTerm(c, 0, i, j, 0.5);
    }
  }
  const SdpSolution sol = Solve(p);
  REQUIRE(sol.status == SdpStatus::kOptimal);
  CHECK(std::abs(sol.primal_objective - 3.0) < 1e-6);
}

TEST_CASE("free variable with slack reduces to a one-sided bound") {
  // minimize x with x - s = 3, s >= 0.
  SdpProblem p;
  p.nonneg_dim = 1;
  p.free_dim = 1;
  p.AddObjectiveTerm(SdpProblem::kFreeBlock, 0, 0, 1.0);
  p.AddConstraint(3.0);
  p.AddConstraintTerm(0, SdpProblem::kFreeBlock, 0, 0, 1.0);
  p.AddConstraintTerm(0, SdpProblem::kNonnegBlock, 0, 0, -1.0);
  const SdpSolution sol = Solve(p);
  REQUIRE(sol.status == SdpStatus::kOptimal);
  CHECK(std::abs(sol.primal_objective - 3.0) < 1e-6);
  CHECK(std::abs(sol.free(0) - 3.0) < 1e-6);
  CHECK(std::abs(sol.y(0) - 1.0) < 1e-6);
}

TEST_CASE("linear program over the orthant") {
  // minimize 2a + b with a + b = 1: optimum 1 at (0, 1).
  SdpProblem p;
  p.nonneg_dim = 2;
  p.AddObjectiveTerm(SdpProblem::kNonnegBlock, 0, 0, 2.0);
  p.AddObjectiveTerm(SdpProblem::kNonnegBlock, 1, 1, 1.0);
  p.AddConstraint(1.0);
  p.AddConstraintTerm(0, SdpProblem::kNonnegBlock, 0, 0, 1.0);
  p.AddConstraintTerm(0, SdpProblem::kNonnegBlock, 1, 1, 1.0);
  const SdpSolution sol = Solve(p);
  REQUIRE(sol.status == SdpStatus::kOptimal);
  CHECK(std::abs(sol.primal_objective - 1.0) < 1e-7);
  CHECK(std::abs(sol.nonneg(1) - 1.0) < 1e-6);
}

TEST_CASE("constructed optima are recovered across random instances") {
  const struct {
    int n, m, rank, nonneg, free;
  } shapes[] = {
      {3, 3, 1, 0, 0}, {4, 6, 2, 0, 0}, {5, 8, 2, 3, 0},
      {4, 7, 3, 2, 3}, {6, 10, 3, 4, 2},
  };
  unsigned seed = 100;
  for (const auto& shape : shapes) {
    for (int rep = 0; rep < 2; ++rep) {
      const ConstructedSdp made =
          BuildConstructed(shape.n, shape.m, shape.rank, seed++, shape.nonneg,
                           shape.free);
      const SdpSolution sol = Solve(made.problem);
      INFO("seed ", seed - 1, " n ", shape.n, " m ", shape.m);
      REQUIRE(sol.status == SdpStatus::kOptimal);
      CHECK(std::abs(sol.primal_objective - made.optimal_value) <=
            1e-6 * (1.0 + std::abs(made.optimal_value)));
      CHECK(sol.primal_residual <= 1e-7);
      CHECK(sol.dual_residual <= 1e-7);
      CHECK(std::abs(sol.duality_gap) <=
            1e-6 * (1.0 + std::abs(made.optimal_value)));
    }
  }
}

TEST_CASE("weak duality holds along feasible-enough iterates") {
  const ConstructedSdp made = BuildConstructed(4, 5, 2, 42, 2, 0);
  SdpSolverSettings settings;
  int observed = 0;
  settings.iteration_callback = [&](const SdpIterationStats& stats) {
    if (stats.primal_residual < 1e-6 && stats.dual_residual < 1e-6) {
      ++observed;
      // Residuals of 1e-6 can push the gap below zero by a comparable
      // amount, so the slack is residual-commensurate rather than exact.
      const double slack =
          1e-4 * (1.0 + std::abs(stats.primal_objective) +
                  std::abs(stats.dual_objective));
      CHECK(stats.primal_objective >= stats.dual_objective - slack);
    }
  };
  const SdpSolution sol = Solve(made.problem, settings);
  REQUIRE(sol.status == SdpStatus::kOptimal);
  CHECK(observed > 0);
}

TEST_CASE("solves are deterministic") {
  const ConstructedSdp made = BuildConstructed(4, 6, 2, 7, 2, 1);
  const SdpSolution a = Solve(made.problem);
  const SdpSolution b = Solve(made.problem);
  REQUIRE(a.status == SdpStatus::kOptimal);
  REQUIRE(b.status == SdpStatus::kOptimal);
  CHECK(a.primal_objective == b.primal_objective);
  CHECK(a.iterations == b.iterations);
  CHECK((a.y - b.y).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("infeasible orthant constraint yields a Farkas certificate") {
  // a >= 0 with a = -1.
  SdpProblem p;
  p.nonneg_dim = 1;
  p.AddConstraint(-1.0);
  p.AddConstraintTerm(0, SdpProblem::kNonnegBlock, 0, 0, 1.0);
  const SdpSolution sol = Solve(p);
  REQUIRE(sol.status == SdpStatus::kInfeasible);
  CHECK(std::abs(p.b.dot(sol.y) - 1.0) < 1e-9);
  CHECK(sol.certificate_residual <= 1e-7);
}

TEST_CASE("conflicting diagonal pins are detected as infeasible") {
  // X11 = -1 for a PSD X.
  SdpProblem p;
  p.psd_dims = {2};
  p.AddConstraint(-1.0);
  p.AddConstraintTerm(0, 0, 0, 0, 1.0);
  const SdpSolution sol = Solve(p);
  REQUIRE(sol.status == SdpStatus::kInfeasible);
  CHECK(std::abs(p.b.dot(sol.y) - 1.0) < 1e-9);
  CHECK(sol.certificate_residual <= 1e-7);
}

TEST_CASE("unbounded objectives produce an improving ray") {
  // minimize -a with only b pinned: a can grow without bound.
  SdpProblem p;
  p.nonneg_dim = 2;
  p.AddObjectiveTerm(SdpProblem::kNonnegBlock, 0, 0, -1.0);
  p.AddConstraint(1.0);
  p.AddConstraintTerm(0, SdpProblem::kNonnegBlock, 1, 1, 1.0);
  const SdpSolution sol = Solve(p);
  REQUIRE(sol.status == SdpStatus::kUnbounded);
  // Ray: nonneg, annihilates the constraints, strictly improving.
  CHECK(sol.nonneg.minCoeff() >= -1e-9);
  CHECK(sol.certificate_residual <= 1e-7);
}

TEST_CASE("no constraints reduces to a cone membership check on the cost") {
  SdpProblem bounded;
  bounded.psd_dims = {2};
  bounded.AddObjectiveTerm(0, 0, 0, 1.0);
  bounded.AddObjectiveTerm(0, 1, 1, 2.0);
  const SdpSolution ok = Solve(bounded);
  REQUIRE(ok.status == SdpStatus::kOptimal);
  CHECK(ok.primal_objective == 0.0);

  SdpProblem unbounded = bounded;
  unbounded.AddObjectiveTerm(0, 0, 1, 5.0);  // indefinite cost
  const SdpSolution ray = Solve(unbounded);
  REQUIRE(ray.status == SdpStatus::kUnbounded);
}

TEST_CASE("feasibility problems return an interior point when one exists") {
  SdpProblem p;
  p.psd_dims = {2};
  p.AddConstraint(1.0);
  p.AddConstraintTerm(0, 0, 0, 0, 1.0);
  p.AddConstraint(2.0);
  p.AddConstraintTerm(1, 0, 1, 1, 1.0);
  const SdpSolution sol = Solve(p);
  REQUIRE(sol.status == SdpStatus::kOptimal);
  CHECK(std::abs(sol.psd[0](0, 0) - 1.0) < 1e-6);
  CHECK(std::abs(sol.psd[0](1, 1) - 2.0) < 1e-6);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sol.psd[0]);
  CHECK(es.eigenvalues().minCoeff() >= -1e-9);
}

TEST_CASE("SDPA text round-trips a mixed-block problem exactly") {
  const ConstructedSdp made = BuildConstructed(3, 4, 1, 77, 2, 0);
  const std::string text = ExportSdpa(made.problem);
  const SdpProblem back = ImportSdpa(text);
  REQUIRE(back.psd_dims == made.problem.psd_dims);
  REQUIRE(back.nonneg_dim == made.problem.nonneg_dim);
  REQUIRE(back.free_dim == 0);
  REQUIRE(back.num_constraints() == made.problem.num_constraints());
  for (int i = 0; i < back.num_constraints(); ++i) {
    CHECK(back.b(i) == made.problem.b(i));
    const auto lhs = made.problem.DenseConstraintPsd(i);
    const auto rhs = back.DenseConstraintPsd(i);
    CHECK((lhs[0] - rhs[0]).cwiseAbs().maxCoeff() == 0.0);
    const Eigen::VectorXd lnn = made.problem.DenseVector(
        made.problem.constraints[i], SdpProblem::kNonnegBlock, 2);
    const Eigen::VectorXd rnn =
        back.DenseVector(back.constraints[i], SdpProblem::kNonnegBlock, 2);
    CHECK((lnn - rnn).cwiseAbs().maxCoeff() == 0.0);
  }
  const auto lobj = made.problem.DenseObjectivePsd();
  const auto robj = back.DenseObjectivePsd();
  CHECK((lobj[0] - robj[0]).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("free variables export as a split diagonal block") {
  const ConstructedSdp made = BuildConstructed(3, 4, 1, 5, 1, 2);
  const std::string text = ExportSdpa(made.problem);
  const SdpProblem back = ImportSdpa(text);
  CHECK(back.free_dim == 0);
  CHECK(back.nonneg_dim == made.problem.nonneg_dim + 2 * made.problem.free_dim);
  const SdpSolution direct = Solve(made.problem);
  const SdpSolution split = Solve(back);
  REQUIRE(direct.status == SdpStatus::kOptimal);
  REQUIRE(split.status == SdpStatus::kOptimal);
  CHECK(std::abs(direct.primal_objective - split.primal_objective) <=
        1e-5 * (1.0 + std::abs(direct.primal_objective)));
}

TEST_CASE("SDPA import rejects malformed files with line numbers") {
  CHECK_THROWS_WITH_AS(ImportSdpa("1\n1\n2\n1.0\n1 1 2 1 0.5\n"),
                       doctest::Contains("line 5"), std::invalid_argument);
  CHECK_THROWS_AS(ImportSdpa("not_a_number\n"), std::invalid_argument);
  CHECK_THROWS_AS(ImportSdpa("1\n1\n2\n1.0\n1 2 1 1 0.5\n"),
                  std::invalid_argument);
  CHECK_THROWS_AS(ImportSdpa("1\n1\n0\n1.0\n"), std::invalid_argument);
  // Comments and block-list punctuation are tolerated.
  const SdpProblem ok = ImportSdpa(
      "* comment line\n\"another comment\n2\n2\n{2, -1}\n1.0, 2.0\n"
      "0 1 1 1 1.0\n1 1 1 2 0.5\n2 2 1 1 1.0\n");
  CHECK(ok.num_constraints() == 2);
  CHECK(ok.psd_dims == std::vector<int>{2});
  CHECK(ok.nonneg_dim == 1);
}

TEST_CASE("solution text import recomputes objectives and residuals") {
  // minimize x with x - s = 3: y = 1, x = 3, s = 0.
  SdpProblem p;
  p.nonneg_dim = 1;
  p.free_dim = 1;
  p.AddObjectiveTerm(SdpProblem::kFreeBlock, 0, 0, 1.0);
  p.AddConstraint(3.0);
  p.AddConstraintTerm(0, SdpProblem::kFreeBlock, 0, 0, 1.0);
  p.AddConstraintTerm(0, SdpProblem::kNonnegBlock, 0, 0, -1.0);
  const SdpSolution sol = ImportSolutionText(p, "1.0  0.0  3.0\n");
  CHECK(sol.primal_objective == doctest::Approx(3.0));
  CHECK(sol.dual_objective == doctest::Approx(3.0));
  CHECK(sol.primal_residual <= 1e-12);
  CHECK(sol.dual_residual <= 1e-12);
  CHECK_THROWS_AS(ImportSolutionText(p, "1.0 0.0"), std::invalid_argument);
  CHECK_THROWS_AS(ImportSolutionText(p, "1 0 3 9"), std::invalid_argument);
}

}  // namespace
}  // namespace sosctrl
