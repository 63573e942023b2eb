#include "sosctrl/plant.h"

#include <cmath>
#include <complex>
#include <map>
#include <memory>
#include <utility>

#include <Eigen/Dense>

#include "json.hpp"
#include "sosctrl/common.h"
#include "sosctrl/sdp.h"

namespace sosctrl {

namespace {

PolyVector ZeroPolyVector(const VariableSetPtr& vars, int n) {
  PolyVector v(n);
  for (int i = 0; i < n; ++i) v(i) = Polynomial(vars);
  return v;
}

PolyMatrix ZeroPolyMatrix(const VariableSetPtr& vars, int rows, int cols) {
  PolyMatrix m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = Polynomial(vars);
  return m;
}

}  // namespace

Eigen::VectorXd PlantModel::Dynamics(
    const Eigen::Ref<const Eigen::VectorXd>& x,
    const Eigen::Ref<const Eigen::VectorXd>& u) const {
  SOSCTRL_REQUIRE(x.size() == num_states() && u.size() == num_inputs(),
                  "dynamics point has wrong dimensions");
  return EvaluateVector(f, x) + EvaluateMatrix(g, x) * u;
}

Linearization PlantModel::LinearizeAtGoal() const {
  const int n = num_states();
  const int m = num_inputs();
  Linearization lin;
  lin.A.resize(n, n);
  lin.B.resize(n, m);
  for (int i = 0; i < n; ++i) {
    Polynomial h = f(i);
    for (int k = 0; k < m; ++k) h += g(i, k) * goal_input(k);
    for (int j = 0; j < n; ++j) {
      lin.A(i, j) = h.Differentiate(j).Evaluate(goal_state);
    }
    for (int k = 0; k < m; ++k) lin.B(i, k) = g(i, k).Evaluate(goal_state);
  }
  return lin;
}

Eigen::MatrixXd PlantModel::EqualityTangentBasis() const {
  const int n = num_states();
  if (state_equalities.empty()) return Eigen::MatrixXd::Identity(n, n);
  Eigen::MatrixXd normals(static_cast<int>(state_equalities.size()), n);
  for (size_t l = 0; l < state_equalities.size(); ++l) {
    for (int j = 0; j < n; ++j) {
      normals(static_cast<int>(l), j) =
          state_equalities[l].Differentiate(j).Evaluate(goal_state);
    }
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(normals, Eigen::ComputeFullV);
  const Eigen::VectorXd& sv = svd.singularValues();
  int rank = 0;
  for (int i = 0; i < sv.size(); ++i) {
    if (sv(i) > 1e-9 * std::max(1.0, sv(0))) ++rank;
  }
  return svd.matrixV().rightCols(n - rank);
}

void PlantModel::Validate() const {
  SOSCTRL_REQUIRE(vars != nullptr, "plant has no variable set");
  const int n = num_states();
  const int m = num_inputs();
  SOSCTRL_REQUIRE(n > 0 && n == vars->size(),
                  "state dimension does not match the variable set");
  SOSCTRL_REQUIRE(g.rows() == n, "g must have one row per state");
  SOSCTRL_REQUIRE(m > 0, "plant must have at least one input");
  SOSCTRL_REQUIRE(input_vertices.rows() == m && input_vertices.cols() > 0,
                  "input vertices must be nonempty with one row per input");
  SOSCTRL_REQUIRE(goal_state.size() == n && goal_input.size() == m,
                  "goal state or input has wrong dimension");
  for (int i = 0; i < n; ++i) {
    SOSCTRL_REQUIRE(SameVariables(f(i).variables(), vars),
                    "f is not expressed in the plant variables");
    for (int k = 0; k < m; ++k) {
      SOSCTRL_REQUIRE(SameVariables(g(i, k).variables(), vars),
                      "g is not expressed in the plant variables");
    }
  }
  for (const Polynomial& e : state_equalities) {
    SOSCTRL_REQUIRE(SameVariables(e.variables(), vars),
                    "equality is not expressed in the plant variables");
    SOSCTRL_REQUIRE(std::abs(e.Evaluate(goal_state)) <= 1e-9,
                    "goal state violates a state equality");
  }
  if (has_input_box()) {
    SOSCTRL_REQUIRE(
        input_lower.size() == m && input_upper.size() == m &&
            (input_lower.array() <= input_upper.array()).all(),
        "input box limits are inconsistent");
    const Eigen::MatrixXd box = BoxVertices(input_lower, input_upper);
    SOSCTRL_REQUIRE(box.cols() == input_vertices.cols() &&
                        (box - input_vertices).cwiseAbs().maxCoeff() == 0.0,
                    "input vertices are not the box corner enumeration");
  }
  const Eigen::VectorXd residual = Dynamics(goal_state, goal_input);
  SOSCTRL_REQUIRE(residual.cwiseAbs().maxCoeff() <= 1e-9,
                  "goal is not an equilibrium under the goal input");
  bool admissible;
  if (has_input_box()) {
    admissible = (goal_input.array() >= input_lower.array() - 1e-12).all() &&
                 (goal_input.array() <= input_upper.array() + 1e-12).all();
  } else {
    admissible = InConvexHull(input_vertices, goal_input);
  }
  SOSCTRL_REQUIRE(admissible, "goal input is outside the input polytope");
}

Eigen::MatrixXd BoxVertices(const Eigen::VectorXd& lower,
                            const Eigen::VectorXd& upper) {
  const int m = static_cast<int>(lower.size());
  SOSCTRL_REQUIRE(upper.size() == m && m > 0, "box limits have unequal sizes");
  const int count = 1 << m;
  Eigen::MatrixXd vertices(m, count);
  for (int k = 0; k < count; ++k) {
    for (int i = 0; i < m; ++i) {
      vertices(i, k) = ((k >> i) & 1) ? upper(i) : lower(i);
    }
  }
  return vertices;
}

bool InConvexHull(const Eigen::MatrixXd& vertices,
                  const Eigen::VectorXd& point, double tolerance) {
  const int m = static_cast<int>(vertices.rows());
  const int nv = static_cast<int>(vertices.cols());
  SOSCTRL_REQUIRE(point.size() == m && nv > 0,
                  "hull membership query has wrong dimensions");
  SdpProblem lp;
  lp.nonneg_dim = nv;
  for (int i = 0; i < m; ++i) {
    const int c = lp.AddConstraint(point(i));
    for (int v = 0; v < nv; ++v) {
      lp.AddConstraintTerm(c, SdpProblem::kNonnegBlock, v, v, vertices(i, v));
    }
  }
  const int c = lp.AddConstraint(1.0);
  for (int v = 0; v < nv; ++v) {
    lp.AddConstraintTerm(c, SdpProblem::kNonnegBlock, v, v, 1.0);
  }
  for (int v = 0; v < nv; ++v) {
    lp.AddObjectiveTerm(SdpProblem::kNonnegBlock, v, v, 1.0);
  }
  const SdpSolution sol = Solve(lp);
  if (sol.status != SdpStatus::kOptimal) return false;
  const Eigen::VectorXd recon = vertices * sol.nonneg;
  return (recon - point).cwiseAbs().maxCoeff() <= tolerance &&
         std::abs(sol.nonneg.sum() - 1.0) <= tolerance;
}

PlantModel Toy2d() {
  const VariableSetPtr vars = VariableSet::Indexed("x", 2);
  const Polynomial x1 = Polynomial::Variable(vars, 0);

  PlantModel plant;
  plant.name = "toy2d";
  plant.vars = vars;
  plant.f = ZeroPolyVector(vars, 2);
  plant.f(1) = -x1 + (1.0 / 6.0) * x1 * x1 * x1;
  plant.g = ZeroPolyMatrix(vars, 2, 1);
  plant.g(0, 0) = Polynomial::Constant(vars, 1.0);
  plant.g(1, 0) = Polynomial::Constant(vars, -1.0);
  plant.input_lower = Eigen::VectorXd::Constant(1, -0.4);
  plant.input_upper = Eigen::VectorXd::Constant(1, 0.4);
  plant.input_vertices = BoxVertices(plant.input_lower, plant.input_upper);
  plant.goal_state = Eigen::VectorXd::Zero(2);
  plant.goal_input = Eigen::VectorXd::Zero(1);
  plant.Validate();
  return plant;
}

PlantModel Pendulum() {
  const double mass = 1.0;
  const double length = 0.5;
  const double damping = 0.1;
  const double gravity = 9.81;
  const double inertia = mass * length * length;

  const VariableSetPtr vars = VariableSet::Indexed("x", 3);
  const Polynomial x1 = Polynomial::Variable(vars, 0);
  const Polynomial x2 = Polynomial::Variable(vars, 1);
  const Polynomial x3 = Polynomial::Variable(vars, 2);

  PlantModel plant;
  plant.name = "pendulum";
  plant.vars = vars;
  plant.f = ZeroPolyVector(vars, 3);
  plant.f(0) = (x2 - 1.0) * x3;
  plant.f(1) = -x1 * x3;
  plant.f(2) = -(mass * gravity * length * x1 + damping * x3) / inertia;
  plant.g = ZeroPolyMatrix(vars, 3, 1);
  plant.g(2, 0) = Polynomial::Constant(vars, 1.0 / inertia);
  plant.input_lower = Eigen::VectorXd::Constant(1, -4.6);
  plant.input_upper = Eigen::VectorXd::Constant(1, 4.6);
  plant.input_vertices = BoxVertices(plant.input_lower, plant.input_upper);
  // sin^2 + cos^2 = 1 in the recast coordinates.
  plant.state_equalities = {x1 * x1 + (x2 - 1.0) * (x2 - 1.0) - 1.0};
  plant.goal_state = Eigen::VectorXd::Zero(3);
  plant.goal_input = Eigen::VectorXd::Zero(1);
  plant.Validate();
  return plant;
}

PlantModel QuadrotorData() {
  // Arm length matches the vehicle the certification experiments target;
  // mass, inertia and the rotor drag ratio are hobby-scale defaults, not
  // calibrated values.
  const double mass = 0.775;
  const double arm = 0.15;
  const double jx = 0.0015;
  const double jy = 0.0025;
  const double jz = 0.0035;
  const double drag_ratio = 0.0245;  // yaw torque per unit thrust
  const double gravity = 9.81;

  const VariableSetPtr vars = std::make_shared<const VariableSet>(
      std::vector<std::string>{"px", "py", "pz", "qw", "qx", "qy", "qz", "vx",
                               "vy", "vz", "wx", "wy", "wz"});
  const auto var = [&](int i) { return Polynomial::Variable(vars, i); };
  const Polynomial qw = var(3), qx = var(4), qy = var(5), qz = var(6);
  const Polynomial vx = var(7), vy = var(8), vz = var(9);
  const Polynomial wx = var(10), wy = var(11), wz = var(12);
  // The stored qw is shifted so hover sits at the origin.
  const Polynomial q0 = qw + 1.0;

  PlantModel plant;
  plant.name = "quadrotor";
  plant.vars = vars;
  plant.f = ZeroPolyVector(vars, 13);
  plant.f(0) = vx;
  plant.f(1) = vy;
  plant.f(2) = vz;
  plant.f(3) = -0.5 * (qx * wx + qy * wy + qz * wz);
  plant.f(4) = 0.5 * (q0 * wx + qy * wz - qz * wy);
  plant.f(5) = 0.5 * (q0 * wy + qz * wx - qx * wz);
  plant.f(6) = 0.5 * (q0 * wz + qx * wy - qy * wx);
  plant.f(9) = Polynomial::Constant(vars, -gravity);
  plant.f(10) = -((jz - jy) / jx) * wy * wz;
  plant.f(11) = -((jx - jz) / jy) * wz * wx;
  plant.f(12) = -((jy - jx) / jz) * wx * wy;

  // Thrust direction: body z axis rotated into the world frame.
  const Polynomial rz_x = 2.0 * (qx * qz + q0 * qy);
  const Polynomial rz_y = 2.0 * (qy * qz - q0 * qx);
  const Polynomial rz_z = q0 * q0 - qx * qx - qy * qy + qz * qz;
  plant.g = ZeroPolyMatrix(vars, 13, 4);
  for (int rotor = 0; rotor < 4; ++rotor) {
    plant.g(7, rotor) = rz_x / mass;
    plant.g(8, rotor) = rz_y / mass;
    plant.g(9, rotor) = rz_z / mass;
  }
  // Rotors on the +x, +y, -x, -y arms with alternating spin.
  const double roll[4] = {0.0, arm, 0.0, -arm};
  const double pitch[4] = {-arm, 0.0, arm, 0.0};
  const double yaw[4] = {drag_ratio, -drag_ratio, drag_ratio, -drag_ratio};
  for (int rotor = 0; rotor < 4; ++rotor) {
    plant.g(10, rotor) = Polynomial::Constant(vars, roll[rotor] / jx);
    plant.g(11, rotor) = Polynomial::Constant(vars, pitch[rotor] / jy);
    plant.g(12, rotor) = Polynomial::Constant(vars, yaw[rotor] / jz);
  }

  plant.input_lower = Eigen::VectorXd::Zero(4);
  plant.input_upper = Eigen::VectorXd::Constant(4, 0.75 * mass * gravity);
  plant.input_vertices = BoxVertices(plant.input_lower, plant.input_upper);
  // Unit quaternion in the shifted coordinates.
  plant.state_equalities = {q0 * q0 + qx * qx + qy * qy + qz * qz - 1.0};
  plant.goal_state = Eigen::VectorXd::Zero(13);
  plant.goal_input = Eigen::VectorXd::Constant(4, mass * gravity / 4.0);
  plant.Validate();
  return plant;
}

namespace {

// Solves M X + X M' + C = 0 through the n^2 x n^2 Kronecker system; fine at
// the state dimensions handled here (n <= 13).
Eigen::MatrixXd SolveLyapunov(const Eigen::MatrixXd& M,
                              const Eigen::MatrixXd& C) {
  const int n = static_cast<int>(M.rows());
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n * n, n * n);
  for (int j = 0; j < n; ++j) K.block(j * n, j * n, n, n) = M;
  for (int j = 0; j < n; ++j) {
    for (int k = 0; k < n; ++k) {
      K.block(j * n, k * n, n, n).diagonal().array() += M(j, k);
    }
  }
  const Eigen::VectorXd rhs =
      -Eigen::Map<const Eigen::VectorXd>(C.data(), n * n);
  const Eigen::VectorXd vec = K.partialPivLu().solve(rhs);
  const Eigen::MatrixXd X = Eigen::Map<const Eigen::MatrixXd>(vec.data(), n, n);
  return 0.5 * (X + X.transpose());
}

bool IsHurwitz(const Eigen::MatrixXd& M) {
  return Eigen::EigenSolver<Eigen::MatrixXd>(M, false)
             .eigenvalues()
             .real()
             .maxCoeff() < 0.0;
}

double CareResidual(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                    const Eigen::MatrixXd& Q, const Eigen::LLT<Eigen::MatrixXd>& R,
                    const Eigen::MatrixXd& S) {
  const Eigen::MatrixXd BtS = B.transpose() * S;
  return (A.transpose() * S + S * A - BtS.transpose() * R.solve(BtS) + Q)
      .norm();
}

}  // namespace

Eigen::MatrixXd SolveCare(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                          const Eigen::MatrixXd& Q, const Eigen::MatrixXd& R) {
  const int n = static_cast<int>(A.rows());
  const int m = static_cast<int>(B.cols());
  SOSCTRL_REQUIRE(A.cols() == n && B.rows() == n, "A and B sizes disagree");
  SOSCTRL_REQUIRE(Q.rows() == n && Q.cols() == n, "Q has the wrong size");
  SOSCTRL_REQUIRE(R.rows() == m && R.cols() == m, "R has the wrong size");
  if (n == 0) return Eigen::MatrixXd(0, 0);
  Eigen::LLT<Eigen::MatrixXd> rllt(R);
  SOSCTRL_REQUIRE(rllt.info() == Eigen::Success,
                  "R must be positive definite");

  // Hautus test: every closed-right-half-plane mode must be controllable.
  const Eigen::VectorXcd eigs =
      Eigen::EigenSolver<Eigen::MatrixXd>(A, false).eigenvalues();
  for (int i = 0; i < n; ++i) {
    if (eigs(i).real() < -1e-9) continue;
    Eigen::MatrixXcd pencil(n, n + m);
    pencil.leftCols(n) =
        A.cast<std::complex<double>>() -
        eigs(i) * Eigen::MatrixXcd::Identity(n, n);
    pencil.rightCols(m) = B.cast<std::complex<double>>();
    const Eigen::VectorXd sv =
        Eigen::JacobiSVD<Eigen::MatrixXcd>(pencil).singularValues();
    SOSCTRL_REQUIRE(sv(n - 1) > 1e-10 * std::max(1.0, sv(0)),
                    "linearization is not stabilizable");
  }

  // Bass construction of a stabilizing initial gain: with beta above the
  // spectral radius, (A + beta I) Z + Z (A + beta I)' = 2 B B' has Z >= 0 and
  // K0 = B' Z^-1 closes the loop (Z itself is the Lyapunov certificate).
  Eigen::MatrixXd K;
  bool stabilized = false;
  double beta = A.norm() + 1.0;
  for (int attempt = 0; attempt < 4 && !stabilized; ++attempt, beta *= 2.0) {
    const Eigen::MatrixXd Z = SolveLyapunov(
        -(A + beta * Eigen::MatrixXd::Identity(n, n)),
        2.0 * B * B.transpose());
    for (double ridge : {0.0, 1e-12, 1e-9, 1e-6}) {
      const Eigen::MatrixXd Zr =
          Z + ridge * (1.0 + Z.norm()) * Eigen::MatrixXd::Identity(n, n);
      const Eigen::LDLT<Eigen::MatrixXd> ldlt(Zr);
      if (ldlt.info() != Eigen::Success) continue;
      const Eigen::MatrixXd candidate = ldlt.solve(B).transpose();
      if (IsHurwitz(A - B * candidate)) {
        K = candidate;
        stabilized = true;
        break;
      }
    }
  }
  SOSCTRL_REQUIRE(stabilized, "linearization is not stabilizable");

  // Newton-Kleinman: each step solves the closed-loop Lyapunov equation and
  // refreshes the gain; quadratically convergent from a stabilizing start.
  Eigen::MatrixXd S;
  double residual = std::numeric_limits<double>::infinity();
  for (int it = 0; it < 60; ++it) {
    const Eigen::MatrixXd Acl = A - B * K;
    S = SolveLyapunov(Acl.transpose(), Q + K.transpose() * R * K);
    K = rllt.solve(B.transpose() * S);
    residual = CareResidual(A, B, Q, rllt, S);
    if (residual <= 1e-9) break;
  }
  if (residual > 1e-8) {
    throw std::runtime_error("Riccati iteration did not converge");
  }
  return S;
}

Polynomial LqrSeed(const PlantModel& plant, const Eigen::MatrixXd& Q,
                   const Eigen::MatrixXd& R, LqrSeedReport* report) {
  const int n = plant.num_states();
  SOSCTRL_REQUIRE(Q.rows() == n && Q.cols() == n,
                  "Q must match the state dimension");
  const Linearization lin = plant.LinearizeAtGoal();
  const Eigen::MatrixXd T = plant.EqualityTangentBasis();
  const Eigen::MatrixXd At = T.transpose() * lin.A * T;
  const Eigen::MatrixXd Bt = T.transpose() * lin.B;
  const Eigen::MatrixXd Qt =
      0.5 * (T.transpose() * Q * T + (T.transpose() * Q * T).transpose());
  const Eigen::MatrixXd St = SolveCare(At, Bt, Qt, R);
  // Lift the tangent-space solution back to ambient coordinates. Directions
  // normal to the equality manifold carry no dynamics, but leaving them at
  // zero would let the seed vanish at far-away states that happen to share
  // the tangent coordinates of the goal (the pendulum's downright pose, for
  // instance), so they get the mean tangent curvature instead; that keeps the
  // seed positive definite in the ambient space.
  Eigen::MatrixXd S = T * St * T.transpose();
  if (T.cols() < n) {
    const double mean_curvature = St.trace() / static_cast<double>(St.rows());
    S += mean_curvature *
         (Eigen::MatrixXd::Identity(n, n) - T * T.transpose());
  }

  std::map<Monomial, double, GradedLexLess> terms;
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j) {
      const double c = (i == j) ? S(i, i) : S(i, j) + S(j, i);
      if (c == 0.0) continue;
      terms[Monomial::Single(n, i) * Monomial::Single(n, j)] = c;
    }
  }
  if (report != nullptr) {
    report->linearization = lin;
    report->tangent_basis = T;
    report->S = S;
    Eigen::LLT<Eigen::MatrixXd> rllt(R);
    report->care_residual = CareResidual(At, Bt, Qt, rllt, St);
  }
  return Polynomial(plant.vars, std::move(terms));
}

namespace {

std::vector<double> ToStdVector(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

Eigen::VectorXd FromStdVector(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(),
                                           static_cast<int>(v.size()));
}

}  // namespace

std::string PlantToConfigText(const PlantModel& plant) {
  nlohmann::json j;
  j["name"] = plant.name;
  j["variables"] = plant.vars->names();
  nlohmann::json f = nlohmann::json::array();
  for (int i = 0; i < plant.num_states(); ++i) {
    f.push_back(ToExpressionString(plant.f(i)));
  }
  j["f"] = std::move(f);
  nlohmann::json g = nlohmann::json::array();
  for (int i = 0; i < plant.num_states(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (int k = 0; k < plant.num_inputs(); ++k) {
      row.push_back(ToExpressionString(plant.g(i, k)));
    }
    g.push_back(std::move(row));
  }
  j["g"] = std::move(g);
  nlohmann::json eq = nlohmann::json::array();
  for (const Polynomial& e : plant.state_equalities) {
    eq.push_back(ToExpressionString(e));
  }
  j["equalities"] = std::move(eq);
  if (plant.has_input_box()) {
    j["input_box"]["lower"] = ToStdVector(plant.input_lower);
    j["input_box"]["upper"] = ToStdVector(plant.input_upper);
  }
  nlohmann::json verts = nlohmann::json::array();
  for (int v = 0; v < plant.input_vertices.cols(); ++v) {
    verts.push_back(ToStdVector(plant.input_vertices.col(v)));
  }
  j["input_vertices"] = std::move(verts);
  j["goal_state"] = ToStdVector(plant.goal_state);
  j["goal_input"] = ToStdVector(plant.goal_input);
  return j.dump(2) + "\n";
}

PlantModel PlantFromConfigText(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::invalid_argument(std::string("plant config is not JSON: ") +
                                e.what());
  }
  try {
    PlantModel plant;
    plant.name = j.value("name", std::string("unnamed"));
    const auto names = j.at("variables").get<std::vector<std::string>>();
    plant.vars = std::make_shared<const VariableSet>(names);
    const auto f_text = j.at("f").get<std::vector<std::string>>();
    const int n = static_cast<int>(f_text.size());
    plant.f = PolyVector(n);
    for (int i = 0; i < n; ++i) {
      plant.f(i) = ParsePolynomial(f_text[i], plant.vars);
    }
    const auto g_text = j.at("g").get<std::vector<std::vector<std::string>>>();
    SOSCTRL_REQUIRE(static_cast<int>(g_text.size()) == n,
                    "g must have one row per state");
    const int m = g_text.empty() ? 0 : static_cast<int>(g_text[0].size());
    plant.g = PolyMatrix(n, m);
    for (int i = 0; i < n; ++i) {
      SOSCTRL_REQUIRE(static_cast<int>(g_text[i].size()) == m,
                      "g rows have unequal lengths");
      for (int k = 0; k < m; ++k) {
        plant.g(i, k) = ParsePolynomial(g_text[i][k], plant.vars);
      }
    }
    for (const auto& e : j.value("equalities", std::vector<std::string>{})) {
      plant.state_equalities.push_back(ParsePolynomial(e, plant.vars));
    }
    if (j.contains("input_box")) {
      plant.input_lower =
          FromStdVector(j["input_box"].at("lower").get<std::vector<double>>());
      plant.input_upper =
          FromStdVector(j["input_box"].at("upper").get<std::vector<double>>());
    }
    if (j.contains("input_vertices")) {
      const auto verts =
          j["input_vertices"].get<std::vector<std::vector<double>>>();
      SOSCTRL_REQUIRE(!verts.empty(), "input_vertices must be nonempty");
      plant.input_vertices.resize(static_cast<int>(verts[0].size()),
                                  static_cast<int>(verts.size()));
      for (size_t v = 0; v < verts.size(); ++v) {
        plant.input_vertices.col(static_cast<int>(v)) =
            FromStdVector(verts[v]);
      }
    } else if (plant.has_input_box()) {
      plant.input_vertices = BoxVertices(plant.input_lower, plant.input_upper);
    } else {
      throw std::invalid_argument(
          "plant config needs input_box or input_vertices");
    }
    plant.goal_state =
        FromStdVector(j.at("goal_state").get<std::vector<double>>());
    plant.goal_input =
        FromStdVector(j.at("goal_input").get<std::vector<double>>());
    plant.Validate();
    return plant;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("malformed plant config: ") +
                                e.what());
  }
}

}  // namespace sosctrl
