#include "sosctrl/plant.h"

#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include <doctest.h>

#include <Eigen/Dense>

#include "sosctrl/polynomial.h"

namespace sosctrl {
namespace {

Eigen::VectorXd Vec(std::initializer_list<double> values) {
  Eigen::VectorXd v(static_cast<int>(values.size()));
  int i = 0;
  for (double x : values) v(i++) = x;
  return v;
}

// Lie derivative of `e` along every vector field the plant can realize must
// vanish identically for `e` to be a consistent state equality.
void CheckEqualityPreserved(const PlantModel& plant, const Polynomial& e) {
  CHECK(LieDerivative(e, plant.f).MaxAbsCoefficient() <= 1e-12);
  for (int k = 0; k < plant.num_inputs(); ++k) {
    const PolyVector column = plant.g.col(k);
    CHECK(LieDerivative(e, column).MaxAbsCoefficient() <= 1e-12);
  }
}

TEST_CASE("toy2d model dynamics and input polytope") {
  const PlantModel plant = Toy2d();
  CHECK(plant.num_states() == 2);
  CHECK(plant.num_inputs() == 1);
  CHECK(plant.input_vertices.cols() == 2);
  CHECK(plant.input_vertices(0, 0) == -0.4);
  CHECK(plant.input_vertices(0, 1) == 0.4);
  CHECK(plant.state_equalities.empty());

  const Eigen::VectorXd at_goal =
      plant.Dynamics(plant.goal_state, plant.goal_input);
  CHECK(at_goal.norm() == 0.0);

  const Eigen::VectorXd xdot = plant.Dynamics(Vec({1.0, 0.0}), Vec({0.4}));
  CHECK(xdot(0) == doctest::Approx(0.4).epsilon(1e-12));
  CHECK(xdot(1) ==
        doctest::Approx(-1.0 + 1.0 / 6.0 - 0.4).epsilon(1e-12));
}

TEST_CASE("pendulum recast coordinates and circle equality") {
  const PlantModel plant = Pendulum();
  CHECK(plant.num_states() == 3);
  CHECK(plant.state_equalities.size() == 1);

  const auto recast = [](double theta, double thetadot) {
    return Vec({std::sin(theta), std::cos(theta) + 1.0, thetadot});
  };
  CHECK(recast(M_PI, 0.0).cwiseAbs().maxCoeff() <= 1e-12);  // upright = goal
  CHECK((recast(0.0, 0.0) - Vec({0.0, 2.0, 0.0})).norm() == 0.0);

  const Polynomial& circle = plant.state_equalities[0];
  for (double theta : {0.0, 0.3, 1.1, 2.0, M_PI, 4.4, 6.0}) {
    CHECK(std::abs(circle.Evaluate(recast(theta, 0.7))) <= 1e-12);
  }
  CheckEqualityPreserved(plant, circle);

  CHECK(plant.Dynamics(plant.goal_state, plant.goal_input).norm() == 0.0);
  // The downright pose is the other torque-free equilibrium.
  CHECK(plant.Dynamics(Vec({0.0, 2.0, 0.0}), Vec({0.0})).norm() == 0.0);
}

TEST_CASE("pendulum linearization at the upright goal") {
  const Linearization lin = Pendulum().LinearizeAtGoal();
  Eigen::MatrixXd A(3, 3);
  A << 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, -19.62, 0.0, -0.4;
  Eigen::VectorXd B = Vec({0.0, 0.0, 4.0});
  CHECK((lin.A - A).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK((lin.B - B).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("box vertex enumeration is the canonical corner order") {
  const Eigen::MatrixXd v = BoxVertices(Vec({-1.0, 0.0}), Vec({1.0, 3.0}));
  REQUIRE(v.cols() == 4);
  CHECK((v.col(0) - Vec({-1.0, 0.0})).norm() == 0.0);
  CHECK((v.col(1) - Vec({1.0, 0.0})).norm() == 0.0);
  CHECK((v.col(2) - Vec({-1.0, 3.0})).norm() == 0.0);
  CHECK((v.col(3) - Vec({1.0, 3.0})).norm() == 0.0);
}

TEST_CASE("convex hull membership by feasibility LP") {
  Eigen::MatrixXd triangle(2, 3);
  triangle << 0.0, 1.0, 0.0, 0.0, 0.0, 1.0;
  CHECK(InConvexHull(triangle, Vec({0.2, 0.2})));
  CHECK(InConvexHull(triangle, Vec({0.5, 0.5})));  // on the edge
  CHECK_FALSE(InConvexHull(triangle, Vec({0.6, 0.6})));
  CHECK_FALSE(InConvexHull(triangle, Vec({-0.1, 0.2})));
  CHECK(InConvexHull(Vec({2.0}), Vec({2.0})));  // single-vertex hull
}

TEST_CASE("continuous Riccati solve on closed-form cases") {
  const auto scalar = [](double a, double b, double q, double r) {
    Eigen::MatrixXd A(1, 1), B(1, 1), Q(1, 1), R(1, 1);
    A << a;
    B << b;
    Q << q;
    R << r;
    return SolveCare(A, B, Q, R)(0, 0);
  };
  // a = -1: S^2 + 2S - 1 = 0 with the PSD root S = sqrt(2) - 1.
  CHECK(scalar(-1.0, 1.0, 1.0, 1.0) ==
        doctest::Approx(std::sqrt(2.0) - 1.0).epsilon(1e-8));
  // a = 0: 1 - S^2 = 0.
  CHECK(scalar(0.0, 1.0, 1.0, 1.0) == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("continuous Riccati solve on random stabilizable systems") {
  std::mt19937 rng(20240917);
  std::uniform_real_distribution<double> coef(-1.0, 1.0);
  for (int trial = 0; trial < 5; ++trial) {
    Eigen::MatrixXd A(5, 5), B(5, 2);
    for (int i = 0; i < 5; ++i) {
      for (int j = 0; j < 5; ++j) A(i, j) = coef(rng);
      for (int j = 0; j < 2; ++j) B(i, j) = coef(rng);
    }
    const Eigen::MatrixXd Q = Eigen::MatrixXd::Identity(5, 5);
    const Eigen::MatrixXd R = Eigen::MatrixXd::Identity(2, 2);
    const Eigen::MatrixXd S = SolveCare(A, B, Q, R);

    const Eigen::MatrixXd residual =
        A.transpose() * S + S * A - S * B * B.transpose() * S + Q;
    CHECK(residual.norm() <= 1e-8);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
    CHECK(es.eigenvalues().minCoeff() >= -1e-9);
    const Eigen::MatrixXd Acl = A - B * B.transpose() * S;
    CHECK(Eigen::EigenSolver<Eigen::MatrixXd>(Acl, false)
              .eigenvalues()
              .real()
              .maxCoeff() < 0.0);
  }
}

TEST_CASE("Riccati solve accepts stabilizable pairs and rejects others") {
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(2, 2);
  A(0, 0) = -1.0;
  A(1, 1) = 1.0;
  Eigen::MatrixXd B(2, 1);
  B << 0.0, 1.0;  // stable mode uncontrollable, which is fine
  const Eigen::MatrixXd S =
      SolveCare(A, B, Eigen::MatrixXd::Identity(2, 2),
                Eigen::MatrixXd::Identity(1, 1));
  const Eigen::MatrixXd residual = A.transpose() * S + S * A -
                                   S * B * B.transpose() * S +
                                   Eigen::MatrixXd::Identity(2, 2);
  CHECK(residual.norm() <= 1e-8);

  B << 1.0, 0.0;  // now the unstable mode is uncontrollable
  CHECK_THROWS_AS(SolveCare(A, B, Eigen::MatrixXd::Identity(2, 2),
                            Eigen::MatrixXd::Identity(1, 1)),
                  std::invalid_argument);
  CHECK_THROWS_AS(SolveCare(A, A, Eigen::MatrixXd::Identity(2, 2),
                            -Eigen::MatrixXd::Identity(2, 2)),
                  std::invalid_argument);  // R not positive definite
}

TEST_CASE("LQR seed on a scalar plant reproduces the Riccati cost") {
  const VariableSetPtr vars = VariableSet::Indexed("x", 1);
  PlantModel plant;
  plant.name = "scalar";
  plant.vars = vars;
  plant.f = PolyVector(1);
  plant.f(0) = -Polynomial::Variable(vars, 0);
  plant.g = PolyMatrix(1, 1);
  plant.g(0, 0) = Polynomial::Constant(vars, 1.0);
  plant.input_lower = Vec({-1.0});
  plant.input_upper = Vec({1.0});
  plant.input_vertices = BoxVertices(plant.input_lower, plant.input_upper);
  plant.goal_state = Eigen::VectorXd::Zero(1);
  plant.goal_input = Eigen::VectorXd::Zero(1);
  plant.Validate();

  const Polynomial V0 = LqrSeed(plant, Eigen::MatrixXd::Identity(1, 1),
                                Eigen::MatrixXd::Identity(1, 1));
  CHECK(V0.TotalDegree() == 2);
  CHECK(V0.Coefficient(Monomial::Single(1, 0, 2)) ==
        doctest::Approx(std::sqrt(2.0) - 1.0).epsilon(1e-8));
}

TEST_CASE("pendulum LQR seed solves the tangent Riccati equation") {
  const PlantModel plant = Pendulum();
  LqrSeedReport report;
  const Polynomial V0 = LqrSeed(plant, Eigen::MatrixXd::Identity(3, 3),
                                Eigen::MatrixXd::Identity(1, 1), &report);

  CHECK(report.care_residual <= 1e-8);
  CHECK(report.tangent_basis.cols() == 2);
  // The circle constraint's normal at the goal is the x2 axis.
  CHECK(report.tangent_basis.row(1).cwiseAbs().maxCoeff() <= 1e-12);

  CHECK(V0.TotalDegree() == 2);
  CHECK(V0.Evaluate(Eigen::VectorXd::Zero(3)) == 0.0);
  CHECK(V0.Evaluate(Vec({0.1, 0.0, 0.0})) > 0.0);
  CHECK(V0.Evaluate(Vec({0.0, 0.0, 0.1})) > 0.0);
  CHECK(V0.Evaluate(Vec({-0.05, 0.0, 0.08})) > 0.0);

  // Ambient positive definiteness: the lifted S carries the mean tangent
  // curvature along the constraint normal, so the seed separates the
  // downright pose (0, 2, 0) from the goal instead of vanishing there.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(report.S);
  CHECK(eig.eigenvalues().minCoeff() > 0.0);
  const Eigen::MatrixXd St = report.tangent_basis.transpose() * report.S *
                             report.tangent_basis;
  CHECK(V0.Evaluate(Vec({0.0, 0.5, 0.0})) ==
        doctest::Approx(0.25 * St.trace() / 2.0).epsilon(1e-10));
  CHECK(V0.Evaluate(Vec({0.0, 2.0, 0.0})) > 0.0);
}

TEST_CASE("quadrotor model hovers at the goal") {
  const PlantModel plant = QuadrotorData();
  CHECK(plant.num_states() == 13);
  CHECK(plant.num_inputs() == 4);
  CHECK(plant.input_vertices.cols() == 16);
  // Each channel takes its upper limit on exactly half the corners.
  for (int i = 0; i < 4; ++i) {
    int uppers = 0;
    for (int v = 0; v < 16; ++v) {
      if (plant.input_vertices(i, v) == plant.input_upper(i)) ++uppers;
    }
    CHECK(uppers == 8);
  }

  // Hover thrust: weight split equally across the four rotors.
  const double per_rotor = 0.775 * 9.81 / 4.0;
  CHECK(plant.goal_input(0) == doctest::Approx(per_rotor).epsilon(1e-12));
  CHECK(plant.Dynamics(plant.goal_state, plant.goal_input)
            .cwiseAbs()
            .maxCoeff() <= 1e-9);

  REQUIRE(plant.state_equalities.size() == 1);
  const Polynomial& unit_norm = plant.state_equalities[0];
  CHECK(std::abs(unit_norm.Evaluate(plant.goal_state)) <= 1e-15);
  CheckEqualityPreserved(plant, unit_norm);
}

TEST_CASE("quadrotor linearization spot checks") {
  const PlantModel plant = QuadrotorData();
  const Linearization lin = plant.LinearizeAtGoal();
  CHECK(lin.A(0, 7) == doctest::Approx(1.0));           // px' = vx
  CHECK(lin.A(7, 5) == doctest::Approx(2.0 * 9.81));    // tilt couples into vx
  CHECK(lin.A(9, 3) == doctest::Approx(2.0 * 9.81));    // qw shift into vz
  CHECK(lin.B(9, 0) == doctest::Approx(1.0 / 0.775));   // thrust to vz
  CHECK(lin.B(10, 1) == doctest::Approx(0.15 / 0.0015));  // roll torque arm
}

TEST_CASE("plant config text round-trips") {
  for (const PlantModel& original : {Toy2d(), Pendulum()}) {
    const std::string text = PlantToConfigText(original);
    const PlantModel loaded = PlantFromConfigText(text);
    CHECK(loaded.name == original.name);
    REQUIRE(loaded.num_states() == original.num_states());
    REQUIRE(loaded.num_inputs() == original.num_inputs());
    for (int i = 0; i < original.num_states(); ++i) {
      CHECK(loaded.f(i).CoefficientDistance(original.f(i)) == 0.0);
      for (int k = 0; k < original.num_inputs(); ++k) {
        CHECK(loaded.g(i, k).CoefficientDistance(original.g(i, k)) == 0.0);
      }
    }
    REQUIRE(loaded.state_equalities.size() ==
            original.state_equalities.size());
    for (size_t l = 0; l < original.state_equalities.size(); ++l) {
      CHECK(loaded.state_equalities[l].CoefficientDistance(
                original.state_equalities[l]) == 0.0);
    }
    CHECK((loaded.input_vertices - original.input_vertices)
              .cwiseAbs()
              .maxCoeff() == 0.0);
    CHECK(loaded.has_input_box() == original.has_input_box());
  }
}

TEST_CASE("plant config accepts explicit vertex polytopes") {
  const std::string text = R"({
    "name": "drift",
    "variables": ["x1"],
    "f": ["-0.5 - 1*x1"],
    "g": [["1"]],
    "input_vertices": [[-1.0], [2.0]],
    "goal_state": [0.0],
    "goal_input": [0.5]
  })";
  const PlantModel plant = PlantFromConfigText(text);
  CHECK_FALSE(plant.has_input_box());
  CHECK(plant.input_vertices.cols() == 2);
  CHECK(plant.goal_input(0) == 0.5);
}

TEST_CASE("plant validation rejects inconsistent models") {
  // Goal input outside the polytope.
  const std::string outside = R"({
    "name": "bad",
    "variables": ["x1"],
    "f": ["0"],
    "g": [["0"]],
    "input_vertices": [[1.0], [2.0]],
    "goal_state": [0.0],
    "goal_input": [0.0]
  })";
  CHECK_THROWS_AS(PlantFromConfigText(outside), std::invalid_argument);

  // Goal that is not an equilibrium.
  PlantModel broken = Toy2d();
  broken.goal_state = Vec({1.0, 0.0});
  CHECK_THROWS_AS(broken.Validate(), std::invalid_argument);

  // Goal off the equality manifold.
  PlantModel pend = Pendulum();
  pend.goal_state = Vec({0.0, 1.0, 0.0});
  CHECK_THROWS_AS(pend.Validate(), std::invalid_argument);

  CHECK_THROWS_AS(PlantFromConfigText("not json"), std::invalid_argument);
}

}  // namespace
}  // namespace sosctrl
