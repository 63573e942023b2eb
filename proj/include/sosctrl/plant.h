#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

#include "sosctrl/polynomial.h"

namespace sosctrl {

// Linearization xdot ~ A (x - goal) + B (u - goal_input) of a plant at its
// goal state.
struct Linearization {
  Eigen::MatrixXd A;
  Eigen::MatrixXd B;
};

// Control-affine polynomial plant
//
//   xdot = f(x) + g(x) u,   u in ConvexHull(input vertices),
//
// optionally restricted to the zero set of `state_equalities` (each
// polynomial vanishes identically along trajectories). Coordinates are
// chosen so the goal state is the origin; `goal_input` is an admissible
// input holding the plant there. Instances are immutable after construction
// and freely shareable.
struct PlantModel {
  std::string name;
  VariableSetPtr vars;
  PolyVector f;
  PolyMatrix g;
  // One vertex per column, num_inputs rows.
  Eigen::MatrixXd input_vertices;
  // Per-channel box limits when the polytope came from a box; empty (size 0)
  // otherwise. When present, `input_vertices` is exactly the Cartesian
  // product BoxVertices(lower, upper).
  Eigen::VectorXd input_lower;
  Eigen::VectorXd input_upper;
  std::vector<Polynomial> state_equalities;
  Eigen::VectorXd goal_state;
  Eigen::VectorXd goal_input;

  int num_states() const { return static_cast<int>(f.size()); }
  int num_inputs() const { return static_cast<int>(g.cols()); }
  bool has_input_box() const { return input_lower.size() > 0; }

  // xdot at (x, u).
  Eigen::VectorXd Dynamics(const Eigen::Ref<const Eigen::VectorXd>& x,
                           const Eigen::Ref<const Eigen::VectorXd>& u) const;

  // Jacobian of f + g*goal_input and value of g, both at the goal.
  Linearization LinearizeAtGoal() const;

  // Orthonormal basis (one column per direction) of the subspace orthogonal
  // to every equality gradient at the goal; the identity when there are no
  // equalities.
  Eigen::MatrixXd EqualityTangentBasis() const;

  // Checks dimensions, that the goal satisfies the equalities, and that
  // f(goal) + g(goal) * goal_input = 0 with goal_input admissible. Throws
  // std::invalid_argument on violation.
  void Validate() const;
};

// All 2^d corner points of the box [lower, upper], one per column; channel i
// of vertex k takes the upper limit iff bit i of k is set.
Eigen::MatrixXd BoxVertices(const Eigen::VectorXd& lower,
                            const Eigen::VectorXd& upper);

// Membership of `point` in the convex hull of the columns of `vertices`,
// decided by a small feasibility LP.
bool InConvexHull(const Eigen::MatrixXd& vertices,
                  const Eigen::VectorXd& point, double tolerance = 1e-7);

// Two-state single-input benchmark
//   x1dot = u,  x2dot = -x1 + x1^3/6 - u,  |u| <= 0.4.
PlantModel Toy2d();

// Damped pendulum about the upright pose, recast with the algebraic state
// x = [sin(theta), cos(theta) + 1, thetadot] so the dynamics are polynomial;
// the circle constraint x1^2 + (x2 - 1)^2 = 1 is kept as a state equality.
// Mass 1 kg, length 0.5 m, damping 0.1, torque limit 4.6 N m.
PlantModel Pendulum();

// Quaternion-based quadrotor with 13 states (position, quaternion shifted so
// hover is the origin, velocity, body angular rate) and 4 rotor thrusts
// limited to [0, 0.75 m g] each. Definition only: its certification programs
// are meant for export, not for the embedded solver.
PlantModel QuadrotorData();

// Continuous algebraic Riccati equation
//
//   A' S + S A - S B R^-1 B' S + Q = 0
//
// solved by Newton-Kleinman iteration from a Bass stabilizing gain; the
// returned S is symmetric PSD with residual at most 1e-8 (Frobenius).
// Throws std::invalid_argument when (A, B) is not stabilizable or R is not
// positive definite.
Eigen::MatrixXd SolveCare(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                          const Eigen::MatrixXd& Q, const Eigen::MatrixXd& R);

// How an LQR seed was produced: the goal linearization, the equality
// tangent basis the Riccati equation was solved on, the cost matrix lifted
// back to full coordinates, and the achieved Riccati residual.
struct LqrSeedReport {
  Linearization linearization;
  Eigen::MatrixXd tangent_basis;
  Eigen::MatrixXd S;
  double care_residual{0.0};
};

// Quadratic seed V0(x) = x' S x for the plant's goal, with S the Riccati
// cost of the goal linearization restricted to the equality tangent space.
// Constraint-normal directions get the mean tangent curvature so the seed is
// positive definite in the ambient space. Q must be PSD and R PD.
Polynomial LqrSeed(const PlantModel& plant, const Eigen::MatrixXd& Q,
                   const Eigen::MatrixXd& R,
                   LqrSeedReport* report = nullptr);

// --- structured-config interop ---------------------------------------------
//
// JSON object with fields: name, variables (list of names), f (list of
// polynomial expression strings), g (list of rows, each a list of strings),
// equalities (list of strings), goal_state, goal_input, and the input
// polytope as input_box {lower, upper} and/or input_vertices (list of
// vectors). Produced text parses back to an identical model.
std::string PlantToConfigText(const PlantModel& plant);
PlantModel PlantFromConfigText(const std::string& text);

}  // namespace sosctrl
