#pragma once

// Numerical backends shared by the fitting and planning code: damped
// Gauss-Newton least squares, a quadratic-penalty (augmented Lagrangian) NLP
// wrapper around it, central finite differences, and an exact minimum-norm
// non-negative solve.

#include <Eigen/Dense>

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "footcal/error.hpp"

namespace footcal::numopt {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using VectorFn = std::function<Vector(const Vector&)>;
using JacobianFn = std::function<Matrix(const Vector&)>;

/// Tolerances and caps for the least-squares solver. Defaults are the
/// project-wide values; the CLI config can override every field.
struct NlsOptions {
  double gradient_tolerance = 1e-8;
  double step_tolerance = 1e-10;
  double relative_cost_tolerance = 1e-12;
  int max_iterations = 200;
  double initial_damping = 1e-3;
  double damping_increase = 10.0;
  double damping_decrease = 0.5;
  double max_damping = 1e16;
};

struct PenaltyOptions {
  double initial_weight = 10.0;
  double growth = 10.0;
  int max_outer_iterations = 20;
  double feasibility_tolerance = 1e-6;
};

struct NlsProblem {
  VectorFn residual;
  /// Optional; central differences are used when empty.
  JacobianFn jacobian;
  Vector initial;
  /// Optional box bounds, enforced by projection. Empty means unbounded.
  Vector lower;
  Vector upper;
  NlsOptions options;
};

struct NlpProblem {
  /// Cost as a residual vector; the scalar objective is its squared norm.
  VectorFn cost;
  JacobianFn cost_jacobian;
  /// h(x) = 0. May be empty.
  VectorFn equality;
  JacobianFn equality_jacobian;
  /// g(x) >= 0. May be empty.
  VectorFn inequality;
  JacobianFn inequality_jacobian;
  Vector lower;
  Vector upper;
  Vector initial;
  PenaltyOptions penalty;
  NlsOptions inner;
};

enum class Termination { kConverged, kMaxIterations, kStalled };

const char* to_string(Termination t);

struct SolveReport {
  Vector solution;
  double initial_cost = 0.0;
  double final_cost = 0.0;
  int iterations = 0;
  Termination reason = Termination::kMaxIterations;
  /// NLP only; zero for plain least squares.
  double max_violation = 0.0;
  /// Cost after each accepted step (NLS), starting with the initial cost.
  std::vector<double> cost_history;
  /// Constraint violation at the end of each penalty stage (NLP).
  std::vector<double> violation_history;
};

/// Central-difference Jacobian with step h for every coordinate.
Matrix finite_diff_jacobian(const VectorFn& f, const Vector& x, double step);

/// Central-difference Jacobian with step 1e-6 * max(1, |x_j|).
Matrix finite_diff_jacobian(const VectorFn& f, const Vector& x);

SolveReport nls_solve(const NlsProblem& problem);

SolveReport nlp_solve(const NlpProblem& problem);

/// Largest relative deviation between two Jacobians,
/// max |a_ij - b_ij| / max(1, max |b|).
double jacobian_relative_error(const Matrix& analytic, const Matrix& numeric);

/// Minimum Euclidean norm x >= 0 with A x = b, solved exactly by enumerating
/// supports (intended for the handful of columns in a foot force layout).
/// Returns nullopt when no non-negative solution exists.
std::optional<Vector> min_norm_nonnegative(const Matrix& A, const Vector& b,
                                           double tolerance = 1e-12);

/// Closed-form linear least squares through the normal equations. Throws
/// kDegenerateData when A^T A is numerically singular.
Vector linear_least_squares(const Matrix& A, const Vector& b);

}  // namespace footcal::numopt
