#include "footcal/numopt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace footcal {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid argument";
    case ErrorCode::kDimensionMismatch: return "dimension mismatch";
    case ErrorCode::kInvalidProblem: return "invalid problem";
    case ErrorCode::kNonFinite: return "non-finite value";
    case ErrorCode::kInsufficientLoad: return "insufficient load";
    case ErrorCode::kNoFeasibleDistribution: return "no feasible force distribution";
    case ErrorCode::kDegenerateData: return "degenerate data";
    case ErrorCode::kUnderdetermined: return "under-determined data";
    case ErrorCode::kDeadCell: return "dead load cell";
    case ErrorCode::kSolverStall: return "solver stall";
    case ErrorCode::kSamplerStall: return "sampler stall";
    case ErrorCode::kDegenerateHull: return "degenerate hull";
    case ErrorCode::kTrainTestOverlap: return "train/test overlap";
    case ErrorCode::kParse: return "parse error";
    case ErrorCode::kSchemaVersion: return "unsupported schema version";
  }
  return "unknown error";
}

namespace numopt {

const char* to_string(Termination t) {
  switch (t) {
    case Termination::kConverged: return "converged";
    case Termination::kMaxIterations: return "max-iterations";
    case Termination::kStalled: return "stalled";
  }
  return "unknown";
}

namespace {

bool all_finite(const Vector& v) { return v.allFinite(); }

Vector clamp_to(const Vector& x, const Vector& lo, const Vector& hi) {
  if (lo.size() == 0) return x;
  return x.cwiseMax(lo).cwiseMin(hi);
}

// Zeroes gradient components that point out of an active bound; used for the
// first-order convergence test under projection.
Vector projected_gradient(const Vector& g, const Vector& x, const Vector& lo, const Vector& hi) {
  if (lo.size() == 0) return g;
  Vector pg = g;
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    // Descent direction is -g.
    if (x[i] <= lo[i] && g[i] > 0.0) pg[i] = 0.0;
    if (x[i] >= hi[i] && g[i] < 0.0) pg[i] = 0.0;
  }
  return pg;
}

void check_bounds(const Vector& x, const Vector& lo, const Vector& hi) {
  if (lo.size() == 0 && hi.size() == 0) return;
  if (lo.size() != x.size() || hi.size() != x.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "bounds must match the parameter dimension");
  }
  if ((lo.array() > hi.array()).any()) {
    throw Error(ErrorCode::kInvalidProblem, "lower bound exceeds upper bound");
  }
}

}  // namespace

Matrix finite_diff_jacobian(const VectorFn& f, const Vector& x, double step) {
  if (!(step > 0.0)) throw Error(ErrorCode::kInvalidArgument, "finite-difference step must be positive");
  Vector probe = x;
  Matrix J;
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    probe[j] = x[j] + step;
    const Vector fp = f(probe);
    probe[j] = x[j] - step;
    const Vector fm = f(probe);
    probe[j] = x[j];
    if (!all_finite(fp) || !all_finite(fm)) {
      throw Error(ErrorCode::kNonFinite,
                  "function is not finite when perturbing coordinate " + std::to_string(j));
    }
    if (j == 0) J.resize(fp.size(), x.size());
    J.col(j) = (fp - fm) / (2.0 * step);
  }
  if (x.size() == 0) J.resize(f(x).size(), 0);
  return J;
}

Matrix finite_diff_jacobian(const VectorFn& f, const Vector& x) {
  Vector probe = x;
  Matrix J;
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    const double h = 1e-6 * std::max(1.0, std::abs(x[j]));
    probe[j] = x[j] + h;
    const Vector fp = f(probe);
    probe[j] = x[j] - h;
    const Vector fm = f(probe);
    probe[j] = x[j];
    if (!all_finite(fp) || !all_finite(fm)) {
      throw Error(ErrorCode::kNonFinite,
                  "function is not finite when perturbing coordinate " + std::to_string(j));
    }
    if (j == 0) J.resize(fp.size(), x.size());
    J.col(j) = (fp - fm) / (2.0 * h);
  }
  if (x.size() == 0) J.resize(f(x).size(), 0);
  return J;
}

double jacobian_relative_error(const Matrix& analytic, const Matrix& numeric) {
  if (analytic.rows() != numeric.rows() || analytic.cols() != numeric.cols()) {
    throw Error(ErrorCode::kDimensionMismatch, "Jacobian shapes differ");
  }
  if (analytic.size() == 0) return 0.0;
  const double scale = std::max(1.0, numeric.cwiseAbs().maxCoeff());
  return (analytic - numeric).cwiseAbs().maxCoeff() / scale;
}

SolveReport nls_solve(const NlsProblem& problem) {
  const NlsOptions& opt = problem.options;
  if (!problem.residual) throw Error(ErrorCode::kInvalidProblem, "missing residual function");
  if (!(opt.gradient_tolerance > 0 && opt.step_tolerance > 0 && opt.relative_cost_tolerance > 0)) {
    throw Error(ErrorCode::kInvalidProblem, "tolerances must be strictly positive");
  }
  if (opt.max_iterations < 1) throw Error(ErrorCode::kInvalidProblem, "max iterations must be >= 1");
  check_bounds(problem.initial, problem.lower, problem.upper);

  const auto jacobian = [&](const Vector& x) -> Matrix {
    if (problem.jacobian) return problem.jacobian(x);
    return finite_diff_jacobian(problem.residual, x);
  };

  Vector x = clamp_to(problem.initial, problem.lower, problem.upper);
  Vector r = problem.residual(x);
  if (!all_finite(r)) throw Error(ErrorCode::kInvalidProblem, "residual is not finite at the initial vector");

  SolveReport report;
  double cost = r.squaredNorm();
  report.initial_cost = cost;
  report.cost_history.push_back(cost);
  double lambda = opt.initial_damping;
  report.reason = Termination::kMaxIterations;

  int iter = 0;
  for (; iter < opt.max_iterations; ++iter) {
    const Matrix J = jacobian(x);
    if (J.rows() != r.size() || J.cols() != x.size()) {
      throw Error(ErrorCode::kDimensionMismatch, "Jacobian shape does not match residual/parameters");
    }
    const Vector g = J.transpose() * r;
    if (projected_gradient(g, x, problem.lower, problem.upper).lpNorm<Eigen::Infinity>() <
        opt.gradient_tolerance) {
      report.reason = Termination::kConverged;
      break;
    }
    const Matrix H = J.transpose() * J;
    const Vector diag = H.diagonal().cwiseMax(1e-12);
    // Variables held at a bound by the gradient are frozen for this step.
    std::vector<Eigen::Index> free;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      const bool pinned = problem.lower.size() > 0 && ((x[i] <= problem.lower[i] && g[i] > 0.0) ||
                                                       (x[i] >= problem.upper[i] && g[i] < 0.0));
      if (!pinned) free.push_back(i);
    }
    const auto nf = static_cast<Eigen::Index>(free.size());
    Matrix Hf(nf, nf);
    Vector gf(nf), df(nf);
    for (Eigen::Index a = 0; a < nf; ++a) {
      gf[a] = g[free[a]];
      df[a] = diag[free[a]];
      for (Eigen::Index b = 0; b < nf; ++b) Hf(a, b) = H(free[a], free[b]);
    }

    bool accepted = false;
    bool tiny_step = false;
    while (lambda <= opt.max_damping) {
      Matrix A = Hf;
      A.diagonal() += lambda * df;
      const Vector delta_f = A.ldlt().solve(-gf);
      Vector delta = Vector::Zero(x.size());
      for (Eigen::Index a = 0; a < nf; ++a) delta[free[a]] = delta_f[a];
      const Vector x_new = clamp_to(x + delta, problem.lower, problem.upper);
      const double step = (x_new - x).norm();
      if (!std::isfinite(step)) {
        lambda *= opt.damping_increase;
        continue;
      }
      if (step < opt.step_tolerance * (1.0 + x.norm())) {
        tiny_step = true;
        break;
      }
      const Vector r_new = problem.residual(x_new);
      const double cost_new = all_finite(r_new) ? r_new.squaredNorm()
                                                : std::numeric_limits<double>::infinity();
      if (cost_new < cost) {
        const double decrease = cost - cost_new;
        x = x_new;
        r = r_new;
        cost = cost_new;
        report.cost_history.push_back(cost);
        lambda = std::max(lambda * opt.damping_decrease, 1e-15);
        accepted = true;
        if (decrease < opt.relative_cost_tolerance * std::max(cost, 1e-300) || cost == 0.0) {
          report.reason = Termination::kConverged;
        }
        break;
      }
      lambda *= opt.damping_increase;
    }
    if (tiny_step) {
      report.reason = Termination::kConverged;
      ++iter;
      break;
    }
    if (!accepted) {
      report.reason = Termination::kStalled;
      ++iter;
      break;
    }
    if (report.reason == Termination::kConverged) {
      ++iter;
      break;
    }
  }
  report.iterations = iter;
  report.solution = x;
  report.final_cost = cost;
  return report;
}

namespace {

struct PenaltyParts {
  Vector cost, eq, ineq;
};

PenaltyParts evaluate_parts(const NlpProblem& p, const Vector& x) {
  PenaltyParts parts;
  parts.cost = p.cost(x);
  parts.eq = p.equality ? p.equality(x) : Vector();
  parts.ineq = p.inequality ? p.inequality(x) : Vector();
  return parts;
}

double violation_of(const PenaltyParts& parts) {
  double v = 0.0;
  if (parts.eq.size() > 0) v = std::max(v, parts.eq.cwiseAbs().maxCoeff());
  if (parts.ineq.size() > 0) v = std::max(v, (-parts.ineq).cwiseMax(0.0).maxCoeff());
  return v;
}

}  // namespace

SolveReport nlp_solve(const NlpProblem& problem) {
  if (!problem.cost) throw Error(ErrorCode::kInvalidProblem, "missing cost function");
  const PenaltyOptions& pen = problem.penalty;
  if (!(pen.initial_weight > 0.0) || !(pen.growth > 1.0)) {
    throw Error(ErrorCode::kInvalidProblem, "penalty weights must be positive and growing");
  }
  if (pen.max_outer_iterations < 1) throw Error(ErrorCode::kInvalidProblem, "need at least one penalty stage");
  check_bounds(problem.initial, problem.lower, problem.upper);

  Vector x = clamp_to(problem.initial, problem.lower, problem.upper);
  PenaltyParts parts = evaluate_parts(problem, x);
  if (!all_finite(parts.cost)) throw Error(ErrorCode::kInvalidProblem, "cost is not finite at the initial vector");
  if (!all_finite(parts.eq) || !all_finite(parts.ineq)) {
    throw Error(ErrorCode::kInvalidProblem, "constraints are not finite at the initial vector");
  }

  SolveReport report;
  report.initial_cost = parts.cost.squaredNorm();
  const Eigen::Index nc = parts.cost.size();
  const Eigen::Index ne = parts.eq.size();
  const Eigen::Index ni = parts.ineq.size();

  const auto cost_jac = [&](const Vector& v) -> Matrix {
    return problem.cost_jacobian ? problem.cost_jacobian(v) : finite_diff_jacobian(problem.cost, v);
  };
  const auto eq_jac = [&](const Vector& v) -> Matrix {
    return problem.equality_jacobian ? problem.equality_jacobian(v)
                                     : finite_diff_jacobian(problem.equality, v);
  };
  const auto ineq_jac = [&](const Vector& v) -> Matrix {
    return problem.inequality_jacobian ? problem.inequality_jacobian(v)
                                       : finite_diff_jacobian(problem.inequality, v);
  };

  // Augmented Lagrangian on f = |r|^2: stage objective
  //   f + mu |h + lambda / (2 mu)|^2 + mu |min(0, g - nu / (2 mu))|^2,
  // with first-order multiplier updates between stages.
  double mu = pen.initial_weight;
  Vector lambda = Vector::Zero(ne);
  Vector nu = Vector::Zero(ni);
  Vector best_x = x;
  double best_violation = violation_of(parts);
  double last_violation = best_violation;
  int total_iterations = 0;
  report.reason = Termination::kStalled;

  for (int outer = 0; outer < pen.max_outer_iterations; ++outer) {
    const double sqrt_mu = std::sqrt(mu);
    const Vector eq_shift = lambda / (2.0 * mu);
    const Vector ineq_shift = nu / (2.0 * mu);
    NlsProblem inner;
    inner.options = problem.inner;
    inner.initial = x;
    inner.lower = problem.lower;
    inner.upper = problem.upper;
    inner.residual = [&, sqrt_mu](const Vector& v) -> Vector {
      const PenaltyParts pp = evaluate_parts(problem, v);
      Vector out(nc + ne + ni);
      out.head(nc) = pp.cost;
      if (ne > 0) out.segment(nc, ne) = sqrt_mu * (pp.eq + eq_shift);
      if (ni > 0) out.tail(ni) = sqrt_mu * (pp.ineq - ineq_shift).cwiseMin(0.0);
      return out;
    };
    inner.jacobian = [&, sqrt_mu](const Vector& v) -> Matrix {
      Matrix J(nc + ne + ni, v.size());
      J.topRows(nc) = cost_jac(v);
      if (ne > 0) J.middleRows(nc, ne) = sqrt_mu * eq_jac(v);
      if (ni > 0) {
        const Vector g = problem.inequality(v);
        const Matrix Ji = ineq_jac(v);
        for (Eigen::Index k = 0; k < ni; ++k) {
          if (g[k] - ineq_shift[k] < 0.0) {
            J.row(nc + ne + k) = sqrt_mu * Ji.row(k);
          } else {
            J.row(nc + ne + k).setZero();
          }
        }
      }
      return J;
    };

    const SolveReport stage = nls_solve(inner);
    total_iterations += stage.iterations;
    x = stage.solution;
    parts = evaluate_parts(problem, x);
    const double violation = violation_of(parts);
    if (violation <= best_violation) {
      best_violation = violation;
      best_x = x;
    }
    report.violation_history.push_back(best_violation);
    if (violation <= pen.feasibility_tolerance && stage.reason != Termination::kStalled) {
      report.reason = Termination::kConverged;
      best_x = x;
      best_violation = violation;
      break;
    }
    if (ne > 0) lambda += 2.0 * mu * parts.eq;
    if (ni > 0) nu = (nu - 2.0 * mu * parts.ineq).cwiseMax(0.0);
    if (violation > 0.25 * last_violation) mu *= pen.growth;
    last_violation = violation;
  }

  if (report.reason != Termination::kConverged) {
    report.reason = best_violation <= pen.feasibility_tolerance ? Termination::kMaxIterations
                                                               : Termination::kStalled;
  }
  const PenaltyParts final_parts = evaluate_parts(problem, best_x);
  if (!all_finite(final_parts.cost)) throw Error(ErrorCode::kInvalidProblem, "cost became non-finite");
  report.solution = best_x;
  report.final_cost = final_parts.cost.squaredNorm();
  report.max_violation = violation_of(final_parts);
  report.iterations = total_iterations;
  return report;
}

std::optional<Vector> min_norm_nonnegative(const Matrix& A, const Vector& b, double tolerance) {
  const Eigen::Index n = A.cols();
  if (A.rows() != b.size()) throw Error(ErrorCode::kDimensionMismatch, "A and b row counts differ");
  if (n == 0 || n > 20) throw Error(ErrorCode::kInvalidArgument, "support enumeration needs 1..20 columns");

  const double scale = std::max(1.0, b.norm());
  const auto solve_on = [&](unsigned mask) -> std::optional<Vector> {
    std::vector<Eigen::Index> cols;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (mask & (1u << j)) cols.push_back(j);
    }
    Matrix As(A.rows(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t k = 0; k < cols.size(); ++k) As.col(static_cast<Eigen::Index>(k)) = A.col(cols[k]);
    const Vector xs = As.completeOrthogonalDecomposition().solve(b);
    if ((As * xs - b).norm() > tolerance * 1e3 * scale) return std::nullopt;
    if ((xs.array() < -tolerance * scale).any()) return std::nullopt;
    Vector x = Vector::Zero(n);
    for (std::size_t k = 0; k < cols.size(); ++k) x[cols[k]] = std::max(0.0, xs[static_cast<Eigen::Index>(k)]);
    return x;
  };

  const unsigned full = (n == 32) ? ~0u : ((1u << n) - 1u);
  // Unconstrained minimum-norm solution is optimal whenever it is non-negative.
  if (auto x = solve_on(full)) return x;

  std::optional<Vector> best;
  double best_norm = std::numeric_limits<double>::infinity();
  for (unsigned mask = 1; mask < full; ++mask) {
    auto x = solve_on(mask);
    if (!x) continue;
    const double nrm = x->squaredNorm();
    if (nrm < best_norm) {
      best_norm = nrm;
      best = std::move(x);
    }
  }
  return best;
}

Vector linear_least_squares(const Matrix& A, const Vector& b) {
  if (A.rows() != b.size()) throw Error(ErrorCode::kDimensionMismatch, "A and b row counts differ");
  const Matrix AtA = A.transpose() * A;
  Eigen::LDLT<Matrix> ldlt(AtA);
  const double scale = std::max(1e-300, AtA.diagonal().cwiseAbs().maxCoeff());
  const Vector d = ldlt.vectorD();
  if (ldlt.info() != Eigen::Success || d.cwiseAbs().minCoeff() <= 1e-12 * scale) {
    throw Error(ErrorCode::kDegenerateData, "normal equations are rank deficient");
  }
  return ldlt.solve(A.transpose() * b);
}

}  // namespace numopt
}  // namespace footcal
