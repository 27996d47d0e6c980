#include "footcal/planner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "footcal/error.hpp"

namespace footcal {

void PlannerConfig::validate() const {
  if (horizon < 2) throw Error(ErrorCode::kInvalidArgument, "planner horizon must be at least 2 states");
  if (cop_weight < 0.0 || smoothness_weight < 0.0) {
    throw Error(ErrorCode::kInvalidArgument, "planner weights must be non-negative");
  }
  if (!(d_min > 0.0)) throw Error(ErrorCode::kInvalidArgument, "d_min must be positive");
  if (!(arrival_radius > 0.0)) throw Error(ErrorCode::kInvalidArgument, "arrival radius must be positive");
  if (cop_margin < 0.0) throw Error(ErrorCode::kInvalidArgument, "CoP margin must be non-negative");
  if (!(max_transition > 0.0)) throw Error(ErrorCode::kInvalidArgument, "transition bound must be positive");
  if (!(landmark_inset >= 0.0 && landmark_inset < 0.5)) {
    throw Error(ErrorCode::kInvalidArgument, "landmark inset must lie in [0, 0.5)");
  }
  if (max_steps < 1) throw Error(ErrorCode::kInvalidArgument, "max planning steps must be positive");
  if (!(feasibility_tolerance > 0.0)) throw Error(ErrorCode::kInvalidArgument, "feasibility tolerance must be positive");
}

LandmarkSet make_landmarks(const RobotModel& model, const DoubleSupportConfig& ds, double inset_fraction) {
  const double inset = inset_fraction * model.foot_length;
  std::vector<Vec2> pts;
  for (int f = 0; f < 2; ++f) {
    const Polygon& poly = model.feet[f].sensing_polygon;
    double xmin = poly[0].x(), xmax = xmin, ysum = 0.0;
    for (const Vec2& v : poly) {
      xmin = std::min(xmin, v.x());
      xmax = std::max(xmax, v.x());
      ysum += v.y();
    }
    const double yc = ysum / static_cast<double>(poly.size());
    const Pose sole = f == 0 ? Pose::identity() : ds.right_sole;
    pts.push_back(sole.apply2d(Vec2(xmax - inset, yc)));
    pts.push_back(sole.apply2d(Vec2(xmin + inset, yc)));
  }
  Vec2 centre = Vec2::Zero();
  for (const Vec2& p : pts) centre += p;
  centre /= 4.0;
  // Start at the left-rear landmark and walk counter-clockwise.
  const auto angle = [&](const Vec2& p) {
    const double a = std::atan2(p.y() - centre.y(), p.x() - centre.x());
    const Vec2& start = pts[1];
    const double a0 = std::atan2(start.y() - centre.y(), start.x() - centre.x());
    double d = a - a0;
    while (d < 0.0) d += 2.0 * M_PI;
    while (d >= 2.0 * M_PI) d -= 2.0 * M_PI;
    return d;
  };
  std::vector<Vec2> order = pts;
  std::stable_sort(order.begin(), order.end(), [&](const Vec2& a, const Vec2& b) { return angle(a) < angle(b); });
  LandmarkSet out;
  for (int k = 0; k < 4; ++k) out.points[k] = order[k];
  for (int k = 0; k < 4; ++k) out.midpoints[k] = 0.5 * (out.points[k] + out.points[(k + 1) % 4]);
  return out;
}

namespace {

using numopt::Matrix;
using numopt::Vector;

// Constraint values of one posture: CoP, foot-transform error, CoP edge
// margins and capsule clearances (the last two already offset so >= 0 holds).
struct StateModel {
  const RobotModel& model;
  Pose target;
  Polygon hull;
  double cop_margin;
  double d_min;
  int edges;
  int pairs;

  StateModel(const RobotModel& m, const DoubleSupportConfig& ds, const PlannerConfig& cfg)
      : model(m),
        target(ds.right_sole),
        hull(sensing_polygon(m, ds)),
        cop_margin(cfg.cop_margin),
        d_min(cfg.d_min),
        edges(static_cast<int>(hull.size())),
        pairs(static_cast<int>(m.collision_pairs.size())) {}

  int size() const { return 8 + edges + pairs; }

  Vector eval(const JointVector& q) const {
    const std::vector<Pose> poses = forward_kinematics(model, q);
    Vector out(size());
    const Vec2 c = modeled_com(model, poses).head<2>();
    out.head<2>() = c;
    out.segment<6>(2) = pose_error(foot_transform(model, poses), target);
    const std::vector<double> m = edge_margins(hull, c);
    for (int k = 0; k < edges; ++k) out[8 + k] = m[k] - cop_margin;
    const std::vector<double> d = collision_distances(model, poses);
    for (int k = 0; k < pairs; ++k) out[8 + edges + k] = d[k] - d_min;
    return out;
  }

  Matrix jacobian(const JointVector& q) const {
    return numopt::finite_diff_jacobian([this](const Vector& v) { return eval(v); }, q);
  }
};

Eigen::Matrix<double, 6, 1> foot_error(const RobotModel& model, const JointVector& q, const Pose& target) {
  return pose_error(foot_transform(model, q), target);
}

// Minimum-norm Newton projection onto the foot-transform manifold. Joints at
// a limit are held there.
JointVector polish(const RobotModel& model, const JointVector& q0, const Pose& target) {
  JointVector q = q0.cwiseMax(model.q_min).cwiseMin(model.q_max);
  const auto f = [&](const Vector& v) -> Vector { return foot_error(model, v, target); };
  const Eigen::Index n = q.size();
  for (int it = 0; it < 30; ++it) {
    const Vector r = f(q);
    if (r.lpNorm<Eigen::Infinity>() < 1e-13) break;
    Matrix J = numopt::finite_diff_jacobian(f, q);
    Vector dq = Vector::Zero(n);
    std::vector<bool> held(static_cast<std::size_t>(n), false);
    for (int pass = 0; pass <= n; ++pass) {
      Matrix Jf = J;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (held[static_cast<std::size_t>(j)]) Jf.col(j).setZero();
      }
      dq = -Jf.transpose() * (Jf * Jf.transpose()).completeOrthogonalDecomposition().solve(r);
      bool changed = false;
      for (Eigen::Index j = 0; j < n; ++j) {
        const double next = q[j] + dq[j];
        if (!held[static_cast<std::size_t>(j)] && (next < model.q_min[j] || next > model.q_max[j])) {
          held[static_cast<std::size_t>(j)] = true;
          changed = true;
        }
      }
      if (!changed) break;
    }
    if (!dq.allFinite()) break;
    q = (q + dq).cwiseMax(model.q_min).cwiseMin(model.q_max);
    if (dq.lpNorm<Eigen::Infinity>() < 1e-15) break;
  }
  return q;
}

// Memoises state evaluations and per-state Jacobians on the last x seen.
class SegmentCache {
 public:
  SegmentCache(const StateModel& sm, int states, int joints) : sm_(sm), states_(states), joints_(joints) {}

  const std::vector<Vector>& values(const Vector& x) {
    if (!(value_x_.size() == x.size() && value_x_ == x)) {
      value_x_ = x;
      vals_.resize(static_cast<std::size_t>(states_));
      for (int i = 0; i < states_; ++i) vals_[static_cast<std::size_t>(i)] = sm_.eval(state(x, i));
    }
    return vals_;
  }

  const std::vector<Matrix>& jacobians(const Vector& x) {
    if (!(jac_x_.size() == x.size() && jac_x_ == x)) {
      jac_x_ = x;
      jacs_.resize(static_cast<std::size_t>(states_));
      for (int i = 0; i < states_; ++i) jacs_[static_cast<std::size_t>(i)] = sm_.jacobian(state(x, i));
    }
    return jacs_;
  }

  // q[i + 1] inside the decision vector [u_0..u_{S-1}, q_1..q_S].
  Vector state(const Vector& x, int i) const { return x.segment((states_ + i) * joints_, joints_); }
  Eigen::Index u_offset(int i) const { return static_cast<Eigen::Index>(i) * joints_; }
  Eigen::Index q_offset(int i) const { return static_cast<Eigen::Index>(states_ + i) * joints_; }

 private:
  const StateModel& sm_;
  int states_;
  int joints_;
  Vector value_x_, jac_x_;
  std::vector<Vector> vals_;
  std::vector<Matrix> jacs_;
};

// Keeps the longest prefix of states that pass the checker.
int feasible_prefix(const RobotModel& model, const DoubleSupportConfig& ds, const std::vector<JointVector>& q,
                    const PlannerConfig& cfg) {
  int n = 0;
  for (std::size_t i = 1; i < q.size(); ++i) {
    if ((q[i] - q[i - 1]).cwiseAbs().maxCoeff() > cfg.max_transition) break;
    if (!check_state(model, ds, q[i], cfg).ok) break;
    ++n;
  }
  return n;
}

}  // namespace

StateCheck check_state(const RobotModel& model, const DoubleSupportConfig& ds, const JointVector& q,
                       const PlannerConfig& cfg) {
  StateCheck c;
  const double tol = cfg.feasibility_tolerance;
  const std::vector<Pose> poses = forward_kinematics(model, q);
  const Vec2 cop = modeled_com(model, poses).head<2>();
  const Polygon hull = sensing_polygon(model, ds);
  const std::vector<double> m = edge_margins(hull, cop);
  c.min_cop_margin = *std::min_element(m.begin(), m.end()) - cfg.cop_margin;
  c.limit_violation = std::max({0.0, (model.q_min - q).maxCoeff(), (q - model.q_max).maxCoeff()});
  const std::vector<double> d = collision_distances(model, poses);
  c.min_clearance = d.empty() ? std::numeric_limits<double>::infinity()
                              : *std::min_element(d.begin(), d.end()) - cfg.d_min;
  c.foot_residual = pose_error(foot_transform(model, poses), ds.right_sole).lpNorm<Eigen::Infinity>();
  c.ok = c.min_cop_margin >= -tol && c.limit_violation <= tol && c.min_clearance >= -tol && c.foot_residual < tol;
  return c;
}

SegmentResult plan_segment(const RobotModel& model, const DoubleSupportConfig& ds, const JointVector& q_start,
                           const Vec2& target, const PlannerConfig& cfg, const JointVector& u_prev_in) {
  cfg.validate();
  const int n = model.joint_count();
  if (q_start.size() != n) throw Error(ErrorCode::kDimensionMismatch, "start state has the wrong dimension");
  const JointVector u_prev = u_prev_in.size() == n ? u_prev_in : JointVector::Zero(n);
  const int S = cfg.horizon - 1;
  const StateModel sm(model, ds, cfg);
  SegmentCache cache(sm, S, n);
  const double wc = std::sqrt(cfg.cop_weight);
  const double wu = std::sqrt(cfg.smoothness_weight);
  const Eigen::Index nx = 2 * static_cast<Eigen::Index>(S) * n;
  const int E = sm.edges, P = sm.pairs;

  numopt::NlpProblem p;
  p.cost = [&](const Vector& x) -> Vector {
    const auto& vals = cache.values(x);
    Vector r(2 * S + S * n);
    for (int i = 0; i < S; ++i) r.segment<2>(2 * i) = wc * (vals[i].head<2>() - target);
    for (int i = 0; i < S; ++i) {
      const Vector prev = i == 0 ? Vector(u_prev) : Vector(x.segment(cache.u_offset(i - 1), n));
      r.segment(2 * S + i * n, n) = wu * (x.segment(cache.u_offset(i), n) - prev);
    }
    return r;
  };
  p.cost_jacobian = [&](const Vector& x) -> Matrix {
    const auto& jacs = cache.jacobians(x);
    Matrix J = Matrix::Zero(2 * S + S * n, nx);
    for (int i = 0; i < S; ++i) J.block(2 * i, cache.q_offset(i), 2, n) = wc * jacs[i].topRows<2>();
    for (int i = 0; i < S; ++i) {
      J.block(2 * S + i * n, cache.u_offset(i), n, n).diagonal().setConstant(wu);
      if (i > 0) J.block(2 * S + i * n, cache.u_offset(i - 1), n, n).diagonal().setConstant(-wu);
    }
    return J;
  };
  p.equality = [&](const Vector& x) -> Vector {
    const auto& vals = cache.values(x);
    Vector h(S * n + 6 * S);
    for (int i = 0; i < S; ++i) {
      const Vector prev = i == 0 ? Vector(q_start) : cache.state(x, i - 1);
      h.segment(i * n, n) = cache.state(x, i) - prev - x.segment(cache.u_offset(i), n);
      h.segment<6>(S * n + 6 * i) = vals[i].segment<6>(2);
    }
    return h;
  };
  p.equality_jacobian = [&](const Vector& x) -> Matrix {
    const auto& jacs = cache.jacobians(x);
    Matrix J = Matrix::Zero(S * n + 6 * S, nx);
    for (int i = 0; i < S; ++i) {
      J.block(i * n, cache.q_offset(i), n, n).diagonal().setOnes();
      if (i > 0) J.block(i * n, cache.q_offset(i - 1), n, n).diagonal().setConstant(-1.0);
      J.block(i * n, cache.u_offset(i), n, n).diagonal().setConstant(-1.0);
      J.block(S * n + 6 * i, cache.q_offset(i), 6, n) = jacs[i].middleRows<6>(2);
    }
    return J;
  };
  p.inequality = [&](const Vector& x) -> Vector {
    const auto& vals = cache.values(x);
    Vector g(S * (E + P));
    for (int i = 0; i < S; ++i) g.segment(i * (E + P), E + P) = vals[i].tail(E + P);
    return g;
  };
  p.inequality_jacobian = [&](const Vector& x) -> Matrix {
    const auto& jacs = cache.jacobians(x);
    Matrix J = Matrix::Zero(S * (E + P), nx);
    for (int i = 0; i < S; ++i) J.block(i * (E + P), cache.q_offset(i), E + P, n) = jacs[i].bottomRows(E + P);
    return J;
  };
  p.lower.resize(nx);
  p.upper.resize(nx);
  p.initial.resize(nx);
  // Polishing moves the states slightly after the solve, so the solver works
  // with a bound a little inside the configured one.
  const double u_bound = cfg.max_transition * (1.0 - 1e-3);
  for (int i = 0; i < S; ++i) {
    p.lower.segment(cache.u_offset(i), n).setConstant(-u_bound);
    p.upper.segment(cache.u_offset(i), n).setConstant(u_bound);
    p.lower.segment(cache.q_offset(i), n) = model.q_min;
    p.upper.segment(cache.q_offset(i), n) = model.q_max;
    p.initial.segment(cache.u_offset(i), n).setZero();
    p.initial.segment(cache.q_offset(i), n) = q_start;
  }
  p.penalty = cfg.penalty;
  p.inner = cfg.inner;

  SegmentResult out;
  out.report = numopt::nlp_solve(p);
  const Vector& x = out.report.solution;

  std::vector<JointVector> q{q_start};
  std::vector<JointVector> u;
  for (int i = 0; i < S; ++i) {
    const JointVector target_q = polish(model, cache.state(x, i), ds.right_sole);
    const JointVector step = target_q - q.back();
    u.push_back(step);
    q.push_back(q[q.size() - 1] + step);
  }
  const int keep = feasible_prefix(model, ds, q, cfg);
  q.resize(static_cast<std::size_t>(keep) + 1);
  u.resize(static_cast<std::size_t>(keep));

  Trajectory& t = out.segment;
  t.q = q;
  t.u = u;
  for (const JointVector& qi : q) t.cop.push_back(modeled_cop(model, qi));
  t.target.assign(q.size(), 0);
  for (std::size_t i = 1; i < q.size(); ++i) {
    t.max_violation = std::max(t.max_violation, -std::min(0.0, check_state(model, ds, q[i], cfg).min_cop_margin));
  }
  out.progress = (t.cop.back() - target).norm() < (t.cop.front() - target).norm();
  return out;
}

JointVector reach_double_support(const RobotModel& model, const DoubleSupportConfig& ds, const PlannerConfig& cfg) {
  cfg.validate();
  const StateModel sm(model, ds, cfg);
  Vec2 centre = Vec2::Zero();
  for (const Vec2& s : ds.sensors_world) centre += s;
  centre /= static_cast<double>(kCellCount);

  Vector cached_x, cached_v;
  Vector jac_x;
  Matrix cached_j;
  const auto vals = [&](const Vector& q) -> const Vector& {
    if (!(cached_x.size() == q.size() && cached_x == q)) {
      cached_x = q;
      cached_v = sm.eval(q);
    }
    return cached_v;
  };
  const auto jac = [&](const Vector& q) -> const Matrix& {
    if (!(jac_x.size() == q.size() && jac_x == q)) {
      jac_x = q;
      cached_j = sm.jacobian(q);
    }
    return cached_j;
  };
  const int E = sm.edges, P = sm.pairs, n = model.joint_count();

  numopt::NlpProblem p;
  p.cost = [&](const Vector& q) -> Vector { return q - model.nominal_posture; };
  p.cost_jacobian = [&](const Vector&) -> Matrix { return Matrix::Identity(n, n); };
  p.equality = [&](const Vector& q) -> Vector {
    const Vector& v = vals(q);
    Vector h(8);
    h.head<6>() = v.segment<6>(2);
    h.tail<2>() = v.head<2>() - centre;
    return h;
  };
  p.equality_jacobian = [&](const Vector& q) -> Matrix {
    const Matrix& J = jac(q);
    Matrix out(8, n);
    out.topRows<6>() = J.middleRows<6>(2);
    out.bottomRows<2>() = J.topRows<2>();
    return out;
  };
  p.inequality = [&](const Vector& q) -> Vector { return vals(q).tail(E + P); };
  p.inequality_jacobian = [&](const Vector& q) -> Matrix { return jac(q).bottomRows(E + P); };
  p.lower = model.q_min;
  p.upper = model.q_max;
  p.initial = model.nominal_posture;
  p.penalty = cfg.penalty;
  p.inner = cfg.inner;

  const numopt::SolveReport rep = numopt::nlp_solve(p);
  const JointVector q = polish(model, rep.solution, ds.right_sole);
  const StateCheck c = check_state(model, ds, q, cfg);
  if (!c.ok) {
    throw Error(ErrorCode::kSolverStall,
                "no feasible posture for stance (" + std::to_string(ds.dx) + ", " + std::to_string(ds.dy) + ", " +
                    std::to_string(ds.dtheta) + "): foot residual " + std::to_string(c.foot_residual) +
                    ", margin " + std::to_string(c.min_cop_margin) + ", clearance " +
                    std::to_string(c.min_clearance));
  }
  return q;
}

PlanResult plan_trajectory(const RobotModel& model, const DoubleSupportConfig& ds, const JointVector& q_init,
                           const PlannerConfig& cfg) {
  cfg.validate();
  PlanResult out;
  out.landmarks = make_landmarks(model, ds, cfg.landmark_inset);
  const Vec2 c0 = modeled_cop(model, q_init);
  int k = 0;
  for (int j = 1; j < 4; ++j) {
    if ((out.landmarks.midpoints[j] - c0).norm() < (out.landmarks.midpoints[k] - c0).norm()) k = j;
  }
  out.targets.push_back(out.landmarks.midpoints[k]);
  for (int j = 1; j <= 4; ++j) out.targets.push_back(out.landmarks.points[(k + j) % 4]);
  out.targets.push_back(out.landmarks.midpoints[k]);

  Trajectory& traj = out.trajectory;
  traj.q.push_back(q_init);
  traj.cop.push_back(c0);
  traj.target.push_back(0);

  const int count = static_cast<int>(out.targets.size());
  int target = 0;
  double d_prev = (c0 - out.targets[0]).norm();
  JointVector u_prev = JointVector::Zero(model.joint_count());
  for (int s = 0; target < count && s < cfg.max_steps; ++s) {
    const SegmentResult seg = plan_segment(model, ds, traj.q.back(), out.targets[target], cfg, u_prev);
    for (std::size_t i = 1; i < seg.segment.q.size(); ++i) {
      traj.q.push_back(seg.segment.q[i]);
      traj.u.push_back(seg.segment.u[i - 1]);
      traj.cop.push_back(seg.segment.cop[i]);
      traj.target.push_back(target);
    }
    if (!seg.segment.u.empty()) u_prev = seg.segment.u.back();
    LandmarkVisit v;
    v.step = s + 1;
    v.target = target;
    v.d_prev = d_prev;
    v.d = (traj.cop.back() - out.targets[target]).norm();
    v.switched = v.d < cfg.arrival_radius || v.d_prev - v.d <= 0.0;
    out.log.push_back(v);
    if (v.switched) {
      ++target;
      if (target < count) d_prev = (traj.cop.back() - out.targets[target]).norm();
    } else {
      d_prev = v.d;
    }
  }
  out.complete = target == count;
  for (std::size_t i = 1; i < traj.q.size(); ++i) {
    const StateCheck c = check_state(model, ds, traj.q[i], cfg);
    traj.max_violation = std::max({traj.max_violation, -std::min(0.0, c.min_cop_margin), c.limit_violation,
                                   -std::min(0.0, c.min_clearance), c.foot_residual});
  }
  return out;
}

CertificationReport certify_plan(const RobotModel& model, const DoubleSupportConfig& ds, const PlanResult& plan,
                                 const PlannerConfig& cfg) {
  CertificationReport rep;
  const Trajectory& t = plan.trajectory;
  rep.states = static_cast<int>(t.q.size());
  rep.worst_cop_margin = std::numeric_limits<double>::infinity();
  rep.worst_clearance = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < t.q.size(); ++i) {
    const StateCheck c = check_state(model, ds, t.q[i], cfg);
    rep.worst_cop_margin = std::min(rep.worst_cop_margin, c.min_cop_margin);
    rep.worst_limit_violation = std::max(rep.worst_limit_violation, c.limit_violation);
    rep.worst_clearance = std::min(rep.worst_clearance, c.min_clearance);
    rep.worst_foot_residual = std::max(rep.worst_foot_residual, c.foot_residual);
    if (!c.ok) ++rep.failed_states;
  }
  if (rep.failed_states > 0) rep.failures.push_back(std::to_string(rep.failed_states) + " states fail the checker");

  rep.transitions_exact = t.u.size() + 1 == t.q.size();
  for (std::size_t i = 0; rep.transitions_exact && i < t.u.size(); ++i) {
    const JointVector rebuilt = t.q[i] + t.u[i];
    rep.transitions_exact = (rebuilt.array() == t.q[i + 1].array()).all();
  }
  if (!rep.transitions_exact) rep.failures.push_back("stored states do not equal q[i-1] + u[i-1]");
  for (const JointVector& u : t.u) rep.worst_transition = std::max(rep.worst_transition, u.cwiseAbs().maxCoeff());
  if (rep.worst_transition > cfg.max_transition) rep.failures.push_back("a transition exceeds the per-step bound");

  rep.switch_rule_ok = true;
  rep.log_monotone = true;
  for (std::size_t s = 0; s < plan.log.size(); ++s) {
    const LandmarkVisit& v = plan.log[s];
    if (v.switched && !(v.d < cfg.arrival_radius || v.d_prev - v.d < 0.0)) rep.switch_rule_ok = false;
    if (s > 0) {
      const LandmarkVisit& prev = plan.log[s - 1];
      const int expected = prev.target + (prev.switched ? 1 : 0);
      if (v.target != expected) rep.log_monotone = false;
    }
  }
  if (!rep.switch_rule_ok) rep.failures.push_back("a logged switch violates d < r or d_prev - d < 0");
  if (!rep.log_monotone) rep.failures.push_back("landmark index sequence is not monotone");

  const int last = static_cast<int>(plan.targets.size()) - 1;
  rep.reached_last = !plan.log.empty() && plan.log.back().switched && plan.log.back().target == last;
  if (!rep.reached_last) rep.failures.push_back("planning ended before the last landmark");

  double area = 0.0;
  for (std::size_t i = 0; i + 1 < plan.targets.size(); ++i) {
    const Vec2& a = plan.targets[i];
    const Vec2& b = plan.targets[i + 1];
    area += a.x() * b.y() - b.x() * a.y();
  }
  rep.counter_clockwise = area > 0.0;
  if (!rep.counter_clockwise) rep.failures.push_back("landmark targets are not visited counter-clockwise");
  return rep;
}

}  // namespace footcal
