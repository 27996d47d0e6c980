#include "footcal/model.hpp"

#include <cmath>

#include "footcal/error.hpp"

namespace footcal {

double RobotModel::total_mass() const {
  double m = 0.0;
  for (const Link& l : links) m += l.mass;
  return m;
}

namespace {

void require(bool ok, ErrorCode code, const std::string& msg) {
  if (!ok) throw Error(code, msg);
}

bool is_convex_quad(const std::array<Vec2, kCellsPerFoot>& pts) {
  try {
    return convex_hull(std::vector<Vec2>(pts.begin(), pts.end())).size() == kCellsPerFoot;
  } catch (const Error&) {
    return false;
  }
}

}  // namespace

void RobotModel::finalize() {
  require(!links.empty(), ErrorCode::kInvalidArgument, "model has no links");
  require(links[0].parent == -1, ErrorCode::kInvalidArgument, "first link must be the root");
  int joints = 0;
  for (std::size_t i = 0; i < links.size(); ++i) {
    Link& l = links[i];
    if (i > 0) {
      require(l.parent >= 0 && l.parent < static_cast<int>(i), ErrorCode::kInvalidArgument,
              "link '" + l.name + "' must reference an earlier parent");
    }
    require(l.mass >= 0.0, ErrorCode::kInvalidArgument, "negative mass on link '" + l.name + "'");
    if (l.axis.norm() > 0.0) {
      require(std::abs(l.axis.norm() - 1.0) < 1e-9, ErrorCode::kInvalidArgument,
              "joint axis of '" + l.name + "' is not a unit vector");
      l.joint = joints++;
    } else {
      l.joint = -1;
    }
  }
  require(links[0].joint == -1, ErrorCode::kInvalidArgument, "root link cannot carry a joint");
  require(q_min.size() == joints && q_max.size() == joints, ErrorCode::kDimensionMismatch,
          "joint limit vectors must have one entry per joint");
  require((q_min.array() < q_max.array()).all(), ErrorCode::kInvalidArgument, "q_min must be < q_max");
  if (nominal_posture.size() == 0) nominal_posture = 0.5 * (q_min + q_max);
  require(nominal_posture.size() == joints, ErrorCode::kDimensionMismatch, "nominal posture dimension");
  require(total_mass() > 0.0, ErrorCode::kInvalidArgument, "total mass must be positive");
  for (const LinkCapsule& c : capsules) {
    require(c.capsule.radius > 0.0, ErrorCode::kInvalidArgument, "capsule '" + c.name + "' radius must be > 0");
    require(c.link >= 0 && c.link < static_cast<int>(links.size()), ErrorCode::kInvalidArgument,
            "capsule '" + c.name + "' references an unknown link");
  }
  for (const auto& [a, b] : collision_pairs) {
    require(a >= 0 && b >= 0 && a < static_cast<int>(capsules.size()) && b < static_cast<int>(capsules.size()) &&
                a != b,
            ErrorCode::kInvalidArgument, "collision pair references an unknown capsule");
  }
  require(foot_length > 0.0, ErrorCode::kInvalidArgument, "foot length must be positive");
  require(gravity > 0.0, ErrorCode::kInvalidArgument, "gravity must be positive");
  for (FootLayout& f : feet) {
    require(f.sole_link >= 0 && f.sole_link < static_cast<int>(links.size()), ErrorCode::kInvalidArgument,
            "foot sole link out of range");
    require(is_convex_quad(f.sensors), ErrorCode::kInvalidArgument, "sensor points must form a convex quadrilateral");
    if (f.sensing_polygon.empty()) {
      f.sensing_polygon = convex_hull(std::vector<Vec2>(f.sensors.begin(), f.sensors.end()));
    } else {
      f.sensing_polygon = convex_hull(f.sensing_polygon);
    }
    f.support_polygon = convex_hull(f.support_polygon);
    for (const Vec2& v : f.sensing_polygon) {
      require(contains(f.support_polygon, v, 1e-12), ErrorCode::kInvalidArgument,
              "sensing polygon must lie inside the support polygon");
    }
  }
  require(feet[0].sole_link == 0, ErrorCode::kInvalidArgument, "the left sole must be the root link");
}

DoubleSupportConfig make_double_support(const RobotModel& model, double dx, double dy, double dtheta) {
  DoubleSupportConfig ds;
  ds.dx = dx;
  ds.dy = dy;
  ds.dtheta = dtheta;
  ds.right_sole = Pose::planar(dx, -dy, dtheta);
  for (int i = 0; i < kCellsPerFoot; ++i) {
    ds.sensors_world[i] = model.feet[0].sensors[i];
    ds.sensors_world[kCellsPerFoot + i] = ds.right_sole.apply2d(model.feet[1].sensors[i]);
  }
  return ds;
}

std::vector<Pose> forward_kinematics(const RobotModel& model, const JointVector& q) {
  if (q.size() != model.joint_count()) {
    throw Error(ErrorCode::kDimensionMismatch, "joint vector has " + std::to_string(q.size()) +
                                                   " entries, model has " + std::to_string(model.joint_count()));
  }
  std::vector<Pose> poses(model.links.size());
  poses[0] = Pose::identity();
  for (std::size_t i = 1; i < model.links.size(); ++i) {
    const Link& l = model.links[i];
    Pose local = l.origin;
    if (l.joint >= 0) local.rotation = local.rotation * axis_angle(l.axis, q[l.joint]);
    poses[i] = poses[l.parent] * local;
  }
  return poses;
}

Vec3 modeled_com(const RobotModel& model, const std::vector<Pose>& poses) {
  Vec3 acc = Vec3::Zero();
  double mass = 0.0;
  for (std::size_t i = 0; i < model.links.size(); ++i) {
    const Link& l = model.links[i];
    acc += l.mass * (poses[i] * l.com);
    mass += l.mass;
  }
  return acc / mass;
}

Vec3 modeled_com(const RobotModel& model, const JointVector& q) {
  return modeled_com(model, forward_kinematics(model, q));
}

Vec2 modeled_cop(const RobotModel& model, const JointVector& q) { return modeled_com(model, q).head<2>(); }

Pose foot_transform(const RobotModel& model, const std::vector<Pose>& poses) {
  return poses[model.feet[0].sole_link].inverse() * poses[model.feet[1].sole_link];
}

Pose foot_transform(const RobotModel& model, const JointVector& q) {
  return foot_transform(model, forward_kinematics(model, q));
}

Polygon sensing_polygon(const RobotModel& model, const DoubleSupportConfig& ds) {
  (void)model;
  return convex_hull(std::vector<Vec2>(ds.sensors_world.begin(), ds.sensors_world.end()));
}

std::array<Polygon, 2> support_polygons(const RobotModel& model, const DoubleSupportConfig& ds) {
  std::array<Polygon, 2> out;
  out[0] = model.feet[0].support_polygon;
  for (const Vec2& v : model.feet[1].support_polygon) out[1].push_back(ds.right_sole.apply2d(v));
  return out;
}

std::vector<double> collision_distances(const RobotModel& model, const std::vector<Pose>& poses) {
  std::vector<double> out;
  out.reserve(model.collision_pairs.size());
  for (const auto& [a, b] : model.collision_pairs) {
    const LinkCapsule& ca = model.capsules[a];
    const LinkCapsule& cb = model.capsules[b];
    out.push_back(capsule_distance(ca.capsule, poses[ca.link], cb.capsule, poses[cb.link]));
  }
  return out;
}

bool within_limits(const RobotModel& model, const JointVector& q, double slack) {
  return q.size() == model.joint_count() && ((q - model.q_min).array() >= -slack).all() &&
         ((model.q_max - q).array() >= -slack).all();
}

}  // namespace footcal
