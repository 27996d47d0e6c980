#pragma once

// Quasi-static kinematic humanoid model. The left sole is the kinematic root
// and coincides with the world frame: x forward, y left, z up, ground z = 0.

#include <array>
#include <string>
#include <vector>

#include "footcal/geometry.hpp"

namespace footcal {

using JointVector = Eigen::VectorXd;

constexpr double kGravity = 9.81;
constexpr int kCellsPerFoot = 4;
constexpr int kCellCount = 2 * kCellsPerFoot;

enum class Foot { kLeft = 0, kRight = 1 };

struct Link {
  std::string name;
  int parent = -1;
  /// Unit joint axis in the link frame; zero for a rigidly attached link.
  Vec3 axis = Vec3::Zero();
  /// Transform from the parent frame to this link's joint frame.
  Pose origin;
  double mass = 0.0;
  Vec3 com = Vec3::Zero();
  /// Index into the joint vector, or -1 for fixed links. Assigned at load.
  int joint = -1;
};

struct LinkCapsule {
  std::string name;
  int link = -1;
  Capsule capsule;
};

struct FootLayout {
  int sole_link = -1;
  /// Load-cell mounting points t_1..t_4 in the sole frame, in cell order.
  std::array<Vec2, kCellsPerFoot> sensors;
  /// Sensing polygon in the sole frame (CCW).
  Polygon sensing_polygon;
  /// Foot outline in the sole frame (CCW).
  Polygon support_polygon;
};

struct RobotModel {
  std::string name;
  std::vector<Link> links;
  JointVector q_min;
  JointVector q_max;
  /// Relaxed standing posture used to seed the stance solver.
  JointVector nominal_posture;
  std::vector<LinkCapsule> capsules;
  std::vector<std::pair<int, int>> collision_pairs;
  std::array<FootLayout, 2> feet;
  double foot_length = 0.0;
  double gravity = kGravity;

  int joint_count() const { return static_cast<int>(q_min.size()); }
  double total_mass() const;
  double weight() const { return total_mass() * gravity; }
  const FootLayout& foot(Foot f) const { return feet[static_cast<int>(f)]; }

  /// Assigns joint indices in link order and checks every model invariant.
  /// Throws footcal::Error on violation.
  void finalize();
};

/// Right-foot placement relative to the left foot. dy is the lateral
/// separation, so the right sole sits at (dx, -dy) in the left-sole frame.
struct DoubleSupportConfig {
  double dx = 0.0;
  double dy = 0.0;
  double dtheta = 0.0;
  /// Right sole pose in the world (left-sole) frame.
  Pose right_sole;
  /// World positions of all 8 cells, left 1..4 then right 1..4.
  std::array<Vec2, kCellCount> sensors_world;
};

DoubleSupportConfig make_double_support(const RobotModel& model, double dx, double dy, double dtheta);

/// World pose of every link.
std::vector<Pose> forward_kinematics(const RobotModel& model, const JointVector& q);

Vec3 modeled_com(const RobotModel& model, const JointVector& q);
Vec3 modeled_com(const RobotModel& model, const std::vector<Pose>& poses);

/// Ground projection of the CoM (quasi-static CoP).
Vec2 modeled_cop(const RobotModel& model, const JointVector& q);

/// Right sole pose expressed in the left sole frame.
Pose foot_transform(const RobotModel& model, const JointVector& q);
Pose foot_transform(const RobotModel& model, const std::vector<Pose>& poses);

/// Convex hull of the 8 world-frame sensor points.
Polygon sensing_polygon(const RobotModel& model, const DoubleSupportConfig& ds);

/// Foot outlines in world frame, left then right.
std::array<Polygon, 2> support_polygons(const RobotModel& model, const DoubleSupportConfig& ds);

/// Signed distance of every configured collision pair.
std::vector<double> collision_distances(const RobotModel& model, const std::vector<Pose>& poses);

bool within_limits(const RobotModel& model, const JointVector& q, double slack = 0.0);

}  // namespace footcal
