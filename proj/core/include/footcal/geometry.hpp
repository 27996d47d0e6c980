#pragma once

#include <Eigen/Dense>

#include <vector>

namespace footcal {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Rigid transform. Rotation is kept as an orthonormal matrix.
struct Pose {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  static Pose identity() { return {}; }
  static Pose from_translation(const Vec3& t) { return {Mat3::Identity(), t}; }
  /// Rotation about world z by yaw, then translation (x, y, 0).
  static Pose planar(double x, double y, double yaw);

  Pose operator*(const Pose& rhs) const {
    return {rotation * rhs.rotation, rotation * rhs.translation + translation};
  }
  Vec3 operator*(const Vec3& p) const { return rotation * p + translation; }
  Pose inverse() const {
    const Mat3 rt = rotation.transpose();
    return {rt, -rt * translation};
  }
  /// Maps a ground-plane point (z = 0) and drops z.
  Vec2 apply2d(const Vec2& p) const;

  double yaw() const;
  void orthonormalize();
};

/// Rotation vector (axis * angle) of R, well-behaved near the identity.
Vec3 rotation_log(const Mat3& R);

Mat3 axis_angle(const Vec3& unit_axis, double angle);

/// 6-vector [translation difference; rotation_log(target^T * actual)].
Eigen::Matrix<double, 6, 1> pose_error(const Pose& actual, const Pose& target);

struct Capsule {
  Vec3 p0 = Vec3::Zero();
  Vec3 p1 = Vec3::Zero();
  double radius = 0.0;
};

/// Minimum distance between segments [a0, a1] and [b0, b1].
double segment_distance(const Vec3& a0, const Vec3& a1, const Vec3& b0, const Vec3& b1);

/// Centerline distance minus radius sum; negative means penetration.
double capsule_distance(const Capsule& c1, const Pose& pose1, const Capsule& c2, const Pose& pose2);

using Polygon = std::vector<Vec2>;

/// Convex hull with counter-clockwise vertices, collinear points dropped.
/// Throws kDegenerateHull when the points span no area.
Polygon convex_hull(const std::vector<Vec2>& points);

double signed_area(const Polygon& poly);

Vec2 polygon_centroid(const Polygon& poly);

/// Signed distance of p to each edge of a CCW polygon, positive inside.
std::vector<double> edge_margins(const Polygon& ccw_poly, const Vec2& p);

/// Closed point-in-convex-polygon test (boundary counts as inside).
bool contains(const Polygon& ccw_poly, const Vec2& p, double tolerance = 0.0);

/// Separating-axis overlap test for convex polygons. Touching counts as
/// overlapping.
bool convex_polygons_intersect(const Polygon& a, const Polygon& b);

}  // namespace footcal
