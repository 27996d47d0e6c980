#include "footcal/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

#include "footcal/error.hpp"

namespace footcal {

Pose Pose::planar(double x, double y, double yaw) {
  Pose p;
  p.rotation = Eigen::AngleAxisd(yaw, Vec3::UnitZ()).toRotationMatrix();
  p.translation = Vec3(x, y, 0.0);
  return p;
}

Vec2 Pose::apply2d(const Vec2& p) const {
  const Vec3 w = (*this) * Vec3(p.x(), p.y(), 0.0);
  return w.head<2>();
}

double Pose::yaw() const { return std::atan2(rotation(1, 0), rotation(0, 0)); }

void Pose::orthonormalize() {
  Eigen::JacobiSVD<Mat3> svd(rotation, Eigen::ComputeFullU | Eigen::ComputeFullV);
  rotation = svd.matrixU() * svd.matrixV().transpose();
}

Mat3 axis_angle(const Vec3& unit_axis, double angle) {
  return Eigen::AngleAxisd(angle, unit_axis).toRotationMatrix();
}

Vec3 rotation_log(const Mat3& R) {
  const Vec3 vee(R(2, 1) - R(1, 2), R(0, 2) - R(2, 0), R(1, 0) - R(0, 1));
  const double cos_theta = std::clamp((R.trace() - 1.0) * 0.5, -1.0, 1.0);
  const double theta = std::acos(cos_theta);
  if (theta < 1e-4) {
    // theta / (2 sin theta) ~ 1/2 (1 + theta^2 / 6)
    return 0.5 * (1.0 + theta * theta / 6.0) * vee;
  }
  if (M_PI - theta < 1e-6) {
    // Near a half turn: axis from the dominant diagonal entry.
    const Mat3 B = 0.5 * (R + Mat3::Identity());
    Eigen::Index k;
    B.diagonal().maxCoeff(&k);
    Vec3 axis = B.col(k) / std::sqrt(std::max(B(k, k), 1e-300));
    return axis.normalized() * theta;
  }
  return theta / (2.0 * std::sin(theta)) * vee;
}

Eigen::Matrix<double, 6, 1> pose_error(const Pose& actual, const Pose& target) {
  Eigen::Matrix<double, 6, 1> e;
  e.head<3>() = actual.translation - target.translation;
  e.tail<3>() = rotation_log(target.rotation.transpose() * actual.rotation);
  return e;
}

namespace {

bool lex_less(const Vec3& a0, const Vec3& a1, const Vec3& b0, const Vec3& b1) {
  return std::tie(a0.x(), a0.y(), a0.z(), a1.x(), a1.y(), a1.z()) <
         std::tie(b0.x(), b0.y(), b0.z(), b1.x(), b1.y(), b1.z());
}

double segment_distance_ordered(const Vec3& p1, const Vec3& q1, const Vec3& p2, const Vec3& q2) {
  constexpr double kEps = 1e-15;
  const Vec3 d1 = q1 - p1;
  const Vec3 d2 = q2 - p2;
  const Vec3 r = p1 - p2;
  const double a = d1.squaredNorm();
  const double e = d2.squaredNorm();
  const double f = d2.dot(r);
  double s = 0.0;
  double t = 0.0;
  if (a <= kEps && e <= kEps) return r.norm();
  if (a <= kEps) {
    t = std::clamp(f / e, 0.0, 1.0);
  } else {
    const double c = d1.dot(r);
    if (e <= kEps) {
      s = std::clamp(-c / a, 0.0, 1.0);
    } else {
      const double b = d1.dot(d2);
      const double denom = a * e - b * b;
      s = denom > kEps * a * e ? std::clamp((b * f - c * e) / denom, 0.0, 1.0) : 0.0;
      t = (b * s + f) / e;
      if (t < 0.0) {
        t = 0.0;
        s = std::clamp(-c / a, 0.0, 1.0);
      } else if (t > 1.0) {
        t = 1.0;
        s = std::clamp((b - c) / a, 0.0, 1.0);
      }
    }
  }
  const Vec3 c1 = p1 + d1 * s;
  const Vec3 c2 = p2 + d2 * t;
  return (c1 - c2).norm();
}

}  // namespace

double segment_distance(const Vec3& a0, const Vec3& a1, const Vec3& b0, const Vec3& b1) {
  // Canonical argument order makes the result exactly symmetric.
  if (lex_less(b0, b1, a0, a1)) return segment_distance_ordered(b0, b1, a0, a1);
  return segment_distance_ordered(a0, a1, b0, b1);
}

double capsule_distance(const Capsule& c1, const Pose& pose1, const Capsule& c2, const Pose& pose2) {
  const double centerline = segment_distance(pose1 * c1.p0, pose1 * c1.p1, pose2 * c2.p0, pose2 * c2.p1);
  return centerline - (c1.radius + c2.radius);
}

namespace {

double cross(const Vec2& o, const Vec2& a, const Vec2& b) {
  return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
}

}  // namespace

Polygon convex_hull(const std::vector<Vec2>& points) {
  std::vector<Vec2> pts = points;
  std::sort(pts.begin(), pts.end(), [](const Vec2& a, const Vec2& b) {
    return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
  });
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (pts.size() < 3) throw Error(ErrorCode::kDegenerateHull, "fewer than three distinct points");

  // Andrew's monotone chain.
  std::vector<Vec2> hull(2 * pts.size());
  std::size_t k = 0;
  for (const Vec2& p : pts) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0.0) --k;
    hull[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, lower = k + 1; i-- > 0;) {
    while (k >= lower && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0.0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  if (hull.size() < 3 || std::abs(signed_area(hull)) < 1e-14) {
    throw Error(ErrorCode::kDegenerateHull, "points are collinear");
  }
  return hull;
}

double signed_area(const Polygon& poly) {
  double area = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Vec2& a = poly[i];
    const Vec2& b = poly[(i + 1) % poly.size()];
    area += a.x() * b.y() - b.x() * a.y();
  }
  return 0.5 * area;
}

Vec2 polygon_centroid(const Polygon& poly) {
  const double area = signed_area(poly);
  Vec2 c = Vec2::Zero();
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Vec2& a = poly[i];
    const Vec2& b = poly[(i + 1) % poly.size()];
    const double w = a.x() * b.y() - b.x() * a.y();
    c += (a + b) * w;
  }
  return c / (6.0 * area);
}

std::vector<double> edge_margins(const Polygon& ccw_poly, const Vec2& p) {
  std::vector<double> out(ccw_poly.size());
  for (std::size_t i = 0; i < ccw_poly.size(); ++i) {
    const Vec2& a = ccw_poly[i];
    const Vec2& b = ccw_poly[(i + 1) % ccw_poly.size()];
    const Vec2 edge = b - a;
    // Inward normal of a CCW edge is the edge rotated by +90 degrees.
    const Vec2 inward(-edge.y(), edge.x());
    out[i] = inward.dot(p - a) / edge.norm();
  }
  return out;
}

bool contains(const Polygon& ccw_poly, const Vec2& p, double tolerance) {
  for (double m : edge_margins(ccw_poly, p)) {
    if (m < -tolerance) return false;
  }
  return true;
}

namespace {

bool separated_along_edges(const Polygon& a, const Polygon& b) {
  for (std::size_t i = 0; i < a.size(); ++i) {
    const Vec2 edge = a[(i + 1) % a.size()] - a[i];
    const Vec2 axis(-edge.y(), edge.x());
    double amin = axis.dot(a[0]), amax = amin;
    for (const Vec2& p : a) {
      amin = std::min(amin, axis.dot(p));
      amax = std::max(amax, axis.dot(p));
    }
    double bmin = axis.dot(b[0]), bmax = bmin;
    for (const Vec2& p : b) {
      bmin = std::min(bmin, axis.dot(p));
      bmax = std::max(bmax, axis.dot(p));
    }
    // Strict gap required; touching projections are not separated.
    if (amax < bmin || bmax < amin) return true;
  }
  return false;
}

}  // namespace

bool convex_polygons_intersect(const Polygon& a, const Polygon& b) {
  return !separated_along_edges(a, b) && !separated_along_edges(b, a);
}

}  // namespace footcal
