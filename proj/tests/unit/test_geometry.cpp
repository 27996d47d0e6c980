#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "footcal/error.hpp"
#include "footcal/geometry.hpp"

using namespace footcal;

namespace {

double brute_segment_distance(const Vec3& a0, const Vec3& a1, const Vec3& b0, const Vec3& b1, int n = 400) {
  double best = 1e300;
  for (int i = 0; i <= n; ++i) {
    const Vec3 p = a0 + (a1 - a0) * (double(i) / n);
    for (int j = 0; j <= n; ++j) best = std::min(best, (p - (b0 + (b1 - b0) * (double(j) / n))).norm());
  }
  return best;
}

// Jarvis march, written independently of the library's hull.
Polygon gift_wrap(const std::vector<Vec2>& pts) {
  const auto cross = [](const Vec2& o, const Vec2& a, const Vec2& b) {
    return (a - o).x() * (b - o).y() - (a - o).y() * (b - o).x();
  };
  std::size_t start = 0;
  for (std::size_t i = 1; i < pts.size(); ++i)
    if (pts[i].x() < pts[start].x() || (pts[i].x() == pts[start].x() && pts[i].y() < pts[start].y())) start = i;
  Polygon hull;
  std::size_t p = start;
  do {
    hull.push_back(pts[p]);
    std::size_t q = (p + 1) % pts.size();
    for (std::size_t r = 0; r < pts.size(); ++r) {
      const double c = cross(pts[p], pts[q], pts[r]);
      if (c < 0 || (c == 0 && (pts[r] - pts[p]).norm() > (pts[q] - pts[p]).norm())) q = r;
    }
    p = q;
  } while (p != start && hull.size() <= pts.size());
  return hull;
}

Vec3 random_vec(std::mt19937& rng, double s) {
  std::uniform_real_distribution<double> u(-s, s);
  const double x = u(rng), y = u(rng);
  return Vec3(x, y, u(rng));
}

}  // namespace

TEST(SegmentDistance, MatchesBruteForceSampling) {
  std::mt19937 rng(1);
  for (int k = 0; k < 25; ++k) {
    const Vec3 a0 = random_vec(rng, 1), a1 = random_vec(rng, 1), b0 = random_vec(rng, 1), b1 = random_vec(rng, 1);
    const double d = segment_distance(a0, a1, b0, b1);
    const double brute = brute_segment_distance(a0, a1, b0, b1);
    EXPECT_LE(d, brute + 1e-12);
    EXPECT_NEAR(d, brute, 1e-2);
  }
}

TEST(SegmentDistance, ParallelAndDegenerateSegments) {
  EXPECT_NEAR(segment_distance(Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0.5, 1, 0), Vec3(2, 1, 0)), 1.0, 1e-12);
  EXPECT_NEAR(segment_distance(Vec3(0, 0, 0), Vec3(0, 0, 0), Vec3(3, 4, 0), Vec3(3, 4, 0)), 5.0, 1e-12);
  EXPECT_NEAR(segment_distance(Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(2, 0, 0), Vec3(3, 0, 0)), 1.0, 1e-12);
}

TEST(CapsuleDistance, TransformsAndRadiiMatchBruteForce) {
  std::mt19937 rng(2);
  for (int k = 0; k < 10; ++k) {
    Capsule c1{random_vec(rng, 0.1), random_vec(rng, 0.1), 0.02};
    Capsule c2{random_vec(rng, 0.1), random_vec(rng, 0.1), 0.03};
    const Pose p1{axis_angle(random_vec(rng, 1).normalized(), 0.7), random_vec(rng, 0.2)};
    const Pose p2{axis_angle(random_vec(rng, 1).normalized(), -0.4), random_vec(rng, 0.2)};
    const double brute = brute_segment_distance(p1 * c1.p0, p1 * c1.p1, p2 * c2.p0, p2 * c2.p1) - 0.05;
    EXPECT_NEAR(capsule_distance(c1, p1, c2, p2), brute, 1e-3);
  }
}

TEST(ConvexHull, MatchesGiftWrapping) {
  std::mt19937 rng(4);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int k = 0; k < 20; ++k) {
    std::vector<Vec2> pts;
    for (int i = 0; i < 30; ++i) pts.emplace_back(u(rng), u(rng));
    const Polygon a = convex_hull(pts);
    Polygon b = gift_wrap(pts);
    ASSERT_EQ(a.size(), b.size());
    // Same cyclic sequence: rotate b to start at a[0].
    auto it = std::find_if(b.begin(), b.end(), [&](const Vec2& v) { return (v - a[0]).norm() == 0.0; });
    ASSERT_NE(it, b.end());
    std::rotate(b.begin(), it, b.end());
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ((a[i] - b[i]).norm(), 0.0);
    EXPECT_GT(signed_area(a), 0.0);
  }
}

TEST(ConvexHull, DropsCollinearAndRejectsDegenerate) {
  const Polygon sq = convex_hull({{0, 0}, {1, 0}, {2, 0}, {2, 2}, {0, 2}, {1, 1}});
  EXPECT_EQ(sq.size(), 4u);
  EXPECT_NEAR(signed_area(sq), 4.0, 1e-15);
  EXPECT_NEAR((polygon_centroid(sq) - Vec2(1, 1)).norm(), 0.0, 1e-15);
  EXPECT_THROW(convex_hull({{0, 0}, {1, 1}, {2, 2}}), Error);
}

TEST(EdgeMargins, SignedDistancesOfUnitSquare) {
  const Polygon sq{{0, 0}, {1, 0}, {1, 1}, {0, 1}};
  const auto m = edge_margins(sq, Vec2(0.25, 0.5));
  ASSERT_EQ(m.size(), 4u);
  EXPECT_NEAR(m[0], 0.5, 1e-15);
  EXPECT_NEAR(m[1], 0.75, 1e-15);
  EXPECT_NEAR(m[2], 0.5, 1e-15);
  EXPECT_NEAR(m[3], 0.25, 1e-15);
  const auto outside = edge_margins(sq, Vec2(1.5, 0.5));
  EXPECT_LT(*std::min_element(outside.begin(), outside.end()), 0);
  EXPECT_TRUE(contains(sq, Vec2(1, 1)));
  EXPECT_FALSE(contains(sq, Vec2(1.01, 0.5)));
  EXPECT_TRUE(contains(sq, Vec2(1.01, 0.5), 0.02));
}

TEST(PolygonIntersect, AgreesWithPointSampling) {
  std::mt19937 rng(9);
  std::uniform_real_distribution<double> u(-1, 1), s(0.2, 0.6);
  for (int k = 0; k < 40; ++k) {
    const Vec2 c1(u(rng), u(rng)), c2(u(rng), u(rng));
    const double r1 = s(rng), r2 = s(rng);
    const Polygon a = convex_hull({c1 + Vec2(-r1, -r1), c1 + Vec2(r1, -r1), c1 + Vec2(r1, r1), c1 + Vec2(-r1, r1)});
    const Polygon b = convex_hull({c2 + Vec2(0, -r2), c2 + Vec2(r2, 0), c2 + Vec2(0, r2), c2 + Vec2(-r2, 0)});
    bool sampled = false;
    for (int i = 0; i <= 200 && !sampled; ++i)
      for (int j = 0; j <= 200 && !sampled; ++j) {
        const Vec2 p = c1 + Vec2(-r1 + 2 * r1 * i / 200.0, -r1 + 2 * r1 * j / 200.0);
        sampled = contains(b, p, 1e-12);
      }
    const bool sat = convex_polygons_intersect(a, b);
    // Sampling can only miss slivers thinner than the grid pitch.
    if (sampled) {
      EXPECT_TRUE(sat);
    }
    if (!sat) {
      EXPECT_FALSE(sampled);
    }
  }
}

TEST(Rotation, LogInvertsAxisAngle) {
  std::mt19937 rng(6);
  std::uniform_real_distribution<double> ang(-3.0, 3.0);
  for (int k = 0; k < 50; ++k) {
    const Vec3 axis = random_vec(rng, 1).normalized();
    const double a = ang(rng);
    EXPECT_LT((rotation_log(axis_angle(axis, a)) - axis * a).norm(), 1e-9);
  }
  EXPECT_LT(rotation_log(axis_angle(Vec3::UnitZ(), 1e-12)).norm(), 1e-11);
}

TEST(Pose, ErrorVanishesOnlyAtTarget) {
  const Pose a = Pose::planar(0.1, -0.2, 0.3);
  EXPECT_LT(pose_error(a, a).norm(), 1e-15);
  EXPECT_NEAR(pose_error(Pose::planar(0.1, -0.2, 0.35), a)[5], 0.05, 1e-12);
  EXPECT_LT(((a * a.inverse()).translation).norm(), 1e-15);
  EXPECT_NEAR(a.yaw(), 0.3, 1e-15);
  EXPECT_NEAR((a.apply2d(Vec2(1, 0)) - Vec2(0.1 + std::cos(0.3), -0.2 + std::sin(0.3))).norm(), 0.0, 1e-15);
}
