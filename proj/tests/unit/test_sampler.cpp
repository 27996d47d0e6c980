#include <gtest/gtest.h>

#include "footcal/error.hpp"
#include "footcal/model_io.hpp"
#include "footcal/sampler.hpp"

using namespace footcal;

namespace {

const RobotModel& nao() {
  static const RobotModel m = load_model(default_model_path());
  return m;
}

bool on_grid(double v, const AxisRange& r) {
  for (int i = 0; i < r.resolution; ++i)
    if (std::abs(r.node(i) - v) < 1e-12) return true;
  return false;
}

// Point-sampling overlap oracle for the two foot outlines.
bool outlines_overlap(const DoubleSupportConfig& ds, const RobotModel& m) {
  const auto polys = support_polygons(m, ds);
  double xmin = 1e9, xmax = -1e9, ymin = 1e9, ymax = -1e9;
  for (const Vec2& v : polys[0]) {
    xmin = std::min(xmin, v.x());
    xmax = std::max(xmax, v.x());
    ymin = std::min(ymin, v.y());
    ymax = std::max(ymax, v.y());
  }
  const int n = 120;
  for (int i = 0; i <= n; ++i)
    for (int j = 0; j <= n; ++j) {
      const Vec2 p(xmin + (xmax - xmin) * i / n, ymin + (ymax - ymin) * j / n);
      if (contains(polys[0], p, 1e-12) && contains(polys[1], p, 1e-12)) return true;
    }
  return false;
}

}  // namespace

TEST(AxisRange, NodesSpanTheRange) {
  const AxisRange r{-0.04, 0.08, 9};
  EXPECT_DOUBLE_EQ(r.node(0), -0.04);
  EXPECT_DOUBLE_EQ(r.node(8), 0.08);
  EXPECT_NEAR(r.node(4), 0.02, 1e-15);
}

TEST(ConfigDistance, WeightedPlanarAndYaw) {
  const RobotModel& m = nao();
  const auto a = make_double_support(m, 0.0, 0.10, 0.0);
  const auto b = make_double_support(m, 0.03, 0.14, 0.2);
  EXPECT_NEAR(config_distance(a, b, 1.0, 0.1), 0.05 + 0.02, 1e-12);
  EXPECT_NEAR(config_distance(a, b, 2.0, 0.0), 0.1, 1e-12);
  EXPECT_DOUBLE_EQ(config_distance(a, b, 1.0, 0.1), config_distance(b, a, 1.0, 0.1));
}

TEST(FeetCollide, AgreesWithPointSampling) {
  const RobotModel& m = nao();
  for (double dy : {0.02, 0.06, 0.08, 0.10, 0.14})
    for (double th : {-0.35, 0.0, 0.35}) {
      const auto ds = make_double_support(m, 0.0, dy, th);
      const bool sampled = outlines_overlap(ds, m);
      if (sampled) {
        EXPECT_TRUE(feet_collide(ds, m)) << dy << " " << th;
      }
      if (!feet_collide(ds, m)) {
        EXPECT_FALSE(sampled) << dy << " " << th;
      }
    }
  EXPECT_TRUE(feet_collide(make_double_support(m, 0.0, 0.0, 0.0), m));
}

TEST(SampleDoubleSupports, AcceptedSetSatisfiesEveryRule) {
  const RobotModel& m = nao();
  SamplerConfig cfg;
  const auto out = sample_double_supports(cfg, m);
  ASSERT_EQ(out.size(), 5u);
  for (std::size_t i = 0; i < out.size(); ++i) {
    EXPECT_TRUE(on_grid(out[i].dx, cfg.dx));
    EXPECT_TRUE(on_grid(out[i].dy, cfg.dy));
    EXPECT_TRUE(on_grid(out[i].dtheta, cfg.dtheta));
    EXPECT_FALSE(outlines_overlap(out[i], m));
    for (std::size_t j = 0; j < i; ++j) EXPECT_GT(config_distance(out[i], out[j], cfg.w_d, cfg.w_o), cfg.threshold);
  }
}

TEST(SampleDoubleSupports, SeedDeterminesTheSequence) {
  const RobotModel& m = nao();
  SamplerConfig cfg;
  const auto a = sample_double_supports(cfg, m);
  const auto b = sample_double_supports(cfg, m);
  cfg.seed = 2;
  const auto c = sample_double_supports(cfg, m);
  bool same_c = true;
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].dx, b[i].dx);
    EXPECT_EQ(a[i].dy, b[i].dy);
    EXPECT_EQ(a[i].dtheta, b[i].dtheta);
    same_c = same_c && a[i].dx == c[i].dx && a[i].dy == c[i].dy && a[i].dtheta == c[i].dtheta;
  }
  EXPECT_FALSE(same_c);
}

TEST(SampleDoubleSupports, ImpossibleThresholdStalls) {
  SamplerConfig cfg;
  cfg.threshold = 1.0;
  cfg.max_consecutive_rejections = 500;
  try {
    sample_double_supports(cfg, nao());
    FAIL() << "expected a stall";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kSamplerStall);
    EXPECT_NE(std::string(e.what()).find("threshold"), std::string::npos);
  }
}

TEST(SamplerConfig, ValidationRejectsMalformedRanges) {
  SamplerConfig cfg;
  cfg.dx.resolution = 1;
  EXPECT_THROW(cfg.validate(), Error);
  cfg = SamplerConfig{};
  cfg.dy = {0.2, 0.1, 4};
  EXPECT_THROW(cfg.validate(), Error);
  cfg = SamplerConfig{};
  cfg.threshold = 0.0;
  EXPECT_THROW(cfg.validate(), Error);
}
