#include <gtest/gtest.h>

#include <chrono>
#include <random>

#include "footcal/error.hpp"
#include "footcal/manual_cal.hpp"
#include "footcal/model_io.hpp"

using namespace footcal;

namespace {

const RobotModel& nao() {
  static const RobotModel m = load_model(default_model_path());
  return m;
}

CorrectionParams random_correction(std::mt19937& rng, double scale) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Eigen::VectorXd v(CorrectionParams::kSize);
  for (int i = 0; i < v.size(); ++i) v[i] = u(rng);
  return CorrectionParams::from_vector(v);
}

struct Synthetic {
  std::vector<GridSample> samples;
  std::vector<Vec2> truths;
};

// Samples whose truths are generated by a known correction.
Synthetic synthetic(const CorrectionParams& gen, int n, std::mt19937& rng) {
  std::uniform_real_distribution<double> px(-0.05, 0.08), py(-0.03, 0.03), f(0.0, 15.0);
  Synthetic s;
  for (int k = 0; k < n; ++k) {
    GridSample g;
    g.cop = Vec2(px(rng), py(rng));
    for (double& fi : g.forces) fi = f(rng);
    g.hole = g.cop;
    s.samples.push_back(g);
    s.truths.push_back(corrected_cop(g.cop, g.forces, gen));
  }
  return s;
}

}  // namespace

TEST(CalibrateCell, SinglePointIsExact) {
  const LoadCellParams truth{52.0, -23.0};
  const double s0 = cell_voltage(truth, 0.0), sg = cell_voltage(truth, 9.81);
  const LoadCellParams p = calibrate_cell(s0, sg, 9.81);
  EXPECT_NEAR(p.a, truth.a, 1e-10);
  EXPECT_NEAR(p.b, truth.b, 1e-10);
  EXPECT_THROW(calibrate_cell(0.4, 0.4, 9.81), Error);
  EXPECT_THROW(calibrate_cell(0.4, 0.5, 0.0), Error);
}

TEST(Correction, VectorPackingRoundTrips) {
  std::mt19937 rng(1);
  const CorrectionParams c = random_correction(rng, 1.0);
  const CorrectionParams back = CorrectionParams::from_vector(c.to_vector());
  EXPECT_EQ(back.a, c.a);
  EXPECT_EQ(back.m, c.m);
  EXPECT_EQ(back.b, c.b);
  EXPECT_EQ(back.n, c.n);
  EXPECT_THROW(CorrectionParams::from_vector(Eigen::VectorXd::Zero(5)), Error);
}

TEST(Correction, DesignMatchesPolynomial) {
  const Vec2 p(0.03, -0.02);
  const std::array<double, 4> f{1.0, 2.0, 3.0, 4.0};
  CorrectionParams c;
  c.a = {0.5, 0.01, -0.02, 0.001};
  c.m = {1e-4, -2e-4, 3e-4, -4e-4};
  c.b = {-0.3, 0.02, 0.03, -0.002};
  c.n = {2e-4, 1e-4, -1e-4, 5e-5};
  const double dx = c.a[0] * p.x() * p.x() + c.a[1] * p.x() + c.a[2] * p.y() + c.a[3] + c.m[0] * f[0] +
                    c.m[1] * f[1] + c.m[2] * f[2] + c.m[3] * f[3];
  const double dy = c.b[0] * p.y() * p.y() + c.b[1] * p.y() + c.b[2] * p.x() + c.b[3] + c.n[0] * f[0] +
                    c.n[1] * f[1] + c.n[2] * f[2] + c.n[3] * f[3];
  EXPECT_NEAR(correction_offset(p, f, c).x(), dx, 1e-15);
  EXPECT_NEAR(correction_offset(p, f, c).y(), dy, 1e-15);
  EXPECT_LT((correction_design(p, f) * c.to_vector() - Vec2(dx, dy)).norm(), 1e-15);
  EXPECT_EQ((corrected_cop(p, f, CorrectionParams{}) - p).norm(), 0.0);
}

TEST(FitCorrection, RecoversKnownGenerator) {
  std::mt19937 rng(2);
  CorrectionParams gen = random_correction(rng, 0.01);
  for (double& v : gen.m) v *= 0.01;
  for (double& v : gen.n) v *= 0.01;
  const Synthetic s = synthetic(gen, 126, rng);
  const CorrectionFit fit = fit_correction(s.samples, s.truths);
  EXPECT_LT((fit.params.to_vector() - gen.to_vector()).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(FitCorrection, UnbiasedSamplesGiveZeroParams) {
  std::mt19937 rng(3);
  const Synthetic s = synthetic(CorrectionParams{}, 60, rng);
  const CorrectionFit fit = fit_correction(s.samples, s.truths);
  EXPECT_LT(fit.params.to_vector().cwiseAbs().maxCoeff(), 1e-10);
}

TEST(FitCorrection, UnderdeterminedThrows) {
  std::mt19937 rng(4);
  Synthetic s = synthetic(CorrectionParams{}, 10, rng);
  EXPECT_THROW(fit_correction(s.samples, s.truths), Error);
  Synthetic same = synthetic(CorrectionParams{}, 40, rng);
  for (std::size_t k = 0; k < same.truths.size(); ++k) same.truths[k] = Vec2(0.01 * double(k % 3), 0.0);
  EXPECT_THROW(fit_correction(same.samples, same.truths), Error);
}

TEST(FitCorrection, JacobianMatchesFiniteDifferences) {
  std::mt19937 rng(5);
  const Synthetic s = synthetic(random_correction(rng, 0.01), 40, rng);
  const auto p = correction_problem(s.samples, s.truths);
  for (int k = 0; k < 10; ++k) {
    const Eigen::VectorXd x = random_correction(rng, 0.1).to_vector();
    EXPECT_LT(numopt::jacobian_relative_error(p.jacobian(x), numopt::finite_diff_jacobian(p.residual, x)), 1e-4);
  }
}

TEST(Mae, MeanAndPopulationStd) {
  const std::array<double, 4> m{1.0, 2.0, 3.0, 4.0}, t{0.0, 0.0, 0.0, 0.0};
  const MaeReport r = mae_grf(m, t);
  EXPECT_DOUBLE_EQ(r.mean, 2.5);
  EXPECT_NEAR(r.std, std::sqrt(1.25), 1e-15);
  EXPECT_EQ(r.count, 4);
  EXPECT_EQ(r.units, "N");
  const std::array<Vec2, 2> a{Vec2(0.003, 0.004), Vec2(0, 0)}, b{Vec2(0, 0), Vec2(0, 0)};
  const MaeReport c = mae_cop(a, b);
  EXPECT_NEAR(c.mean, 2.5, 1e-12);
  EXPECT_EQ(c.units, "mm");
}

TEST(GridProtocol, StandardGridIsInsideTheSensingPolygon) {
  const GridProtocol g = GridProtocol::standard(nao(), Foot::kLeft);
  EXPECT_EQ(g.holes.size(), 18u);
  EXPECT_EQ(g.weights_kg.size(), 7u);
  for (const Vec2& h : g.holes) EXPECT_TRUE(contains(nao().feet[0].sensing_polygon, h));
}

TEST(GridProtocol, PerfectShoeMeasuresTruth) {
  const RobotModel& m = nao();
  const CellParams8 truth = homogeneous_truth({50.0, -25.0});
  const ShoeParams shoe = physical_shoe(m, truth, Foot::kRight);
  const GridRun run = run_grid_protocol(m, Foot::kRight, shoe, shoe, GridProtocol::standard(m, Foot::kRight),
                                        NoiseModel::noiseless());
  ASSERT_EQ(run.samples.size(), 126u);
  for (std::size_t k = 0; k < run.samples.size(); ++k) {
    EXPECT_LT((run.samples[k].cop - run.truths[k]).norm(), 1e-12);
    EXPECT_NEAR(run.samples[k].grf, run.samples[k].weight_kg * m.gravity, 1e-9);
  }
}

TEST(GridProtocol, NonIncreasingWeightsRejected) {
  const RobotModel& m = nao();
  const ShoeParams shoe = physical_shoe(m, homogeneous_truth({50.0, -25.0}), Foot::kLeft);
  GridProtocol g = GridProtocol::standard(m, Foot::kLeft);
  g.weights_kg = {1.0, 1.0};
  EXPECT_THROW(run_grid_protocol(m, Foot::kLeft, shoe, shoe, g, NoiseModel::noiseless()), Error);
}

TEST(ManualCalibration, CorrectionImprovesBiasedGrid) {
  const auto t0 = std::chrono::steady_clock::now();
  const ManualCalibration cal = run_manual_calibration(nao(), heterogeneous_truth({50.0, -25.0}, 0.3, 2),
                                                       ManualBias{}, NoiseModel::standard(4));
  EXPECT_LT(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(), 30.0);
  for (const auto& shoe : cal.shoes) {
    EXPECT_GE(shoe.cop_measured.mean, 3.0 * shoe.cop_corrected.mean);
    EXPECT_LE(shoe.cop_corrected.mean, 2.0);
    EXPECT_LE(shoe.grf.mean, 0.1);
    EXPECT_EQ(shoe.cop_corrected.count, 126);
  }
}

TEST(ManualCalibration, NoBiasNoNoiseIsExact) {
  ManualBias none;
  none.position_perturbation = 0.0;
  none.gain_error = 0.0;
  const ManualCalibration cal =
      run_manual_calibration(nao(), heterogeneous_truth({50.0, -25.0}, 0.3, 2), none, NoiseModel::noiseless());
  for (const auto& shoe : cal.shoes) {
    EXPECT_LT(shoe.cop_measured.mean, 1e-9);
    EXPECT_LT(shoe.grf.mean, 1e-9);
    EXPECT_LT(shoe.correction.to_vector().cwiseAbs().maxCoeff(), 1e-8);
  }
}
