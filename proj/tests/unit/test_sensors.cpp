#include <gtest/gtest.h>

#include <random>

#include "footcal/error.hpp"
#include "footcal/model_io.hpp"
#include "footcal/sensors.hpp"

using namespace footcal;

namespace {

const RobotModel& nao() {
  static const RobotModel m = load_model(default_model_path());
  return m;
}

}  // namespace

TEST(LoadCell, AffineMapAndInverse) {
  const LoadCellParams p{48.0, -12.5};
  EXPECT_DOUBLE_EQ(cell_force(p, 0.5), 11.5);
  for (double f : {0.0, 3.0, 17.25}) EXPECT_NEAR(cell_force(p, cell_voltage(p, f)), f, 1e-12);
}

TEST(MeasuredCop, ForceWeightedAverage) {
  const std::array<double, 3> f{1.0, 2.0, 3.0};
  const std::array<Vec2, 3> t{Vec2(0, 0), Vec2(1, 0), Vec2(0, 1)};
  EXPECT_DOUBLE_EQ(measured_grf(f), 6.0);
  EXPECT_LT((measured_cop(f, t) - Vec2(2.0 / 6.0, 3.0 / 6.0)).norm(), 1e-15);
  const std::array<double, 3> light{0.2, 0.3, 0.4};
  EXPECT_THROW(measured_cop(light, t), Error);
}

TEST(DistributeLoad, ConservesForceAndMoment) {
  const RobotModel& m = nao();
  const DoubleSupportConfig ds = make_double_support(m, 0.01, 0.11, -0.2);
  std::mt19937 rng(31);
  std::uniform_real_distribution<double> w(0.0, 1.0);
  for (int k = 0; k < 200; ++k) {
    std::array<double, kCellCount> lam{};
    double s = 0.0;
    for (double& l : lam) s += (l = w(rng));
    Vec2 cop = Vec2::Zero();
    for (int i = 0; i < kCellCount; ++i) cop += lam[i] / s * ds.sensors_world[i];
    const double total = 5.0 + 60.0 * w(rng);
    const Eigen::VectorXd f = distribute_load(ds.sensors_world, total, cop);
    EXPECT_NEAR(f.sum(), total, 1e-9);
    Vec2 moment = Vec2::Zero();
    for (int i = 0; i < kCellCount; ++i) moment += f[i] * (ds.sensors_world[i] - cop);
    EXPECT_LT(moment.norm(), 1e-9);
    EXPECT_GE(f.minCoeff(), 0.0);
  }
}

TEST(DistributeLoad, OutsideHullThrows) {
  const RobotModel& m = nao();
  const DoubleSupportConfig ds = make_double_support(m, 0.0, 0.12, 0.0);
  EXPECT_THROW(distribute_load(ds.sensors_world, 50.0, Vec2(1.0, 0.0)), Error);
}

TEST(SimulateFrame, NoiselessFrameRecoversTruth) {
  const RobotModel& m = nao();
  const DoubleSupportConfig ds = make_double_support(m, 0.0, 0.1, 0.0);
  const CellParams8 truth = heterogeneous_truth({50.0, -25.0}, 0.3, 3);
  const Polygon hull = sensing_polygon(m, ds);
  ASSERT_TRUE(contains(hull, modeled_cop(m, m.nominal_posture)));
  const SimulatedFrame f = simulate_frame(m, m.nominal_posture, ds, truth, NoiseModel::noiseless(), 0);
  std::array<double, kCellCount> forces{};
  for (int i = 0; i < kCellCount; ++i) forces[i] = cell_force(truth[i], f.frame.voltages[i]);
  EXPECT_NEAR(measured_grf(forces), m.weight(), 1e-9);
  EXPECT_LT((measured_cop(forces, ds.sensors_world) - f.modeled_cop).norm(), 1e-12);
  EXPECT_LT((f.true_cop - f.modeled_cop).norm(), 1e-15);
}

TEST(SimulateFrame, DeterministicPerSeedAndIndex) {
  const RobotModel& m = nao();
  const DoubleSupportConfig ds = make_double_support(m, 0.0, 0.1, 0.0);
  const CellParams8 truth = homogeneous_truth({50.0, -25.0});
  const NoiseModel n = NoiseModel::standard(5);
  const auto a = simulate_frame(m, m.nominal_posture, ds, truth, n, 7);
  const auto b = simulate_frame(m, m.nominal_posture, ds, truth, n, 7);
  const auto c = simulate_frame(m, m.nominal_posture, ds, truth, n, 8);
  EXPECT_EQ(a.frame.voltages, b.frame.voltages);
  EXPECT_NE(a.frame.voltages, c.frame.voltages);
}

TEST(SimulateFrame, PerturbationKnobsBoundTheDeviation) {
  const RobotModel& m = nao();
  const DoubleSupportConfig ds = make_double_support(m, 0.0, 0.1, 0.0);
  const CellParams8 truth = homogeneous_truth({50.0, -25.0});
  NoiseModel n = NoiseModel::noiseless();
  n.grf_perturbation = 0.3;
  n.cop_perturbation = 0.0025;
  for (int k = 0; k < 100; ++k) {
    const auto f = simulate_frame(m, m.nominal_posture, ds, truth, n, k);
    EXPECT_LE(std::abs(f.true_grf - m.weight()), 0.3 + 1e-12);
    EXPECT_LE((f.true_cop - f.modeled_cop).cwiseAbs().maxCoeff(), 0.0025 + 1e-12);
  }
}

TEST(Truth, HeterogeneousWithinSpread) {
  const CellParams8 t = heterogeneous_truth({50.0, -25.0}, 0.3, 9);
  bool differs = false;
  for (const auto& p : t) {
    EXPECT_LE(std::abs(p.a / 50.0 - 1.0), 0.3);
    EXPECT_LE(std::abs(p.b / -25.0 - 1.0), 0.3);
    differs = differs || p.a != t[0].a;
  }
  EXPECT_TRUE(differs);
  EXPECT_EQ(heterogeneous_truth({50.0, -25.0}, 0.3, 9)[3].a, t[3].a);
}
