#include <benchmark/benchmark.h>

#include <random>

#include "footcal/model_io.hpp"
#include "footcal/planner.hpp"
#include "footcal/sampler.hpp"
#include "footcal/selfcal.hpp"

using namespace footcal;

namespace {

const RobotModel& nao() {
  static const RobotModel m = load_model(default_model_path());
  return m;
}

const DoubleSupportConfig& stance() {
  static const DoubleSupportConfig ds = sample_double_supports(SamplerConfig{}, nao()).front();
  return ds;
}

const PlanResult& plan() {
  static const PlanResult p = [] {
    const PlannerConfig cfg;
    return plan_trajectory(nao(), stance(), reach_double_support(nao(), stance(), cfg), cfg);
  }();
  return p;
}

void BM_ForwardKinematics(benchmark::State& state) {
  const JointVector q = nao().nominal_posture;
  for (auto _ : state) benchmark::DoNotOptimize(forward_kinematics(nao(), q));
}
BENCHMARK(BM_ForwardKinematics);

void BM_ModeledCop(benchmark::State& state) {
  const JointVector q = nao().nominal_posture;
  for (auto _ : state) benchmark::DoNotOptimize(modeled_cop(nao(), q));
}
BENCHMARK(BM_ModeledCop);

void BM_CollisionDistances(benchmark::State& state) {
  const auto poses = forward_kinematics(nao(), nao().nominal_posture);
  for (auto _ : state) benchmark::DoNotOptimize(collision_distances(nao(), poses));
}
BENCHMARK(BM_CollisionDistances);

void BM_DistributeLoad(benchmark::State& state) {
  const auto& ds = stance();
  Vec2 cop = Vec2::Zero();
  for (const Vec2& s : ds.sensors_world) cop += s / kCellCount;
  for (auto _ : state) benchmark::DoNotOptimize(distribute_load(ds.sensors_world, 50.0, cop));
}
BENCHMARK(BM_DistributeLoad);

void BM_SimulateFrame(benchmark::State& state) {
  const CellParams8 truth = heterogeneous_truth({50.0, -25.0}, 0.3, 2);
  const NoiseModel noise = NoiseModel::standard(3);
  const JointVector& q = plan().trajectory.q.front();
  int k = 0;
  for (auto _ : state) benchmark::DoNotOptimize(simulate_frame(nao(), q, stance(), truth, noise, k++));
}
BENCHMARK(BM_SimulateFrame);

void BM_PlanSegment(benchmark::State& state) {
  const PlannerConfig cfg;
  const LandmarkSet l = make_landmarks(nao(), stance(), cfg.landmark_inset);
  const JointVector q0 = plan().trajectory.q.front();
  for (auto _ : state) benchmark::DoNotOptimize(plan_segment(nao(), stance(), q0, l.points[0], cfg));
}
BENCHMARK(BM_PlanSegment)->Unit(benchmark::kMillisecond);

void BM_IdentifyParams(benchmark::State& state) {
  const CellParams8 truth = heterogeneous_truth({50.0, -25.0}, 0.3, 2);
  const std::vector<CalibrationDataset> data{
      simulate_dataset(nao(), stance(), plan().trajectory.q, truth, NoiseModel::standard(3), 0)};
  const SharedGuess g = initial_guess(data);
  for (auto _ : state) benchmark::DoNotOptimize(identify_params(data, g, SelfCalWeights{}));
}
BENCHMARK(BM_IdentifyParams)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
