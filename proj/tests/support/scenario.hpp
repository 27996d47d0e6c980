#pragma once

// Default simulated scenario shared by the self-calibration tests and the
// acceptance binary. Mirrors the pipeline's sample, plan and simulate stages.

#include <vector>

#include "footcal/pipeline.hpp"

namespace footcal::testing {

struct Scenario {
  PipelineConfig cfg;
  RobotModel model;
  std::vector<DoubleSupportConfig> stances;
  std::vector<PlanResult> plans;
  CellParams8 truth{};
  std::vector<Role> roles;
};

/// Samples and plans every stance of `cfg`.
Scenario plan_scenario(const PipelineConfig& cfg);

/// Simulates one dataset per planned stance with the given truth, noise and
/// optional mounting offsets; roles follow the scenario split.
std::vector<CalibrationDataset> simulate_all(const Scenario& s, const CellParams8& truth, const NoiseModel& noise,
                                             const SensorOffsets* offsets);

/// Datasets exactly as the pipeline's simulate stage produces them.
std::vector<CalibrationDataset> default_datasets(const Scenario& s);

void split(const std::vector<CalibrationDataset>& all, std::vector<CalibrationDataset>& train,
           std::vector<CalibrationDataset>& test);

}  // namespace footcal::testing
