#pragma once

#include <array>
#include <cstdint>
#include <span>

#include "footcal/model.hpp"

namespace footcal {

/// Affine load-cell model F = a * S + b (a in N/V, b in N).
struct LoadCellParams {
  double a = 1.0;
  double b = 0.0;
};

using CellParams8 = std::array<LoadCellParams, kCellCount>;

struct ShoeParams {
  std::array<LoadCellParams, kCellsPerFoot> cells;
  std::array<Vec2, kCellsPerFoot> positions;
};

/// One sample of the 8 raw voltages, left cells 1..4 then right cells 1..4.
struct SensorFrame {
  int index = 0;
  std::array<double, kCellCount> voltages{};
  JointVector q;
};

/// Voltage noise, slow drift, and quasi-static imperfection knobs.
struct NoiseModel {
  double voltage_std = 0.0;          // V
  double drift_amplitude = 0.0;      // V
  double drift_period = 400.0;       // frames
  double grf_perturbation = 0.0;     // N, sinusoid amplitude on total force
  double grf_period = 37.0;          // frames
  double cop_perturbation = 0.0;     // m, sinusoid amplitude per axis
  double cop_period = 53.0;          // frames
  std::uint64_t seed = 1;

  static NoiseModel noiseless() { return {}; }
  /// Defaults reproducing the load-cell noise and quasi-static deviation scale.
  static NoiseModel standard(std::uint64_t seed);
};

/// CoP validity floor.
constexpr double kForceFloor = 1.0;

double cell_force(const LoadCellParams& p, double voltage);

/// Inverse of cell_force.
double cell_voltage(const LoadCellParams& p, double force);

double measured_grf(std::span<const double> forces);

/// Force-weighted position average. Throws kInsufficientLoad when the total
/// force is at or below `force_floor`.
Vec2 measured_cop(std::span<const double> forces, std::span<const Vec2> positions,
                  double force_floor = kForceFloor);

/// Minimum-norm non-negative cell forces with sum = total and force-weighted
/// position = cop. Throws kNoFeasibleDistribution when cop is outside the
/// hull of `positions`.
Eigen::VectorXd distribute_load(std::span<const Vec2> positions, double total, const Vec2& cop);

struct SimulatedFrame {
  SensorFrame frame;
  Eigen::Matrix<double, kCellCount, 1> forces;  // true cell forces (N)
  Vec2 true_cop;
  double true_grf = 0.0;
  Vec2 modeled_cop;
};

/// Pure function of its inputs: the noise for frame `index` is drawn from a
/// generator seeded with (noise.seed, index).
SimulatedFrame simulate_frame(const RobotModel& model, const JointVector& q, const DoubleSupportConfig& ds,
                              const CellParams8& truth, const NoiseModel& noise, int index);

/// Per-cell parameters scattered uniformly within +-spread around nominal.
CellParams8 heterogeneous_truth(const LoadCellParams& nominal, double spread, std::uint64_t seed);

CellParams8 homogeneous_truth(const LoadCellParams& p);

}  // namespace footcal
