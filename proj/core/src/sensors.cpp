#include "footcal/sensors.hpp"

#include <cmath>
#include <random>

#include "footcal/error.hpp"
#include "footcal/numopt.hpp"

namespace footcal {

NoiseModel NoiseModel::standard(std::uint64_t seed) {
  NoiseModel n;
  n.voltage_std = 2e-4;
  n.drift_amplitude = 3e-4;
  n.drift_period = 400.0;
  n.grf_perturbation = 0.3;
  n.grf_period = 37.0;
  n.cop_perturbation = 0.0025;
  n.cop_period = 53.0;
  n.seed = seed;
  return n;
}

double cell_force(const LoadCellParams& p, double voltage) { return p.a * voltage + p.b; }

double cell_voltage(const LoadCellParams& p, double force) {
  if (p.a == 0.0) throw Error(ErrorCode::kDeadCell, "scale factor is zero");
  return (force - p.b) / p.a;
}

double measured_grf(std::span<const double> forces) {
  double sum = 0.0;
  for (double f : forces) sum += f;
  return sum;
}

Vec2 measured_cop(std::span<const double> forces, std::span<const Vec2> positions, double force_floor) {
  if (forces.size() != positions.size()) throw Error(ErrorCode::kDimensionMismatch, "forces and positions differ in length");
  const double total = measured_grf(forces);
  if (!(total > force_floor)) {
    throw Error(ErrorCode::kInsufficientLoad, "total force " + std::to_string(total) + " N is below the floor");
  }
  Vec2 acc = Vec2::Zero();
  for (std::size_t i = 0; i < forces.size(); ++i) acc += forces[i] * positions[i];
  return acc / total;
}

Eigen::VectorXd distribute_load(std::span<const Vec2> positions, double total, const Vec2& cop) {
  const auto n = static_cast<Eigen::Index>(positions.size());
  Eigen::MatrixXd A(3, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    A(0, i) = 1.0;
    A.block<2, 1>(1, i) = positions[static_cast<std::size_t>(i)] - cop;
  }
  const Eigen::Vector3d rhs(total, 0.0, 0.0);
  auto f = numopt::min_norm_nonnegative(A, rhs);
  if (!f) {
    throw Error(ErrorCode::kNoFeasibleDistribution,
                "CoP (" + std::to_string(cop.x()) + ", " + std::to_string(cop.y()) + ") is outside the sensor hull");
  }
  return *f;
}

namespace {

// Phases are a pure function of the seed so every frame sees the same drift
// and perturbation waveforms.
struct Waveforms {
  std::array<double, kCellCount> drift_phase{};
  double grf_phase = 0.0;
  double cop_phase_x = 0.0;
  double cop_phase_y = 0.0;
};

Waveforms waveforms_for(std::uint64_t seed) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0x5eedu};
  std::mt19937_64 rng(seq);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * M_PI);
  Waveforms w;
  for (double& p : w.drift_phase) p = phase(rng);
  w.grf_phase = phase(rng);
  w.cop_phase_x = phase(rng);
  w.cop_phase_y = phase(rng);
  return w;
}

}  // namespace

SimulatedFrame simulate_frame(const RobotModel& model, const JointVector& q, const DoubleSupportConfig& ds,
                              const CellParams8& truth, const NoiseModel& noise, int index) {
  if (!(model.weight() > 0.0)) throw Error(ErrorCode::kInvalidArgument, "robot weight must be positive");
  if (noise.voltage_std < 0.0 || noise.drift_amplitude < 0.0) {
    throw Error(ErrorCode::kInvalidArgument, "noise levels must be non-negative");
  }
  SimulatedFrame out;
  out.modeled_cop = modeled_cop(model, q);
  const Waveforms w = waveforms_for(noise.seed);
  const double k = static_cast<double>(index);

  out.true_cop = out.modeled_cop;
  if (noise.cop_perturbation > 0.0) {
    out.true_cop += noise.cop_perturbation * Vec2(std::sin(2.0 * M_PI * k / noise.cop_period + w.cop_phase_x),
                                                  std::sin(2.0 * M_PI * k / (1.37 * noise.cop_period) + w.cop_phase_y));
  }
  out.true_grf = model.weight();
  if (noise.grf_perturbation > 0.0) {
    out.true_grf += noise.grf_perturbation * std::sin(2.0 * M_PI * k / noise.grf_period + w.grf_phase);
  }

  out.forces = distribute_load(ds.sensors_world, out.true_grf, out.true_cop);

  out.frame.index = index;
  out.frame.q = q;
  std::seed_seq seq{static_cast<std::uint32_t>(noise.seed), static_cast<std::uint32_t>(noise.seed >> 32),
                    static_cast<std::uint32_t>(index), 0xf00du};
  std::mt19937_64 rng(seq);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int i = 0; i < kCellCount; ++i) {
    double s = cell_voltage(truth[i], out.forces[i]);
    if (noise.voltage_std > 0.0) s += noise.voltage_std * gauss(rng);
    if (noise.drift_amplitude > 0.0) {
      s += noise.drift_amplitude * std::sin(2.0 * M_PI * k / noise.drift_period + w.drift_phase[i]);
    }
    out.frame.voltages[i] = s;
  }
  return out;
}

CellParams8 heterogeneous_truth(const LoadCellParams& nominal, double spread, std::uint64_t seed) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0xce11u};
  std::mt19937_64 rng(seq);
  std::uniform_real_distribution<double> u(-spread, spread);
  CellParams8 out;
  for (auto& p : out) {
    p.a = nominal.a * (1.0 + u(rng));
    p.b = nominal.b * (1.0 + u(rng));
  }
  return out;
}

CellParams8 homogeneous_truth(const LoadCellParams& p) {
  CellParams8 out;
  out.fill(p);
  return out;
}

}  // namespace footcal
