#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "footcal/numopt.hpp"
#include "footcal/sensors.hpp"

namespace footcal {

/// CoP correction coefficients. The x correction is
///   a1 p0x^2 + a2 p0x + a3 p0y + a4 + sum m_i f_i
/// and the y correction
///   b1 p0y^2 + b2 p0y + b3 p0x + b4 + sum n_i f_i.
/// Zero coefficients are the identity correction.
struct CorrectionParams {
  std::array<double, 4> a{};
  std::array<double, 4> m{};
  std::array<double, 4> b{};
  std::array<double, 4> n{};

  static constexpr int kSize = 16;
  /// Packed as [a1..a4, m1..m4, b1..b4, n1..n4].
  Eigen::Matrix<double, kSize, 1> to_vector() const;
  static CorrectionParams from_vector(const Eigen::Ref<const Eigen::VectorXd>& v);
};

struct MaeReport {
  double mean = 0.0;
  double std = 0.0;
  int count = 0;
  std::string units;
};

struct GridProtocol {
  /// Hole positions in the sole frame.
  std::vector<Vec2> holes;
  /// Applied masses in kg, strictly increasing.
  std::vector<double> weights_kg{1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0};

  /// 6 x 3 hole grid spanning the foot's sensing polygon with a 1 cm inset.
  static GridProtocol standard(const RobotModel& model, Foot foot);
};

struct GridSample {
  Vec2 hole;
  double weight_kg = 0.0;
  std::array<double, kCellsPerFoot> forces{};  // measured, N
  Vec2 cop;                                    // measured, sole frame
  double grf = 0.0;                            // measured, N
};

struct GridRun {
  std::vector<GridSample> samples;
  std::vector<Vec2> truths;
  std::vector<std::string> warnings;
};

/// Single-point calibration from a no-load and a loaded reading.
/// Throws kDeadCell when the readings coincide.
LoadCellParams calibrate_cell(double no_load_voltage, double loaded_voltage, double known_force);

/// The 2 x 16 design matrix of the correction at (p0, f): delta = D * zeta.
Eigen::Matrix<double, 2, CorrectionParams::kSize> correction_design(const Vec2& p0,
                                                                    std::span<const double> forces);

Vec2 correction_offset(const Vec2& p0, std::span<const double> forces, const CorrectionParams& params);

Vec2 corrected_cop(const Vec2& p0, std::span<const double> forces, const CorrectionParams& params);

struct CorrectionFit {
  CorrectionParams params;
  numopt::SolveReport report;
};

/// Least-squares fit of the 16 correction coefficients so corrected CoPs
/// match the truths. Throws kUnderdetermined with fewer than 16 samples or
/// fewer than 4 distinct truth positions.
CorrectionFit fit_correction(std::span<const GridSample> samples, std::span<const Vec2> truths,
                             const numopt::NlsOptions& options = {});

/// Residual/Jacobian pair of the correction fit, exposed for derivative checks.
numopt::NlsProblem correction_problem(std::span<const GridSample> samples, std::span<const Vec2> truths,
                                      const numopt::NlsOptions& options = {});

/// Simulates point loads at every (hole, weight) pair. Forces come from the
/// physical shoe; measurements use the assumed (calibrated) shoe.
GridRun run_grid_protocol(const RobotModel& model, Foot foot, const ShoeParams& physical, const ShoeParams& assumed,
                          const GridProtocol& protocol, const NoiseModel& noise);

/// Mean and standard deviation of |measured - truth| (N).
MaeReport mae_grf(std::span<const double> measured, std::span<const double> truth);

/// Mean and standard deviation of Euclidean CoP errors, reported in mm.
MaeReport mae_cop(std::span<const Vec2> measured, std::span<const Vec2> truth);

/// Systematic error injected into the simulated manual calibration.
struct ManualBias {
  double position_perturbation = 0.002;  // m, uniform per coordinate
  double gain_error = 0.002;             // relative, uniform per cell
  double calibration_mass_kg = 1.0;
  int readings_per_level = 50;
  std::uint64_t seed = 7;
};

struct ShoeCalibration {
  ShoeParams assumed;           // calibrated cells + assumed positions
  CorrectionParams correction;
  GridRun grid;
  MaeReport grf;
  MaeReport cop_measured;
  MaeReport cop_corrected;
};

struct ManualCalibration {
  std::array<ShoeCalibration, 2> shoes;  // left, right
};

/// Calibrates each cell with a known weight, runs the grid protocol and fits
/// the per-shoe correction.
ManualCalibration run_manual_calibration(const RobotModel& model, const CellParams8& truth, const ManualBias& bias,
                                         const NoiseModel& noise, const numopt::NlsOptions& options = {});

/// Physical shoe (true cells at the model's sensor positions).
ShoeParams physical_shoe(const RobotModel& model, const CellParams8& truth, Foot foot);

}  // namespace footcal
