#pragma once

// Self-calibration from planned double-support motions: shared-parameter
// initial guess, regularized per-cell identification, and the per-foot CoP
// correction fitted against modeled references.

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "footcal/manual_cal.hpp"
#include "footcal/numopt.hpp"
#include "footcal/sensors.hpp"

namespace footcal {

enum class Role { kTrain, kTest };

const char* to_string(Role r);

struct CalibrationDataset {
  int id = 0;
  DoubleSupportConfig ds;
  std::vector<SensorFrame> frames;
  /// Modeled CoP per frame (world, m).
  std::vector<Vec2> cop_ref;
  /// Robot weight (N).
  double grf_ref = 0.0;
  Role role = Role::kTrain;

  /// Throws kInvalidArgument when references are missing or non-finite.
  void validate(int min_frames = 50) const;
};

/// Mounting errors of the 8 cells, each in its own sole frame (m).
using SensorOffsets = std::array<Vec2, kCellCount>;

/// Offsets drawn uniformly within +-amplitude per coordinate.
SensorOffsets random_sensor_offsets(double amplitude, std::uint64_t seed);

/// The stance with its world sensor points moved by the offsets.
DoubleSupportConfig offset_sensors(const DoubleSupportConfig& ds, const SensorOffsets& offsets);

/// Simulates one dataset along a joint trajectory. Each state is held for
/// `samples_per_state` consecutive frames. With `offsets`, loads are
/// distributed over the physically displaced cells while the dataset keeps
/// the nominal stance, which biases the measured CoP.
CalibrationDataset simulate_dataset(const RobotModel& model, const DoubleSupportConfig& ds,
                                    const std::vector<JointVector>& states, const CellParams8& truth,
                                    const NoiseModel& noise, int id, int samples_per_state = 4,
                                    const SensorOffsets* offsets = nullptr);

struct SelfCalWeights {
  double w_n = 1.0;     // 1/N^2
  double w_c = 1e4;     // 1/m^2
  double w_zeta = 1e-4;

  void validate() const;
};

/// Shared scale and offset for all cells.
struct SharedGuess {
  double c0 = 0.0;
  double d0 = 0.0;
};

/// Linear least squares of the shared affine map from the stacked moment
/// balance rows (c_x G, c_y G) of every frame, plus the force balance row G
/// when `include_grf_row` is set. Throws kDegenerateData when the stack is
/// rank deficient.
SharedGuess initial_guess(const std::vector<CalibrationDataset>& datasets, bool include_grf_row = false);

struct IdentifyResult {
  CellParams8 params;
  numopt::SolveReport report;
};

/// Thrown when the identification makes no progress from its start point.
class SolveError : public Error {
 public:
  SolveError(const std::string& what, numopt::SolveReport report)
      : Error(ErrorCode::kSolverStall, what), report_(std::move(report)) {}
  const numopt::SolveReport& report() const { return report_; }

 private:
  numopt::SolveReport report_;
};

/// Residual/Jacobian of the identification, exposed for derivative checks.
/// Parameters are packed [c1, d1, ..., c8, d8].
numopt::NlsProblem identification_problem(const std::vector<CalibrationDataset>& datasets, const SharedGuess& init,
                                           const SelfCalWeights& weights, const numopt::NlsOptions& options = {});

IdentifyResult identify_params(const std::vector<CalibrationDataset>& datasets, const SharedGuess& init,
                               const SelfCalWeights& weights, const numopt::NlsOptions& options = {});

CellParams8 shared_params(const SharedGuess& g);

/// Per-frame GRF and CoP under a parameter set, optionally corrected.
struct FrameMeasurement {
  bool valid = false;
  double grf = 0.0;
  Vec2 cop = Vec2::Zero();
};

/// Combines the two feet's corrected CoPs weighted by their forces. Each
/// correction acts in its own sole frame. A foot whose load is at or below
/// the force floor contributes its raw moment only; frames whose total load
/// is at or below the floor are marked invalid.
FrameMeasurement measure_frame(const RobotModel& model, const DoubleSupportConfig& ds, const SensorFrame& frame,
                               const CellParams8& params, const CorrectionParams* left = nullptr,
                               const CorrectionParams* right = nullptr);

std::vector<FrameMeasurement> corrected_double_cop(const RobotModel& model, const CalibrationDataset& dataset,
                                                   const CellParams8& params, const CorrectionParams& left,
                                                   const CorrectionParams& right);

struct DoubleCorrection {
  CorrectionParams left;
  CorrectionParams right;
  numopt::SolveReport report;
};

/// Residual/Jacobian of the two-foot correction fit. Parameters are packed
/// [left (16), right (16)].
numopt::NlsProblem double_correction_problem(const RobotModel& model, const std::vector<CalibrationDataset>& datasets,
                                             const CellParams8& params, const numopt::NlsOptions& options = {});

/// Throws kUnderdetermined with fewer than 16 valid frames.
DoubleCorrection fit_double_correction(const RobotModel& model, const std::vector<CalibrationDataset>& datasets,
                                       const CellParams8& params, const numopt::NlsOptions& options = {});

enum class Variant { kInit, kSelfCal, kCorrected };

const char* to_string(Variant v);

struct MaePair {
  MaeReport grf;
  MaeReport cop;
};

struct SelfCalResult {
  SharedGuess init;
  CellParams8 params{};
  CorrectionParams left;
  CorrectionParams right;
  numopt::SolveReport identify_report;
  numopt::SolveReport correction_report;
  /// [variant][role]; empty optional when a role has no data.
  std::array<std::array<std::optional<MaePair>, 2>, 3> mae;
};

/// Fits the three stages on the training datasets.
SelfCalResult run_selfcal(const RobotModel& model, const std::vector<CalibrationDataset>& train,
                          const SelfCalWeights& weights, const numopt::NlsOptions& options = {},
                          bool include_grf_row = false);

/// MAEs of one variant over a set of datasets (GRF in N, CoP in mm).
MaePair evaluate_variant(const RobotModel& model, const std::vector<CalibrationDataset>& datasets,
                         const SelfCalResult& result, Variant variant);

/// Fills result.mae for both roles. Throws kTrainTestOverlap when a frame
/// appears in both sets.
void evaluate(const RobotModel& model, SelfCalResult& result, const std::vector<CalibrationDataset>& train,
              const std::vector<CalibrationDataset>& test);

/// 64-bit FNV-1a hash of a frame's voltages and joint angles.
std::uint64_t frame_hash(const SensorFrame& frame);

/// Seeded shuffle of dataset indices; the first n_train are training.
std::vector<Role> split_roles(int count, int n_train, std::uint64_t seed);

}  // namespace footcal
