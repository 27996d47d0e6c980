#pragma once

// Stage orchestration for the command-line tool. Every stage reads its inputs
// from the output directory, writes its artifacts atomically and records
// input/output hashes in manifest.yaml.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "footcal/manual_cal.hpp"
#include "footcal/planner.hpp"
#include "footcal/sampler.hpp"
#include "footcal/selfcal.hpp"

namespace footcal {

enum class Stage { kSample, kPlan, kSimulate, kManualCal, kSelfCal, kEvaluate, kReport, kAll };

const char* to_string(Stage s);

/// Accepts the subcommand names; "calibrate" is an alias of "self-cal".
std::optional<Stage> parse_stage(const std::string& name);

/// Process exit codes.
enum ExitCode : int {
  kExitOk = 0,
  kExitMissingPrerequisite = 2,
  kExitBadConfig = 3,
  kExitCorruptArtifact = 4,
  kExitSolverFailure = 5,
};

/// Thrown for config schema violations.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TruthConfig {
  LoadCellParams nominal{50.0, -25.0};
  double spread = 0.3;
};

struct PipelineConfig {
  /// Empty means the bundled model.
  std::filesystem::path model_path;
  std::filesystem::path output_dir = "out";
  std::uint64_t seed = 1;
  SamplerConfig sampler;
  PlannerConfig planner;
  TruthConfig truth;
  NoiseModel noise = NoiseModel::standard(0);
  int samples_per_state = 4;
  /// Mounting error of the shoes used for self-calibration, uniform per
  /// coordinate (m).
  double sensor_offset = 0.002;
  ManualBias manual;
  SelfCalWeights weights;
  numopt::NlsOptions identify;
  int n_train = 3;
  bool init_grf_row = false;

  /// Derived sub-seeds.
  std::uint64_t sampler_seed() const { return seed; }
  std::uint64_t truth_seed() const { return seed + 1; }
  std::uint64_t noise_seed() const { return seed + 2; }
  std::uint64_t manual_seed() const { return seed + 3; }
  std::uint64_t split_seed() const { return seed + 4; }
  std::uint64_t offset_seed() const { return seed + 5; }

  /// Parses a config document. Unknown keys, wrong types and out-of-range
  /// values throw ConfigError. `base_dir` resolves a relative model path.
  static PipelineConfig from_yaml(const std::string& text, const std::filesystem::path& base_dir = {});
  static PipelineConfig load(const std::filesystem::path& path);

  /// Canonical echo, including derived seeds.
  std::string to_yaml() const;

  /// Throws ConfigError.
  void validate() const;
};

/// Leveled log sink; the tool wires it to its logger.
enum class LogLevel { kError, kInfo, kDebug };
using LogFn = std::function<void(LogLevel, const std::string&)>;

/// Runs one stage (or all in order). Returns an ExitCode value; diagnostics go
/// to `log`, the report table to `out`.
int run_stage(const PipelineConfig& config, Stage stage, std::ostream& out, const LogFn& log = {});

/// Prints the MAE tables of a result file. Returns kExitCorruptArtifact on an
/// unreadable file.
int report(const std::filesystem::path& result_path, std::ostream& out, const LogFn& log = {});

}  // namespace footcal
