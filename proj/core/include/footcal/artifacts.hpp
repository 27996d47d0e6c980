#pragma once

// On-disk artifacts: versioned CSV tables, atomic writes, SHA-256 hashes and
// the per-stage manifest. See docs/file_formats.md for every schema.

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "footcal/manual_cal.hpp"
#include "footcal/planner.hpp"
#include "footcal/selfcal.hpp"

namespace footcal {

constexpr int kArtifactSchemaVersion = 1;

/// A CSV file is one header comment line
///   # footcal <kind> schema_version=<n>
/// then the column names, then one row per record.
struct CsvTable {
  std::string kind;
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  /// Throws kParse when the column is absent.
  int column(const std::string& name) const;
  /// Throws kParse on a non-numeric cell.
  double number(std::size_t row, int col) const;
  void add_row(std::vector<std::string> row);
};

/// Shortest text that round-trips the value exactly.
std::string format_double(double v);

std::string to_csv(const CsvTable& table);

/// Throws kSchemaVersion on an unknown version and kParse on anything else
/// that does not match `expected_kind`.
CsvTable parse_csv(const std::string& text, const std::string& expected_kind);

/// Writes through a temp file in the same directory, then renames.
void write_atomic(const std::filesystem::path& path, const std::string& content);

std::string read_text(const std::filesystem::path& path);

std::string sha256_hex(const std::string& data);

// Table converters. Readers throw kParse on malformed content.

CsvTable stances_table(const std::vector<DoubleSupportConfig>& stances);
std::vector<DoubleSupportConfig> stances_from_table(const RobotModel& model, const CsvTable& table);

/// Columns: step, q_0.., u_0.., cop_x, cop_y, target. Row i carries the
/// transition that produced state i (zero for the start state).
CsvTable trajectory_table(const Trajectory& trajectory);
std::vector<JointVector> trajectory_states(const CsvTable& table);

/// Columns: frame, q_0.., S_0..S_7, cop_x, cop_y, grf.
CsvTable dataset_table(const CalibrationDataset& dataset);
/// Fills frames and references; id, stance and role come from the index.
void dataset_from_table(const CsvTable& table, CalibrationDataset& dataset);

/// Columns: hole_x, hole_y, weight_kg, f1..f4, cop_x, cop_y.
CsvTable grid_table(const GridRun& run);

/// Columns: frame, cop_meas_x, cop_meas_y, cop_model_x, cop_model_y,
/// grf_meas, grf_model, variant. Invalid frames are skipped.
CsvTable trace_table(const RobotModel& model, const CalibrationDataset& dataset, const SelfCalResult& result);

/// Parameter file: per-shoe cells in order 1..4 and the correction.
struct ParamsFile {
  std::string kind;
  CellParams8 cells{};
  CorrectionParams left;
  CorrectionParams right;
  /// Shared initial guess, present in self-calibration outputs.
  std::optional<SharedGuess> init;
};

std::string params_to_yaml(const ParamsFile& params);
ParamsFile params_from_yaml(const std::string& text, const std::string& expected_kind);

/// Input and output hashes of one stage run.
struct ManifestEntry {
  std::map<std::string, std::string> inputs;
  std::map<std::string, std::string> outputs;
};

struct Manifest {
  std::map<std::string, ManifestEntry> stages;

  /// Recorded hash of an output file, searching every stage; empty if none.
  std::string output_hash(const std::string& file) const;
};

std::string manifest_to_yaml(const Manifest& manifest);
Manifest manifest_from_yaml(const std::string& text);

}  // namespace footcal
