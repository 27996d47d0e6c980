#pragma once

#include <stdexcept>
#include <string>

namespace footcal {

enum class ErrorCode {
  kInvalidArgument,
  kDimensionMismatch,
  kInvalidProblem,
  kNonFinite,
  kInsufficientLoad,
  kNoFeasibleDistribution,
  kDegenerateData,
  kUnderdetermined,
  kDeadCell,
  kSolverStall,
  kSamplerStall,
  kDegenerateHull,
  kTrainTestOverlap,
  kParse,
  kSchemaVersion,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace footcal
