#pragma once

#include <filesystem>
#include <string>

#include "footcal/model.hpp"

namespace footcal {

constexpr int kModelSchemaVersion = 1;

/// Parses a robot model document (YAML). See docs/model_format.md.
RobotModel parse_model(const std::string& text);

RobotModel load_model(const std::filesystem::path& path);

std::string model_to_yaml(const RobotModel& model);

/// Path of the bundled NAO-like model: the source tree when present,
/// otherwise the installed data directory.
std::filesystem::path default_model_path();

}  // namespace footcal
