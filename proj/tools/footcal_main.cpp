// footcal: run the calibration pipeline stages from a config file.

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <CLI11.hpp>
#include <cstdlib>
#include <iostream>

#include "footcal/pipeline.hpp"

namespace {

spdlog::level::level_enum log_level_from_env() {
  const char* env = std::getenv("FOOTCAL_LOG");
  if (!env) return spdlog::level::info;
  const std::string v(env);
  if (v == "error") return spdlog::level::err;
  if (v == "info") return spdlog::level::info;
  if (v == "debug") return spdlog::level::debug;
  spdlog::warn("ignoring FOOTCAL_LOG={} (expected error, info or debug)", v);
  return spdlog::level::info;
}

}  // namespace

int main(int argc, char** argv) {
  auto logger = spdlog::stderr_color_mt("footcal");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  spdlog::set_level(log_level_from_env());

  CLI::App app{"Foot load-cell calibration pipeline"};
  std::string config_path;
  std::optional<std::int64_t> seed;
  std::string out_dir;
  std::string stage_name;
  std::string positional;
  app.add_option("--config", config_path, "Pipeline config (YAML); bundled defaults when omitted");
  app.add_option("--seed", seed, "Global seed, overrides the config");
  app.add_option("--out", out_dir, "Output directory, overrides the config");
  app.add_option("--stage", stage_name,
                 "sample, plan, simulate, manual-cal, self-cal (calibrate), evaluate, report or all");
  app.add_option("command", positional, "Stage as a subcommand word (same names as --stage)");
  CLI11_PARSE(app, argc, argv);

  if (!positional.empty() && !stage_name.empty() && positional != stage_name) {
    spdlog::error("conflicting stages '{}' and '{}'", positional, stage_name);
    return footcal::kExitBadConfig;
  }
  const std::string name = !stage_name.empty() ? stage_name : !positional.empty() ? positional : "all";
  const auto stage = footcal::parse_stage(name);
  if (!stage) {
    spdlog::error("unknown stage '{}'", name);
    return footcal::kExitBadConfig;
  }

  footcal::PipelineConfig cfg;
  try {
    if (!config_path.empty()) cfg = footcal::PipelineConfig::load(config_path);
    if (seed) {
      if (*seed < 0) throw footcal::ConfigError("--seed must be non-negative");
      cfg.seed = static_cast<std::uint64_t>(*seed);
    }
    if (!out_dir.empty()) cfg.output_dir = out_dir;
  } catch (const footcal::ConfigError& e) {
    spdlog::error("{}", e.what());
    return footcal::kExitBadConfig;
  }

  const footcal::LogFn log = [](footcal::LogLevel level, const std::string& msg) {
    switch (level) {
      case footcal::LogLevel::kError: spdlog::error("{}", msg); break;
      case footcal::LogLevel::kInfo: spdlog::info("{}", msg); break;
      case footcal::LogLevel::kDebug: spdlog::debug("{}", msg); break;
    }
  };
  return footcal::run_stage(cfg, *stage, std::cout, log);
}
