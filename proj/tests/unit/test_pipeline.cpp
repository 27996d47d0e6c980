#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

#include "footcal/artifacts.hpp"
#include "footcal/pipeline.hpp"

using namespace footcal;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("footcal_pipeline_" + name);
  fs::remove_all(dir);
  return dir;
}

PipelineConfig small_config(const fs::path& out, int n_train) {
  PipelineConfig c;
  c.output_dir = out;
  c.seed = 4;
  c.sampler.count = 2;
  c.n_train = n_train;
  return c;
}

int count_of(const std::string& text, const std::string& needle) {
  int n = 0;
  for (auto pos = text.find(needle); pos != std::string::npos; pos = text.find(needle, pos + needle.size())) ++n;
  return n;
}

// Body of a titled table, without the title line.
std::string section(const std::string& text, const std::string& title) {
  auto begin = text.find(title);
  if (begin == std::string::npos) return {};
  begin = text.find('\n', begin) + 1;
  const auto end = text.find("\n\n", begin);
  return text.substr(begin, end == std::string::npos ? std::string::npos : end - begin);
}

}  // namespace

TEST(ParseStage, NamesAndAlias) {
  EXPECT_EQ(parse_stage("sample"), Stage::kSample);
  EXPECT_EQ(parse_stage("manual-cal"), Stage::kManualCal);
  EXPECT_EQ(parse_stage("self-cal"), Stage::kSelfCal);
  EXPECT_EQ(parse_stage("calibrate"), Stage::kSelfCal);
  EXPECT_EQ(parse_stage("all"), Stage::kAll);
  EXPECT_FALSE(parse_stage("bogus").has_value());
  for (Stage s : {Stage::kSample, Stage::kPlan, Stage::kSimulate, Stage::kManualCal, Stage::kSelfCal,
                  Stage::kEvaluate, Stage::kReport, Stage::kAll})
    EXPECT_EQ(parse_stage(to_string(s)), s);
}

TEST(PipelineConfig, EchoRoundTrips) {
  PipelineConfig c;
  c.seed = 17;
  c.sampler.threshold = 0.05;
  c.weights.w_zeta = 3e-5;
  c.init_grf_row = true;
  const std::string echo = c.to_yaml();
  EXPECT_EQ(PipelineConfig::from_yaml(echo).to_yaml(), echo);
}

TEST(PipelineConfig, RejectsMalformedDocuments) {
  EXPECT_THROW(PipelineConfig::from_yaml("schema_version: 1\n"), ConfigError);
  EXPECT_THROW(PipelineConfig::from_yaml("seed: 1\n"), ConfigError);
  EXPECT_THROW(PipelineConfig::from_yaml("schema_version: 2\nseed: 1\n"), ConfigError);
  EXPECT_THROW(PipelineConfig::from_yaml("schema_version: 1\nseed: 1\nextra: 0\n"), ConfigError);
  EXPECT_THROW(PipelineConfig::from_yaml("schema_version: 1\nseed: 1\nplanner:\n  horizon: many\n"), ConfigError);
  EXPECT_THROW(PipelineConfig::from_yaml("schema_version: 1\nseed: 1\nselfcal:\n  n_train: 9\n"), ConfigError);
  EXPECT_THROW(PipelineConfig::from_yaml("schema_version: 1\nseed: 1\nmodel: /no/such/model.yaml\n"), ConfigError);
  EXPECT_THROW(PipelineConfig::from_yaml("[1, 2"), ConfigError);
  EXPECT_NO_THROW(PipelineConfig::from_yaml("schema_version: 1\nseed: 1\nsampler:\n  count: 4\n"));
}

TEST(RunStage, MissingPrerequisitesExitWithTwo) {
  const fs::path dir = scratch("missing");
  std::ostringstream out;
  const PipelineConfig c = small_config(dir, 1);
  for (Stage s : {Stage::kPlan, Stage::kSimulate, Stage::kSelfCal, Stage::kEvaluate, Stage::kReport})
    EXPECT_EQ(run_stage(c, s, out), kExitMissingPrerequisite) << to_string(s);
}

TEST(RunStage, InvalidConfigExitsWithThree) {
  PipelineConfig c = small_config(scratch("invalid"), 1);
  c.n_train = 5;
  std::ostringstream out;
  EXPECT_EQ(run_stage(c, Stage::kSample, out), kExitBadConfig);
}

TEST(RunStage, SmallRunProducesReportAndManifest) {
  const fs::path dir = scratch("small");
  std::ostringstream out;
  std::vector<std::string> messages;
  const LogFn log = [&](LogLevel, const std::string& m) { messages.push_back(m); };
  ASSERT_EQ(run_stage(small_config(dir, 1), Stage::kAll, out, log), kExitOk)
      << (messages.empty() ? "" : messages.back());
  for (const char* f : {"stances.csv", "trajectory_0.csv", "dataset_1.csv", "truth_params.yaml",
                        "manual_params.yaml", "selfcal_params.yaml", "result.yaml", "manifest.yaml"})
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  EXPECT_FALSE(fs::exists(dir / "result.yaml.tmp"));

  const std::string text = out.str();
  const std::string table = section(text, "Self-calibration MAE");
  EXPECT_EQ(count_of(table, "±"), 12);
  EXPECT_EQ(count_of(table, "[N]"), 2);
  EXPECT_EQ(count_of(table, "[mm]"), 2);
  EXPECT_EQ(text.find("warning"), std::string::npos);
  EXPECT_NE(text.find("Manual calibration"), std::string::npos);

  const Manifest m = manifest_from_yaml(read_text(dir / "manifest.yaml"));
  EXPECT_EQ(m.output_hash("result.yaml"), sha256_hex(read_text(dir / "result.yaml")));
  const std::string cfg_hash = m.stages.at("sample").inputs.at("config");
  for (const auto& [name, entry] : m.stages) EXPECT_EQ(entry.inputs.at("config"), cfg_hash) << name;

  std::ostringstream again;
  EXPECT_EQ(report(dir / "result.yaml", again), kExitOk);
  EXPECT_EQ(section(again.str(), "Self-calibration MAE"), table);
}

TEST(RunStage, TamperedArtifactExitsWithFour) {
  const fs::path dir = scratch("tamper");
  std::ostringstream out;
  const PipelineConfig c = small_config(dir, 1);
  ASSERT_EQ(run_stage(c, Stage::kSample, out), kExitOk);
  std::string stances = read_text(dir / "stances.csv");
  stances.back() = stances.back() == '\n' ? ' ' : '\n';
  write_atomic(dir / "stances.csv", stances);
  EXPECT_EQ(run_stage(c, Stage::kPlan, out), kExitCorruptArtifact);
}

TEST(RunStage, AllTrainingDatasetsWarnsAboutTheEmptyTestSet) {
  const fs::path dir = scratch("no_test");
  std::ostringstream out;
  ASSERT_EQ(run_stage(small_config(dir, 2), Stage::kAll, out), kExitOk);
  const std::string text = out.str();
  EXPECT_NE(text.find("warning: no test datasets"), std::string::npos);
  const std::string table = section(text, "Self-calibration MAE");
  EXPECT_EQ(count_of(table, "±"), 6);
  EXPECT_EQ(count_of(table, "test"), 0);
}
