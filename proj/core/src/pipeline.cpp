#include "footcal/pipeline.hpp"

#include <fmt/format.h>
#include <yaml-cpp/yaml.h>

#include <set>

#include "footcal/artifacts.hpp"
#include "footcal/error.hpp"
#include "footcal/model_io.hpp"

namespace footcal {

namespace fs = std::filesystem;

namespace {

constexpr int kConfigSchemaVersion = 1;

class MissingPrerequisite : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class CorruptArtifact : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Strict reader for one config map: every key must be consumed.
class Section {
 public:
  Section(YAML::Node node, std::string path) : path_(std::move(path)) {
    if (node && !node.IsNull()) {
      if (!node.IsMap()) throw ConfigError(fmt::format("'{}' must be a map", path_));
      node_ = std::move(node);
    }
  }

  template <class T>
  void get(const char* key, T& value) {
    used_.insert(key);
    if (!node_) return;
    const YAML::Node n = node_[key];
    if (!n) return;
    try {
      value = n.as<T>();
    } catch (const YAML::Exception&) {
      throw ConfigError(fmt::format("'{}{}' has the wrong type", prefix(), key));
    }
  }

  bool has(const char* key) const { return node_ && node_[key]; }

  Section child(const char* key) {
    used_.insert(key);
    return Section(node_ ? node_[key] : YAML::Node(YAML::NodeType::Null), prefix() + key);
  }

  void finish() const {
    if (!node_) return;
    for (const auto& kv : node_) {
      const auto key = kv.first.as<std::string>();
      if (!used_.count(key)) throw ConfigError(fmt::format("unknown config key '{}{}'", prefix(), key));
    }
  }

 private:
  std::string prefix() const { return path_.empty() ? std::string() : path_ + "."; }

  YAML::Node node_{YAML::NodeType::Undefined};
  std::string path_;
  std::set<std::string> used_;
};

void read_axis(Section& parent, const char* key, AxisRange& r) {
  Section s = parent.child(key);
  s.get("lo", r.lo);
  s.get("hi", r.hi);
  s.get("resolution", r.resolution);
  s.finish();
}

void read_nls(Section s, numopt::NlsOptions& o) {
  s.get("gradient_tolerance", o.gradient_tolerance);
  s.get("step_tolerance", o.step_tolerance);
  s.get("relative_cost_tolerance", o.relative_cost_tolerance);
  s.get("max_iterations", o.max_iterations);
  s.get("initial_damping", o.initial_damping);
  s.finish();
}

void emit_axis(YAML::Emitter& out, const char* key, const AxisRange& r) {
  out << YAML::Key << key << YAML::Value << YAML::Flow << YAML::BeginMap;
  out << YAML::Key << "lo" << YAML::Value << format_double(r.lo);
  out << YAML::Key << "hi" << YAML::Value << format_double(r.hi);
  out << YAML::Key << "resolution" << YAML::Value << r.resolution;
  out << YAML::EndMap;
}

void emit_kv(YAML::Emitter& out, const char* key, double v) {
  out << YAML::Key << key << YAML::Value << format_double(v);
}

void emit_nls(YAML::Emitter& out, const char* key, const numopt::NlsOptions& o) {
  out << YAML::Key << key << YAML::Value << YAML::BeginMap;
  emit_kv(out, "gradient_tolerance", o.gradient_tolerance);
  emit_kv(out, "step_tolerance", o.step_tolerance);
  emit_kv(out, "relative_cost_tolerance", o.relative_cost_tolerance);
  out << YAML::Key << "max_iterations" << YAML::Value << o.max_iterations;
  emit_kv(out, "initial_damping", o.initial_damping);
  out << YAML::EndMap;
}

// Deterministic YAML emission for arbitrary trees (the config echo).
void emit_node(YAML::Emitter& out, const YAML::Node& n) {
  switch (n.Type()) {
    case YAML::NodeType::Map:
      out << YAML::BeginMap;
      for (const auto& kv : n) {
        out << YAML::Key << kv.first.as<std::string>() << YAML::Value;
        emit_node(out, kv.second);
      }
      out << YAML::EndMap;
      break;
    case YAML::NodeType::Sequence:
      out << YAML::BeginSeq;
      for (const auto& v : n) emit_node(out, v);
      out << YAML::EndSeq;
      break;
    case YAML::NodeType::Scalar:
      out << n.Scalar();
      break;
    default:
      out << YAML::Null;
  }
}

struct Context {
  const PipelineConfig& cfg;
  RobotModel model;
  fs::path dir;
  Manifest manifest;
  std::string config_hash;
  LogFn log;
  std::ostream& out;

  void info(const std::string& msg) const {
    if (log) log(LogLevel::kInfo, msg);
  }
  void debug(const std::string& msg) const {
    if (log) log(LogLevel::kDebug, msg);
  }

  ManifestEntry begin() const {
    ManifestEntry e;
    e.inputs["config"] = config_hash;
    return e;
  }

  // Reads a prerequisite and records its hash; a hash that disagrees with the
  // manifest means the file changed after it was written.
  std::string read_input(const std::string& file, ManifestEntry& entry) const {
    const fs::path p = dir / file;
    if (!fs::exists(p)) throw MissingPrerequisite(fmt::format("missing prerequisite artifact {}", p.string()));
    std::string text = read_text(p);
    const std::string hash = sha256_hex(text);
    const std::string recorded = manifest.output_hash(file);
    if (!recorded.empty() && recorded != hash)
      throw CorruptArtifact(fmt::format("{} does not match the hash recorded in manifest.yaml", p.string()));
    entry.inputs[file] = hash;
    return text;
  }

  void write_output(const std::string& file, const std::string& content, ManifestEntry& entry) const {
    write_atomic(dir / file, content);
    entry.outputs[file] = sha256_hex(content);
    debug(fmt::format("wrote {}", (dir / file).string()));
  }

  void commit(const std::string& stage, ManifestEntry entry) {
    manifest.stages[stage] = std::move(entry);
    write_atomic(dir / "manifest.yaml", manifest_to_yaml(manifest));
  }
};

template <class F>
auto parse_artifact(const std::string& file, F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kParse || e.code() == ErrorCode::kSchemaVersion ||
        e.code() == ErrorCode::kDimensionMismatch)
      throw CorruptArtifact(fmt::format("{}: {}", file, e.what()));
    throw;
  } catch (const YAML::Exception& e) {
    throw CorruptArtifact(fmt::format("{}: {}", file, e.what()));
  }
}

YAML::Node load_yaml_artifact(const std::string& file, const std::string& text, const std::string& kind) {
  return parse_artifact(file, [&] {
    YAML::Node root = YAML::Load(text);
    if (!root.IsMap() || !root["schema_version"] || !root["kind"])
      throw Error(ErrorCode::kParse, "missing schema_version/kind header");
    if (root["schema_version"].as<int>() != kArtifactSchemaVersion)
      throw Error(ErrorCode::kSchemaVersion, "unsupported schema_version " + root["schema_version"].as<std::string>());
    if (root["kind"].as<std::string>() != kind) throw Error(ErrorCode::kParse, "expected kind " + kind);
    return root;
  });
}

std::string trajectory_file(std::size_t k) { return fmt::format("trajectory_{}.csv", k); }
std::string dataset_file(std::size_t k) { return fmt::format("dataset_{}.csv", k); }
std::string trace_file(std::size_t k) { return fmt::format("trace_{}.csv", k); }

std::vector<DoubleSupportConfig> read_stances(Context& ctx, ManifestEntry& entry) {
  const auto text = ctx.read_input("stances.csv", entry);
  return parse_artifact("stances.csv", [&] { return stances_from_table(ctx.model, parse_csv(text, "stances")); });
}

void stage_sample(Context& ctx) {
  auto entry = ctx.begin();
  SamplerConfig sc = ctx.cfg.sampler;
  sc.seed = ctx.cfg.sampler_seed();
  const auto stances = sample_double_supports(sc, ctx.model);
  for (const auto& s : stances) ctx.debug(fmt::format("stance dx={} dy={} dtheta={}", s.dx, s.dy, s.dtheta));
  ctx.write_output("stances.csv", to_csv(stances_table(stances)), entry);
  ctx.commit("sample", std::move(entry));
  ctx.info(fmt::format("sampled {} double supports", stances.size()));
}

void stage_plan(Context& ctx) {
  auto entry = ctx.begin();
  const auto stances = read_stances(ctx, entry);
  YAML::Emitter rep;
  rep << YAML::BeginMap << YAML::Key << "schema_version" << YAML::Value << kArtifactSchemaVersion;
  rep << YAML::Key << "kind" << YAML::Value << "plan_report";
  rep << YAML::Key << "stances" << YAML::Value << YAML::BeginSeq;
  std::vector<std::pair<std::string, std::string>> outputs;
  for (std::size_t k = 0; k < stances.size(); ++k) {
    const auto& ds = stances[k];
    const JointVector q0 = reach_double_support(ctx.model, ds, ctx.cfg.planner);
    const PlanResult plan = plan_trajectory(ctx.model, ds, q0, ctx.cfg.planner);
    const CertificationReport cert = certify_plan(ctx.model, ds, plan, ctx.cfg.planner);
    ctx.info(fmt::format("stance {}: {} states, {} planning steps, complete={}, certified={}", k,
                         plan.trajectory.q.size(), plan.log.size(), plan.complete, cert.ok()));
    if (!cert.ok())
      throw Error(ErrorCode::kSolverStall,
                  fmt::format("plan for stance {} failed certification: {}", k, fmt::join(cert.failures, "; ")));
    if (!plan.complete) ctx.info(fmt::format("stance {}: step cap reached before the last landmark", k));
    outputs.emplace_back(trajectory_file(k), to_csv(trajectory_table(plan.trajectory)));

    rep << YAML::BeginMap;
    rep << YAML::Key << "stance" << YAML::Value << k;
    rep << YAML::Key << "states" << YAML::Value << plan.trajectory.q.size();
    rep << YAML::Key << "complete" << YAML::Value << plan.complete;
    rep << YAML::Key << "certified" << YAML::Value << cert.ok();
    emit_kv(rep, "worst_cop_margin", cert.worst_cop_margin);
    emit_kv(rep, "worst_limit_violation", cert.worst_limit_violation);
    emit_kv(rep, "worst_clearance", cert.worst_clearance);
    emit_kv(rep, "worst_foot_residual", cert.worst_foot_residual);
    rep << YAML::Key << "landmark_log" << YAML::Value << YAML::BeginSeq;
    for (const auto& v : plan.log) {
      rep << YAML::Flow << YAML::BeginMap;
      rep << YAML::Key << "step" << YAML::Value << v.step;
      rep << YAML::Key << "target" << YAML::Value << v.target;
      emit_kv(rep, "d_prev", v.d_prev);
      emit_kv(rep, "d", v.d);
      rep << YAML::Key << "switched" << YAML::Value << v.switched;
      rep << YAML::EndMap;
    }
    rep << YAML::EndSeq << YAML::EndMap;
  }
  rep << YAML::EndSeq << YAML::EndMap;
  for (const auto& [file, content] : outputs) ctx.write_output(file, content, entry);
  ctx.write_output("plan_report.yaml", std::string(rep.c_str()) + "\n", entry);
  ctx.commit("plan", std::move(entry));
}

CellParams8 read_truth(Context& ctx, ManifestEntry& entry) {
  const auto text = ctx.read_input("truth_params.yaml", entry);
  return parse_artifact("truth_params.yaml", [&] { return params_from_yaml(text, "truth_params").cells; });
}

void stage_simulate(Context& ctx) {
  auto entry = ctx.begin();
  const auto stances = read_stances(ctx, entry);
  const PipelineConfig& cfg = ctx.cfg;
  const CellParams8 truth = heterogeneous_truth(cfg.truth.nominal, cfg.truth.spread, cfg.truth_seed());
  NoiseModel noise = cfg.noise;
  noise.seed = cfg.noise_seed();
  const auto roles = split_roles(static_cast<int>(stances.size()), cfg.n_train, cfg.split_seed());
  const SensorOffsets offsets = random_sensor_offsets(cfg.sensor_offset, cfg.offset_seed());

  std::vector<std::pair<std::string, std::string>> outputs;
  YAML::Emitter idx;
  idx << YAML::BeginMap << YAML::Key << "schema_version" << YAML::Value << kArtifactSchemaVersion;
  idx << YAML::Key << "kind" << YAML::Value << "datasets";
  idx << YAML::Key << "datasets" << YAML::Value << YAML::BeginSeq;
  for (std::size_t k = 0; k < stances.size(); ++k) {
    const auto file = trajectory_file(k);
    const auto text = ctx.read_input(file, entry);
    const auto states = parse_artifact(file, [&] { return trajectory_states(parse_csv(text, "trajectory")); });
    if (states.front().size() != ctx.model.joint_count())
      throw CorruptArtifact(fmt::format("{}: joint count differs from the model", file));
    CalibrationDataset d =
        simulate_dataset(ctx.model, stances[k], states, truth, noise, static_cast<int>(k),
                                            cfg.samples_per_state, &offsets);
    d.role = roles[k];
    outputs.emplace_back(dataset_file(k), to_csv(dataset_table(d)));
    idx << YAML::Flow << YAML::BeginMap;
    idx << YAML::Key << "id" << YAML::Value << k;
    idx << YAML::Key << "file" << YAML::Value << dataset_file(k);
    idx << YAML::Key << "dx" << YAML::Value << format_double(stances[k].dx);
    idx << YAML::Key << "dy" << YAML::Value << format_double(stances[k].dy);
    idx << YAML::Key << "dtheta" << YAML::Value << format_double(stances[k].dtheta);
    idx << YAML::Key << "role" << YAML::Value << to_string(d.role);
    idx << YAML::Key << "frames" << YAML::Value << d.frames.size();
    idx << YAML::EndMap;
    ctx.info(fmt::format("dataset {}: {} frames, role {}", k, d.frames.size(), to_string(d.role)));
  }
  idx << YAML::EndSeq << YAML::EndMap;

  ParamsFile tp;
  tp.kind = "truth_params";
  tp.cells = truth;
  ctx.write_output("truth_params.yaml", params_to_yaml(tp), entry);
  for (const auto& [file, content] : outputs) ctx.write_output(file, content, entry);
  ctx.write_output("datasets.yaml", std::string(idx.c_str()) + "\n", entry);
  ctx.commit("simulate", std::move(entry));
}

void emit_mae(YAML::Emitter& out, const MaeReport& m) {
  out << YAML::Flow << YAML::BeginMap;
  emit_kv(out, "mean", m.mean);
  emit_kv(out, "std", m.std);
  out << YAML::Key << "count" << YAML::Value << m.count;
  out << YAML::Key << "units" << YAML::Value << m.units;
  out << YAML::EndMap;
}

void stage_manual(Context& ctx) {
  auto entry = ctx.begin();
  const CellParams8 truth = read_truth(ctx, entry);
  ManualBias bias = ctx.cfg.manual;
  bias.seed = ctx.cfg.manual_seed();
  NoiseModel noise = ctx.cfg.noise;
  noise.seed = ctx.cfg.manual_seed();
  const ManualCalibration cal = run_manual_calibration(ctx.model, truth, bias, noise, ctx.cfg.identify);

  ParamsFile pf;
  pf.kind = "manual_params";
  YAML::Emitter rep;
  rep << YAML::BeginMap << YAML::Key << "schema_version" << YAML::Value << kArtifactSchemaVersion;
  rep << YAML::Key << "kind" << YAML::Value << "manual_report";
  rep << YAML::Key << "shoes" << YAML::Value << YAML::BeginMap;
  for (int f = 0; f < 2; ++f) {
    const auto& shoe = cal.shoes[f];
    for (int i = 0; i < kCellsPerFoot; ++i) pf.cells[f * kCellsPerFoot + i] = shoe.assumed.cells[i];
    (f == 0 ? pf.left : pf.right) = shoe.correction;
    const char* name = f == 0 ? "left" : "right";
    rep << YAML::Key << name << YAML::Value << YAML::BeginMap;
    rep << YAML::Key << "samples" << YAML::Value << shoe.grid.samples.size();
    rep << YAML::Key << "grf" << YAML::Value;
    emit_mae(rep, shoe.grf);
    rep << YAML::Key << "cop_uncorrected" << YAML::Value;
    emit_mae(rep, shoe.cop_measured);
    rep << YAML::Key << "cop_corrected" << YAML::Value;
    emit_mae(rep, shoe.cop_corrected);
    rep << YAML::Key << "warnings" << YAML::Value << YAML::BeginSeq;
    for (const auto& w : shoe.grid.warnings) rep << w;
    rep << YAML::EndSeq << YAML::EndMap;
    for (const auto& w : shoe.grid.warnings) ctx.info(fmt::format("{} shoe: {}", name, w));
    ctx.info(fmt::format("{} shoe: CoP MAE {:.3f} -> {:.3f} mm, GRF MAE {:.3f} N", name, shoe.cop_measured.mean,
                         shoe.cop_corrected.mean, shoe.grf.mean));
  }
  rep << YAML::EndMap << YAML::EndMap;
  ctx.write_output("manual_params.yaml", params_to_yaml(pf), entry);
  ctx.write_output("grid_left.csv", to_csv(grid_table(cal.shoes[0].grid)), entry);
  ctx.write_output("grid_right.csv", to_csv(grid_table(cal.shoes[1].grid)), entry);
  ctx.write_output("manual_report.yaml", std::string(rep.c_str()) + "\n", entry);
  ctx.commit("manual-cal", std::move(entry));
}

std::vector<CalibrationDataset> read_datasets(Context& ctx, ManifestEntry& entry) {
  const auto text = ctx.read_input("datasets.yaml", entry);
  const YAML::Node root = load_yaml_artifact("datasets.yaml", text, "datasets");
  std::vector<CalibrationDataset> out;
  for (const auto& n : root["datasets"]) {
    CalibrationDataset d;
    std::string file;
    parse_artifact("datasets.yaml", [&] {
      d.id = n["id"].as<int>();
      file = n["file"].as<std::string>();
      d.ds = make_double_support(ctx.model, n["dx"].as<double>(), n["dy"].as<double>(), n["dtheta"].as<double>());
      const auto role = n["role"].as<std::string>();
      if (role != "train" && role != "test") throw Error(ErrorCode::kParse, "unknown role " + role);
      d.role = role == "train" ? Role::kTrain : Role::kTest;
      return 0;
    });
    const auto csv = ctx.read_input(file, entry);
    parse_artifact(file, [&] {
      dataset_from_table(parse_csv(csv, "dataset"), d);
      if (!d.frames.empty() && d.frames.front().q.size() != ctx.model.joint_count())
        throw Error(ErrorCode::kParse, "joint count differs from the model");
      d.validate(1);
      return 0;
    });
    out.push_back(std::move(d));
  }
  if (out.empty()) throw CorruptArtifact("datasets.yaml lists no datasets");
  return out;
}

void split(const std::vector<CalibrationDataset>& all, std::vector<CalibrationDataset>& train,
           std::vector<CalibrationDataset>& test) {
  for (const auto& d : all) (d.role == Role::kTrain ? train : test).push_back(d);
}

void stage_selfcal(Context& ctx) {
  auto entry = ctx.begin();
  std::vector<CalibrationDataset> train, test;
  split(read_datasets(ctx, entry), train, test);
  if (train.empty()) throw Error(ErrorCode::kDegenerateData, "no training datasets");
  const SharedGuess init = initial_guess(train, ctx.cfg.init_grf_row);
  ctx.info(fmt::format("initial guess c0={:.6g} d0={:.6g}", init.c0, init.d0));
  const IdentifyResult id = identify_params(train, init, ctx.cfg.weights, ctx.cfg.identify);
  ctx.info(fmt::format("identification: {} after {} iterations, cost {:.6g} -> {:.6g}",
                       numopt::to_string(id.report.reason), id.report.iterations, id.report.initial_cost,
                       id.report.final_cost));
  const DoubleCorrection corr = fit_double_correction(ctx.model, train, id.params, ctx.cfg.identify);
  ctx.info(fmt::format("correction fit: {} after {} iterations", numopt::to_string(corr.report.reason),
                       corr.report.iterations));
  ParamsFile pf;
  pf.kind = "selfcal_params";
  pf.cells = id.params;
  pf.left = corr.left;
  pf.right = corr.right;
  pf.init = init;
  ctx.write_output("selfcal_params.yaml", params_to_yaml(pf), entry);
  ctx.commit("self-cal", std::move(entry));
}

void stage_evaluate(Context& ctx) {
  auto entry = ctx.begin();
  const auto ptext = ctx.read_input("selfcal_params.yaml", entry);
  const ParamsFile pf = parse_artifact("selfcal_params.yaml", [&] { return params_from_yaml(ptext, "selfcal_params"); });
  if (!pf.init) throw CorruptArtifact("selfcal_params.yaml: missing initial_guess");
  const CellParams8 truth = read_truth(ctx, entry);
  const auto all = read_datasets(ctx, entry);
  std::vector<CalibrationDataset> train, test;
  split(all, train, test);

  SelfCalResult r;
  r.init = *pf.init;
  r.params = pf.cells;
  r.left = pf.left;
  r.right = pf.right;
  evaluate(ctx.model, r, train, test);

  // Measurements under the true parameters: the quasi-static closure.
  SelfCalResult closure;
  closure.params = truth;

  const PipelineConfig& cfg = ctx.cfg;
  YAML::Emitter out;
  out << YAML::BeginMap << YAML::Key << "schema_version" << YAML::Value << kArtifactSchemaVersion;
  out << YAML::Key << "kind" << YAML::Value << "result";
  out << YAML::Key << "seeds" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "global" << YAML::Value << cfg.seed;
  out << YAML::Key << "sampler" << YAML::Value << cfg.sampler_seed();
  out << YAML::Key << "truth" << YAML::Value << cfg.truth_seed();
  out << YAML::Key << "noise" << YAML::Value << cfg.noise_seed();
  out << YAML::Key << "manual" << YAML::Value << cfg.manual_seed();
  out << YAML::Key << "split" << YAML::Value << cfg.split_seed();
  out << YAML::Key << "sensor_offset" << YAML::Value << cfg.offset_seed();
  out << YAML::EndMap;
  out << YAML::Key << "config" << YAML::Value;
  emit_node(out, YAML::Load(cfg.to_yaml()));
  out << YAML::Key << "datasets" << YAML::Value << YAML::BeginSeq;
  for (const auto& d : all) {
    out << YAML::Flow << YAML::BeginMap << YAML::Key << "id" << YAML::Value << d.id;
    out << YAML::Key << "role" << YAML::Value << to_string(d.role);
    out << YAML::Key << "frames" << YAML::Value << d.frames.size() << YAML::EndMap;
  }
  out << YAML::EndSeq;
  out << YAML::Key << "params" << YAML::Value;
  emit_node(out, YAML::Load(params_to_yaml(pf)));
  out << YAML::Key << "mae" << YAML::Value << YAML::BeginSeq;
  for (int v = 0; v < 3; ++v) {
    for (int role = 0; role < 2; ++role) {
      const auto& m = r.mae[v][role];
      if (!m) continue;
      out << YAML::BeginMap;
      out << YAML::Key << "variant" << YAML::Value << to_string(static_cast<Variant>(v));
      out << YAML::Key << "role" << YAML::Value << to_string(static_cast<Role>(role));
      out << YAML::Key << "grf" << YAML::Value;
      emit_mae(out, m->grf);
      out << YAML::Key << "cop" << YAML::Value;
      emit_mae(out, m->cop);
      out << YAML::EndMap;
    }
  }
  out << YAML::EndSeq;
  out << YAML::Key << "closure" << YAML::Value << YAML::BeginSeq;
  for (const auto& d : all) {
    const MaePair m = evaluate_variant(ctx.model, {d}, closure, Variant::kSelfCal);
    out << YAML::BeginMap << YAML::Key << "dataset" << YAML::Value << d.id;
    out << YAML::Key << "grf" << YAML::Value;
    emit_mae(out, m.grf);
    out << YAML::Key << "cop" << YAML::Value;
    emit_mae(out, m.cop);
    out << YAML::EndMap;
  }
  out << YAML::EndSeq;
  out << YAML::EndMap;

  for (std::size_t k = 0; k < all.size(); ++k)
    ctx.write_output(trace_file(static_cast<std::size_t>(all[k].id)), to_csv(trace_table(ctx.model, all[k], r)), entry);
  ctx.write_output("result.yaml", std::string(out.c_str()) + "\n", entry);
  ctx.commit("evaluate", std::move(entry));
}

struct MaeCell {
  double mean = 0.0;
  double std = 0.0;
};

MaeCell read_mae(const YAML::Node& n) { return {n["mean"].as<double>(), n["std"].as<double>()}; }

std::string cell_text(const std::optional<MaeCell>& c, int precision) {
  if (!c) return "-";
  return fmt::format("{:.{}f} ± {:.{}f}", c->mean, precision, c->std, precision);
}

int exit_for(const Error& e) {
  switch (e.code()) {
    case ErrorCode::kParse:
    case ErrorCode::kSchemaVersion:
      return kExitCorruptArtifact;
    default:
      return kExitSolverFailure;
  }
}

}  // namespace

const char* to_string(Stage s) {
  switch (s) {
    case Stage::kSample: return "sample";
    case Stage::kPlan: return "plan";
    case Stage::kSimulate: return "simulate";
    case Stage::kManualCal: return "manual-cal";
    case Stage::kSelfCal: return "self-cal";
    case Stage::kEvaluate: return "evaluate";
    case Stage::kReport: return "report";
    case Stage::kAll: return "all";
  }
  return "?";
}

std::optional<Stage> parse_stage(const std::string& name) {
  for (Stage s : {Stage::kSample, Stage::kPlan, Stage::kSimulate, Stage::kManualCal, Stage::kSelfCal,
                  Stage::kEvaluate, Stage::kReport, Stage::kAll})
    if (name == to_string(s)) return s;
  if (name == "calibrate") return Stage::kSelfCal;
  return std::nullopt;
}

PipelineConfig PipelineConfig::from_yaml(const std::string& text, const fs::path& base_dir) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("config is not valid YAML: ") + e.what());
  }
  if (!root.IsMap()) throw ConfigError("config must be a map");
  PipelineConfig c;
  try {
    Section s(root, "");
    int version = 0;
    s.get("schema_version", version);
    if (version != kConfigSchemaVersion)
      throw ConfigError(fmt::format("config schema_version must be {}", kConfigSchemaVersion));
    if (!s.has("seed")) throw ConfigError("config must set 'seed'");
    s.get("seed", c.seed);
    std::string model;
    s.get("model", model);
    if (!model.empty()) {
      c.model_path = fs::path(model).is_absolute() ? fs::path(model) : base_dir / model;
      if (!fs::exists(c.model_path)) throw ConfigError("model file not found: " + c.model_path.string());
    }
    std::string out_dir = c.output_dir.string();
    s.get("output_dir", out_dir);
    c.output_dir = out_dir;

    {
      Section t = s.child("sampler");
      read_axis(t, "dx", c.sampler.dx);
      read_axis(t, "dy", c.sampler.dy);
      read_axis(t, "dtheta", c.sampler.dtheta);
      t.get("w_d", c.sampler.w_d);
      t.get("w_o", c.sampler.w_o);
      t.get("threshold", c.sampler.threshold);
      t.get("count", c.sampler.count);
      t.get("max_consecutive_rejections", c.sampler.max_consecutive_rejections);
      t.finish();
    }
    {
      Section t = s.child("planner");
      auto& p = c.planner;
      t.get("horizon", p.horizon);
      t.get("cop_weight", p.cop_weight);
      t.get("smoothness_weight", p.smoothness_weight);
      t.get("d_min", p.d_min);
      t.get("arrival_radius", p.arrival_radius);
      t.get("cop_margin", p.cop_margin);
      t.get("max_transition", p.max_transition);
      t.get("landmark_inset", p.landmark_inset);
      t.get("max_steps", p.max_steps);
      t.get("feasibility_tolerance", p.feasibility_tolerance);
      Section pen = t.child("penalty");
      pen.get("initial_weight", p.penalty.initial_weight);
      pen.get("growth", p.penalty.growth);
      pen.get("max_outer_iterations", p.penalty.max_outer_iterations);
      pen.get("feasibility_tolerance", p.penalty.feasibility_tolerance);
      pen.finish();
      read_nls(t.child("inner"), p.inner);
      t.finish();
    }
    {
      Section t = s.child("truth");
      t.get("nominal_a", c.truth.nominal.a);
      t.get("nominal_b", c.truth.nominal.b);
      t.get("spread", c.truth.spread);
      t.finish();
    }
    {
      Section t = s.child("noise");
      t.get("voltage_std", c.noise.voltage_std);
      t.get("drift_amplitude", c.noise.drift_amplitude);
      t.get("drift_period", c.noise.drift_period);
      t.get("grf_perturbation", c.noise.grf_perturbation);
      t.get("grf_period", c.noise.grf_period);
      t.get("cop_perturbation", c.noise.cop_perturbation);
      t.get("cop_period", c.noise.cop_period);
      t.finish();
    }
    {
      Section t = s.child("simulate");
      t.get("samples_per_state", c.samples_per_state);
      t.get("sensor_offset", c.sensor_offset);
      t.finish();
    }
    {
      Section t = s.child("manual");
      t.get("position_perturbation", c.manual.position_perturbation);
      t.get("gain_error", c.manual.gain_error);
      t.get("calibration_mass_kg", c.manual.calibration_mass_kg);
      t.get("readings_per_level", c.manual.readings_per_level);
      t.finish();
    }
    {
      Section t = s.child("selfcal");
      t.get("w_n", c.weights.w_n);
      t.get("w_c", c.weights.w_c);
      t.get("w_zeta", c.weights.w_zeta);
      t.get("n_train", c.n_train);
      t.get("init_grf_row", c.init_grf_row);
      read_nls(t.child("solver"), c.identify);
      t.finish();
    }
    s.finish();
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  c.validate();
  return c;
}

PipelineConfig PipelineConfig::load(const fs::path& path) {
  if (!fs::exists(path)) throw ConfigError("config file not found: " + path.string());
  return from_yaml(read_text(path), path.parent_path());
}

void PipelineConfig::validate() const {
  try {
    sampler.validate();
    planner.validate();
    weights.validate();
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  if (!(truth.nominal.a > 0.0)) throw ConfigError("truth.nominal_a must be positive");
  if (!(truth.spread >= 0.0 && truth.spread < 1.0)) throw ConfigError("truth.spread must lie in [0, 1)");
  for (double v : {noise.voltage_std, noise.drift_amplitude, noise.grf_perturbation, noise.cop_perturbation})
    if (!(v >= 0.0)) throw ConfigError("noise amplitudes must be non-negative");
  for (double v : {noise.drift_period, noise.grf_period, noise.cop_period})
    if (!(v > 0.0)) throw ConfigError("noise periods must be positive");
  if (samples_per_state < 1) throw ConfigError("simulate.samples_per_state must be at least 1");
  if (!(sensor_offset >= 0.0)) throw ConfigError("simulate.sensor_offset must be non-negative");
  if (manual.position_perturbation < 0.0 || manual.gain_error < 0.0 || !(manual.calibration_mass_kg > 0.0) ||
      manual.readings_per_level < 1)
    throw ConfigError("manual calibration settings out of range");
  if (n_train < 1 || n_train > sampler.count) throw ConfigError("selfcal.n_train must lie in [1, sampler.count]");
  for (const auto* o : {&planner.inner, &identify})
    if (o->max_iterations < 1 || !(o->initial_damping > 0.0)) throw ConfigError("solver settings out of range");
  if (planner.penalty.max_outer_iterations < 1 || !(planner.penalty.growth > 1.0) ||
      !(planner.penalty.initial_weight > 0.0))
    throw ConfigError("planner.penalty settings out of range");
}

std::string PipelineConfig::to_yaml() const {
  YAML::Emitter out;
  out << YAML::BeginMap;
  out << YAML::Key << "schema_version" << YAML::Value << kConfigSchemaVersion;
  out << YAML::Key << "seed" << YAML::Value << seed;
  out << YAML::Key << "model" << YAML::Value << model_path.string();
  out << YAML::Key << "sampler" << YAML::Value << YAML::BeginMap;
  emit_axis(out, "dx", sampler.dx);
  emit_axis(out, "dy", sampler.dy);
  emit_axis(out, "dtheta", sampler.dtheta);
  emit_kv(out, "w_d", sampler.w_d);
  emit_kv(out, "w_o", sampler.w_o);
  emit_kv(out, "threshold", sampler.threshold);
  out << YAML::Key << "count" << YAML::Value << sampler.count;
  out << YAML::Key << "max_consecutive_rejections" << YAML::Value << sampler.max_consecutive_rejections;
  out << YAML::EndMap;
  out << YAML::Key << "planner" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "horizon" << YAML::Value << planner.horizon;
  emit_kv(out, "cop_weight", planner.cop_weight);
  emit_kv(out, "smoothness_weight", planner.smoothness_weight);
  emit_kv(out, "d_min", planner.d_min);
  emit_kv(out, "arrival_radius", planner.arrival_radius);
  emit_kv(out, "cop_margin", planner.cop_margin);
  emit_kv(out, "max_transition", planner.max_transition);
  emit_kv(out, "landmark_inset", planner.landmark_inset);
  out << YAML::Key << "max_steps" << YAML::Value << planner.max_steps;
  emit_kv(out, "feasibility_tolerance", planner.feasibility_tolerance);
  out << YAML::Key << "penalty" << YAML::Value << YAML::BeginMap;
  emit_kv(out, "initial_weight", planner.penalty.initial_weight);
  emit_kv(out, "growth", planner.penalty.growth);
  out << YAML::Key << "max_outer_iterations" << YAML::Value << planner.penalty.max_outer_iterations;
  emit_kv(out, "feasibility_tolerance", planner.penalty.feasibility_tolerance);
  out << YAML::EndMap;
  emit_nls(out, "inner", planner.inner);
  out << YAML::EndMap;
  out << YAML::Key << "truth" << YAML::Value << YAML::BeginMap;
  emit_kv(out, "nominal_a", truth.nominal.a);
  emit_kv(out, "nominal_b", truth.nominal.b);
  emit_kv(out, "spread", truth.spread);
  out << YAML::EndMap;
  out << YAML::Key << "noise" << YAML::Value << YAML::BeginMap;
  emit_kv(out, "voltage_std", noise.voltage_std);
  emit_kv(out, "drift_amplitude", noise.drift_amplitude);
  emit_kv(out, "drift_period", noise.drift_period);
  emit_kv(out, "grf_perturbation", noise.grf_perturbation);
  emit_kv(out, "grf_period", noise.grf_period);
  emit_kv(out, "cop_perturbation", noise.cop_perturbation);
  emit_kv(out, "cop_period", noise.cop_period);
  out << YAML::EndMap;
  out << YAML::Key << "simulate" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "samples_per_state" << YAML::Value << samples_per_state;
  emit_kv(out, "sensor_offset", sensor_offset);
  out << YAML::EndMap;
  out << YAML::Key << "manual" << YAML::Value << YAML::BeginMap;
  emit_kv(out, "position_perturbation", manual.position_perturbation);
  emit_kv(out, "gain_error", manual.gain_error);
  emit_kv(out, "calibration_mass_kg", manual.calibration_mass_kg);
  out << YAML::Key << "readings_per_level" << YAML::Value << manual.readings_per_level;
  out << YAML::EndMap;
  out << YAML::Key << "selfcal" << YAML::Value << YAML::BeginMap;
  emit_kv(out, "w_n", weights.w_n);
  emit_kv(out, "w_c", weights.w_c);
  emit_kv(out, "w_zeta", weights.w_zeta);
  out << YAML::Key << "n_train" << YAML::Value << n_train;
  out << YAML::Key << "init_grf_row" << YAML::Value << init_grf_row;
  emit_nls(out, "solver", identify);
  out << YAML::EndMap;
  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

int run_stage(const PipelineConfig& config, Stage stage, std::ostream& out, const LogFn& log) {
  auto error = [&](const std::string& msg) {
    if (log) log(LogLevel::kError, msg);
  };
  if (stage == Stage::kReport) return report(config.output_dir / "result.yaml", out, log);
  try {
    config.validate();
    Context ctx{config, load_model(config.model_path.empty() ? default_model_path() : config.model_path),
                config.output_dir, {}, sha256_hex(config.to_yaml()), log, out};
    fs::create_directories(ctx.dir);
    const fs::path mpath = ctx.dir / "manifest.yaml";
    if (fs::exists(mpath)) {
      ctx.manifest = parse_artifact("manifest.yaml", [&] { return manifest_from_yaml(read_text(mpath)); });
    }
    const auto run_one = [&](Stage s) {
      ctx.info(fmt::format("stage {}", to_string(s)));
      switch (s) {
        case Stage::kSample: stage_sample(ctx); break;
        case Stage::kPlan: stage_plan(ctx); break;
        case Stage::kSimulate: stage_simulate(ctx); break;
        case Stage::kManualCal: stage_manual(ctx); break;
        case Stage::kSelfCal: stage_selfcal(ctx); break;
        case Stage::kEvaluate: stage_evaluate(ctx); break;
        default: break;
      }
    };
    if (stage == Stage::kAll) {
      for (Stage s : {Stage::kSample, Stage::kPlan, Stage::kSimulate, Stage::kManualCal, Stage::kSelfCal,
                      Stage::kEvaluate})
        run_one(s);
      return report(config.output_dir / "result.yaml", out, log);
    }
    run_one(stage);
    return kExitOk;
  } catch (const MissingPrerequisite& e) {
    error(e.what());
    return kExitMissingPrerequisite;
  } catch (const ConfigError& e) {
    error(e.what());
    return kExitBadConfig;
  } catch (const CorruptArtifact& e) {
    error(e.what());
    return kExitCorruptArtifact;
  } catch (const Error& e) {
    error(e.what());
    return exit_for(e);
  } catch (const std::exception& e) {
    error(e.what());
    return 1;
  }
}

int report(const fs::path& result_path, std::ostream& out, const LogFn& log) {
  auto error = [&](const std::string& msg) {
    if (log) log(LogLevel::kError, msg);
  };
  if (!fs::exists(result_path)) {
    error(fmt::format("missing prerequisite artifact {}", result_path.string()));
    return kExitMissingPrerequisite;
  }
  // [variant][role]
  std::array<std::array<std::optional<MaeCell>, 2>, 3> grf, cop;
  std::vector<std::pair<int, std::pair<MaeCell, MaeCell>>> closure;
  try {
    const YAML::Node root = load_yaml_artifact(result_path.string(), read_text(result_path), "result");
    const YAML::Node mae = root["mae"];
    if (!mae || !mae.IsSequence()) throw CorruptArtifact(result_path.string() + ": missing mae table");
    for (const auto& e : mae) {
      const auto vname = e["variant"].as<std::string>();
      const auto rname = e["role"].as<std::string>();
      int v = -1;
      for (int i = 0; i < 3; ++i)
        if (vname == to_string(static_cast<Variant>(i))) v = i;
      const int r = rname == "train" ? 0 : rname == "test" ? 1 : -1;
      if (v < 0 || r < 0) throw CorruptArtifact(result_path.string() + ": unknown variant or role");
      grf[v][r] = read_mae(e["grf"]);
      cop[v][r] = read_mae(e["cop"]);
    }
    if (const YAML::Node c = root["closure"])
      for (const auto& e : c) closure.push_back({e["dataset"].as<int>(), {read_mae(e["grf"]), read_mae(e["cop"])}});
  } catch (const CorruptArtifact& e) {
    error(e.what());
    return kExitCorruptArtifact;
  } catch (const YAML::Exception& e) {
    error(fmt::format("{}: {}", result_path.string(), e.what()));
    return kExitCorruptArtifact;
  }

  bool has_role[2] = {false, false};
  for (int v = 0; v < 3; ++v)
    for (int r = 0; r < 2; ++r) has_role[r] = has_role[r] || grf[v][r].has_value();
  if (!has_role[1]) out << "warning: no test datasets; showing training columns only\n";
  if (!has_role[0]) out << "warning: no training datasets; showing test columns only\n";

  std::vector<int> roles;
  for (int r = 0; r < 2; ++r)
    if (has_role[r]) roles.push_back(r);
  out << "Self-calibration MAE (mean ± std)\n";
  std::string header = fmt::format("{:<11}", "variant");
  for (int r : roles) header += fmt::format("{:<20}", fmt::format("GRF {} [N]", r == 0 ? "train" : "test"));
  for (int r : roles) header += fmt::format("{:<20}", fmt::format("CoP {} [mm]", r == 0 ? "train" : "test"));
  out << header << "\n";
  for (int v = 0; v < 3; ++v) {
    std::string line = fmt::format("{:<11}", to_string(static_cast<Variant>(v)));
    for (int r : roles) line += fmt::format("{:<20}", cell_text(grf[v][r], 3));
    for (int r : roles) line += fmt::format("{:<20}", cell_text(cop[v][r], 2));
    out << line << "\n";
  }

  if (!closure.empty()) {
    out << "\nQuasi-static closure under true cell parameters (mean ± std)\n";
    out << fmt::format("{:<11}{:<20}{:<20}\n", "dataset", "GRF [N]", "CoP [mm]");
    for (const auto& [id, m] : closure)
      out << fmt::format("{:<11}{:<20}{:<20}\n", id, cell_text(m.first, 3), cell_text(m.second, 2));
  }

  const fs::path manual = result_path.parent_path() / "manual_report.yaml";
  if (fs::exists(manual)) {
    try {
      const YAML::Node root = load_yaml_artifact(manual.string(), read_text(manual), "manual_report");
      out << "\nManual calibration grid MAE (mean ± std)\n";
      out << fmt::format("{:<11}{:<20}{:<20}{:<20}\n", "shoe", "GRF [N]", "CoP raw [mm]", "CoP corrected [mm]");
      for (const char* shoe : {"left", "right"}) {
        const YAML::Node s = root["shoes"][shoe];
        out << fmt::format("{:<11}{:<20}{:<20}{:<20}\n", shoe, cell_text(read_mae(s["grf"]), 3),
                           cell_text(read_mae(s["cop_uncorrected"]), 2), cell_text(read_mae(s["cop_corrected"]), 2));
      }
    } catch (const std::exception& e) {
      error(e.what());
      return kExitCorruptArtifact;
    }
  }
  return kExitOk;
}

}  // namespace footcal
