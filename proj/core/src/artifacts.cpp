#include "footcal/artifacts.hpp"

#include <fmt/format.h>
#include <openssl/sha.h>
#include <yaml-cpp/yaml.h>

#include <charconv>
#include <fstream>
#include <sstream>

#include "footcal/error.hpp"

namespace footcal {

namespace fs = std::filesystem;

namespace {

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, sep)) out.push_back(cell);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

std::string strip_cr(std::string s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
  return s;
}

void check_header(const YAML::Node& root, const std::string& expected_kind) {
  if (!root.IsMap() || !root["schema_version"] || !root["kind"])
    throw Error(ErrorCode::kParse, "missing schema_version/kind header");
  const int version = root["schema_version"].as<int>();
  if (version != kArtifactSchemaVersion)
    throw Error(ErrorCode::kSchemaVersion, fmt::format("unsupported schema_version {}", version));
  const auto kind = root["kind"].as<std::string>();
  if (kind != expected_kind) throw Error(ErrorCode::kParse, fmt::format("expected kind {}, got {}", expected_kind, kind));
}

void emit_header(YAML::Emitter& out, const std::string& kind) {
  out << YAML::Key << "schema_version" << YAML::Value << kArtifactSchemaVersion;
  out << YAML::Key << "kind" << YAML::Value << kind;
}

void emit_array(YAML::Emitter& out, const std::string& key, const std::array<double, 4>& v) {
  out << YAML::Key << key << YAML::Value << YAML::Flow << YAML::BeginSeq;
  for (double x : v) out << format_double(x);
  out << YAML::EndSeq;
}

std::array<double, 4> read_array(const YAML::Node& node, const char* key) {
  const auto n = node[key];
  if (!n || !n.IsSequence() || n.size() != 4) throw Error(ErrorCode::kParse, fmt::format("{} must have 4 entries", key));
  std::array<double, 4> v{};
  for (std::size_t i = 0; i < 4; ++i) v[i] = n[i].as<double>();
  return v;
}

void emit_shoe(YAML::Emitter& out, const ParamsFile& p, Foot foot) {
  const int off = static_cast<int>(foot) * kCellsPerFoot;
  const auto& corr = foot == Foot::kLeft ? p.left : p.right;
  out << YAML::BeginMap;
  out << YAML::Key << "cells" << YAML::Value << YAML::BeginSeq;
  for (int i = 0; i < kCellsPerFoot; ++i) {
    out << YAML::Flow << YAML::BeginMap;
    out << YAML::Key << "a" << YAML::Value << format_double(p.cells[off + i].a);
    out << YAML::Key << "b" << YAML::Value << format_double(p.cells[off + i].b);
    out << YAML::EndMap;
  }
  out << YAML::EndSeq;
  out << YAML::Key << "correction" << YAML::Value << YAML::BeginMap;
  emit_array(out, "a", corr.a);
  emit_array(out, "m", corr.m);
  emit_array(out, "b", corr.b);
  emit_array(out, "n", corr.n);
  out << YAML::EndMap;
  out << YAML::EndMap;
}

void read_shoe(const YAML::Node& node, ParamsFile& p, Foot foot) {
  if (!node || !node.IsMap()) throw Error(ErrorCode::kParse, "missing shoe entry");
  const auto cells = node["cells"];
  if (!cells || !cells.IsSequence() || cells.size() != kCellsPerFoot)
    throw Error(ErrorCode::kParse, "each shoe needs exactly 4 cells");
  const int off = static_cast<int>(foot) * kCellsPerFoot;
  for (int i = 0; i < kCellsPerFoot; ++i) {
    p.cells[off + i].a = cells[i]["a"].as<double>();
    p.cells[off + i].b = cells[i]["b"].as<double>();
  }
  auto& corr = foot == Foot::kLeft ? p.left : p.right;
  const auto c = node["correction"];
  if (!c) throw Error(ErrorCode::kParse, "missing correction");
  corr.a = read_array(c, "a");
  corr.m = read_array(c, "m");
  corr.b = read_array(c, "b");
  corr.n = read_array(c, "n");
}

}  // namespace

int CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < columns.size(); ++i)
    if (columns[i] == name) return static_cast<int>(i);
  throw Error(ErrorCode::kParse, fmt::format("{} table has no column '{}'", kind, name));
}

double CsvTable::number(std::size_t row, int col) const {
  const auto& s = rows.at(row).at(static_cast<std::size_t>(col));
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw Error(ErrorCode::kParse, fmt::format("{} row {}: '{}' is not a number", kind, row, s));
  return v;
}

void CsvTable::add_row(std::vector<std::string> row) {
  if (row.size() != columns.size()) throw Error(ErrorCode::kDimensionMismatch, "row width differs from header");
  rows.push_back(std::move(row));
}

std::string format_double(double v) { return fmt::format("{}", v); }

std::string to_csv(const CsvTable& table) {
  std::string out = fmt::format("# footcal {} schema_version={}\n", table.kind, kArtifactSchemaVersion);
  out += fmt::format("{}\n", fmt::join(table.columns, ","));
  for (const auto& row : table.rows) out += fmt::format("{}\n", fmt::join(row, ","));
  return out;
}

CsvTable parse_csv(const std::string& text, const std::string& expected_kind) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::kParse, "empty file");
  line = strip_cr(line);
  const std::string prefix = "# footcal ";
  if (line.rfind(prefix, 0) != 0) throw Error(ErrorCode::kParse, "missing '# footcal' header line");
  std::istringstream header(line.substr(prefix.size()));
  std::string kind, version_field;
  header >> kind >> version_field;
  const std::string vkey = "schema_version=";
  if (version_field.rfind(vkey, 0) != 0) throw Error(ErrorCode::kParse, "header has no schema_version");
  int version = 0;
  const auto vs = version_field.substr(vkey.size());
  auto [ptr, ec] = std::from_chars(vs.data(), vs.data() + vs.size(), version);
  if (ec != std::errc() || ptr != vs.data() + vs.size()) throw Error(ErrorCode::kParse, "bad schema_version");
  if (version != kArtifactSchemaVersion)
    throw Error(ErrorCode::kSchemaVersion, fmt::format("unsupported schema_version {}", version));
  if (kind != expected_kind) throw Error(ErrorCode::kParse, fmt::format("expected {} table, got {}", expected_kind, kind));

  CsvTable t;
  t.kind = kind;
  if (!std::getline(in, line)) throw Error(ErrorCode::kParse, "missing column line");
  t.columns = split(strip_cr(line), ',');
  while (std::getline(in, line)) {
    line = strip_cr(line);
    if (line.empty()) continue;
    auto row = split(line, ',');
    if (row.size() != t.columns.size())
      throw Error(ErrorCode::kParse, fmt::format("{} row {} has {} cells, expected {}", kind, t.rows.size(), row.size(),
                                                 t.columns.size()));
    t.rows.push_back(std::move(row));
  }
  return t;
}

void write_atomic(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string sha256_hex(const std::string& data) {
  unsigned char digest[SHA256_DIGEST_LENGTH];
  SHA256(reinterpret_cast<const unsigned char*>(data.data()), data.size(), digest);
  std::string hex;
  hex.reserve(2 * SHA256_DIGEST_LENGTH);
  for (unsigned char c : digest) hex += fmt::format("{:02x}", c);
  return hex;
}

CsvTable stances_table(const std::vector<DoubleSupportConfig>& stances) {
  CsvTable t{"stances", {"idx", "dx", "dy", "dtheta"}, {}};
  for (std::size_t i = 0; i < stances.size(); ++i)
    t.add_row({std::to_string(i), format_double(stances[i].dx), format_double(stances[i].dy),
               format_double(stances[i].dtheta)});
  return t;
}

std::vector<DoubleSupportConfig> stances_from_table(const RobotModel& model, const CsvTable& table) {
  const int cx = table.column("dx"), cy = table.column("dy"), ct = table.column("dtheta");
  std::vector<DoubleSupportConfig> out;
  for (std::size_t r = 0; r < table.rows.size(); ++r)
    out.push_back(make_double_support(model, table.number(r, cx), table.number(r, cy), table.number(r, ct)));
  if (out.empty()) throw Error(ErrorCode::kParse, "stance table is empty");
  return out;
}

CsvTable trajectory_table(const Trajectory& trajectory) {
  if (trajectory.q.empty()) throw Error(ErrorCode::kInvalidArgument, "empty trajectory");
  const int n = static_cast<int>(trajectory.q.front().size());
  CsvTable t;
  t.kind = "trajectory";
  t.columns.push_back("step");
  for (int j = 0; j < n; ++j) t.columns.push_back(fmt::format("q_{}", j));
  for (int j = 0; j < n; ++j) t.columns.push_back(fmt::format("u_{}", j));
  t.columns.insert(t.columns.end(), {"cop_x", "cop_y", "target"});
  for (std::size_t i = 0; i < trajectory.q.size(); ++i) {
    std::vector<std::string> row{std::to_string(i)};
    for (int j = 0; j < n; ++j) row.push_back(format_double(trajectory.q[i][j]));
    for (int j = 0; j < n; ++j) row.push_back(format_double(i == 0 ? 0.0 : trajectory.u[i - 1][j]));
    const Vec2 c = i < trajectory.cop.size() ? trajectory.cop[i] : Vec2::Zero();
    row.push_back(format_double(c.x()));
    row.push_back(format_double(c.y()));
    row.push_back(std::to_string(i < trajectory.target.size() ? trajectory.target[i] : 0));
    t.add_row(std::move(row));
  }
  return t;
}

std::vector<JointVector> trajectory_states(const CsvTable& table) {
  std::vector<int> cols;
  for (int j = 0;; ++j) {
    const auto name = fmt::format("q_{}", j);
    if (std::find(table.columns.begin(), table.columns.end(), name) == table.columns.end()) break;
    cols.push_back(table.column(name));
  }
  if (cols.empty()) throw Error(ErrorCode::kParse, "trajectory has no joint columns");
  std::vector<JointVector> q;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    JointVector v(static_cast<Eigen::Index>(cols.size()));
    for (std::size_t j = 0; j < cols.size(); ++j) v[static_cast<Eigen::Index>(j)] = table.number(r, cols[j]);
    q.push_back(std::move(v));
  }
  if (q.empty()) throw Error(ErrorCode::kParse, "trajectory is empty");
  return q;
}

CsvTable dataset_table(const CalibrationDataset& dataset) {
  if (dataset.frames.empty()) throw Error(ErrorCode::kInvalidArgument, "empty dataset");
  const int n = static_cast<int>(dataset.frames.front().q.size());
  CsvTable t;
  t.kind = "dataset";
  t.columns.push_back("frame");
  for (int j = 0; j < n; ++j) t.columns.push_back(fmt::format("q_{}", j));
  for (int i = 0; i < kCellCount; ++i) t.columns.push_back(fmt::format("S_{}", i));
  t.columns.insert(t.columns.end(), {"cop_x", "cop_y", "grf"});
  for (std::size_t k = 0; k < dataset.frames.size(); ++k) {
    const auto& f = dataset.frames[k];
    std::vector<std::string> row{std::to_string(f.index)};
    for (int j = 0; j < n; ++j) row.push_back(format_double(f.q[j]));
    for (double v : f.voltages) row.push_back(format_double(v));
    row.push_back(format_double(dataset.cop_ref[k].x()));
    row.push_back(format_double(dataset.cop_ref[k].y()));
    row.push_back(format_double(dataset.grf_ref));
    t.add_row(std::move(row));
  }
  return t;
}

void dataset_from_table(const CsvTable& table, CalibrationDataset& dataset) {
  const auto q = trajectory_states(table);
  const int cf = table.column("frame"), cx = table.column("cop_x"), cy = table.column("cop_y"),
            cg = table.column("grf");
  std::array<int, kCellCount> cs{};
  for (int i = 0; i < kCellCount; ++i) cs[i] = table.column(fmt::format("S_{}", i));
  dataset.frames.clear();
  dataset.cop_ref.clear();
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    SensorFrame f;
    f.index = static_cast<int>(table.number(r, cf));
    for (int i = 0; i < kCellCount; ++i) f.voltages[i] = table.number(r, cs[i]);
    f.q = q[r];
    dataset.frames.push_back(std::move(f));
    dataset.cop_ref.emplace_back(table.number(r, cx), table.number(r, cy));
    const double g = table.number(r, cg);
    if (r == 0) dataset.grf_ref = g;
    else if (g != dataset.grf_ref) throw Error(ErrorCode::kParse, "grf reference must be constant within a dataset");
  }
}

CsvTable grid_table(const GridRun& run) {
  CsvTable t{"grid", {"hole_x", "hole_y", "weight_kg", "f1", "f2", "f3", "f4", "cop_x", "cop_y"}, {}};
  for (const auto& s : run.samples) {
    std::vector<std::string> row{format_double(s.hole.x()), format_double(s.hole.y()), format_double(s.weight_kg)};
    for (double f : s.forces) row.push_back(format_double(f));
    row.push_back(format_double(s.cop.x()));
    row.push_back(format_double(s.cop.y()));
    t.add_row(std::move(row));
  }
  return t;
}

CsvTable trace_table(const RobotModel& model, const CalibrationDataset& dataset, const SelfCalResult& result) {
  CsvTable t{"trace",
             {"frame", "cop_meas_x", "cop_meas_y", "cop_model_x", "cop_model_y", "grf_meas", "grf_model", "variant"},
             {}};
  const CellParams8 init = shared_params(result.init);
  for (Variant v : {Variant::kInit, Variant::kSelfCal, Variant::kCorrected}) {
    const CellParams8& params = v == Variant::kInit ? init : result.params;
    const bool corrected = v == Variant::kCorrected;
    for (std::size_t k = 0; k < dataset.frames.size(); ++k) {
      const auto m = measure_frame(model, dataset.ds, dataset.frames[k], params, corrected ? &result.left : nullptr,
                                   corrected ? &result.right : nullptr);
      if (!m.valid) continue;
      t.add_row({std::to_string(dataset.frames[k].index), format_double(m.cop.x()), format_double(m.cop.y()),
                 format_double(dataset.cop_ref[k].x()), format_double(dataset.cop_ref[k].y()), format_double(m.grf),
                 format_double(dataset.grf_ref), to_string(v)});
    }
  }
  return t;
}

std::string params_to_yaml(const ParamsFile& params) {
  YAML::Emitter out;
  out << YAML::BeginMap;
  emit_header(out, params.kind);
  if (params.init) {
    out << YAML::Key << "initial_guess" << YAML::Value << YAML::Flow << YAML::BeginMap;
    out << YAML::Key << "c0" << YAML::Value << format_double(params.init->c0);
    out << YAML::Key << "d0" << YAML::Value << format_double(params.init->d0);
    out << YAML::EndMap;
  }
  out << YAML::Key << "shoes" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "left" << YAML::Value;
  emit_shoe(out, params, Foot::kLeft);
  out << YAML::Key << "right" << YAML::Value;
  emit_shoe(out, params, Foot::kRight);
  out << YAML::EndMap;
  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

ParamsFile params_from_yaml(const std::string& text, const std::string& expected_kind) {
  try {
    const auto root = YAML::Load(text);
    check_header(root, expected_kind);
    ParamsFile p;
    p.kind = expected_kind;
    const auto shoes = root["shoes"];
    if (!shoes) throw Error(ErrorCode::kParse, "missing shoes");
    read_shoe(shoes["left"], p, Foot::kLeft);
    read_shoe(shoes["right"], p, Foot::kRight);
    if (const auto g = root["initial_guess"]) p.init = SharedGuess{g["c0"].as<double>(), g["d0"].as<double>()};
    return p;
  } catch (const YAML::Exception& e) {
    throw Error(ErrorCode::kParse, e.what());
  }
}

std::string Manifest::output_hash(const std::string& file) const {
  for (const auto& [name, entry] : stages) {
    auto it = entry.outputs.find(file);
    if (it != entry.outputs.end()) return it->second;
  }
  return {};
}

std::string manifest_to_yaml(const Manifest& manifest) {
  YAML::Emitter out;
  out << YAML::BeginMap;
  emit_header(out, "manifest");
  out << YAML::Key << "stages" << YAML::Value << YAML::BeginMap;
  for (const auto& [name, entry] : manifest.stages) {
    out << YAML::Key << name << YAML::Value << YAML::BeginMap;
    for (const auto* part : {"inputs", "outputs"}) {
      const auto& m = std::string(part) == "inputs" ? entry.inputs : entry.outputs;
      out << YAML::Key << part << YAML::Value << YAML::BeginMap;
      for (const auto& [file, hash] : m) out << YAML::Key << file << YAML::Value << hash;
      out << YAML::EndMap;
    }
    out << YAML::EndMap;
  }
  out << YAML::EndMap;
  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

Manifest manifest_from_yaml(const std::string& text) {
  try {
    const auto root = YAML::Load(text);
    check_header(root, "manifest");
    Manifest m;
    for (const auto& stage : root["stages"]) {
      ManifestEntry e;
      for (const auto& kv : stage.second["inputs"]) e.inputs[kv.first.as<std::string>()] = kv.second.as<std::string>();
      for (const auto& kv : stage.second["outputs"])
        e.outputs[kv.first.as<std::string>()] = kv.second.as<std::string>();
      m.stages[stage.first.as<std::string>()] = std::move(e);
    }
    return m;
  } catch (const YAML::Exception& e) {
    throw Error(ErrorCode::kParse, e.what());
  }
}

}  // namespace footcal
