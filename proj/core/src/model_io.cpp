#include "footcal/model_io.hpp"

#include <yaml-cpp/yaml.h>

#include <fstream>
#include <map>
#include <sstream>

#include "footcal/error.hpp"

namespace footcal {

namespace {

Vec3 read_vec3(const YAML::Node& n, const char* what) {
  if (!n || !n.IsSequence() || n.size() != 3) throw Error(ErrorCode::kParse, std::string(what) + " must be a 3-vector");
  return Vec3(n[0].as<double>(), n[1].as<double>(), n[2].as<double>());
}

Vec2 read_vec2(const YAML::Node& n, const char* what) {
  if (!n || !n.IsSequence() || n.size() != 2) throw Error(ErrorCode::kParse, std::string(what) + " must be a 2-vector");
  return Vec2(n[0].as<double>(), n[1].as<double>());
}

Polygon read_polygon(const YAML::Node& n, const char* what) {
  Polygon poly;
  if (!n) return poly;
  for (const auto& v : n) poly.push_back(read_vec2(v, what));
  return poly;
}

Pose read_origin(const YAML::Node& n) {
  Pose p;
  if (!n) return p;
  if (n["translation"]) p.translation = read_vec3(n["translation"], "origin.translation");
  if (n["rpy"]) {
    const Vec3 rpy = read_vec3(n["rpy"], "origin.rpy");
    p.rotation = (Eigen::AngleAxisd(rpy.z(), Vec3::UnitZ()) * Eigen::AngleAxisd(rpy.y(), Vec3::UnitY()) *
                  Eigen::AngleAxisd(rpy.x(), Vec3::UnitX()))
                     .toRotationMatrix();
  }
  return p;
}

FootLayout read_foot(const YAML::Node& n, const std::map<std::string, int>& link_index, const char* which) {
  if (!n) throw Error(ErrorCode::kParse, std::string("missing foot '") + which + "'");
  FootLayout f;
  const auto sole = n["sole"].as<std::string>();
  const auto it = link_index.find(sole);
  if (it == link_index.end()) throw Error(ErrorCode::kParse, "unknown sole link '" + sole + "'");
  f.sole_link = it->second;
  const YAML::Node s = n["sensors"];
  if (!s || s.size() != kCellsPerFoot) throw Error(ErrorCode::kParse, "each foot needs exactly 4 sensor points");
  for (int i = 0; i < kCellsPerFoot; ++i) f.sensors[i] = read_vec2(s[i], "sensor");
  f.sensing_polygon = read_polygon(n["sensing_polygon"], "sensing_polygon vertex");
  f.support_polygon = read_polygon(n["support_polygon"], "support_polygon vertex");
  if (f.support_polygon.empty()) throw Error(ErrorCode::kParse, "foot support_polygon is required");
  return f;
}

YAML::Node vec_node(const Eigen::Ref<const Eigen::VectorXd>& v) {
  YAML::Node n(YAML::NodeType::Sequence);
  for (Eigen::Index i = 0; i < v.size(); ++i) n.push_back(v[i]);
  n.SetStyle(YAML::EmitterStyle::Flow);
  return n;
}

}  // namespace

RobotModel parse_model(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw Error(ErrorCode::kParse, std::string("model document: ") + e.what());
  }
  try {
    const int version = root["schema_version"] ? root["schema_version"].as<int>() : -1;
    if (version != kModelSchemaVersion) {
      throw Error(ErrorCode::kSchemaVersion, "model schema_version " + std::to_string(version));
    }
    RobotModel model;
    model.name = root["name"] ? root["name"].as<std::string>() : "robot";
    if (root["gravity"]) model.gravity = root["gravity"].as<double>();
    model.foot_length = root["foot_length"].as<double>();

    std::map<std::string, int> link_index;
    std::vector<double> lo, hi, nominal;
    for (const auto& ln : root["links"]) {
      Link l;
      l.name = ln["name"].as<std::string>();
      if (link_index.count(l.name)) throw Error(ErrorCode::kParse, "duplicate link '" + l.name + "'");
      if (ln["parent"] && !ln["parent"].IsNull()) {
        const auto p = ln["parent"].as<std::string>();
        const auto it = link_index.find(p);
        if (it == link_index.end()) throw Error(ErrorCode::kParse, "link '" + l.name + "' has unknown parent '" + p + "'");
        l.parent = it->second;
      }
      l.origin = read_origin(ln["origin"]);
      l.mass = ln["mass"] ? ln["mass"].as<double>() : 0.0;
      if (ln["com"]) l.com = read_vec3(ln["com"], "com");
      if (ln["axis"]) {
        l.axis = read_vec3(ln["axis"], "axis");
        const YAML::Node lim = ln["limits"];
        if (!lim || lim.size() != 2) throw Error(ErrorCode::kParse, "joint '" + l.name + "' needs limits [lo, hi]");
        lo.push_back(lim[0].as<double>());
        hi.push_back(lim[1].as<double>());
        nominal.push_back(ln["nominal"] ? ln["nominal"].as<double>() : 0.5 * (lo.back() + hi.back()));
      }
      link_index[l.name] = static_cast<int>(model.links.size());
      model.links.push_back(l);
    }
    model.q_min = Eigen::Map<Eigen::VectorXd>(lo.data(), static_cast<Eigen::Index>(lo.size()));
    model.q_max = Eigen::Map<Eigen::VectorXd>(hi.data(), static_cast<Eigen::Index>(hi.size()));
    model.nominal_posture = Eigen::Map<Eigen::VectorXd>(nominal.data(), static_cast<Eigen::Index>(nominal.size()));

    std::map<std::string, int> capsule_index;
    for (const auto& cn : root["capsules"]) {
      LinkCapsule c;
      c.name = cn["name"].as<std::string>();
      const auto link = cn["link"].as<std::string>();
      const auto it = link_index.find(link);
      if (it == link_index.end()) throw Error(ErrorCode::kParse, "capsule '" + c.name + "' has unknown link");
      c.link = it->second;
      c.capsule.p0 = read_vec3(cn["p0"], "capsule p0");
      c.capsule.p1 = read_vec3(cn["p1"], "capsule p1");
      c.capsule.radius = cn["radius"].as<double>();
      capsule_index[c.name] = static_cast<int>(model.capsules.size());
      model.capsules.push_back(c);
    }
    for (const auto& pn : root["collision_pairs"]) {
      const auto a = pn[0].as<std::string>();
      const auto b = pn[1].as<std::string>();
      if (!capsule_index.count(a) || !capsule_index.count(b)) {
        throw Error(ErrorCode::kParse, "collision pair references unknown capsule");
      }
      model.collision_pairs.emplace_back(capsule_index[a], capsule_index[b]);
    }
    model.feet[0] = read_foot(root["feet"]["left"], link_index, "left");
    model.feet[1] = read_foot(root["feet"]["right"], link_index, "right");
    model.finalize();
    return model;
  } catch (const YAML::Exception& e) {
    throw Error(ErrorCode::kParse, std::string("model document: ") + e.what());
  }
}

RobotModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kParse, "cannot open model file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_model(ss.str());
}

std::string model_to_yaml(const RobotModel& model) {
  YAML::Node root;
  root["schema_version"] = kModelSchemaVersion;
  root["name"] = model.name;
  root["gravity"] = model.gravity;
  root["foot_length"] = model.foot_length;
  for (const Link& l : model.links) {
    YAML::Node ln;
    ln["name"] = l.name;
    ln["parent"] = l.parent >= 0 ? YAML::Node(model.links[l.parent].name) : YAML::Node(YAML::NodeType::Null);
    ln["origin"]["translation"] = vec_node(l.origin.translation);
    const Vec3 ypr = l.origin.rotation.eulerAngles(2, 1, 0);
    ln["origin"]["rpy"] = vec_node(Vec3(ypr[2], ypr[1], ypr[0]));
    if (l.joint >= 0) {
      ln["axis"] = vec_node(l.axis);
      YAML::Node lim(YAML::NodeType::Sequence);
      lim.push_back(model.q_min[l.joint]);
      lim.push_back(model.q_max[l.joint]);
      lim.SetStyle(YAML::EmitterStyle::Flow);
      ln["limits"] = lim;
      ln["nominal"] = model.nominal_posture[l.joint];
    }
    ln["mass"] = l.mass;
    ln["com"] = vec_node(l.com);
    root["links"].push_back(ln);
  }
  for (const LinkCapsule& c : model.capsules) {
    YAML::Node cn;
    cn["name"] = c.name;
    cn["link"] = model.links[c.link].name;
    cn["p0"] = vec_node(c.capsule.p0);
    cn["p1"] = vec_node(c.capsule.p1);
    cn["radius"] = c.capsule.radius;
    root["capsules"].push_back(cn);
  }
  for (const auto& [a, b] : model.collision_pairs) {
    YAML::Node pn(YAML::NodeType::Sequence);
    pn.push_back(model.capsules[a].name);
    pn.push_back(model.capsules[b].name);
    pn.SetStyle(YAML::EmitterStyle::Flow);
    root["collision_pairs"].push_back(pn);
  }
  const char* names[2] = {"left", "right"};
  for (int f = 0; f < 2; ++f) {
    const FootLayout& foot = model.feet[f];
    YAML::Node fn;
    fn["sole"] = model.links[foot.sole_link].name;
    for (const Vec2& s : foot.sensors) fn["sensors"].push_back(vec_node(s));
    for (const Vec2& v : foot.sensing_polygon) fn["sensing_polygon"].push_back(vec_node(v));
    for (const Vec2& v : foot.support_polygon) fn["support_polygon"].push_back(vec_node(v));
    root["feet"][names[f]] = fn;
  }
  YAML::Emitter out;
  out.SetDoublePrecision(17);
  out << root;
  return std::string(out.c_str()) + "\n";
}

std::filesystem::path default_model_path() {
  const std::filesystem::path source = std::filesystem::path(FOOTCAL_SOURCE_DATA_DIR) / "nao_like.yaml";
  if (std::filesystem::exists(source)) return source;
  return std::filesystem::path(FOOTCAL_INSTALL_DATA_DIR) / "nao_like.yaml";
}

}  // namespace footcal
