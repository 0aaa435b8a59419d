#include "magbike/structure_io.hpp"

#include <yaml-cpp/yaml.h>

#include <cmath>
#include <iomanip>
#include <sstream>

namespace magbike::io {

using geometry::StructureError;
using geometry::Vec3;

namespace {

Vec3 read_vec3(const YAML::Node& node, const std::string& what) {
  if (!node || !node.IsSequence() || node.size() != 3) {
    throw StructureError(what + " must be a list of three numbers");
  }
  return {node[0].as<double>(), node[1].as<double>(), node[2].as<double>()};
}

std::pair<double, double> read_range(const YAML::Node& node, const std::string& what) {
  if (!node || !node.IsSequence() || node.size() != 2) {
    throw StructureError(what + " must be a [min, max] pair");
  }
  return {node[0].as<double>(), node[1].as<double>()};
}

geometry::Frame read_frame(const YAML::Node& node, const std::string& id) {
  geometry::Frame f;
  f.origin = node["origin"] ? read_vec3(node["origin"], id + ".origin") : Vec3::Zero();
  Vec3 u = read_vec3(node["axis_u"], id + ".axis_u");
  Vec3 v = read_vec3(node["axis_v"], id + ".axis_v");
  if (u.norm() < 1e-12 || v.norm() < 1e-12) throw StructureError(id + ": zero-length axis");
  u.normalize();
  v.normalize();
  if (std::abs(u.dot(v)) > 1e-6) throw StructureError(id + ": axis_u and axis_v are not orthogonal");
  v = (v - v.dot(u) * u).normalized();
  f.axis_u = u;
  f.axis_v = v;
  return f;
}

geometry::EdgeRef read_edge(const YAML::Node& node, const std::string& what) {
  if (!node || !node["patch"] || !node["side"]) {
    throw StructureError(what + " needs 'patch' and 'side'");
  }
  return {node["patch"].as<std::string>(), geometry::side_from_string(node["side"].as<std::string>())};
}

geometry::JointKind joint_kind_from_string(const std::string& s) {
  if (s == "internal") return geometry::JointKind::Internal;
  if (s == "external") return geometry::JointKind::External;
  if (s == "flat") return geometry::JointKind::Flat;
  throw StructureError("unknown joint kind '" + s + "'");
}

}  // namespace

geometry::StructureModel parse_structure(const YAML::Node& root) {
  if (!root || !root.IsMap()) throw StructureError("structure document must be a mapping");
  const int version = root["version"] ? root["version"].as<int>() : -1;
  if (version != kStructureSchemaVersion) {
    throw StructureError("unsupported structure schema version " + std::to_string(version));
  }
  geometry::StructureModel model;
  if (root["frame"]) model.frame_tag = root["frame"].as<std::string>();
  const YAML::Node patches = root["patches"];
  if (!patches || !patches.IsSequence() || patches.size() == 0) {
    throw StructureError("structure needs a non-empty 'patches' list");
  }
  for (const auto& pn : patches) {
    geometry::SurfacePatch p;
    if (!pn["id"]) throw StructureError("patch without id");
    p.id = pn["id"].as<std::string>();
    p.kind = geometry::patch_kind_from_string(pn["kind"] ? pn["kind"].as<std::string>() : "");
    p.frame = read_frame(pn, p.id);
    if (p.is_cylinder()) {
      if (!pn["radius"]) throw StructureError(p.id + ": cylinders need a radius");
      p.radius = pn["radius"].as<double>();
    } else if (pn["radius"]) {
      throw StructureError(p.id + ": planes must not declare a radius");
    }
    const YAML::Node b = pn["bounds"];
    if (!b) throw StructureError(p.id + ": missing bounds");
    std::tie(p.bounds.u_min, p.bounds.u_max) = read_range(b["u"], p.id + ".bounds.u");
    std::tie(p.bounds.v_min, p.bounds.v_max) = read_range(b["v"], p.id + ".bounds.v");
    model.patches.push_back(std::move(p));
  }
  if (const YAML::Node joints = root["joints"]) {
    for (const auto& jn : joints) {
      geometry::JointEdge j;
      if (!jn["id"]) throw StructureError("joint without id");
      j.id = jn["id"].as<std::string>();
      j.a = read_edge(jn["a"], j.id + ".a");
      j.b = read_edge(jn["b"], j.id + ".b");
      if (jn["dihedral"]) {
        j.dihedral = jn["dihedral"].as<double>();
        if (!(j.dihedral > 0.0 && j.dihedral < 2.0 * M_PI)) {
          throw StructureError(j.id + ": dihedral must lie in (0, 2pi)");
        }
        if (jn["kind"]) {
          j.kind = joint_kind_from_string(jn["kind"].as<std::string>());
        } else {
          j.kind = std::abs(j.dihedral - M_PI) < 1e-9 ? geometry::JointKind::Flat
                   : j.dihedral < M_PI                ? geometry::JointKind::Internal
                                                      : geometry::JointKind::External;
        }
      }
      model.joints.push_back(std::move(j));
    }
  }
  annotate_joints(model);
  return model;
}

geometry::StructureModel parse_structure_string(const std::string& text) {
  return parse_structure(YAML::Load(text));
}

geometry::StructureModel load_structure(const std::filesystem::path& path) {
  try {
    return parse_structure(YAML::LoadFile(path.string()));
  } catch (const YAML::Exception& e) {
    throw StructureError(path.string() + ": " + e.what());
  }
}

void annotate_joints(geometry::StructureModel& model) {
  for (std::size_t i = 0; i < model.joints.size(); ++i) {
    auto& j = model.joints[i];
    if (j.dihedral != 0.0) continue;
    if (!model.patch_index(j.a.patch) || !model.patch_index(j.b.patch)) continue;
    const auto g = geometry::resolve_joint(model, i);
    j.dihedral = g.dihedral;
    j.kind = g.kind;
  }
}

std::string dump_structure(const geometry::StructureModel& model) {
  YAML::Emitter out;
  out.SetDoublePrecision(17);
  auto vec = [&out](const Vec3& v) {
    out << YAML::Flow << YAML::BeginSeq << v.x() << v.y() << v.z() << YAML::EndSeq;
  };
  out << YAML::BeginMap;
  out << YAML::Key << "version" << YAML::Value << kStructureSchemaVersion;
  out << YAML::Key << "frame" << YAML::Value << model.frame_tag;
  out << YAML::Key << "patches" << YAML::Value << YAML::BeginSeq;
  for (const auto& p : model.patches) {
    out << YAML::BeginMap;
    out << YAML::Key << "id" << YAML::Value << p.id;
    out << YAML::Key << "kind" << YAML::Value << std::string(geometry::to_string(p.kind));
    out << YAML::Key << "origin" << YAML::Value;
    vec(p.frame.origin);
    out << YAML::Key << "axis_u" << YAML::Value;
    vec(p.frame.axis_u);
    out << YAML::Key << "axis_v" << YAML::Value;
    vec(p.frame.axis_v);
    if (p.is_cylinder()) out << YAML::Key << "radius" << YAML::Value << p.radius;
    out << YAML::Key << "bounds" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "u" << YAML::Value << YAML::Flow << YAML::BeginSeq << p.bounds.u_min
        << p.bounds.u_max << YAML::EndSeq;
    out << YAML::Key << "v" << YAML::Value << YAML::Flow << YAML::BeginSeq << p.bounds.v_min
        << p.bounds.v_max << YAML::EndSeq;
    out << YAML::EndMap << YAML::EndMap;
  }
  out << YAML::EndSeq;
  out << YAML::Key << "joints" << YAML::Value << YAML::BeginSeq;
  for (const auto& j : model.joints) {
    out << YAML::BeginMap;
    out << YAML::Key << "id" << YAML::Value << j.id;
    for (const auto* e : {&j.a, &j.b}) {
      out << YAML::Key << (e == &j.a ? "a" : "b") << YAML::Value << YAML::Flow << YAML::BeginMap
          << YAML::Key << "patch" << YAML::Value << e->patch << YAML::Key << "side" << YAML::Value
          << std::string(geometry::to_string(e->side)) << YAML::EndMap;
    }
    out << YAML::Key << "dihedral" << YAML::Value << j.dihedral;
    out << YAML::Key << "kind" << YAML::Value << std::string(geometry::to_string(j.kind));
    out << YAML::EndMap;
  }
  out << YAML::EndSeq << YAML::EndMap;
  return out.c_str();
}

}  // namespace magbike::io
