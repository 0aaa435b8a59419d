#pragma once

// YAML structure files.
//
//   version: 1
//   frame: world
//   patches:
//     - id: floor
//       kind: plane                 # plane | cylinder-outer | cylinder-inner
//       origin: [0, 0, 0]
//       axis_u: [1, 0, 0]           # cylinders: the cylinder axis
//       axis_v: [0, 1, 0]           # cylinders: radial direction at v = 0
//       radius: 0.1                 # cylinders only
//       bounds: {u: [0, 1], v: [0, 0.5]}
//   joints:
//     - id: corner
//       a: {patch: floor, side: u_max}
//       b: {patch: wall, side: u_min}
//       dihedral: 1.5707963267948966  # optional, checked against geometry
//       kind: internal                # optional
//
// Lengths are meters, angles radians.

#include "magbike/geometry.hpp"

#include <filesystem>
#include <string>

namespace YAML {
class Node;
}

namespace magbike::io {

inline constexpr int kStructureSchemaVersion = 1;

geometry::StructureModel parse_structure(const YAML::Node& node);
geometry::StructureModel parse_structure_string(const std::string& text);
geometry::StructureModel load_structure(const std::filesystem::path& path);

/// Fills dihedral/kind of joints that did not declare them from geometry.
void annotate_joints(geometry::StructureModel& model);

std::string dump_structure(const geometry::StructureModel& model);

}  // namespace magbike::io
