#pragma once

// Shared fixtures: seeded generators, hand-built structures and oracles that
// recompute results without going through the library.

#include "magbike/geometry.hpp"
#include "magbike/simulator.hpp"

#include <Eigen/Geometry>

#include <cmath>
#include <algorithm>
#include <filesystem>
#include <numbers>
#include <optional>
#include <numeric>
#include <random>
#include <string>
#include <vector>

namespace magbike::test {

using geometry::Vec2;
using geometry::Vec3;

inline std::filesystem::path data_dir() { return MAGBIKE_DATA_DIR; }

class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
  bool coin() { return integer(0, 1) == 1; }

  Vec3 unit() {
    std::normal_distribution<double> n(0.0, 1.0);
    Vec3 v;
    do {
      v = Vec3(n(rng_), n(rng_), n(rng_));
    } while (v.norm() < 1e-6);
    return v.normalized();
  }

  Eigen::Quaterniond rotation() {
    std::normal_distribution<double> n(0.0, 1.0);
    Eigen::Quaterniond q(n(rng_), n(rng_), n(rng_), n(rng_));
    return q.normalized();
  }

  Eigen::Isometry3d rigid(double spread = 1.0) {
    Eigen::Isometry3d T = Eigen::Isometry3d::Identity();
    T.linear() = rotation().toRotationMatrix();
    T.translation() = Vec3(uniform(-spread, spread), uniform(-spread, spread), uniform(-spread, spread));
    return T;
  }

  std::mt19937_64& engine() { return rng_; }

 private:
  std::mt19937_64 rng_;
};

inline geometry::SurfacePatch plane(const std::string& id, const Vec3& origin, const Vec3& axis_u,
                                    const Vec3& axis_v, double u_len, double v_len) {
  geometry::SurfacePatch p;
  p.id = id;
  p.kind = geometry::PatchKind::Plane;
  p.frame = {origin, axis_u, axis_v};
  p.bounds = {0.0, u_len, 0.0, v_len};
  return p;
}

inline geometry::SurfacePatch cylinder(const std::string& id, double radius, double length,
                                       geometry::PatchKind kind = geometry::PatchKind::CylinderOuter,
                                       const Vec3& origin = Vec3::Zero(),
                                       const Vec3& axis = Vec3::UnitZ(),
                                       const Vec3& radial = Vec3::UnitX()) {
  geometry::SurfacePatch p;
  p.id = id;
  p.kind = kind;
  p.frame = {origin, axis, radial};
  p.radius = radius;
  p.bounds = {0.0, length, 0.0, 2.0 * std::numbers::pi};
  return p;
}

inline geometry::StructureModel single(geometry::SurfacePatch patch) {
  geometry::StructureModel m;
  m.patches.push_back(std::move(patch));
  return m;
}

/// Floor on z = 0 meeting a wall at x = 1; internal 90 deg corner.
inline geometry::StructureModel floor_wall() {
  geometry::StructureModel m;
  m.patches.push_back(plane("floor", Vec3::Zero(), Vec3::UnitX(), Vec3::UnitY(), 1.0, 0.5));
  m.patches.push_back(plane("wall", Vec3(1, 0, 0), Vec3::UnitZ(), Vec3::UnitY(), 1.0, 0.5));
  geometry::JointEdge j;
  j.id = "floor-wall";
  j.a = {"floor", geometry::Side::UMax};
  j.b = {"wall", geometry::Side::UMin};
  j.dihedral = std::numbers::pi / 2.0;
  j.kind = geometry::JointKind::Internal;
  m.joints.push_back(j);
  return m;
}

inline sim::Scenario flat_scenario(double size = 4.0) {
  sim::Scenario s;
  s.name = "flat";
  s.structure = single(plane("deck", Vec3::Zero(), Vec3::UnitX(), Vec3::UnitY(), size, size));
  s.initial_pose = {"deck", size / 2, size / 2, 0.0};
  s.dt = 0.01;
  s.duration = 1.0;
  return s;
}

// --- statics oracle, written straight from the sizing inequalities ---

struct StaticsOracle {
  // F2 * X1X2 > P * h, scaled by the safety factor.
  static double adhesion(double P, double h, double x1x2, double sf) { return sf * (P * h / x1x2); }
  // M_moving > r * (F21 + (F22 + P) / k)
  static double moving(double r, double f21, double f22, double P, double k, double sf) {
    const double friction = (f22 + P) / k;
    return sf * (r * (f21 + friction));
  }
  // M_steering > r * (F12 + (F2 + P) / k)
  static double steering(double r, double f12, double f2, double P, double k, double sf) {
    const double friction = (f2 + P) / k;
    return sf * (r * (f12 + friction));
  }
};

// --- union-find over the pairwise-distance graph ---

class UnionFind {
 public:
  explicit UnionFind(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }
  std::size_t find(std::size_t i) {
    while (parent_[i] != i) i = parent_[i] = parent_[parent_[i]];
    return i;
  }
  void unite(std::size_t a, std::size_t b) { parent_[find(a)] = find(b); }

 private:
  std::vector<std::size_t> parent_;
};

/// Partition as a sorted list of sorted member lists.
inline std::vector<std::vector<std::size_t>> union_find_partition(const std::vector<Vec3>& pts,
                                                                  double radius) {
  UnionFind uf(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    for (std::size_t j = i + 1; j < pts.size(); ++j) {
      if ((pts[i] - pts[j]).norm() <= radius) uf.unite(i, j);
    }
  }
  std::vector<std::vector<std::size_t>> groups(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) groups[uf.find(i)].push_back(i);
  std::vector<std::vector<std::size_t>> out;
  for (auto& g : groups) {
    if (!g.empty()) out.push_back(std::move(g));
  }
  std::sort(out.begin(), out.end());
  return out;
}

inline std::vector<std::vector<std::size_t>> canonical(std::vector<std::vector<std::size_t>> parts) {
  for (auto& p : parts) std::sort(p.begin(), p.end());
  std::sort(parts.begin(), parts.end());
  return parts;
}

// --- 2D line intersection: p + s d = q + t e ---

inline std::optional<Vec2> intersect_lines(const Vec2& p, const Vec2& d, const Vec2& q, const Vec2& e) {
  const double det = d.x() * (-e.y()) - d.y() * (-e.x());
  if (std::abs(det) < 1e-12) return std::nullopt;
  const Vec2 rhs = q - p;
  const double s = (rhs.x() * (-e.y()) - rhs.y() * (-e.x())) / det;
  return p + s * d;
}

inline double rel_err(double a, double b) {
  const double scale = std::max(std::abs(a), std::abs(b));
  return scale == 0.0 ? 0.0 : std::abs(a - b) / scale;
}

}  // namespace magbike::test
