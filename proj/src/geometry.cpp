#include "magbike/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <queue>
#include <set>
#include <sstream>

namespace magbike::geometry {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kEdgeTol = 1e-9;

double cross2(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

Eigen::Matrix2d rotation2(double angle) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  Eigen::Matrix2d r;
  r << c, -s, s, c;
  return r;
}

// Radial unit vector at angle v; orientation chosen so that (du, dv, n) is
// right-handed with n outward for outer cylinders and axis-facing for inner.
Vec3 radial(const SurfacePatch& p, double v) {
  const Vec3 w = p.frame.axis_w();
  if (p.kind == PatchKind::CylinderOuter) {
    return std::cos(v) * p.frame.axis_v - std::sin(v) * w;
  }
  return std::cos(v) * p.frame.axis_v + std::sin(v) * w;
}

Vec3 radial_derivative(const SurfacePatch& p, double v) {
  const Vec3 w = p.frame.axis_w();
  if (p.kind == PatchKind::CylinderOuter) {
    return -std::sin(v) * p.frame.axis_v - std::cos(v) * w;
  }
  return -std::sin(v) * p.frame.axis_v + std::cos(v) * w;
}

Vec3 point_unchecked(const SurfacePatch& p, const Vec2& uv) {
  if (p.kind == PatchKind::Plane) {
    return p.frame.origin + uv.x() * p.frame.axis_u + uv.y() * p.frame.axis_v;
  }
  return p.frame.origin + uv.x() * p.frame.axis_u + p.radius * radial(p, uv.y());
}

TangentFrame tangents_unchecked(const SurfacePatch& p, const Vec2& uv) {
  if (p.kind == PatchKind::Plane) {
    return {p.frame.axis_u, p.frame.axis_v, p.frame.axis_w()};
  }
  const Vec3 dv = radial_derivative(p, uv.y());
  const Vec3 r = radial(p, uv.y());
  const Vec3 n = p.kind == PatchKind::CylinderOuter ? r : Vec3(-r);
  return {p.frame.axis_u, dv, n};
}

double segment_distance(const Vec2& p, const Vec2& a, const Vec2& dir, double length) {
  const double s = std::clamp((p - a).dot(dir), 0.0, length);
  return (p - (a + s * dir)).norm();
}

}  // namespace

std::string_view to_string(PatchKind kind) {
  switch (kind) {
    case PatchKind::Plane: return "plane";
    case PatchKind::CylinderOuter: return "cylinder-outer";
    case PatchKind::CylinderInner: return "cylinder-inner";
  }
  return "?";
}

PatchKind patch_kind_from_string(std::string_view name) {
  if (name == "plane") return PatchKind::Plane;
  if (name == "cylinder-outer") return PatchKind::CylinderOuter;
  if (name == "cylinder-inner") return PatchKind::CylinderInner;
  throw StructureError("unknown patch kind '" + std::string(name) + "'");
}

std::string_view to_string(Side side) {
  switch (side) {
    case Side::UMin: return "u_min";
    case Side::UMax: return "u_max";
    case Side::VMin: return "v_min";
    case Side::VMax: return "v_max";
  }
  return "?";
}

Side side_from_string(std::string_view name) {
  if (name == "u_min") return Side::UMin;
  if (name == "u_max") return Side::UMax;
  if (name == "v_min") return Side::VMin;
  if (name == "v_max") return Side::VMax;
  throw StructureError("unknown patch side '" + std::string(name) + "'");
}

std::string_view to_string(JointKind kind) {
  switch (kind) {
    case JointKind::Internal: return "internal";
    case JointKind::External: return "external";
    case JointKind::Flat: return "flat";
  }
  return "?";
}

std::string_view to_string(Issue::Code code) {
  switch (code) {
    case Issue::Code::BelowMinDiameter: return "below_min_diameter";
    case Issue::Code::BelowMinWidth: return "below_min_width";
    case Issue::Code::DanglingJoint: return "dangling_joint";
    case Issue::Code::DihedralMismatch: return "dihedral_mismatch";
    case Issue::Code::Disconnected: return "disconnected";
  }
  return "?";
}

double wrap_angle(double angle) {
  double a = std::remainder(angle, kTwoPi);
  if (a <= -std::numbers::pi) a += kTwoPi;
  return a;
}

bool SurfacePatch::periodic() const {
  return is_cylinder() && (bounds.v_max - bounds.v_min) >= kTwoPi - 1e-9;
}

const SurfacePatch& StructureModel::patch(std::string_view id) const {
  for (const auto& p : patches) {
    if (p.id == id) return p;
  }
  throw StructureError("unknown patch id '" + std::string(id) + "'");
}

std::optional<std::size_t> StructureModel::patch_index(std::string_view id) const {
  for (std::size_t i = 0; i < patches.size(); ++i) {
    if (patches[i].id == id) return i;
  }
  return std::nullopt;
}

const JointEdge& StructureModel::joint(std::string_view id) const {
  for (const auto& j : joints) {
    if (j.id == id) return j;
  }
  throw StructureError("unknown joint id '" + std::string(id) + "'");
}

bool in_bounds(const SurfacePatch& patch, const Vec2& uv, double tol) {
  const auto& b = patch.bounds;
  // v tolerance is applied in arc length for cylinders.
  const double vtol = patch.is_cylinder() ? tol / patch.radius : tol;
  return uv.x() >= b.u_min - tol && uv.x() <= b.u_max + tol && uv.y() >= b.v_min - vtol &&
         uv.y() <= b.v_max + vtol;
}

PointNormal point_and_normal(const SurfacePatch& patch, const Vec2& uv) {
  if (!in_bounds(patch, uv)) {
    std::ostringstream msg;
    msg << "parameters (" << uv.x() << ", " << uv.y() << ") outside patch '" << patch.id << "'";
    throw DomainError(msg.str());
  }
  return {point_unchecked(patch, uv), tangents_unchecked(patch, uv).normal};
}

TangentFrame tangent_frame(const SurfacePatch& patch, const Vec2& uv) {
  return tangents_unchecked(patch, uv);
}

Vec3 heading_direction(const SurfacePatch& patch, const Vec2& uv, double heading) {
  const auto t = tangents_unchecked(patch, uv);
  return std::cos(heading) * t.du + std::sin(heading) * t.dv;
}

Development::Development(const SurfacePatch& patch)
    : bounds_(patch.bounds), scale_v_(patch.is_cylinder() ? patch.radius : 1.0) {}

Vec2 Development::to_plane(const Vec2& uv) const { return {scale_u_ * uv.x(), scale_v_ * uv.y()}; }

Vec2 Development::to_surface(const Vec2& xy) const {
  return {xy.x() / scale_u_, xy.y() / scale_v_};
}

Development develop(const SurfacePatch& patch) { return Development(patch); }

Vec3 point_at_plane(const SurfacePatch& patch, const Vec2& xy) {
  return point_unchecked(patch, Development(patch).to_surface(xy));
}

Vec2 Rigid2::apply(const Vec2& p) const { return rotation2(angle) * p + offset; }

Vec2 Rigid2::rotate(const Vec2& d) const { return rotation2(angle) * d; }

Rigid2 Rigid2::inverse() const {
  return {-angle, -(rotation2(-angle) * offset)};
}

Rigid2 Rigid2::operator*(const Rigid2& other) const {
  return {angle + other.angle, rotation2(angle) * other.offset + offset};
}

SideSegment side_segment(const SurfacePatch& patch, Side side) {
  const Development dev(patch);
  SideSegment s;
  switch (side) {
    case Side::UMin:
      s.start_xy = {dev.x_min(), dev.y_min()};
      s.dir_xy = {0.0, 1.0};
      s.inward_xy = {1.0, 0.0};
      s.length = dev.y_max() - dev.y_min();
      break;
    case Side::UMax:
      s.start_xy = {dev.x_max(), dev.y_min()};
      s.dir_xy = {0.0, 1.0};
      s.inward_xy = {-1.0, 0.0};
      s.length = dev.y_max() - dev.y_min();
      break;
    case Side::VMin:
      s.start_xy = {dev.x_min(), dev.y_min()};
      s.dir_xy = {1.0, 0.0};
      s.inward_xy = {0.0, 1.0};
      s.length = dev.x_max() - dev.x_min();
      break;
    case Side::VMax:
      s.start_xy = {dev.x_min(), dev.y_max()};
      s.dir_xy = {1.0, 0.0};
      s.inward_xy = {0.0, -1.0};
      s.length = dev.x_max() - dev.x_min();
      break;
  }
  s.straight = !(patch.is_cylinder() && (side == Side::UMin || side == Side::UMax));
  s.start = point_at_plane(patch, s.start_xy);
  s.end = point_at_plane(patch, s.start_xy + s.length * s.dir_xy);
  return s;
}

JointGeometry resolve_joint(const StructureModel& model, std::size_t joint_index) {
  const JointEdge& joint = model.joints.at(joint_index);
  const auto ia = model.patch_index(joint.a.patch);
  const auto ib = model.patch_index(joint.b.patch);
  if (!ia || !ib) {
    throw StructureError("joint '" + joint.id + "' references unknown patch '" +
                         (!ia ? joint.a.patch : joint.b.patch) + "'");
  }
  if (*ia == *ib) {
    throw StructureError("joint '" + joint.id + "' connects patch '" + joint.a.patch +
                         "' to itself");
  }
  const SurfacePatch& pa = model.patches[*ia];
  const SurfacePatch& pb = model.patches[*ib];
  const SideSegment sa = side_segment(pa, joint.a.side);
  const SideSegment sb = side_segment(pb, joint.b.side);
  if (!sa.straight || !sb.straight) {
    throw StructureError("joint '" + joint.id + "' lies on a curved cylinder side");
  }

  JointGeometry g;
  g.joint_index = joint_index;
  g.patch_a = *ia;
  g.patch_b = *ib;
  const double same = (sa.start - sb.start).norm() + (sa.end - sb.end).norm();
  const double flipped = (sa.start - sb.end).norm() + (sa.end - sb.start).norm();
  g.reversed = flipped < same;
  g.endpoint_gap = g.reversed
                       ? std::max((sa.start - sb.end).norm(), (sa.end - sb.start).norm())
                       : std::max((sa.start - sb.start).norm(), (sa.end - sb.end).norm());
  g.length_gap = std::abs(sa.length - sb.length);

  const Vec2 target_dir = g.reversed ? Vec2(-sb.dir_xy) : sb.dir_xy;
  g.a_to_b.angle = std::atan2(cross2(sa.dir_xy, target_dir), sa.dir_xy.dot(target_dir));
  if (g.a_to_b.rotate(sa.inward_xy).dot(sb.inward_xy) > -0.5) {
    throw StructureError("joint '" + joint.id +
                         "' puts the two patches' outward normals on opposite sides");
  }
  const Vec2 image_of_start = g.reversed ? Vec2(sb.start_xy + sb.length * sb.dir_xy) : sb.start_xy;
  g.a_to_b.offset = image_of_start - rotation2(g.a_to_b.angle) * sa.start_xy;

  // Dihedral from the inward tangents at the edge midpoint.
  const Vec2 mid_a = sa.start_xy + 0.5 * sa.length * sa.dir_xy;
  const Vec2 mid_b = g.a_to_b.apply(mid_a);
  const Development da(pa);
  const Development db(pb);
  const TangentFrame fa = tangents_unchecked(pa, da.to_surface(mid_a));
  const TangentFrame fb = tangents_unchecked(pb, db.to_surface(mid_b));
  const Vec3 ta = (sa.inward_xy.x() * fa.du + sa.inward_xy.y() * fa.dv).normalized();
  const Vec3 tb = (sb.inward_xy.x() * fb.du + sb.inward_xy.y() * fb.dv).normalized();
  const double phi = std::acos(std::clamp(ta.dot(tb), -1.0, 1.0));
  const double lift = tb.dot(fa.normal);
  if (std::abs(phi - std::numbers::pi) < 1e-9) {
    g.dihedral = std::numbers::pi;
    g.kind = JointKind::Flat;
  } else if (lift > 0.0) {
    g.dihedral = phi;
    g.kind = JointKind::Internal;
  } else {
    g.dihedral = kTwoPi - phi;
    g.kind = JointKind::External;
  }
  return g;
}

SurfacePose cross_joint(const StructureModel& model, const SurfacePose& pose,
                        const JointEdge& joint) {
  std::size_t index = model.joints.size();
  for (std::size_t i = 0; i < model.joints.size(); ++i) {
    if (&model.joints[i] == &joint || model.joints[i].id == joint.id) {
      index = i;
      break;
    }
  }
  if (index == model.joints.size()) {
    throw StructureError("joint '" + joint.id + "' is not part of the model");
  }
  const JointGeometry g = resolve_joint(model, index);
  bool from_a = false;
  if (pose.patch == joint.a.patch) {
    from_a = true;
  } else if (pose.patch != joint.b.patch) {
    throw DomainError("pose on patch '" + pose.patch + "' is not on joint '" + joint.id + "'");
  }
  const SurfacePatch& src = model.patches[from_a ? g.patch_a : g.patch_b];
  const SurfacePatch& dst = model.patches[from_a ? g.patch_b : g.patch_a];
  const SideSegment side = side_segment(src, from_a ? joint.a.side : joint.b.side);
  const Development dsrc(src);
  const Vec2 xy = dsrc.to_plane({pose.u, pose.v});
  if (segment_distance(xy, side.start_xy, side.dir_xy, side.length) > kEdgeTol) {
    throw DomainError("pose is not on the boundary segment of joint '" + joint.id + "'");
  }
  const Rigid2 map = from_a ? g.a_to_b : g.a_to_b.inverse();
  const Vec2 uv = Development(dst).to_surface(map.apply(xy));
  SurfacePose out;
  out.patch = dst.id;
  out.u = uv.x();
  out.v = uv.y();
  out.heading = wrap_angle(pose.heading + map.angle);
  out.at_boundary = true;
  return out;
}

std::vector<Issue> validate_structure(const StructureModel& model) {
  std::set<std::string> ids;
  for (const auto& p : model.patches) {
    if (!ids.insert(p.id).second) throw StructureError("duplicate patch id '" + p.id + "'");
    const Frame& f = p.frame;
    const double ortho = std::max({std::abs(f.axis_u.norm() - 1.0), std::abs(f.axis_v.norm() - 1.0),
                                   std::abs(f.axis_u.dot(f.axis_v))});
    if (!(ortho <= 1e-9)) throw StructureError("patch '" + p.id + "' frame is not orthonormal");
    const auto& b = p.bounds;
    if (!(b.u_max > b.u_min) || !(b.v_max > b.v_min)) {
      throw StructureError("patch '" + p.id + "' has degenerate bounds");
    }
    if (p.is_cylinder()) {
      if (!(p.radius > 0.0)) throw StructureError("cylinder '" + p.id + "' needs radius > 0");
      if (b.v_max - b.v_min > kTwoPi + 1e-9) {
        throw StructureError("cylinder '" + p.id + "' spans more than one turn");
      }
    } else if (p.radius != 0.0) {
      throw StructureError("plane '" + p.id + "' must not carry a radius");
    }
  }
  std::set<std::string> joint_ids;
  std::set<std::pair<std::string, int>> used_sides;
  for (const auto& j : model.joints) {
    if (!joint_ids.insert(j.id).second) throw StructureError("duplicate joint id '" + j.id + "'");
    for (const EdgeRef* e : {&j.a, &j.b}) {
      if (!model.patch_index(e->patch)) {
        throw StructureError("joint '" + j.id + "' references unknown patch '" + e->patch + "'");
      }
      if (!used_sides.insert({e->patch, static_cast<int>(e->side)}).second) {
        throw StructureError("side " + std::string(to_string(e->side)) + " of patch '" + e->patch +
                             "' carries more than one joint");
      }
      if (model.patch(e->patch).periodic() && (e->side == Side::VMin || e->side == Side::VMax)) {
        throw StructureError("joint '" + j.id + "' uses a wrapped side of a full cylinder");
      }
    }
  }

  std::vector<Issue> issues;
  for (const auto& p : model.patches) {
    const auto& b = p.bounds;
    if (p.is_cylinder()) {
      const double diameter = 2.0 * p.radius;
      if (diameter < kMinCylinderDiameter) {
        std::ostringstream msg;
        msg << "cylinder diameter " << diameter * 1000.0 << " mm is below 150mm minimum diameter";
        issues.push_back({Issue::Code::BelowMinDiameter, p.id, msg.str()});
      }
      const double axial = b.u_max - b.u_min;
      const double arc = p.periodic() ? std::numeric_limits<double>::infinity()
                                      : p.radius * (b.v_max - b.v_min);
      if (std::min(axial, arc) < kMinManeuverWidth) {
        std::ostringstream msg;
        msg << "patch width " << std::min(axial, arc) * 1000.0
            << " mm is below the 100mm maneuver width";
        issues.push_back({Issue::Code::BelowMinWidth, p.id, msg.str()});
      }
    } else {
      const double width = std::min(b.u_max - b.u_min, b.v_max - b.v_min);
      if (width < kMinManeuverWidth) {
        std::ostringstream msg;
        msg << "patch width " << width * 1000.0 << " mm is below the 100mm maneuver width";
        issues.push_back({Issue::Code::BelowMinWidth, p.id, msg.str()});
      }
    }
  }

  for (std::size_t i = 0; i < model.joints.size(); ++i) {
    const JointEdge& j = model.joints[i];
    const JointGeometry g = resolve_joint(model, i);
    if (g.endpoint_gap > 1e-6 || g.length_gap > 1e-6) {
      std::ostringstream msg;
      msg << "joint segments do not coincide (endpoint gap " << g.endpoint_gap << " m, length gap "
          << g.length_gap << " m)";
      issues.push_back({Issue::Code::DanglingJoint, j.id, msg.str()});
      continue;
    }
    if (j.dihedral != 0.0 && (std::abs(j.dihedral - g.dihedral) > 1e-6 || j.kind != g.kind)) {
      std::ostringstream msg;
      msg << "declared dihedral " << j.dihedral << " rad (" << to_string(j.kind)
          << ") but geometry gives " << g.dihedral << " rad (" << to_string(g.kind) << ")";
      issues.push_back({Issue::Code::DihedralMismatch, j.id, msg.str()});
    }
  }

  if (model.patches.size() > 1) {
    std::vector<std::vector<std::size_t>> adj(model.patches.size());
    for (const auto& j : model.joints) {
      const auto a = *model.patch_index(j.a.patch);
      const auto b = *model.patch_index(j.b.patch);
      adj[a].push_back(b);
      adj[b].push_back(a);
    }
    std::vector<bool> seen(model.patches.size(), false);
    std::queue<std::size_t> q;
    q.push(0);
    seen[0] = true;
    while (!q.empty()) {
      const auto n = q.front();
      q.pop();
      for (auto m : adj[n]) {
        if (!seen[m]) {
          seen[m] = true;
          q.push(m);
        }
      }
    }
    for (std::size_t i = 0; i < seen.size(); ++i) {
      if (!seen[i]) {
        issues.push_back({Issue::Code::Disconnected, model.patches[i].id,
                          "patch is not reachable from '" + model.patches[0].id + "'"});
      }
    }
  }
  return issues;
}

Atlas::Atlas(const StructureModel& model) : model_(&model) {
  developments_.reserve(model.patches.size());
  for (const auto& p : model.patches) developments_.emplace_back(p);
  for (std::size_t i = 0; i < model.joints.size(); ++i) {
    joints_.push_back(resolve_joint(model, i));
    const auto& j = model.joints[i];
    links_[joints_.back().patch_a * 4 + static_cast<std::size_t>(j.a.side)] = {i, true};
    links_[joints_.back().patch_b * 4 + static_cast<std::size_t>(j.b.side)] = {i, false};
  }
}

std::optional<Atlas::SideLink> Atlas::link(std::size_t patch, Side side) const {
  const auto it = links_.find(patch * 4 + static_cast<std::size_t>(side));
  if (it == links_.end()) return std::nullopt;
  return it->second;
}

Atlas::WalkResult Atlas::walk(std::size_t patch, const Vec2& from, const Vec2& to) const {
  WalkResult result;
  Vec2 p = from;
  Vec2 q = to;
  std::size_t current = patch;
  constexpr int kMaxHops = 64;
  for (int hop = 0; hop <= kMaxHops; ++hop) {
    const Development& dev = developments_[current];
    const SurfacePatch& sp = model_->patches[current];
    const bool inside = q.x() >= dev.x_min() - kEdgeTol && q.x() <= dev.x_max() + kEdgeTol &&
                        q.y() >= dev.y_min() - kEdgeTol && q.y() <= dev.y_max() + kEdgeTol;
    if (inside) {
      result.patch = current;
      result.xy = q;
      return result;
    }
    const Vec2 d = q - p;
    double t_exit = std::numeric_limits<double>::infinity();
    Side exit_side = Side::UMax;
    auto consider = [&](bool outward, double t, Side s) {
      if (outward && t < t_exit && t >= -kEdgeTol) {
        t_exit = t;
        exit_side = s;
      }
    };
    consider(d.x() < 0.0, (dev.x_min() - p.x()) / d.x(), Side::UMin);
    consider(d.x() > 0.0, (dev.x_max() - p.x()) / d.x(), Side::UMax);
    consider(d.y() < 0.0, (dev.y_min() - p.y()) / d.y(), Side::VMin);
    consider(d.y() > 0.0, (dev.y_max() - p.y()) / d.y(), Side::VMax);
    if (!std::isfinite(t_exit)) {
      // Start point already outside with the segment moving away; treat as blocked.
      result.patch = current;
      result.xy = p;
      result.blocked_side = exit_side;
      result.blocked_xy = p;
      return result;
    }
    const Vec2 exit = p + std::max(t_exit, 0.0) * d;

    Rigid2 step;
    std::size_t next = current;
    if (sp.periodic() && (exit_side == Side::VMin || exit_side == Side::VMax)) {
      const double period = kTwoPi * sp.radius;
      step.offset = Vec2(0.0, exit_side == Side::VMax ? -period : period);
    } else if (const auto l = link(current, exit_side)) {
      const JointGeometry& g = joints_[l->joint];
      step = l->from_a ? g.a_to_b : g.a_to_b.inverse();
      next = l->from_a ? g.patch_b : g.patch_a;
      result.crossings.push_back(
          {l->joint, model_->patches[current].id, model_->patches[next].id});
    } else {
      result.patch = current;
      result.xy = exit;
      result.blocked_side = exit_side;
      result.blocked_xy = exit;
      return result;
    }
    p = step.apply(exit);
    q = step.apply(q);
    result.frame = step * result.frame;
    current = next;
  }
  throw DomainError("walk crossed more than 64 patch boundaries");
}

double Atlas::distance_to_corner(std::size_t patch, const Vec2& xy) const {
  double best = std::numeric_limits<double>::infinity();
  for (Side s : {Side::UMin, Side::UMax, Side::VMin, Side::VMax}) {
    const auto l = link(patch, s);
    if (!l || joints_[l->joint].kind == JointKind::Flat) continue;
    const SideSegment seg = side_segment(model_->patches[patch], s);
    best = std::min(best, segment_distance(xy, seg.start_xy, seg.dir_xy, seg.length));
  }
  return best;
}

std::optional<RayHit> intersect(const SurfacePatch& patch, const Vec3& origin,
                                const Vec3& direction, double min_distance) {
  const Frame& f = patch.frame;
  if (patch.kind == PatchKind::Plane) {
    const Vec3 n = f.axis_w();
    const double denom = n.dot(direction);
    if (std::abs(denom) < 1e-15) return std::nullopt;
    const double s = n.dot(f.origin - origin) / denom;
    if (s <= min_distance) return std::nullopt;
    const Vec3 p = origin + s * direction;
    const Vec2 uv((p - f.origin).dot(f.axis_u), (p - f.origin).dot(f.axis_v));
    if (!in_bounds(patch, uv, 0.0)) return std::nullopt;
    return RayHit{0, uv, p, s};
  }
  const Vec3& a = f.axis_u;
  const Vec3 w = origin - f.origin;
  const Vec3 w_perp = w - w.dot(a) * a;
  const Vec3 d_perp = direction - direction.dot(a) * a;
  const double qa = d_perp.squaredNorm();
  if (qa < 1e-15) return std::nullopt;
  const double qb = 2.0 * w_perp.dot(d_perp);
  const double qc = w_perp.squaredNorm() - patch.radius * patch.radius;
  const double disc = qb * qb - 4.0 * qa * qc;
  if (disc < 0.0) return std::nullopt;
  const double root = std::sqrt(disc);
  for (double s : {(-qb - root) / (2.0 * qa), (-qb + root) / (2.0 * qa)}) {
    if (s <= min_distance) continue;
    const Vec3 p = origin + s * direction;
    const double u = (p - f.origin).dot(a);
    const Vec3 r = (p - f.origin - u * a) / patch.radius;
    const Vec3 e3 = f.axis_w();
    double v = patch.kind == PatchKind::CylinderOuter ? std::atan2(-r.dot(e3), r.dot(f.axis_v))
                                                      : std::atan2(r.dot(e3), r.dot(f.axis_v));
    const double lo = patch.bounds.v_min;
    v = lo + std::fmod(std::fmod(v - lo, kTwoPi) + kTwoPi, kTwoPi);
    const Vec2 uv(u, v);
    if (!in_bounds(patch, uv, 0.0)) continue;
    return RayHit{0, uv, p, s};
  }
  return std::nullopt;
}

std::optional<RayHit> raycast(const StructureModel& model, const Vec3& origin,
                              const Vec3& direction, double min_distance) {
  std::optional<RayHit> best;
  for (std::size_t i = 0; i < model.patches.size(); ++i) {
    auto hit = intersect(model.patches[i], origin, direction, min_distance);
    if (hit && (!best || hit->distance < best->distance)) {
      hit->patch = i;
      best = hit;
    }
  }
  return best;
}

}  // namespace magbike::geometry
