#pragma once

// Inspectable steel structures as graphs of developable surface patches.
//
// Every patch carries a parameterisation (u, v) whose partial derivatives
// together with the outward normal form a right-handed triad. A patch is
// "developed" into plane coordinates (x, y) measured in meters of arc
// length, so straight lines in the developed plane are geodesics on the
// surface and planar rigid motions map exactly onto it.

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace magbike::geometry {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;

/// Raised when an argument lies outside an operation's domain
/// (out-of-bounds parameters, pose not on a joint edge, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Raised for malformed models: unresolved or duplicate ids, invalid frames,
/// joints on curved sides. Distinct from the traversability issues returned
/// by validate_structure().
class StructureError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class PatchKind { Plane, CylinderOuter, CylinderInner };

std::string_view to_string(PatchKind kind);
PatchKind patch_kind_from_string(std::string_view name);

/// Orthonormal frame. For planes axis_u/axis_v span the surface and the
/// normal is axis_u x axis_v. For cylinders axis_u is the cylinder axis and
/// axis_v the radial direction at v = 0.
struct Frame {
  Vec3 origin{Vec3::Zero()};
  Vec3 axis_u{Vec3::UnitX()};
  Vec3 axis_v{Vec3::UnitY()};

  Vec3 axis_w() const { return axis_u.cross(axis_v); }
};

/// Parameter rectangle. u is in meters for both kinds; v is meters for
/// planes and radians for cylinders.
struct ParamBounds {
  double u_min{0.0};
  double u_max{0.0};
  double v_min{0.0};
  double v_max{0.0};
};

struct SurfacePatch {
  std::string id;
  PatchKind kind{PatchKind::Plane};
  Frame frame;
  double radius{0.0};
  ParamBounds bounds;

  bool is_cylinder() const { return kind != PatchKind::Plane; }
  /// A cylinder whose v range covers a full turn wraps onto itself.
  bool periodic() const;
};

enum class Side { UMin, UMax, VMin, VMax };

std::string_view to_string(Side side);
Side side_from_string(std::string_view name);

struct EdgeRef {
  std::string patch;
  Side side{Side::UMax};
};

/// Dihedral angle measured through the robot's side of both surfaces.
enum class JointKind { Internal, External, Flat };

std::string_view to_string(JointKind kind);

struct JointEdge {
  std::string id;
  EdgeRef a;
  EdgeRef b;
  double dihedral{0.0};
  JointKind kind{JointKind::Flat};
};

struct StructureModel {
  std::string frame_tag{"world"};
  std::vector<SurfacePatch> patches;
  std::vector<JointEdge> joints;

  /// Throws StructureError if the id is unknown.
  const SurfacePatch& patch(std::string_view id) const;
  std::optional<std::size_t> patch_index(std::string_view id) const;
  const JointEdge& joint(std::string_view id) const;
};

struct SurfacePose {
  std::string patch;
  double u{0.0};
  double v{0.0};
  /// Radians in the tangent plane, 0 along +u, counter-clockwise seen from
  /// the outward normal.
  double heading{0.0};
  bool at_boundary{false};
};

struct PointNormal {
  Vec3 point;
  Vec3 normal;
};

/// Unit tangents along +u and +v; (du, dv, normal) is right-handed.
struct TangentFrame {
  Vec3 du;
  Vec3 dv;
  Vec3 normal;
};

bool in_bounds(const SurfacePatch& patch, const Vec2& uv, double tol = 1e-9);

PointNormal point_and_normal(const SurfacePatch& patch, const Vec2& uv);
TangentFrame tangent_frame(const SurfacePatch& patch, const Vec2& uv);

/// Unit 3D tangent for a heading at uv.
Vec3 heading_direction(const SurfacePatch& patch, const Vec2& uv, double heading);

/// Isometry between surface parameters and developed-plane coordinates.
class Development {
 public:
  explicit Development(const SurfacePatch& patch);

  Vec2 to_plane(const Vec2& uv) const;
  Vec2 to_surface(const Vec2& xy) const;

  /// Developed rectangle: x in [x_min, x_max], y in [y_min, y_max].
  double x_min() const { return scale_u_ * bounds_.u_min; }
  double x_max() const { return scale_u_ * bounds_.u_max; }
  double y_min() const { return scale_v_ * bounds_.v_min; }
  double y_max() const { return scale_v_ * bounds_.v_max; }

 private:
  ParamBounds bounds_;
  double scale_u_{1.0};
  double scale_v_{1.0};
};

Development develop(const SurfacePatch& patch);

/// 3D point at developed coordinates (no bounds check).
Vec3 point_at_plane(const SurfacePatch& patch, const Vec2& xy);

/// Planar rigid motion p -> R(angle) p + offset.
struct Rigid2 {
  double angle{0.0};
  Vec2 offset{Vec2::Zero()};

  Vec2 apply(const Vec2& p) const;
  Vec2 rotate(const Vec2& d) const;
  Rigid2 inverse() const;
  /// (this * other)(p) = this(other(p))
  Rigid2 operator*(const Rigid2& other) const;
};

/// Straight patch side in developed coordinates and in 3D.
struct SideSegment {
  Vec2 start_xy;
  Vec2 dir_xy;
  Vec2 inward_xy;
  double length{0.0};
  Vec3 start;
  Vec3 end;
  /// False for the circular u-sides of cylinders.
  bool straight{true};
};

SideSegment side_segment(const SurfacePatch& patch, Side side);

/// Resolved geometry of a joint: the unfolding that carries the developed
/// plane of patch a onto that of patch b (and back).
struct JointGeometry {
  std::size_t joint_index{0};
  std::size_t patch_a{0};
  std::size_t patch_b{0};
  bool reversed{false};
  Rigid2 a_to_b;
  double dihedral{0.0};
  JointKind kind{JointKind::Flat};
  /// Endpoint mismatch in 3D and length mismatch, meters.
  double endpoint_gap{0.0};
  double length_gap{0.0};
};

/// Throws StructureError for unresolved ids, joints on curved sides, or
/// joints whose patches put the robot on opposite sides of the surface.
JointGeometry resolve_joint(const StructureModel& model, std::size_t joint_index);

/// Moves a pose across a joint it lies on. Position is continuous in 3D and
/// the heading keeps its decomposition along and across the edge.
SurfacePose cross_joint(const StructureModel& model, const SurfacePose& pose,
                        const JointEdge& joint);

struct Issue {
  enum class Code {
    BelowMinDiameter,
    BelowMinWidth,
    DanglingJoint,
    DihedralMismatch,
    Disconnected,
  };
  Code code;
  std::string subject;
  std::string message;
};

std::string_view to_string(Issue::Code code);

inline constexpr double kMinCylinderDiameter = 0.150;
inline constexpr double kMinManeuverWidth = 0.100;

/// Traversability issues; an empty list means the model is climbable by the
/// robot's design envelope. Throws StructureError on malformed models.
std::vector<Issue> validate_structure(const StructureModel& model);

/// Navigation helper over a structure: walks straight developed-plane
/// segments across joints (unfolding) and wraps periodic cylinders.
class Atlas {
 public:
  explicit Atlas(const StructureModel& model);

  const StructureModel& model() const { return *model_; }

  struct Crossing {
    std::size_t joint_index;
    std::string from_patch;
    std::string to_patch;
  };

  struct WalkResult {
    std::size_t patch{0};
    Vec2 xy{Vec2::Zero()};
    /// Rigid map from the starting developed frame into the final one.
    Rigid2 frame;
    std::vector<Crossing> crossings;
    /// Set when the segment leaves the structure through a free side.
    std::optional<Side> blocked_side;
    Vec2 blocked_xy{Vec2::Zero()};
  };

  /// Follows the straight segment from `from` to `to`, both expressed in the
  /// developed frame of `patch`. On a free side the walk stops there.
  WalkResult walk(std::size_t patch, const Vec2& from, const Vec2& to) const;

  /// Distance in the developed plane from xy to the nearest side of the
  /// patch that carries a non-flat joint; infinity if there is none.
  double distance_to_corner(std::size_t patch, const Vec2& xy) const;

  const std::vector<JointGeometry>& joints() const { return joints_; }
  const Development& development(std::size_t patch) const { return developments_[patch]; }

 private:
  struct SideLink {
    std::size_t joint{0};
    bool from_a{true};
  };
  std::optional<SideLink> link(std::size_t patch, Side side) const;

  const StructureModel* model_;
  std::vector<Development> developments_;
  std::vector<JointGeometry> joints_;
  std::unordered_map<std::size_t, SideLink> links_;
};

struct RayHit {
  std::size_t patch{0};
  Vec2 uv;
  Vec3 point;
  double distance{0.0};
};

/// First intersection of a ray (unit direction) with a patch, within bounds,
/// at distance > min_distance.
std::optional<RayHit> intersect(const SurfacePatch& patch, const Vec3& origin,
                                const Vec3& direction, double min_distance = 1e-9);
std::optional<RayHit> raycast(const StructureModel& model, const Vec3& origin,
                              const Vec3& direction, double min_distance = 1e-9);

double wrap_angle(double angle);

}  // namespace magbike::geometry
