#pragma once

// Dual-steering bicycle kinematics on developed surfaces.
//
// Body frame: x along the body from the back wheel towards the front wheel,
// y to the left (counter-clockwise seen from the surface normal). Steering
// angles are measured from the body x axis, positive counter-clockwise.
// icr() reports points with the back wheel contact at the origin and the
// front wheel at (wheelbase, 0); twists are expressed at the body centre,
// which sits halfway between the two contacts.

#include "magbike/geometry.hpp"

#include <numbers>
#include <optional>
#include <stdexcept>
#include <vector>

namespace magbike::kinematics {

using geometry::Vec2;
using geometry::Vec3;

struct SteeringState {
  double delta_front{0.0};
  double delta_back{0.0};
};

struct WheelCommand {
  double v_back{0.0};
  double v_front{0.0};
};

struct BodyTwist {
  double vx{0.0};
  double vy{0.0};
  double omega{0.0};
};

struct FreeJointState {
  double roll{0.0};
};

struct Limits {
  double v_max{0.2};
  double steer_rate{3.0};
  double roll_limit{std::numbers::pi / 2.0};
  double dt_max{0.05};
};

inline constexpr double kSteerLimit = std::numbers::pi / 2.0;

enum class IcrKind {
  /// Axle lines meet in a single point.
  Point,
  /// Axle lines are parallel and distinct: straight-line motion.
  Translation,
  /// Both axle lines lie on the body axis (wheels at +-90 deg). The wheel
  /// speeds decide between sideways translation and rotation about a point
  /// on the body axis; `direction` is the sideways translation direction.
  AxleLinesCoincide,
};

struct Icr {
  IcrKind kind{IcrKind::Translation};
  Vec2 point{Vec2::Zero()};
  Vec2 direction{Vec2::UnitX()};
};

Icr icr(const SteeringState& steer, double wheelbase);

/// Thrown when the commanded speeds cannot satisfy the rolling constraints,
/// e.g. a non-zero back speed while the back wheel is the pivot.
class SlipError : public std::runtime_error {
 public:
  SlipError(const std::string& what, double residual)
      : std::runtime_error(what), residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

struct TwistSolution {
  BodyTwist twist;
  double v_front_required{0.0};
  /// Commanded minus required front speed; zero when no front speed was
  /// commanded or the command was consistent.
  double slip_residual{0.0};
};

/// The back wheel speed is authoritative; the front speed is derived from
/// it. Exceptions: when the back wheel is the pivot the front speed drives,
/// and when both axle lines coincide both commanded speeds are used (equal
/// rolling speeds translate sideways, opposite ones spin about the centre).
TwistSolution body_twist(const SteeringState& steer, double v_back, double wheelbase,
                         std::optional<double> v_front = std::nullopt);

/// Velocity (body frame) of a point given in body-centre coordinates.
Vec2 point_velocity(const BodyTwist& twist, const Vec2& point);

/// Exact SE(2) exponential: body-frame displacement after dt under a
/// constant twist.
Vec2 body_displacement(const BodyTwist& twist, double dt);

struct PatchIntegration {
  geometry::SurfacePose pose;
  /// Set when the new position falls outside the patch; the pose is then
  /// left unclamped (and flagged at_boundary).
  std::optional<geometry::Side> boundary;
};

/// Integrates on a single patch. Periodic cylinders wrap around.
PatchIntegration integrate_pose(const geometry::SurfacePatch& patch,
                                const geometry::SurfacePose& pose, const BodyTwist& twist,
                                double dt, double dt_max = 0.05);

struct StructureIntegration {
  geometry::SurfacePose pose;
  std::vector<geometry::Atlas::Crossing> crossings;
  std::optional<geometry::Side> boundary;
  std::string boundary_patch;
};

/// Integrates across joints by unfolding adjacent patches into the current
/// developed plane. On a free side the pose stops at the edge.
StructureIntegration integrate_pose(const geometry::Atlas& atlas,
                                    const geometry::SurfacePose& pose, const BodyTwist& twist,
                                    double dt, double dt_max = 0.05);

/// Thrown by spiral_pitch for a helix angle of 90 deg, where the path runs
/// along the cylinder axis and never completes a revolution.
class AxialPathError : public geometry::DomainError {
 public:
  using geometry::DomainError::DomainError;
};

/// Axial advance per revolution for a path at helix angle `helix_angle`,
/// measured from the circumferential direction.
double spiral_pitch(double cylinder_radius, double helix_angle);

/// Signed rotation about body_axis that carries the back contact normal's
/// projection onto the front one's.
double free_joint_roll(const Vec3& normal_front, const Vec3& normal_back, const Vec3& body_axis);

}  // namespace magbike::kinematics
