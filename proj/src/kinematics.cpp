#include "magbike/kinematics.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace magbike::kinematics {

namespace {

constexpr double kAngleEps = 1e-9;

Eigen::Matrix2d rot(double a) {
  Eigen::Matrix2d r;
  r << std::cos(a), -std::sin(a), std::sin(a), std::cos(a);
  return r;
}

void check_wheelbase(double wheelbase) {
  if (!(wheelbase > 0.0)) throw geometry::DomainError("wheelbase must be > 0");
}

void check_dt(double dt, double dt_max) {
  if (!(dt > 0.0) || dt > dt_max) {
    std::ostringstream msg;
    msg << "dt " << dt << " s outside (0, " << dt_max << "]";
    throw geometry::DomainError(msg.str());
  }
}

}  // namespace

Icr icr(const SteeringState& steer, double wheelbase) {
  check_wheelbase(wheelbase);
  const double cf = std::cos(steer.delta_front);
  const double cb = std::cos(steer.delta_back);
  const double s = std::sin(steer.delta_front - steer.delta_back);
  Icr out;
  if (std::abs(s) > kAngleEps) {
    // Back axle: a * (-sin db, cos db); front axle: (L, 0) + b * (-sin df, cos df).
    const double a = wheelbase * cf / s;
    out.kind = IcrKind::Point;
    out.point = a * Vec2(-std::sin(steer.delta_back), std::cos(steer.delta_back));
    return out;
  }
  if (std::abs(cf) <= kAngleEps && std::abs(cb) <= kAngleEps) {
    out.kind = IcrKind::AxleLinesCoincide;
    out.direction = Vec2(0.0, 1.0);
    return out;
  }
  out.kind = IcrKind::Translation;
  out.direction = Vec2(std::cos(steer.delta_front), std::sin(steer.delta_front));
  return out;
}

TwistSolution body_twist(const SteeringState& steer, double v_back, double wheelbase,
                         std::optional<double> v_front) {
  check_wheelbase(wheelbase);
  const double L = wheelbase;
  const double cf = std::cos(steer.delta_front);
  const double sf = std::sin(steer.delta_front);
  const double cb = std::cos(steer.delta_back);
  const double sb = std::sin(steer.delta_back);
  const double s = std::sin(steer.delta_front - steer.delta_back);

  TwistSolution out;
  if (std::abs(cf) > kAngleEps) {
    out.twist.omega = v_back * s / (L * cf);
    out.twist.vx = v_back * cb;
    out.twist.vy = v_back * (sb + s / (2.0 * cf));
    out.v_front_required = v_back * cb / cf;
    if (v_front) out.slip_residual = *v_front - out.v_front_required;
    return out;
  }
  if (std::abs(cb) > kAngleEps) {
    // Front wheel across the body: the back contact is the pivot.
    if (std::abs(v_back) > 1e-12) {
      std::ostringstream msg;
      msg << "back wheel is the pivot but v_back = " << v_back << " m/s";
      throw SlipError(msg.str(), v_back);
    }
    const double vf = v_front.value_or(0.0);
    out.twist.omega = vf / (L * sf);
    out.twist.vx = 0.0;
    out.twist.vy = 0.5 * out.twist.omega * L;
    out.v_front_required = vf;
    return out;
  }
  // Both wheels across the body: axle lines coincide with the body axis.
  const double vf = v_front.value_or(v_back * sb * sf);
  const double vy_back = v_back * sb;
  const double vy_front = vf * sf;
  out.twist.omega = (vy_front - vy_back) / L;
  out.twist.vx = 0.5 * (v_back * cb + vf * cf);
  out.twist.vy = 0.5 * (vy_back + vy_front);
  out.v_front_required = vf;
  return out;
}

Vec2 point_velocity(const BodyTwist& twist, const Vec2& point) {
  return {twist.vx - twist.omega * point.y(), twist.vy + twist.omega * point.x()};
}

Vec2 body_displacement(const BodyTwist& twist, double dt) {
  const double theta = twist.omega * dt;
  double a;  // sin(theta) / theta
  double b;  // (1 - cos(theta)) / theta
  if (std::abs(theta) < 1e-4) {
    const double t2 = theta * theta;
    a = 1.0 - t2 / 6.0 + t2 * t2 / 120.0;
    b = theta / 2.0 - theta * t2 / 24.0 + theta * t2 * t2 / 720.0;
  } else {
    a = std::sin(theta) / theta;
    b = (1.0 - std::cos(theta)) / theta;
  }
  return dt * Vec2(a * twist.vx - b * twist.vy, b * twist.vx + a * twist.vy);
}

PatchIntegration integrate_pose(const geometry::SurfacePatch& patch,
                                const geometry::SurfacePose& pose, const BodyTwist& twist,
                                double dt, double dt_max) {
  check_dt(dt, dt_max);
  const geometry::Development dev(patch);
  const Vec2 start = dev.to_plane({pose.u, pose.v});
  Vec2 end = start + rot(pose.heading) * body_displacement(twist, dt);
  if (patch.periodic()) {
    const double period = 2.0 * std::numbers::pi * patch.radius;
    while (end.y() > dev.y_max()) end.y() -= period;
    while (end.y() < dev.y_min()) end.y() += period;
  }
  PatchIntegration out;
  const Vec2 uv = dev.to_surface(end);
  out.pose = pose;
  out.pose.u = uv.x();
  out.pose.v = uv.y();
  out.pose.heading = geometry::wrap_angle(pose.heading + twist.omega * dt);
  out.pose.at_boundary = false;
  const double tol = 1e-9;
  if (end.x() < dev.x_min() - tol) out.boundary = geometry::Side::UMin;
  else if (end.x() > dev.x_max() + tol) out.boundary = geometry::Side::UMax;
  else if (end.y() < dev.y_min() - tol) out.boundary = geometry::Side::VMin;
  else if (end.y() > dev.y_max() + tol) out.boundary = geometry::Side::VMax;
  out.pose.at_boundary = out.boundary.has_value();
  return out;
}

StructureIntegration integrate_pose(const geometry::Atlas& atlas,
                                    const geometry::SurfacePose& pose, const BodyTwist& twist,
                                    double dt, double dt_max) {
  check_dt(dt, dt_max);
  const auto& model = atlas.model();
  const auto index = model.patch_index(pose.patch);
  if (!index) throw geometry::StructureError("pose on unknown patch '" + pose.patch + "'");
  const auto& dev = atlas.development(*index);
  const Vec2 start = dev.to_plane({pose.u, pose.v});
  const Vec2 end = start + rot(pose.heading) * body_displacement(twist, dt);

  const auto walk = atlas.walk(*index, start, end);
  StructureIntegration out;
  out.crossings = walk.crossings;
  const auto& patch = model.patches[walk.patch];
  const Vec2 uv = atlas.development(walk.patch).to_surface(walk.blocked_side ? walk.blocked_xy : walk.xy);
  out.pose.patch = patch.id;
  out.pose.u = uv.x();
  out.pose.v = uv.y();
  out.pose.heading = geometry::wrap_angle(pose.heading + twist.omega * dt + walk.frame.angle);
  out.pose.at_boundary = walk.blocked_side.has_value();
  if (walk.blocked_side) {
    out.boundary = walk.blocked_side;
    out.boundary_patch = patch.id;
  }
  return out;
}

double spiral_pitch(double cylinder_radius, double helix_angle) {
  if (!(cylinder_radius > 0.0)) throw geometry::DomainError("cylinder radius must be > 0");
  if (helix_angle == std::numbers::pi / 2.0) {
    throw AxialPathError("helix angle of 90 deg runs along the axis; no revolution");
  }
  if (!(helix_angle >= 0.0 && helix_angle < std::numbers::pi / 2.0)) {
    throw geometry::DomainError("helix angle must lie in [0, pi/2)");
  }
  return 2.0 * std::numbers::pi * cylinder_radius * std::tan(helix_angle);
}

double free_joint_roll(const Vec3& normal_front, const Vec3& normal_back, const Vec3& body_axis) {
  if (std::abs(normal_front.norm() - 1.0) > 1e-6 || std::abs(normal_back.norm() - 1.0) > 1e-6) {
    throw geometry::DomainError("contact normals must be unit vectors");
  }
  if (body_axis.norm() < 1e-12) throw geometry::DomainError("body axis is zero");
  const Vec3 axis = body_axis.normalized();
  const Vec3 pf = normal_front - normal_front.dot(axis) * axis;
  const Vec3 pb = normal_back - normal_back.dot(axis) * axis;
  if (pf.norm() < 1e-9 || pb.norm() < 1e-9) {
    throw geometry::DomainError("contact normal parallel to the body axis");
  }
  return std::atan2(axis.dot(pb.cross(pf)), pb.dot(pf));
}

}  // namespace magbike::kinematics
