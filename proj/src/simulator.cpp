#include "magbike/simulator.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace magbike::sim {

using geometry::DomainError;
using kinematics::SteeringState;

std::string_view to_string(ContactClass c) {
  switch (c) {
    case ContactClass::FullLine: return "full_line";
    case ContactClass::PointContact: return "point_contact";
    case ContactClass::CornerHit: return "corner_hit";
  }
  return "?";
}

std::string_view to_string(EventKind kind) {
  switch (kind) {
    case EventKind::FallRisk: return "fall_risk";
    case EventKind::TorqueSaturation: return "torque_saturation";
    case EventKind::SteerSaturation: return "steer_saturation";
    case EventKind::Slip: return "slip";
    case EventKind::JointTransition: return "joint_transition";
    case EventKind::Boundary: return "boundary";
    case EventKind::Completed: return "completed";
  }
  return "?";
}

EventKind event_kind_from_string(std::string_view name) {
  for (auto k : {EventKind::FallRisk, EventKind::TorqueSaturation, EventKind::SteerSaturation,
                 EventKind::Slip, EventKind::JointTransition, EventKind::Boundary,
                 EventKind::Completed}) {
    if (to_string(k) == name) return k;
  }
  throw std::invalid_argument("unknown event kind '" + std::string(name) + "'");
}

namespace {

Vec2 heading_vector(double heading) { return {std::cos(heading), std::sin(heading)}; }

std::string joint_between(const geometry::StructureModel& model, const std::string& a,
                          const std::string& b) {
  for (const auto& j : model.joints) {
    if ((j.a.patch == a && j.b.patch == b) || (j.a.patch == b && j.b.patch == a)) return j.id;
  }
  return {};
}

}  // namespace

Simulator::Simulator(geometry::StructureModel structure, statics::RobotParams params,
                     SimConfig config)
    : structure_(std::make_shared<const geometry::StructureModel>(std::move(structure))),
      params_(params),
      config_(config) {
  atlas_ = std::make_shared<const geometry::Atlas>(*structure_);
}

void Simulator::classify(WheelContact& wheel, std::size_t patch, const Vec2& xy) const {
  const auto& p = structure_->patches[patch];
  const auto& d = config_.derating;
  if (atlas_->distance_to_corner(patch, xy) <= params_.wheel_radius) {
    wheel.contact_class = ContactClass::CornerHit;
    wheel.adhesion = params_.magnet_force * d.corner_hit;
  } else if (p.is_cylinder() && 2.0 * p.radius < d.thin_cylinder_diameter) {
    wheel.contact_class = ContactClass::PointContact;
    wheel.adhesion = params_.magnet_force * d.point_contact;
  } else {
    wheel.contact_class = ContactClass::FullLine;
    wheel.adhesion = params_.magnet_force * d.full_line;
  }
}

Simulator::Placement Simulator::place_wheels(const geometry::SurfacePose& pose) const {
  Placement out;
  const auto index = structure_->patch_index(pose.patch);
  if (!index) throw DomainError("pose on unknown patch '" + pose.patch + "'");
  const auto& patch = structure_->patches[*index];
  if (!geometry::in_bounds(patch, {pose.u, pose.v}, 1e-9)) {
    throw DomainError("body centre outside patch '" + pose.patch + "'");
  }
  const Vec2 centre = atlas_->development(*index).to_plane({pose.u, pose.v});
  const Vec2 half = 0.5 * params_.wheelbase * heading_vector(pose.heading);
  for (int w = 0; w < 2; ++w) {
    const Vec2 target = w == 0 ? Vec2(centre - half) : Vec2(centre + half);
    const auto walk = atlas_->walk(*index, centre, target);
    if (walk.blocked_side) {
      out.blocked = walk.blocked_side;
      return out;
    }
    WheelContact c;
    const auto& wp = structure_->patches[walk.patch];
    const Vec2 uv = atlas_->development(walk.patch).to_surface(walk.xy);
    c.patch = wp.id;
    c.u = uv.x();
    c.v = uv.y();
    const auto pn = geometry::point_and_normal(wp, uv);
    c.point = pn.point;
    c.normal = pn.normal;
    classify(c, walk.patch, walk.xy);
    (w == 0 ? out.back : out.front) = c;
  }
  out.ok = true;
  return out;
}

void Simulator::evaluate(RobotState& state, const SteeringState& previous_steering,
                         std::vector<SimEvent>& events) const {
  const double t = state.time;
  const double L = params_.wheelbase;
  const double P = params_.weight();

  // Free joint roll between the two contact normals about the body chord.
  const Vec3 chord = state.front.point - state.back.point;
  state.free_joint.roll = 0.0;
  if (chord.norm() > 1e-12) {
    try {
      state.free_joint.roll =
          kinematics::free_joint_roll(state.front.normal, state.back.normal, chord);
    } catch (const DomainError&) {
      state.free_joint.roll = 0.0;
    }
  }
  if (std::abs(state.free_joint.roll) > config_.limits.roll_limit + 1e-12) {
    events.push_back({t, EventKind::Boundary,
                      {{"reason", "roll_limit"},
                       {"roll", state.free_joint.roll},
                       {"limit", config_.limits.roll_limit}}});
  }

  // Tip-over margin on the locally flattened body: back contact, front
  // contact and centre of mass at com_height above the midpoint.
  statics::ContactSet contacts;
  contacts.contacts = {{Vec3(-0.5 * L, 0.0, 0.0), state.back.adhesion, Vec3::UnitZ()},
                       {Vec3(0.5 * L, 0.0, 0.0), state.front.adhesion, Vec3::UnitZ()}};
  contacts.center_of_mass = Vec3(0.0, 0.0, params_.com_height);
  contacts.weight = P;
  state.margin = statics::tip_over_margin(contacts);
  if (state.margin < params_.sf_adhesion) {
    events.push_back({t, EventKind::FallRisk,
                      {{"margin", state.margin},
                       {"sf_adhesion", params_.sf_adhesion},
                       {"back", to_string(state.back.contact_class)},
                       {"front", to_string(state.front.contact_class)},
                       {"back_adhesion", state.back.adhesion},
                       {"front_adhesion", state.front.adhesion}}});
  }

  // Actuator demand; corner loads only arise on wheels touching a corner.
  const double r = params_.wheel_radius;
  const double k = params_.friction_k;
  auto corner_load = [](const WheelContact& w) {
    return w.contact_class == ContactClass::CornerHit ? w.adhesion : 0.0;
  };
  state.moving_torque_fraction = 0.0;
  state.steering_torque_fraction = 0.0;
  const struct {
    const WheelContact* wheel;
    double speed;
    double delta_now;
    double delta_before;
    const char* name;
  } wheels[] = {
      {&state.back, state.applied.v_back, state.steering.delta_back, previous_steering.delta_back,
       "back"},
      {&state.front, state.applied.v_front, state.steering.delta_front,
       previous_steering.delta_front, "front"},
  };
  for (const auto& w : wheels) {
    if (w.speed != 0.0) {
      const double f = corner_load(*w.wheel);
      const double required = statics::required_moving_torque(
          r, statics::CornerLoadCase{"", f, f, P}, k, params_.sf_torque);
      const double fraction = required / params_.motor_torque;
      state.moving_torque_fraction = std::max(state.moving_torque_fraction, fraction);
      if (fraction > 1.0) {
        events.push_back({t, EventKind::TorqueSaturation,
                          {{"actuator", "motor"},
                           {"wheel", w.name},
                           {"required", required},
                           {"available", params_.motor_torque}}});
      }
    }
    if (w.delta_now != w.delta_before) {
      const double required = statics::required_steering_torque(
          r, params_.inter_wheel_force, corner_load(*w.wheel), P, k, params_.sf_torque);
      const double fraction = required / params_.servo_torque;
      state.steering_torque_fraction = std::max(state.steering_torque_fraction, fraction);
      if (fraction > 1.0) {
        events.push_back({t, EventKind::TorqueSaturation,
                          {{"actuator", "servo"},
                           {"wheel", w.name},
                           {"required", required},
                           {"available", params_.servo_torque}}});
      }
    }
  }
}

RobotState Simulator::initial_state(const geometry::SurfacePose& pose,
                                    const SteeringState& steering) const {
  if (std::abs(steering.delta_front) > kinematics::kSteerLimit + 1e-12 ||
      std::abs(steering.delta_back) > kinematics::kSteerLimit + 1e-12) {
    throw DomainError("initial steering outside [-pi/2, pi/2]");
  }
  const auto placement = place_wheels(pose);
  if (!placement.ok) {
    throw DomainError("robot body does not fit on the structure at the initial pose");
  }
  RobotState s;
  s.pose = pose;
  s.pose.heading = geometry::wrap_angle(pose.heading);
  s.steering = steering;
  s.back = placement.back;
  s.front = placement.front;
  s.position = geometry::point_and_normal(structure_->patch(pose.patch), {pose.u, pose.v}).point;
  std::vector<SimEvent> ignored;
  evaluate(s, steering, ignored);
  return s;
}

StepResult Simulator::step(const RobotState& state, const Command& command, double dt) const {
  const auto& lim = config_.limits;
  if (!(dt > 0.0) || dt > lim.dt_max) throw DomainError("dt outside (0, dt_max]");
  if (std::abs(command.wheels.v_back) > lim.v_max + 1e-12 ||
      std::abs(command.wheels.v_front) > lim.v_max + 1e-12) {
    throw DomainError("wheel speed command exceeds v_max");
  }
  check_state(state);

  StepResult out;
  auto& events = out.events;
  const double t_next = state.time + dt;

  // Servo slew towards the (clamped) command.
  SteeringState target = command.steering;
  for (auto* d : {&target.delta_front, &target.delta_back}) {
    if (std::abs(*d) > kinematics::kSteerLimit) {
      events.push_back({t_next, EventKind::SteerSaturation,
                        {{"commanded", *d}, {"limit", kinematics::kSteerLimit}}});
      *d = std::clamp(*d, -kinematics::kSteerLimit, kinematics::kSteerLimit);
    }
  }
  const double max_step = lim.steer_rate * dt;
  SteeringState steer = state.steering;
  steer.delta_front += std::clamp(target.delta_front - steer.delta_front, -max_step, max_step);
  steer.delta_back += std::clamp(target.delta_back - steer.delta_back, -max_step, max_step);

  // Body twist; the back wheel speed is authoritative except at the pivot.
  kinematics::TwistSolution sol;
  double next_speed = 0.0;
  kinematics::WheelCommand applied = command.wheels;
  try {
    sol = kinematics::body_twist(steer, command.wheels.v_back, params_.wheelbase,
                                 command.wheels.v_front);
  } catch (const kinematics::SlipError& e) {
    events.push_back({t_next, EventKind::Slip, {{"residual", e.residual()}, {"wheel", "back"}}});
    sol = kinematics::body_twist(steer, 0.0, params_.wheelbase, command.wheels.v_front);
    applied.v_back = 0.0;
  }
  if (std::abs(sol.slip_residual) > 1e-9) {
    events.push_back(
        {t_next, EventKind::Slip, {{"residual", sol.slip_residual}, {"wheel", "front"}}});
  }
  applied.v_front = sol.v_front_required;
  next_speed = std::hypot(sol.twist.vx, sol.twist.vy);

  RobotState next = state;
  next.time = t_next;
  next.steering = steer;
  next.applied = applied;
  next.speed = next_speed;

  const auto moved = kinematics::integrate_pose(*atlas_, state.pose, sol.twist, dt, lim.dt_max);
  bool blocked = false;
  if (moved.boundary) {
    events.push_back({t_next, EventKind::Boundary,
                      {{"reason", "edge"},
                       {"patch", moved.boundary_patch},
                       {"side", geometry::to_string(*moved.boundary)}}});
    blocked = true;
  }
  Placement placement;
  if (!blocked) {
    placement = place_wheels(moved.pose);
    if (!placement.ok) {
      events.push_back({t_next, EventKind::Boundary,
                        {{"reason", "wheel_off_structure"},
                         {"side", geometry::to_string(*placement.blocked)}}});
      blocked = true;
    }
  }
  if (blocked) {
    // The robot stays where it was; only the servos moved.
    next.applied = {};
    next.speed = 0.0;
    evaluate(next, state.steering, events);
    out.state = next;
    return out;
  }

  next.pose = moved.pose;
  next.pose.at_boundary = false;
  next.back = placement.back;
  next.front = placement.front;
  next.position =
      geometry::point_and_normal(structure_->patch(next.pose.patch), {next.pose.u, next.pose.v})
          .point;
  for (const auto& [before, after, name] :
       {std::tuple{&state.front, &next.front, "front"}, std::tuple{&state.back, &next.back, "back"}}) {
    if (before->patch != after->patch) {
      events.push_back({t_next, EventKind::JointTransition,
                        {{"wheel", name},
                         {"from", before->patch},
                         {"to", after->patch},
                         {"joint", joint_between(*structure_, before->patch, after->patch)}}});
    }
  }
  evaluate(next, state.steering, events);
  out.state = next;
  return out;
}

void Simulator::check_state(const RobotState& state) const {
  for (const WheelContact* w : {&state.back, &state.front}) {
    const auto& patch = structure_->patch(w->patch);
    if (!geometry::in_bounds(patch, {w->u, w->v}, 1e-6)) {
      throw DomainError("wheel contact off patch '" + w->patch + "'");
    }
    const auto pn = geometry::point_and_normal(
        patch, {std::clamp(w->u, patch.bounds.u_min, patch.bounds.u_max),
                std::clamp(w->v, patch.bounds.v_min, patch.bounds.v_max)});
    if ((pn.point - w->point).norm() > 1e-6) {
      throw DomainError("wheel contact point is not on its patch");
    }
  }
}

Command command_at(const std::vector<TimelineRow>& timeline, double t) {
  Command c;
  const TimelineRow* active = nullptr;
  for (const auto& row : timeline) {
    if (row.t <= t + 1e-12) active = &row;
    else break;
  }
  if (active) {
    c.steering = {active->delta_front, active->delta_back};
    c.wheels = {active->v_back, active->v_front};
  }
  return c;
}

ScenarioError::ScenarioError(std::vector<std::string> issues)
    : std::runtime_error([&issues] {
        std::string msg = "scenario failed validation:";
        for (const auto& i : issues) msg += "\n  - " + i;
        return msg;
      }()),
      issues_(std::move(issues)) {}

std::vector<geometry::Issue> validate_scenario(const Scenario& s) {
  std::vector<std::string> errors;
  std::vector<geometry::Issue> warnings;
  const auto& lim = s.config.limits;
  if (!(s.dt > 0.0) || s.dt > 0.05 || s.dt > lim.dt_max) {
    errors.push_back("dt must lie in (0, 0.05] s");
  }
  if (!(s.duration > 0.0)) errors.push_back("duration must be > 0");
  if (!(s.pose_noise_sigma >= 0.0)) errors.push_back("pose_noise_sigma must be >= 0");
  try {
    s.params.validate();
  } catch (const DomainError& e) {
    errors.push_back(std::string("params: ") + e.what());
  }
  bool structure_ok = true;
  try {
    for (auto& issue : geometry::validate_structure(s.structure)) {
      if (issue.code == geometry::Issue::Code::DanglingJoint ||
          issue.code == geometry::Issue::Code::Disconnected ||
          issue.code == geometry::Issue::Code::DihedralMismatch) {
        errors.push_back("structure: " + issue.subject + ": " + issue.message);
        structure_ok = false;
      } else {
        warnings.push_back(std::move(issue));
      }
    }
  } catch (const geometry::StructureError& e) {
    errors.push_back(std::string("structure: ") + e.what());
    structure_ok = false;
  }
  double last_t = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < s.timeline.size(); ++i) {
    const auto& row = s.timeline[i];
    const std::string where = "command row " + std::to_string(i);
    if (row.t < last_t) errors.push_back(where + ": time goes backwards");
    last_t = row.t;
    if (std::abs(row.v_back) > lim.v_max + 1e-12 || std::abs(row.v_front) > lim.v_max + 1e-12) {
      errors.push_back(where + ": wheel speed above v_max");
    }
    if (std::abs(row.delta_front) > kinematics::kSteerLimit + 1e-12 ||
        std::abs(row.delta_back) > kinematics::kSteerLimit + 1e-12) {
      errors.push_back(where + ": steering angle outside [-pi/2, pi/2]");
    }
  }
  if (structure_ok && errors.empty()) {
    try {
      Simulator sim(s.structure, s.params, s.config);
      (void)sim.initial_state(s.initial_pose, s.initial_steering);
    } catch (const std::exception& e) {
      errors.push_back(std::string("initial pose: ") + e.what());
    }
  }
  if (!errors.empty()) throw ScenarioError(std::move(errors));
  return warnings;
}

SummaryBuilder::SummaryBuilder(const RobotState& initial) {
  summary_.min_margin = initial.margin;
}

void SummaryBuilder::add(const StepResult& step, double dt) {
  const auto& s = step.state;
  ++summary_.steps;
  bool moved = true;
  for (const auto& e : step.events) {
    switch (e.kind) {
      case EventKind::FallRisk: ++summary_.fall_risk_events; break;
      case EventKind::TorqueSaturation: ++summary_.torque_saturation_events; break;
      case EventKind::Slip: ++summary_.slip_events; break;
      case EventKind::Boundary:
        ++summary_.boundary_events;
        if (e.payload.value("reason", "") != "roll_limit") moved = false;
        break;
      case EventKind::JointTransition:
        if (e.payload.value("wheel", "") == "back") ++summary_.joints_crossed;
        break;
      default: break;
    }
  }
  if (moved) summary_.distance += s.speed * dt;
  summary_.min_margin = std::min(summary_.min_margin, s.margin);
  summary_.max_torque_demand = std::max(
      {summary_.max_torque_demand, s.moving_torque_fraction, s.steering_torque_fraction});
}

ScenarioResult run_scenario(const Scenario& scenario) {
  const auto warnings = validate_scenario(scenario);
  Simulator sim(scenario.structure, scenario.params, scenario.config);
  ScenarioResult result;
  RobotState state = sim.initial_state(scenario.initial_pose, scenario.initial_steering);
  result.trajectory.push_back(state);
  SummaryBuilder summary(state);
  const auto steps = static_cast<std::size_t>(std::llround(scenario.duration / scenario.dt));
  for (std::size_t k = 0; k < steps; ++k) {
    const double t = static_cast<double>(k) * scenario.dt;
    const Command cmd = command_at(scenario.timeline, t);
    auto step = sim.step(state, cmd, scenario.dt);
    step.state.time = static_cast<double>(k + 1) * scenario.dt;
    for (auto& e : step.events) e.time = step.state.time;
    summary.add(step, scenario.dt);
    state = step.state;
    result.trajectory.push_back(state);
    for (auto& e : step.events) result.events.push_back(std::move(e));
  }
  result.summary = summary.finish();
  for (const auto& w : warnings) result.summary.warnings.push_back(w.subject + ": " + w.message);
  result.events.push_back({state.time, EventKind::Completed,
                           {{"steps", result.summary.steps},
                            {"distance", result.summary.distance},
                            {"fall_risk_events", result.summary.fall_risk_events}}});
  return result;
}

TraversabilityReport traversability_report(const geometry::StructureModel& structure,
                                           const statics::RobotParams& params,
                                           const Derating& derating) {
  TraversabilityReport report;
  for (const auto& issue : geometry::validate_structure(structure)) {
    TraversabilityCheck c;
    c.subject = issue.subject;
    c.requirement = std::string(geometry::to_string(issue.code));
    c.pass = false;
    c.note = issue.message;
    if (issue.code == geometry::Issue::Code::BelowMinDiameter) {
      const auto& p = structure.patch(issue.subject);
      c.required = geometry::kMinCylinderDiameter;
      c.available = 2.0 * p.radius;
    }
    report.checks.push_back(std::move(c));
  }
  const double P = params.weight();
  const double corner = params.magnet_force * derating.corner_hit;
  const geometry::Atlas atlas(structure);
  for (const auto& g : atlas.joints()) {
    const auto& joint = structure.joints[g.joint_index];
    if (g.kind == geometry::JointKind::Flat) continue;
    const std::string note = std::string(geometry::to_string(g.kind)) + " corner, dihedral " +
                             std::to_string(g.dihedral) + " rad";
    TraversabilityCheck adhesion{joint.id, "corner adhesion",
                                 statics::required_adhesion(P, params.com_height, params.wheelbase,
                                                            params.sf_adhesion),
                                 corner, false, note};
    adhesion.pass = adhesion.required <= adhesion.available;
    TraversabilityCheck moving{joint.id, "moving torque",
                               statics::required_moving_torque(
                                   params.wheel_radius, {joint.id, corner, corner, P},
                                   params.friction_k, params.sf_torque),
                               params.motor_torque, false, note};
    moving.pass = moving.required <= moving.available;
    TraversabilityCheck steering{
        joint.id, "steering torque",
        statics::required_steering_torque(params.wheel_radius, params.inter_wheel_force, corner, P,
                                          params.friction_k, params.sf_torque),
        params.servo_torque, false, note};
    steering.pass = steering.required <= steering.available;
    report.checks.push_back(adhesion);
    report.checks.push_back(moving);
    report.checks.push_back(steering);
  }
  report.pass = std::all_of(report.checks.begin(), report.checks.end(),
                            [](const TraversabilityCheck& c) { return c.pass; });
  return report;
}

void TrajectoryHasher::mix(const void* data, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    hash_ ^= p[i];
    hash_ *= 0x100000001b3ULL;
  }
}

void TrajectoryHasher::add(const RobotState& s) {
  mix(s.pose.patch.data(), s.pose.patch.size());
  for (double x : {s.time, s.pose.u, s.pose.v, s.pose.heading, s.steering.delta_front,
                   s.steering.delta_back, s.free_joint.roll}) {
    const auto bits = std::bit_cast<std::uint64_t>(x);
    mix(&bits, sizeof bits);
  }
}

std::uint64_t trajectory_hash(const std::vector<RobotState>& trajectory) {
  TrajectoryHasher h;
  for (const auto& s : trajectory) h.add(s);
  return h.value();
}

std::string hash_hex(std::uint64_t hash) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash));
  return buf;
}

}  // namespace magbike::sim
