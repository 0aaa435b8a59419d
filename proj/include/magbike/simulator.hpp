#pragma once

// Discrete-time stepper for the robot on a StructureModel.
//
// A Simulator owns one world (structure, parameters, configuration) and is
// immutable once built; step() is a pure function of the previous state and
// the command, so a single stepping context per world is all the
// synchronisation needed.

#include "magbike/geometry.hpp"
#include "magbike/kinematics.hpp"
#include "magbike/statics.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace magbike::sim {

using geometry::Vec2;
using geometry::Vec3;

/// Adhesion multipliers by contact class. The point-contact and corner-hit
/// values are assumptions; both situations are known to reduce adhesion but
/// neither is quantified.
struct Derating {
  double full_line{1.0};
  double point_contact{0.5};
  double corner_hit{0.3};
  /// Cylinders below this diameter give single-point wheel contact.
  double thin_cylinder_diameter{0.5};
};

struct SimConfig {
  kinematics::Limits limits;
  Derating derating;
};

enum class ContactClass { FullLine, PointContact, CornerHit };

std::string_view to_string(ContactClass c);

struct WheelContact {
  std::string patch;
  double u{0.0};
  double v{0.0};
  Vec3 point{Vec3::Zero()};
  Vec3 normal{Vec3::UnitZ()};
  ContactClass contact_class{ContactClass::FullLine};
  double adhesion{0.0};
};

struct RobotState {
  geometry::SurfacePose pose;
  kinematics::SteeringState steering;
  kinematics::FreeJointState free_joint;
  WheelContact back;
  WheelContact front;
  double time{0.0};
  /// Body centre in world coordinates.
  Vec3 position{Vec3::Zero()};
  double margin{0.0};
  double moving_torque_fraction{0.0};
  double steering_torque_fraction{0.0};
  /// Speeds actually applied during the step that produced this state.
  kinematics::WheelCommand applied;
  /// Body centre speed during that step (zero when blocked).
  double speed{0.0};
};

enum class EventKind {
  FallRisk,
  TorqueSaturation,
  SteerSaturation,
  Slip,
  JointTransition,
  Boundary,
  Completed,
};

std::string_view to_string(EventKind kind);
EventKind event_kind_from_string(std::string_view name);

struct SimEvent {
  double time{0.0};
  EventKind kind{EventKind::Completed};
  nlohmann::json payload = nlohmann::json::object();
};

struct Command {
  kinematics::SteeringState steering;
  kinematics::WheelCommand wheels;
};

struct StepResult {
  RobotState state;
  std::vector<SimEvent> events;
};

class Simulator {
 public:
  Simulator(geometry::StructureModel structure, statics::RobotParams params, SimConfig config = {});

  const geometry::StructureModel& structure() const { return *structure_; }
  const geometry::Atlas& atlas() const { return *atlas_; }
  const statics::RobotParams& params() const { return params_; }
  const SimConfig& config() const { return config_; }

  /// Places both wheels around the pose. Throws geometry::DomainError when
  /// the body does not fit on the structure.
  RobotState initial_state(const geometry::SurfacePose& pose,
                           const kinematics::SteeringState& steering = {}) const;

  /// Advances one step. Commands with wheel speeds above v_max or dt outside
  /// (0, dt_max] raise geometry::DomainError; a state whose wheels are off
  /// the structure raises geometry::DomainError as well.
  StepResult step(const RobotState& state, const Command& command, double dt) const;

  /// Checks the contact invariant (wheels on their patches, separation equal
  /// to the wheelbase in the unfolded plane).
  void check_state(const RobotState& state) const;

 private:
  struct Placement {
    WheelContact back;
    WheelContact front;
    bool ok{false};
    std::optional<geometry::Side> blocked;
  };
  Placement place_wheels(const geometry::SurfacePose& pose) const;
  void classify(WheelContact& wheel, std::size_t patch, const Vec2& xy) const;
  void evaluate(RobotState& state, const kinematics::SteeringState& previous_steering,
                std::vector<SimEvent>& events) const;

  std::shared_ptr<const geometry::StructureModel> structure_;
  std::shared_ptr<const geometry::Atlas> atlas_;
  statics::RobotParams params_;
  SimConfig config_;
};

/// One row of a scripted command timeline (angles in radians).
struct TimelineRow {
  double t{0.0};
  double delta_front{0.0};
  double delta_back{0.0};
  double v_back{0.0};
  double v_front{0.0};
};

/// Zero-order hold over the rows (sorted by t); zero command before the
/// first row.
Command command_at(const std::vector<TimelineRow>& timeline, double t);

enum class CommandSourceKind { Scripted, Interactive };

struct Scenario {
  std::string name;
  geometry::StructureModel structure;
  statics::RobotParams params;
  SimConfig config;
  geometry::SurfacePose initial_pose;
  kinematics::SteeringState initial_steering;
  CommandSourceKind source{CommandSourceKind::Scripted};
  std::vector<TimelineRow> timeline;
  double dt{0.01};
  double duration{0.0};
  double pose_noise_sigma{0.0};
  std::uint64_t seed{0};
};

class ScenarioError : public std::runtime_error {
 public:
  explicit ScenarioError(std::vector<std::string> issues);
  const std::vector<std::string>& issues() const { return issues_; }

 private:
  std::vector<std::string> issues_;
};

/// Returns the traversability warnings (below-diameter, narrow patches);
/// throws ScenarioError for anything that prevents running.
std::vector<geometry::Issue> validate_scenario(const Scenario& scenario);

struct Summary {
  double distance{0.0};
  int joints_crossed{0};
  double min_margin{0.0};
  double max_torque_demand{0.0};
  int fall_risk_events{0};
  int torque_saturation_events{0};
  int slip_events{0};
  int boundary_events{0};
  std::size_t steps{0};
  std::vector<std::string> warnings;
};

struct ScenarioResult {
  std::vector<RobotState> trajectory;
  std::vector<SimEvent> events;
  Summary summary;
};

ScenarioResult run_scenario(const Scenario& scenario);

/// Accumulates summary statistics over a stream of steps.
class SummaryBuilder {
 public:
  explicit SummaryBuilder(const RobotState& initial);
  void add(const StepResult& step, double dt);
  Summary finish() const { return summary_; }

 private:
  Summary summary_;
};

struct TraversabilityCheck {
  std::string subject;
  std::string requirement;
  double required{0.0};
  double available{0.0};
  bool pass{false};
  std::string note;
};

struct TraversabilityReport {
  std::vector<TraversabilityCheck> checks;
  bool pass{false};
};

TraversabilityReport traversability_report(const geometry::StructureModel& structure,
                                           const statics::RobotParams& params,
                                           const Derating& derating = {});

/// 64-bit FNV-1a digest over the bit patterns of every state's pose,
/// steering, roll and time.
class TrajectoryHasher {
 public:
  void add(const RobotState& state);
  std::uint64_t value() const { return hash_; }

 private:
  void mix(const void* data, std::size_t n);
  std::uint64_t hash_{0xcbf29ce484222325ULL};
};

std::uint64_t trajectory_hash(const std::vector<RobotState>& trajectory);
std::string hash_hex(std::uint64_t hash);

}  // namespace magbike::sim
