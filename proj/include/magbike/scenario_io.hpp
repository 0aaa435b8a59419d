#pragma once

// Parameter files, scenario files and simulator output formats.
//
// Params (YAML): any RobotParams field by name; torques may instead be given
// as motor_torque_kgcm / servo_torque_kgcm. Optional worst_cases list of
// {name, f_2_1, f_2_2, weight}.
//
// Scenario (YAML):
//   version: 1
//   name: corner-internal
//   structure: corner_internal.yaml      # path relative to this file, or an inline mapping
//   params: {magnet_force: 100}          # overrides, or a path to a params file
//   config: {v_max: 0.2, steer_rate: 3, roll_limit: 1.5708,
//            derating: {point_contact: 0.5, corner_hit: 0.3}}
//   initial_pose: {patch: floor, u: 0.2, v: 0.25, heading: 0}
//   initial_steering: {front: 0, back: 0}
//   dt: 0.01
//   duration: 6
//   pose_noise_sigma: 0.0
//   seed: 1
//   command_source: scripted             # scripted | interactive
//   commands: [[t, delta_front, delta_back, v_back, v_front], ...]
//   command_file: drive.csv              # alternative: t,delta_front,delta_back,v_back,v_front

#include "magbike/simulator.hpp"
#include "magbike/statics.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace YAML {
class Node;
}

namespace magbike::io {

struct ParamsFile {
  statics::RobotParams params;
  std::vector<statics::CornerLoadCase> worst_cases;
};

/// Applies the keys present in `node` on top of `base`. Unknown keys throw.
ParamsFile parse_params(const YAML::Node& node, ParamsFile base = {});
ParamsFile load_params(const std::filesystem::path& path);

sim::Scenario parse_scenario(const YAML::Node& node, const std::filesystem::path& base_dir);
sim::Scenario load_scenario(const std::filesystem::path& path);

std::vector<sim::TimelineRow> read_command_csv(std::istream& in);
std::vector<sim::TimelineRow> load_command_csv(const std::filesystem::path& path);

void write_trajectory_csv(std::ostream& out, const std::vector<sim::RobotState>& trajectory);
void write_trajectory_jsonl(std::ostream& out, const std::vector<sim::RobotState>& trajectory);
void write_events_jsonl(std::ostream& out, const std::vector<sim::SimEvent>& events);

nlohmann::json to_json(const sim::RobotState& state);
nlohmann::json to_json(const sim::SimEvent& event);
nlohmann::json to_json(const sim::Summary& summary);
nlohmann::json to_json(const statics::FeasibilityReport& report);
nlohmann::json to_json(const sim::TraversabilityReport& report);
std::string format_report(const sim::TraversabilityReport& report);

}  // namespace magbike::io
