#include "magbike/scenario_io.hpp"

#include "magbike/structure_io.hpp"

#include <yaml-cpp/yaml.h>

#include <fstream>
#include <iomanip>
#include <sstream>

namespace magbike::io {

using sim::ScenarioError;

namespace {

[[noreturn]] void fail(const std::string& msg) { throw ScenarioError({msg}); }

double number(const YAML::Node& n, const std::string& what) {
  try {
    return n.as<double>();
  } catch (const YAML::Exception&) {
    fail(what + " must be a number");
  }
}

YAML::Node load_yaml(const std::filesystem::path& path) {
  try {
    return YAML::LoadFile(path.string());
  } catch (const YAML::BadFile&) {
    fail("cannot open " + path.string());
  } catch (const YAML::Exception& e) {
    fail(path.string() + ": " + e.what());
  }
}

void apply_config(const YAML::Node& node, sim::SimConfig& cfg) {
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    const auto& v = kv.second;
    auto& lim = cfg.limits;
    if (key == "v_max") lim.v_max = number(v, key);
    else if (key == "steer_rate") lim.steer_rate = number(v, key);
    else if (key == "roll_limit") lim.roll_limit = number(v, key);
    else if (key == "dt_max") lim.dt_max = number(v, key);
    else if (key == "derating") {
      for (const auto& d : v) {
        const auto dk = d.first.as<std::string>();
        auto& der = cfg.derating;
        if (dk == "full_line") der.full_line = number(d.second, dk);
        else if (dk == "point_contact") der.point_contact = number(d.second, dk);
        else if (dk == "corner_hit") der.corner_hit = number(d.second, dk);
        else if (dk == "thin_cylinder_diameter") der.thin_cylinder_diameter = number(d.second, dk);
        else fail("unknown derating key '" + dk + "'");
      }
    } else {
      fail("unknown config key '" + key + "'");
    }
  }
  if (!(cfg.limits.v_max > 0.0) || !(cfg.limits.steer_rate > 0.0) ||
      !(cfg.limits.roll_limit > 0.0) || !(cfg.limits.dt_max > 0.0)) {
    fail("config limits must be > 0");
  }
}

sim::TimelineRow row_from(const std::vector<double>& f, const std::string& where) {
  if (f.size() != 5) fail(where + ": expected 5 values (t, delta_front, delta_back, v_back, v_front)");
  return {f[0], f[1], f[2], f[3], f[4]};
}

std::string fmt(double x) {
  std::ostringstream s;
  s << std::setprecision(17) << x;
  return s.str();
}

}  // namespace

ParamsFile parse_params(const YAML::Node& node, ParamsFile base) {
  if (!node.IsMap()) fail("params must be a mapping");
  auto& p = base.params;
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    const auto& v = kv.second;
    if (key == "version") continue;
    if (key == "worst_cases") {
      base.worst_cases.clear();
      for (const auto& c : v) {
        statics::CornerLoadCase lc;
        lc.name = c["name"] ? c["name"].as<std::string>() : "case" + std::to_string(base.worst_cases.size());
        lc.f_2_1 = c["f_2_1"] ? number(c["f_2_1"], "f_2_1") : 0.0;
        lc.f_2_2 = c["f_2_2"] ? number(c["f_2_2"], "f_2_2") : 0.0;
        lc.weight = c["weight"] ? number(c["weight"], "weight") : p.weight();
        if (lc.f_2_1 < 0.0 || lc.f_2_2 < 0.0 || lc.weight < 0.0) {
          fail("worst case '" + lc.name + "': loads must be >= 0");
        }
        base.worst_cases.push_back(lc);
      }
      continue;
    }
    const double x = number(v, key);
    if (key == "mass") p.mass = x;
    else if (key == "payload") p.payload = x;
    else if (key == "wheel_radius") p.wheel_radius = x;
    else if (key == "wheelbase") p.wheelbase = x;
    else if (key == "wheel_gap") p.wheel_gap = x;
    else if (key == "com_height") p.com_height = x;
    else if (key == "friction_k") p.friction_k = x;
    else if (key == "magnet_force") p.magnet_force = x;
    else if (key == "inter_wheel_force") p.inter_wheel_force = x;
    else if (key == "motor_torque") p.motor_torque = x;
    else if (key == "servo_torque") p.servo_torque = x;
    else if (key == "motor_torque_kgcm") p.motor_torque = statics::kgcm_to_nm(x);
    else if (key == "servo_torque_kgcm") p.servo_torque = statics::kgcm_to_nm(x);
    else if (key == "sf_adhesion") p.sf_adhesion = x;
    else if (key == "sf_torque") p.sf_torque = x;
    else fail("unknown params key '" + key + "'");
  }
  try {
    p.validate();
  } catch (const geometry::DomainError& e) {
    fail(std::string("params: ") + e.what());
  }
  return base;
}

ParamsFile load_params(const std::filesystem::path& path) {
  return parse_params(load_yaml(path));
}

sim::Scenario parse_scenario(const YAML::Node& root, const std::filesystem::path& base_dir) {
  if (!root.IsMap()) fail("scenario must be a mapping");
  if (root["version"] && root["version"].as<int>() != 1) fail("unsupported scenario version");
  sim::Scenario s;
  s.name = root["name"] ? root["name"].as<std::string>() : "scenario";

  const YAML::Node st = root["structure"];
  if (!st) fail("scenario needs a 'structure'");
  if (st.IsScalar()) {
    s.structure = load_structure(base_dir / st.as<std::string>());
  } else {
    s.structure = parse_structure(st);
  }

  if (const YAML::Node p = root["params"]) {
    s.params = p.IsScalar() ? load_params(base_dir / p.as<std::string>()).params
                            : parse_params(p).params;
  }
  if (const YAML::Node c = root["config"]) apply_config(c, s.config);

  const YAML::Node ip = root["initial_pose"];
  if (!ip || !ip["patch"]) fail("scenario needs initial_pose.patch");
  s.initial_pose.patch = ip["patch"].as<std::string>();
  s.initial_pose.u = ip["u"] ? number(ip["u"], "initial_pose.u") : 0.0;
  s.initial_pose.v = ip["v"] ? number(ip["v"], "initial_pose.v") : 0.0;
  s.initial_pose.heading = ip["heading"] ? number(ip["heading"], "initial_pose.heading") : 0.0;
  if (const YAML::Node is = root["initial_steering"]) {
    s.initial_steering.delta_front = is["front"] ? number(is["front"], "front") : 0.0;
    s.initial_steering.delta_back = is["back"] ? number(is["back"], "back") : 0.0;
  }

  s.dt = root["dt"] ? number(root["dt"], "dt") : 0.01;
  s.duration = root["duration"] ? number(root["duration"], "duration") : 0.0;
  s.pose_noise_sigma =
      root["pose_noise_sigma"] ? number(root["pose_noise_sigma"], "pose_noise_sigma") : 0.0;
  s.seed = root["seed"] ? root["seed"].as<std::uint64_t>() : 0;

  const std::string source =
      root["command_source"] ? root["command_source"].as<std::string>() : "scripted";
  if (source == "scripted") s.source = sim::CommandSourceKind::Scripted;
  else if (source == "interactive") s.source = sim::CommandSourceKind::Interactive;
  else fail("command_source must be 'scripted' or 'interactive'");

  if (root["commands"] && root["command_file"]) fail("give either commands or command_file");
  if (const YAML::Node cmds = root["commands"]) {
    for (std::size_t i = 0; i < cmds.size(); ++i) {
      std::vector<double> f;
      for (const auto& x : cmds[i]) f.push_back(number(x, "commands"));
      s.timeline.push_back(row_from(f, "commands[" + std::to_string(i) + "]"));
    }
  } else if (const YAML::Node cf = root["command_file"]) {
    s.timeline = load_command_csv(base_dir / cf.as<std::string>());
  }
  return s;
}

sim::Scenario load_scenario(const std::filesystem::path& path) {
  return parse_scenario(load_yaml(path), path.parent_path());
}

std::vector<sim::TimelineRow> read_command_csv(std::istream& in) {
  std::vector<sim::TimelineRow> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (line.rfind("t,", 0) == 0) continue;
    std::vector<double> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        f.push_back(std::stod(cell, &used));
      } catch (const std::exception&) {
        fail("command csv line " + std::to_string(lineno) + ": bad number '" + cell + "'");
      }
    }
    rows.push_back(row_from(f, "command csv line " + std::to_string(lineno)));
  }
  return rows;
}

std::vector<sim::TimelineRow> load_command_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail("cannot open " + path.string());
  return read_command_csv(in);
}

void write_trajectory_csv(std::ostream& out, const std::vector<sim::RobotState>& trajectory) {
  out << "t,patch,u,v,heading,roll,margin\n";
  for (const auto& s : trajectory) {
    out << fmt(s.time) << ',' << s.pose.patch << ',' << fmt(s.pose.u) << ',' << fmt(s.pose.v)
        << ',' << fmt(s.pose.heading) << ',' << fmt(s.free_joint.roll) << ',' << fmt(s.margin)
        << '\n';
  }
}

nlohmann::json to_json(const sim::RobotState& s) {
  auto wheel = [](const sim::WheelContact& w) {
    return nlohmann::json{{"patch", w.patch},
                          {"u", w.u},
                          {"v", w.v},
                          {"point", {w.point.x(), w.point.y(), w.point.z()}},
                          {"contact", sim::to_string(w.contact_class)},
                          {"adhesion", w.adhesion}};
  };
  return {{"t", s.time},
          {"patch", s.pose.patch},
          {"u", s.pose.u},
          {"v", s.pose.v},
          {"heading", s.pose.heading},
          {"roll", s.free_joint.roll},
          {"delta_front", s.steering.delta_front},
          {"delta_back", s.steering.delta_back},
          {"v_back", s.applied.v_back},
          {"v_front", s.applied.v_front},
          {"position", {s.position.x(), s.position.y(), s.position.z()}},
          {"margin", s.margin},
          {"moving_torque_fraction", s.moving_torque_fraction},
          {"steering_torque_fraction", s.steering_torque_fraction},
          {"back", wheel(s.back)},
          {"front", wheel(s.front)}};
}

void write_trajectory_jsonl(std::ostream& out, const std::vector<sim::RobotState>& trajectory) {
  for (const auto& s : trajectory) out << to_json(s).dump() << '\n';
}

nlohmann::json to_json(const sim::SimEvent& e) {
  return {{"t", e.time}, {"kind", sim::to_string(e.kind)}, {"payload", e.payload}};
}

void write_events_jsonl(std::ostream& out, const std::vector<sim::SimEvent>& events) {
  for (const auto& e : events) out << to_json(e).dump() << '\n';
}

nlohmann::json to_json(const sim::Summary& s) {
  return {{"distance", s.distance},
          {"joints_crossed", s.joints_crossed},
          {"min_margin", s.min_margin},
          {"max_torque_demand", s.max_torque_demand},
          {"fall_risk_events", s.fall_risk_events},
          {"torque_saturation_events", s.torque_saturation_events},
          {"slip_events", s.slip_events},
          {"boundary_events", s.boundary_events},
          {"steps", s.steps},
          {"warnings", s.warnings}};
}

nlohmann::json to_json(const statics::FeasibilityReport& report) {
  nlohmann::json reqs = nlohmann::json::array();
  for (const auto& r : report.requirements) {
    reqs.push_back({{"requirement", r.name},
                    {"formula_id", r.formula_id},
                    {"load_case", r.load_case},
                    {"theoretical", r.theoretical},
                    {"safety_factor", r.safety_factor},
                    {"required", r.required},
                    {"available", r.available},
                    {"pass", r.pass}});
  }
  return {{"requirements", reqs}, {"pass", report.pass}};
}

nlohmann::json to_json(const sim::TraversabilityReport& report) {
  nlohmann::json checks = nlohmann::json::array();
  for (const auto& c : report.checks) {
    checks.push_back({{"subject", c.subject},
                      {"requirement", c.requirement},
                      {"required", c.required},
                      {"available", c.available},
                      {"pass", c.pass},
                      {"note", c.note}});
  }
  return {{"checks", checks}, {"pass", report.pass}};
}

std::string format_report(const sim::TraversabilityReport& report) {
  std::ostringstream out;
  out << std::left << std::setw(16) << "subject" << std::setw(26) << "check" << std::right
      << std::setw(12) << "required" << std::setw(12) << "available" << "  result\n";
  out << std::fixed << std::setprecision(4);
  for (const auto& c : report.checks) {
    out << std::left << std::setw(16) << c.subject << std::setw(26) << c.requirement << std::right
        << std::setw(12) << c.required << std::setw(12) << c.available
        << (c.pass ? "  PASS" : "  FAIL");
    if (!c.note.empty()) out << "  (" << c.note << ")";
    out << '\n';
  }
  out << "overall: " << (report.pass ? "PASS" : "FAIL") << '\n';
  return out.str();
}

}  // namespace magbike::io
