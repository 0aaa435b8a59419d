// magbike: sizing, simulation, inspection mapping and teleoperation.

#include "magbike/gateway_config.hpp"
#include "magbike/inspection_io.hpp"
#include "magbike/scenario_io.hpp"
#include "magbike/structure_io.hpp"
#include "magbike/synthetic.hpp"
#include "magbike/teleop.hpp"
#include "magbike/ws_server.hpp"

#include <CLI11.hpp>

#include <csignal>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace magbike;

namespace {

std::stop_source g_stop;

extern "C" void on_signal(int) { g_stop.request_stop(); }

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

inspection::Rigid3 load_alignment(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  const auto j = nlohmann::json::parse(in);
  const auto& m = j.at("matrix");
  Eigen::Matrix4d M;
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) M(r, c) = m.at(r).at(c).get<double>();
  }
  inspection::Rigid3 T(M);
  const Eigen::Matrix3d R = T.linear();
  if ((R.transpose() * R - Eigen::Matrix3d::Identity()).norm() > 1e-9 || R.determinant() < 0.0) {
    throw std::runtime_error(path.string() + ": alignment rotation is not orthonormal");
  }
  return T;
}

int cmd_size(const fs::path& params_path, const std::optional<fs::path>& structure,
             const std::optional<fs::path>& json_out, bool strict) {
  const auto pf = io::load_params(params_path);
  const auto report = statics::actuator_feasibility(pf.params, pf.worst_cases);
  std::cout << statics::format_report(report);
  nlohmann::json doc{{"feasibility", io::to_json(report)}};
  bool pass = report.pass;
  if (structure) {
    const auto model = io::load_structure(*structure);
    const auto trav = sim::traversability_report(model, pf.params);
    std::cout << "\ntraversability of " << structure->filename().string() << "\n"
              << io::format_report(trav);
    doc["traversability"] = io::to_json(trav);
    pass = pass && trav.pass;
  }
  if (json_out) open_out(*json_out) << doc.dump(2) << '\n';
  return strict && !pass ? 2 : 0;
}

int cmd_simulate(const fs::path& scenario_path, const fs::path& out_dir) {
  const auto scenario = io::load_scenario(scenario_path);
  const auto result = sim::run_scenario(scenario);
  fs::create_directories(out_dir);
  {
    auto out = open_out(out_dir / "trajectory.csv");
    io::write_trajectory_csv(out, result.trajectory);
  }
  {
    auto out = open_out(out_dir / "trajectory.jsonl");
    io::write_trajectory_jsonl(out, result.trajectory);
  }
  {
    auto out = open_out(out_dir / "events.jsonl");
    io::write_events_jsonl(out, result.events);
  }
  auto summary = io::to_json(result.summary);
  summary["scenario"] = scenario.name;
  summary["trajectory_hash"] = sim::hash_hex(sim::trajectory_hash(result.trajectory));
  open_out(out_dir / "summary.json") << summary.dump(2) << '\n';
  std::cout << summary.dump(2) << '\n';
  return 0;
}

struct InspectArgs {
  fs::path poses;
  fs::path detections;
  fs::path depth_index;
  fs::path intrinsics;
  std::optional<fs::path> alignment;
  std::optional<fs::path> structure;
  fs::path out_dir{"."};
  inspection::PipelineConfig pipeline;
};

int cmd_inspect(const InspectArgs& a) {
  const auto poses = inspection::load_poses(a.poses);
  const auto dets = inspection::load_detections(a.detections);
  const auto K = inspection::load_intrinsics(a.intrinsics);
  const inspection::FileDepthSource depth(a.depth_index);
  std::optional<inspection::Rigid3> alignment;
  if (a.alignment) alignment = load_alignment(*a.alignment);
  const auto map = inspection::build_map(poses, dets, depth, K, alignment, a.pipeline);
  std::optional<geometry::StructureModel> structure;
  if (a.structure) structure = io::load_structure(*a.structure);

  fs::create_directories(a.out_dir);
  open_out(a.out_dir / "map.json") << inspection::to_json(map).dump(2) << '\n';
  {
    auto out = open_out(a.out_dir / "map.ply");
    inspection::write_ply(out, map, structure ? &*structure : nullptr);
  }
  std::cout << "poses " << poses.size() << ", detections " << map.detections << ", dropped "
            << map.dropped << ", rejected " << map.rejected << ", markers " << map.markers.size()
            << '\n';
  for (const auto& m : map.markers) {
    std::cout << "  marker (" << m.center.x() << ", " << m.center.y() << ", " << m.center.z()
              << ") r=" << m.radius << " support=" << m.support << '\n';
  }
  return 0;
}

std::vector<inspection::synthetic::PlantedRust> load_planted(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  const auto doc = nlohmann::json::parse(in);
  std::vector<inspection::synthetic::PlantedRust> rusts;
  for (const auto& r : doc.at("rusts")) {
    rusts.push_back({r.at("patch").get<std::string>(), r.at("u").get<double>(),
                     r.at("v").get<double>(), r.value("size", 0.05)});
  }
  return rusts;
}

nlohmann::json matrix_json(const inspection::Rigid3& T) {
  nlohmann::json rows = nlohmann::json::array();
  for (int r = 0; r < 4; ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (int c = 0; c < 4; ++c) row.push_back(T.matrix()(r, c));
    rows.push_back(row);
  }
  return {{"matrix", rows}};
}

struct SynthArgs {
  fs::path scenario;
  fs::path rusts;
  fs::path out_dir{"."};
  inspection::synthetic::WalkthroughConfig walk;
};

// Writes a complete inspection log set for `inspect`, plus ground truth.
int cmd_synth(SynthArgs a) {
  const auto scenario = io::load_scenario(a.scenario);
  const auto rusts = load_planted(a.rusts);
  const auto walk = inspection::synthetic::make_walkthrough(scenario, rusts, a.walk);

  fs::create_directories(a.out_dir / "depth");
  {
    auto out = open_out(a.out_dir / "poses.csv");
    inspection::write_poses_csv(out, walk.poses);
  }
  {
    auto out = open_out(a.out_dir / "detections.jsonl");
    inspection::write_detections_jsonl(out, walk.detections);
  }
  {
    auto index = open_out(a.out_dir / "depth_index.csv");
    index << "t,file\n" << std::setprecision(17);
    for (std::size_t i = 0; i < walk.depth_frames.size(); ++i) {
      const auto& [t, img] = walk.depth_frames[i];
      std::ostringstream name;
      name << "depth/" << std::setw(4) << std::setfill('0') << i << ".png";
      inspection::write_depth_png(a.out_dir / name.str(), img);
      index << t << ',' << name.str() << '\n';
    }
  }
  open_out(a.out_dir / "intrinsics.json") << inspection::to_json(a.walk.intrinsics).dump(2) << '\n';
  open_out(a.out_dir / "alignment.json") << matrix_json(walk.world_T_tracker).dump(2) << '\n';
  nlohmann::json truth = nlohmann::json::array();
  for (std::size_t i = 0; i < rusts.size(); ++i) {
    const auto& c = walk.planted_centers[i];
    truth.push_back({{"patch", rusts[i].patch}, {"u", rusts[i].u}, {"v", rusts[i].v},
                     {"world", {c.x(), c.y(), c.z()}}});
  }
  open_out(a.out_dir / "truth.json") << nlohmann::json{{"rusts", truth}}.dump(2) << '\n';
  std::cout << "poses " << walk.poses.size() << ", frames " << walk.depth_frames.size()
            << ", detections " << walk.detections.size() << '\n';
  return 0;
}

struct ServeArgs {
  fs::path scenario;
  std::optional<fs::path> config;
  std::optional<std::string> address;
  std::optional<int> port;
  std::optional<double> telemetry_hz;
  std::optional<fs::path> replay_log;
  std::optional<double> duration;
};

int cmd_serve(const ServeArgs& a) {
  gateway::GatewayConfig cfg;
  if (a.config) cfg = gateway::load_gateway_config(*a.config);
  gateway::apply_env(cfg);
  if (a.address) cfg.address = *a.address;
  if (a.port) cfg.port = static_cast<std::uint16_t>(*a.port);
  if (a.telemetry_hz) cfg.telemetry_hz = *a.telemetry_hz;
  if (a.replay_log) cfg.replay_log = *a.replay_log;

  auto scenario = io::load_scenario(a.scenario);
  if (cfg.v_max) scenario.config.limits.v_max = *cfg.v_max;
  if (cfg.steer_rate) scenario.config.limits.steer_rate = *cfg.steer_rate;
  for (const auto& w : sim::validate_scenario(scenario)) {
    std::cerr << "warning: " << w.subject << ": " << w.message << '\n';
  }

  gateway::ServiceConfig service_cfg;
  service_cfg.telemetry_hz = cfg.telemetry_hz;
  service_cfg.replay_log = cfg.replay_log;
  service_cfg.scenario_path = a.scenario;
  gateway::TeleopService service(std::move(scenario), service_cfg);
  gateway::WebSocketServer server(service, cfg.address, cfg.port);
  server.start();
  std::cout << "listening on ws://" << cfg.address << ":" << server.port() << "/ (telemetry "
            << cfg.telemetry_hz << " Hz)" << std::endl;

  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  service.run(g_stop.get_token(), a.duration);
  server.stop();
  service.close();
  std::cout << "stopped after " << service.ticks() << " ticks, trajectory hash "
            << sim::hash_hex(service.trajectory_hash()) << '\n';
  if (!cfg.replay_log.empty()) std::cout << "session log: " << cfg.replay_log.string() << '\n';
  return 0;
}

int cmd_replay(const fs::path& log, const std::optional<fs::path>& scenario) {
  const auto r = gateway::replay(log, scenario);
  std::cout << "ticks " << r.ticks << ", steps " << r.steps << ", hash " << sim::hash_hex(r.hash);
  if (r.recorded_hash) {
    std::cout << ", recorded " << sim::hash_hex(*r.recorded_hash) << (r.matches() ? " MATCH" : " MISMATCH");
  }
  std::cout << '\n';
  return r.recorded_hash && !r.matches() ? 3 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Magnetic climbing robot toolkit"};
  app.require_subcommand(1);

  auto* size = app.add_subcommand("size", "Actuator and adhesion sizing report");
  fs::path params_path;
  std::optional<fs::path> size_structure;
  std::optional<fs::path> size_json;
  bool strict = false;
  size->add_option("params", params_path, "Params YAML")->required()->check(CLI::ExistingFile);
  size->add_option("--structure", size_structure, "Also report traversability of a structure")
      ->check(CLI::ExistingFile);
  size->add_option("--json", size_json, "Write the report as JSON");
  size->add_flag("--strict", strict, "Exit with 2 when any check fails");

  auto* simulate = app.add_subcommand("simulate", "Run a scripted scenario");
  fs::path scenario_path;
  fs::path sim_out{"."};
  simulate->add_option("scenario", scenario_path, "Scenario YAML")->required()->check(CLI::ExistingFile);
  simulate->add_option("-o,--out", sim_out, "Output directory");

  auto* inspect = app.add_subcommand("inspect", "Build a rust map from pose, detection and depth logs");
  InspectArgs ia;
  inspect->add_option("--poses", ia.poses, "Pose log (.csv or .jsonl)")->required()->check(CLI::ExistingFile);
  inspect->add_option("--detections", ia.detections, "Detection JSONL")->required()->check(CLI::ExistingFile);
  inspect->add_option("--depth-index", ia.depth_index, "depth_index.csv")->required()->check(CLI::ExistingFile);
  inspect->add_option("--intrinsics", ia.intrinsics, "Camera intrinsics JSON")->required()->check(CLI::ExistingFile);
  inspect->add_option("--alignment", ia.alignment, "World <- tracker 4x4 JSON (default: first pose)")
      ->check(CLI::ExistingFile);
  inspect->add_option("--structure", ia.structure, "Structure YAML for the PLY background")
      ->check(CLI::ExistingFile);
  inspect->add_option("--merge-radius", ia.pipeline.merge_radius, "Marker merge radius, m");
  inspect->add_option("--max-skew", ia.pipeline.max_skew, "Pose/detection time skew, s");
  inspect->add_option("-o,--out", ia.out_dir, "Output directory");

  auto* serve = app.add_subcommand("serve", "Teleoperation service over WebSocket");
  ServeArgs sa;
  serve->add_option("scenario", sa.scenario, "Scenario YAML")->required()->check(CLI::ExistingFile);
  serve->add_option("--config", sa.config, "TOML config")->check(CLI::ExistingFile);
  serve->add_option("--address", sa.address, "Listen address");
  serve->add_option("--port", sa.port, "Listen port (0 = ephemeral)")->check(CLI::Range(0, 65535));
  serve->add_option("--telemetry-hz", sa.telemetry_hz, "Telemetry rate");
  serve->add_option("--replay-log", sa.replay_log, "Session log path");
  serve->add_option("--duration", sa.duration, "Stop after this many wall-clock seconds");

  auto* replay = app.add_subcommand("replay", "Re-run a recorded session and check its hash");
  fs::path log_path;
  std::optional<fs::path> replay_scenario;
  replay->add_option("log", log_path, "Session log")->required()->check(CLI::ExistingFile);
  replay->add_option("--scenario", replay_scenario, "Scenario overriding the one in the log")
      ->check(CLI::ExistingFile);

  auto* synth = app.add_subcommand("synth", "Generate synthetic inspection logs from a walkthrough");
  SynthArgs ya;
  synth->add_option("scenario", ya.scenario, "Scenario YAML")->required()->check(CLI::ExistingFile);
  synth->add_option("--rusts", ya.rusts, "Planted rust JSON")->required()->check(CLI::ExistingFile);
  synth->add_option("--frame-period", ya.walk.frame_period, "Seconds between rendered frames");
  synth->add_option("--pose-noise", ya.walk.pose_noise_sigma, "Tracker position noise sigma, m");
  synth->add_option("--seed", ya.walk.seed, "Noise seed");
  synth->add_option("-o,--out", ya.out_dir, "Output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (size->parsed()) return cmd_size(params_path, size_structure, size_json, strict);
    if (simulate->parsed()) return cmd_simulate(scenario_path, sim_out);
    if (inspect->parsed()) return cmd_inspect(ia);
    if (serve->parsed()) return cmd_serve(sa);
    if (replay->parsed()) return cmd_replay(log_path, replay_scenario);
    if (synth->parsed()) return cmd_synth(ya);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
