// Acceptance run: one PASS/FAIL line per primary criterion.

#include "magbike/inspection.hpp"
#include "magbike/kinematics.hpp"
#include "magbike/scenario_io.hpp"
#include "magbike/simulator.hpp"
#include "magbike/statics.hpp"
#include "magbike/synthetic.hpp"
#include "magbike/teleop.hpp"

#include "support.hpp"

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <sstream>

using namespace magbike;
using magbike::test::Gen;
using magbike::test::StaticsOracle;
using magbike::test::rel_err;
using geometry::Vec2;
using geometry::Vec3;

namespace {

constexpr double kPi = std::numbers::pi;

struct Outcome {
  bool pass{false};
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

sim::Scenario scenario(const std::string& name) {
  return io::load_scenario(test::data_dir() / "scenarios" / (name + ".yaml"));
}

Outcome statics_formulas() {
  const auto start = Clock::now();
  Gen gen(1001);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const double P = gen.uniform(1, 50), h = gen.uniform(0.01, 0.2), lever = gen.uniform(0.02, 0.5);
    const double r = gen.uniform(0.01, 0.1), k = gen.uniform(0.1, 1.5);
    const double f21 = gen.uniform(0, 100), f22 = gen.uniform(0, 100), f12 = gen.uniform(0, 20);
    const double f2 = gen.uniform(0, 100);
    worst = std::max({worst,
                      rel_err(statics::required_adhesion(P, h, lever, 5.0),
                              StaticsOracle::adhesion(P, h, lever, 5.0)),
                      rel_err(statics::required_moving_torque(r, {"c", f21, f22, P}, k, 2.0),
                              StaticsOracle::moving(r, f21, f22, P, k, 2.0)),
                      rel_err(statics::required_steering_torque(r, f12, f2, P, k, 2.0),
                              StaticsOracle::steering(r, f12, f2, P, k, 2.0))});
  }
  const statics::RobotParams p;
  const bool factors = p.sf_adhesion == 5.0 && p.sf_torque == 2.0;
  const double elapsed = seconds_since(start);
  std::ostringstream d;
  d << "max rel err " << worst << ", sf " << p.sf_adhesion << "/" << p.sf_torque << ", " << elapsed << " s";
  return {worst <= 1e-12 && factors && elapsed < 1.0, d.str()};
}

Outcome default_feasibility() {
  const statics::RobotParams p;
  const auto report = statics::actuator_feasibility(p, {});
  const std::string text = statics::format_report(report);
  bool all_printed = !report.requirements.empty();
  for (const auto& r : report.requirements) {
    all_printed = all_printed && text.find(r.name) != std::string::npos;
  }
  std::cout << text;
  std::ostringstream d;
  d << report.requirements.size() << " checks, nominal " << (report.pass ? "passes" : "fails");
  return {report.pass && all_printed, d.str()};
}

Outcome icr_and_rolling() {
  constexpr double L = 0.11;
  const Vec2 back(-L / 2, 0), front(L / 2, 0);
  auto cross2 = [](const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); };
  Gen gen(1003);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const kinematics::SteeringState s{gen.uniform(-kPi / 2 + 1e-3, kPi / 2 - 1e-3),
                                      gen.uniform(-kPi / 2, kPi / 2)};
    const auto t = kinematics::body_twist(s, gen.uniform(-0.2, 0.2), L);
    const Vec2 rb(std::cos(s.delta_back), std::sin(s.delta_back));
    const Vec2 rf(std::cos(s.delta_front), std::sin(s.delta_front));
    worst = std::max({worst, std::abs(cross2(kinematics::point_velocity(t.twist, back), rb)),
                      std::abs(cross2(kinematics::point_velocity(t.twist, front), rf))});
  }

  const auto pivot = kinematics::icr({kPi / 2, 0.0}, L);
  const bool pivot_ok = pivot.kind == kinematics::IcrKind::Point && pivot.point.norm() < 1e-12;

  auto flat = test::flat_scenario();
  const sim::Simulator simulator(flat.structure, flat.params, flat.config);
  const kinematics::SteeringState parallel{kPi / 6, kPi / 6};
  auto state = simulator.initial_state(flat.initial_pose, parallel);
  const double heading0 = state.pose.heading;
  const sim::Command cmd{parallel, {0.1, 0.1}};
  for (int i = 0; i < 1000; ++i) state = simulator.step(state, cmd, 0.01).state;
  const double rotation = std::abs(geometry::wrap_angle(state.pose.heading - heading0));

  std::ostringstream d;
  d << "max residual " << worst << ", pivot at back contact " << (pivot_ok ? "yes" : "no")
    << ", parallel rotation over 10 s " << rotation;
  return {worst < 1e-9 && pivot_ok && rotation < 1e-9, d.str()};
}

Outcome rotation_on_spot() {
  constexpr double L = 0.11;
  auto flat = test::flat_scenario();
  const sim::Simulator simulator(flat.structure, flat.params, flat.config);
  const kinematics::SteeringState across{kPi / 2, kPi / 2};
  auto state = simulator.initial_state(flat.initial_pose, across);
  const Vec3 start = state.position;
  const double T = 2 * kPi / (2 * 0.1 / L);
  const int n = static_cast<int>(std::ceil(T / 0.01));
  const sim::Command cmd{across, {-0.1, 0.1}};
  for (int i = 0; i < n; ++i) state = simulator.step(state, cmd, T / n).state;
  const double drift = (state.position - start).norm();
  std::ostringstream d;
  d << "centre drift after one turn " << drift << " m (limit " << 1e-6 * L << ")";
  return {drift < 1e-6 * L, d.str()};
}

Outcome spiral_pitch() {
  const auto r = sim::run_scenario(scenario("spiral"));
  double turns = 0.0;
  for (std::size_t i = 1; i < r.trajectory.size(); ++i) {
    turns += geometry::wrap_angle(r.trajectory[i].pose.v - r.trajectory[i - 1].pose.v) / (2 * kPi);
  }
  const double du = r.trajectory.back().pose.u - r.trajectory.front().pose.u;
  const double pitch = std::abs(du / turns);
  const double expected = kinematics::spiral_pitch(0.0755, kPi / 6);
  const double err = rel_err(pitch, expected);
  std::ostringstream d;
  d << "pitch " << pitch << " m vs " << expected << " m, rel err " << err;
  return {err < 1e-6, d.str()};
}

Outcome corners() {
  bool ok = true;
  std::ostringstream d;
  for (const char* name : {"corner_internal", "corner_external"}) {
    auto s = scenario(name);
    auto start = Clock::now();
    const auto nominal = sim::run_scenario(s);
    const double t_nominal = seconds_since(start);
    auto weak = s;
    weak.params.magnet_force = s.params.weight() * s.params.com_height / s.params.wheelbase;
    start = Clock::now();
    const auto marginal = sim::run_scenario(weak);
    const double t_weak = seconds_since(start);
    const bool this_ok = nominal.summary.fall_risk_events == 0 && nominal.summary.joints_crossed == 1 &&
                         marginal.summary.fall_risk_events >= 1 && t_nominal < 5.0 && t_weak < 5.0;
    ok = ok && this_ok;
    d << name << ": fall_risk " << nominal.summary.fall_risk_events << " nominal, "
      << marginal.summary.fall_risk_events << " at P*h/L, " << t_nominal << " s; ";
  }
  return {ok, d.str()};
}

inspection::CameraIntrinsics test_camera() {
  inspection::CameraIntrinsics K;
  K.fx = 610.0;
  K.fy = 615.0;
  K.cx = 319.5;
  K.cy = 239.5;
  K.width = 640;
  K.height = 480;
  return K;
}

Outcome deprojection() {
  const auto K = test_camera();
  double px_err = 0.0;
  for (int i = 0; i < 100; ++i) {
    for (int j = 0; j < 100; ++j) {
      const Vec2 px(i * (K.width - 1) / 99.0, j * (K.height - 1) / 99.0);
      for (int k = 0; k < 10; ++k) {
        const double z = 0.1 + k * 9.9 / 9.0;
        px_err = std::max(px_err, (inspection::project(inspection::deproject(px, z, K), K) - px).norm());
      }
    }
  }
  Gen gen(1007);
  inspection::DepthImage depth(K.width, K.height);
  for (int y = 0; y < K.height; ++y) {
    for (int x = 0; x < K.width; ++x) depth.at(x, y) = 1.5f;
  }
  double chain_err = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const auto T = gen.rigid(3.0);
    const auto A = gen.rigid(3.0);
    const auto pose = inspection::PoseSample::from_transform(0.0, T);
    inspection::DetectionRecord det;
    det.u_min = gen.uniform(10, 600);
    det.v_min = gen.uniform(10, 440);
    det.u_max = det.u_min + 20;
    det.v_max = det.v_min + 20;
    const auto w = inspection::detection_to_world(det, depth, pose, A, K);
    if (!w) return {false, "valid depth was rejected"};
    const Vec2 c = det.center();
    const Eigen::Vector4d cam((c.x() - K.cx) * 1.5 / K.fx, (c.y() - K.cy) * 1.5 / K.fy, 1.5, 1.0);
    const Eigen::Vector4d oracle = A.matrix() * (T.matrix() * cam);
    chain_err = std::max(chain_err, (*w - oracle.head<3>()).norm());
  }
  std::ostringstream d;
  d << "round trip " << px_err << " px, chain " << chain_err << " m";
  return {px_err < 1e-9 && chain_err < 1e-9, d.str()};
}

std::vector<inspection::synthetic::PlantedRust> planted() {
  std::ifstream in(test::data_dir() / "inspection/planted.json");
  const auto doc = nlohmann::json::parse(in);
  std::vector<inspection::synthetic::PlantedRust> out;
  for (const auto& r : doc.at("rusts")) {
    out.push_back({r.at("patch").get<std::string>(), r.at("u").get<double>(), r.at("v").get<double>()});
  }
  return out;
}

struct MapScore {
  double recall{0.0};
  bool partition_ok{false};
  std::size_t markers{0};
};

MapScore score_walkthrough(const std::vector<inspection::synthetic::PlantedRust>& rusts, double sigma,
                           double tolerance) {
  namespace syn = inspection::synthetic;
  syn::WalkthroughConfig cfg;
  cfg.pose_noise_sigma = sigma;
  cfg.seed = 11;
  const auto walk = syn::make_walkthrough(scenario("inspection_walk"), rusts, cfg);
  const auto depth = syn::depth_source(walk);
  const inspection::PipelineConfig pc;
  const auto map = inspection::build_map(walk.poses, walk.detections, depth, cfg.intrinsics,
                                         walk.world_T_tracker, pc);
  MapScore score;
  score.markers = map.markers.size();
  std::size_t found = 0;
  for (const auto& c : walk.planted_centers) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& m : map.markers) best = std::min(best, (m.center - c).norm());
    if (best <= tolerance) ++found;
  }
  score.recall = walk.planted_centers.empty() ? 0.0 : double(found) / walk.planted_centers.size();

  // Recompute the per-detection world points and compare the marker
  // partition against the union-find oracle.
  std::vector<inspection::WorldPoint> points;
  std::vector<Vec3> raw;
  for (const auto& det : walk.detections) {
    const auto idx = inspection::nearest_pose(walk.poses, det.t, pc.max_skew);
    const auto frame = depth.frame(det.t, pc.max_skew);
    if (!idx || !frame) continue;
    const auto w = inspection::detection_to_world(det, *frame, walk.poses[*idx], walk.world_T_tracker,
                                                  cfg.intrinsics, pc);
    if (!w) continue;
    points.push_back({*w, det.confidence});
    raw.push_back(*w);
  }
  score.partition_ok = test::canonical(inspection::cluster(points, pc.merge_radius)) ==
                           test::union_find_partition(raw, pc.merge_radius) &&
                       inspection::cluster(points, pc.merge_radius).size() == map.markers.size();
  return score;
}

Outcome end_to_end() {
  const auto start = Clock::now();
  const auto rusts = planted();
  const auto exact = score_walkthrough(rusts, 0.0, 0.02);
  const auto noisy = score_walkthrough(rusts, 0.01, 0.05);
  const double elapsed = seconds_since(start);
  std::ostringstream d;
  d << "recall " << exact.recall * 100 << "% at 0.02 m exact, " << noisy.recall * 100
    << "% at 0.05 m with sigma 0.01, partition " << (exact.partition_ok && noisy.partition_ok ? "ok" : "differs")
    << ", " << elapsed << " s";
  return {exact.recall >= 0.95 && noisy.recall >= 0.95 && exact.partition_ok && noisy.partition_ok &&
              elapsed < 30.0,
          d.str()};
}

Outcome replay_determinism() {
  const auto dir = std::filesystem::temp_directory_path() / "magbike_acceptance_replay";
  std::filesystem::create_directories(dir);
  const auto log = dir / "session.jsonl";
  const auto sc = scenario("corner_internal");
  std::uint64_t live = 0;
  {
    gateway::ServiceConfig cfg;
    cfg.replay_log = log;
    gateway::TeleopService svc(sc, cfg);
    const auto id = svc.attach({});
    svc.receive(id, R"({"type":"hello","version":1,"role":"driver"})");
    Gen gen(1009);
    std::int64_t seq = 0;
    for (int i = 0; i < 600; ++i) {
      if (gen.uniform(0, 1) < 0.05) {
        const gateway::CommandMessage cmd{++seq, 1, gen.uniform(-30, 30), 0.0, gen.uniform(0, 0.15),
                                          gen.uniform(0, 0.15)};
        svc.receive(id, gateway::encode(cmd));
      }
      if (i == 200) svc.receive(id, R"({"type":"control","verb":"pause"})");
      if (i == 230) svc.receive(id, R"({"type":"control","verb":"resume"})");
      svc.tick();
    }
    live = svc.trajectory_hash();
  }
  std::ifstream first(log), second(log);
  const auto a = gateway::replay(first, sc);
  const auto b = gateway::replay(second, sc);
  std::filesystem::remove_all(dir);
  std::ostringstream d;
  d << "live " << sim::hash_hex(live) << ", replay " << sim::hash_hex(a.hash) << ", recorded "
    << (a.recorded_hash ? sim::hash_hex(*a.recorded_hash) : std::string("none"));
  return {a.matches() && a.hash == live && b.hash == a.hash, d.str()};
}

Outcome cli_subcommands() {
  const std::filesystem::path exe = MAGBIKE_CLI;
  const auto data = test::data_dir();
  const auto out = std::filesystem::temp_directory_path() / "magbike_acceptance_cli";
  std::filesystem::remove_all(out);
  std::filesystem::create_directories(out);
  auto q = [](const std::filesystem::path& p) { return "'" + p.string() + "'"; };
  const std::string quiet = " > " + q(out / "cli.log") + " 2>&1";
  const std::vector<std::pair<std::string, std::string>> commands{
      {"size", q(exe) + " size " + q(data / "params/default.yaml") + " --structure " +
                   q(data / "structures/corner_internal.yaml")},
      {"simulate", q(exe) + " simulate " + q(data / "scenarios/corner_internal.yaml") + " -o " + q(out / "sim")},
      {"inspect", q(exe) + " inspect --poses " + q(data / "inspection/poses.csv") + " --detections " +
                      q(data / "inspection/detections.jsonl") + " --depth-index " +
                      q(data / "inspection/depth_index.csv") + " --intrinsics " +
                      q(data / "inspection/intrinsics.json") + " --alignment " +
                      q(data / "inspection/alignment.json") + " -o " + q(out / "map")},
      {"serve", q(exe) + " serve " + q(data / "scenarios/corner_internal.yaml") + " --config " +
                    q(data / "config.toml") + " --port 0 --duration 0.5 --replay-log " + q(out / "session.jsonl")},
      {"replay", q(exe) + " replay " + q(out / "session.jsonl")},
      {"synth", q(exe) + " synth " + q(data / "scenarios/inspection_walk.yaml") + " --rusts " +
                    q(data / "inspection/planted.json") + " --frame-period 0.5 -o " + q(out / "synth")},
  };
  bool ok = true;
  std::ostringstream d;
  for (const auto& [name, cmd] : commands) {
    const int status = std::system((cmd + quiet).c_str());
    const int code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    ok = ok && code == 0;
    d << name << "=" << code << " ";
  }
  if (ok) std::filesystem::remove_all(out);
  return {ok, d.str()};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"statics formulas and safety factors", statics_formulas},
      {"default parameters feasibility report", default_feasibility},
      {"ICR and rolling constraint", icr_and_rolling},
      {"rotation on the spot", rotation_on_spot},
      {"spiral pitch on tube", spiral_pitch},
      {"internal and external corners", corners},
      {"deprojection and transform chain", deprojection},
      {"synthetic inspection end to end", end_to_end},
      {"teleoperation replay determinism", replay_determinism},
      {"CLI subcommands on shipped files", cli_subcommands},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::cout << (o.pass ? "PASS" : "FAIL") << " [" << i + 1 << "] " << criteria[i].first << ": " << o.detail
              << std::endl;
  }
  std::cout << criteria.size() - failed << "/" << criteria.size() << " criteria passed\n";
  return failed == 0 ? 0 : 1;
}
