#pragma once

// Teleoperation service: one simulation loop, many client sessions.
//
// Sessions talk to the loop only through receive() (validated commands go
// into a last-write-wins mailbox, control verbs into a queue) and through
// their sink (telemetry and event frames). Everything the loop applies is
// written to the replay log with the tick it was applied at, so replay()
// reproduces the run bit for bit.
//
// Replay log (JSONL):
//   {"type":"session","version":1,"scenario":"/abs/path.yaml","dt":0.01,"telemetry_hz":20}
//   {"type":"command","tick":12,"seq":4,"delta_front":0.1,"delta_back":0,"v_back":0.1,"v_front":0.1}
//   {"type":"control","tick":40,"verb":"pause"}
//   {"type":"end","tick":500,"steps":480,"hash":"00ab..."}

#include "magbike/protocol.hpp"
#include "magbike/simulator.hpp"

#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stop_token>
#include <string>
#include <vector>

namespace magbike::gateway {

/// The deterministic core shared by the live service and replay.
class SimLoop {
 public:
  explicit SimLoop(const sim::Scenario& scenario);

  void apply(const sim::Command& command) { command_ = command; }
  void control(ControlVerb verb);
  /// Steps once unless paused; returns the events of the step.
  std::vector<sim::SimEvent> tick();

  const sim::RobotState& state() const { return state_; }
  const sim::Simulator& simulator() const { return sim_; }
  bool paused() const { return paused_; }
  std::uint64_t ticks() const { return ticks_; }
  std::uint64_t steps() const { return steps_; }
  double dt() const { return dt_; }
  std::uint64_t hash() const { return hasher_.value(); }

 private:
  sim::Simulator sim_;
  sim::RobotState initial_;
  sim::RobotState state_;
  sim::Command command_;
  double dt_;
  bool paused_{false};
  std::uint64_t ticks_{0};
  std::uint64_t steps_{0};
  sim::TrajectoryHasher hasher_;
};

struct ServiceConfig {
  double telemetry_hz{20.0};
  /// Empty: no replay log.
  std::filesystem::path replay_log;
  /// Recorded in the log header so replay can find the scenario again.
  std::filesystem::path scenario_path;
};

using SessionId = std::uint64_t;
/// Called from the loop thread; must not block.
using Sink = std::function<void(const std::string& frame)>;

class TeleopService {
 public:
  TeleopService(sim::Scenario scenario, ServiceConfig config);
  ~TeleopService();
  TeleopService(const TeleopService&) = delete;
  TeleopService& operator=(const TeleopService&) = delete;

  SessionId attach(Sink sink);
  void detach(SessionId id);
  /// Handles one text frame; returns the reply frames for that session.
  std::vector<std::string> receive(SessionId id, std::string_view frame);

  /// One loop iteration: drains the mailbox, steps, fans out events and,
  /// when due, telemetry.
  void tick();
  /// Ticks in real time until stopped or `wall_seconds` elapse.
  void run(std::stop_token stop, std::optional<double> wall_seconds = std::nullopt);
  /// Writes the end record and closes the log. Idempotent.
  void close();

  std::shared_ptr<const TelemetryMessage> latest_telemetry() const;
  std::uint64_t trajectory_hash() const;
  std::uint64_t ticks() const;
  double dt() const { return dt_; }
  std::size_t ticks_per_telemetry() const { return telemetry_every_; }
  const sim::Scenario& scenario() const { return scenario_; }

 private:
  struct Session {
    Sink sink;
    bool greeted{false};
    Role role{Role::Observer};
    std::optional<std::int64_t> last_seq;
  };
  struct Pending {
    std::optional<CommandMessage> command;
    std::vector<ControlVerb> controls;
  };

  ErrorMessage validate(const CommandMessage& cmd) const;
  void broadcast(const std::string& frame);
  void log(const nlohmann::json& record);
  TelemetryMessage telemetry() const;

  sim::Scenario scenario_;
  ServiceConfig config_;
  double dt_;
  std::size_t telemetry_every_;

  mutable std::mutex loop_mutex_;
  SimLoop loop_;
  std::vector<EventMessage> recent_events_;
  std::optional<std::int64_t> applied_seq_;
  std::ofstream log_;
  bool closed_{false};

  mutable std::mutex sessions_mutex_;
  std::map<SessionId, Session> sessions_;
  SessionId next_id_{1};
  std::optional<SessionId> driver_;
  Pending pending_;

  mutable std::mutex telemetry_mutex_;
  std::shared_ptr<const TelemetryMessage> latest_;
};

sim::Command to_sim_command(const CommandMessage& cmd);

struct ReplayResult {
  std::uint64_t hash{0};
  std::optional<std::uint64_t> recorded_hash;
  std::uint64_t ticks{0};
  std::uint64_t steps{0};
  bool matches() const { return recorded_hash && *recorded_hash == hash; }
};

/// Re-runs a recorded session. `scenario` overrides the path in the header.
ReplayResult replay(const std::filesystem::path& log,
                    const std::optional<std::filesystem::path>& scenario = std::nullopt);
ReplayResult replay(std::istream& log, const sim::Scenario& scenario);

}  // namespace magbike::gateway
