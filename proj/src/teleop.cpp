#include "magbike/teleop.hpp"

#include "magbike/scenario_io.hpp"

#include <chrono>
#include <cmath>
#include <numbers>
#include <sstream>
#include <thread>

namespace magbike::gateway {

using nlohmann::json;

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;
constexpr std::size_t kRecentEvents = 32;

std::string hex(std::uint64_t h) { return sim::hash_hex(h); }

std::uint64_t parse_hex(const std::string& s) { return std::stoull(s, nullptr, 16); }

ControlVerb verb_from(const std::string& s) {
  if (s == "pause") return ControlVerb::Pause;
  if (s == "resume") return ControlVerb::Resume;
  if (s == "reset") return ControlVerb::Reset;
  throw std::runtime_error("unknown control verb '" + s + "' in replay log");
}

EventMessage to_message(const sim::SimEvent& e) {
  return {e.time, std::string(sim::to_string(e.kind)), e.payload};
}

}  // namespace

sim::Command to_sim_command(const CommandMessage& cmd) {
  sim::Command c;
  c.steering.delta_front = cmd.delta_front_deg * kDeg;
  c.steering.delta_back = cmd.delta_back_deg * kDeg;
  c.wheels.v_back = cmd.v_back;
  c.wheels.v_front = cmd.v_front;
  return c;
}

SimLoop::SimLoop(const sim::Scenario& scenario)
    : sim_(scenario.structure, scenario.params, scenario.config),
      initial_(sim_.initial_state(scenario.initial_pose, scenario.initial_steering)),
      state_(initial_),
      dt_(scenario.dt) {
  hasher_.add(state_);
}

void SimLoop::control(ControlVerb verb) {
  switch (verb) {
    case ControlVerb::Pause: paused_ = true; break;
    case ControlVerb::Resume: paused_ = false; break;
    case ControlVerb::Reset:
      state_ = initial_;
      command_ = {};
      steps_ = 0;
      hasher_.add(state_);
      break;
  }
}

std::vector<sim::SimEvent> SimLoop::tick() {
  ++ticks_;
  if (paused_) return {};
  auto result = sim_.step(state_, command_, dt_);
  ++steps_;
  result.state.time = static_cast<double>(steps_) * dt_;
  for (auto& e : result.events) e.time = result.state.time;
  state_ = std::move(result.state);
  hasher_.add(state_);
  return std::move(result.events);
}

TeleopService::TeleopService(sim::Scenario scenario, ServiceConfig config)
    : scenario_(std::move(scenario)),
      config_(std::move(config)),
      dt_(scenario_.dt),
      telemetry_every_(1),
      loop_(scenario_) {
  if (!(config_.telemetry_hz > 0.0)) throw std::invalid_argument("telemetry rate must be > 0");
  telemetry_every_ = static_cast<std::size_t>(
      std::max(1L, std::lround(1.0 / (config_.telemetry_hz * dt_))));
  if (!config_.replay_log.empty()) {
    log_.open(config_.replay_log);
    if (!log_) throw std::runtime_error("cannot open replay log " + config_.replay_log.string());
    std::string scenario_path;
    if (!config_.scenario_path.empty()) {
      scenario_path = std::filesystem::absolute(config_.scenario_path).lexically_normal().string();
    }
    log({{"type", "session"},
         {"version", kProtocolVersion},
         {"scenario", scenario_path},
         {"name", scenario_.name},
         {"dt", dt_},
         {"telemetry_hz", config_.telemetry_hz}});
  }
  latest_ = std::make_shared<const TelemetryMessage>(telemetry());
}

TeleopService::~TeleopService() { close(); }

void TeleopService::close() {
  std::lock_guard lock(loop_mutex_);
  if (closed_) return;
  closed_ = true;
  if (log_.is_open()) {
    log({{"type", "end"},
         {"tick", loop_.ticks()},
         {"steps", loop_.steps()},
         {"hash", hex(loop_.hash())}});
    log_.close();
  }
}

void TeleopService::log(const json& record) {
  if (log_.is_open()) log_ << record.dump() << '\n';
}

SessionId TeleopService::attach(Sink sink) {
  std::lock_guard lock(sessions_mutex_);
  const SessionId id = next_id_++;
  sessions_[id] = Session{std::move(sink), false, Role::Observer, std::nullopt};
  return id;
}

void TeleopService::detach(SessionId id) {
  std::lock_guard lock(sessions_mutex_);
  sessions_.erase(id);
  if (driver_ == id) {
    driver_.reset();
    // Losing the driver stops the robot.
    CommandMessage stop;
    stop.seq = -1;
    pending_.command = stop;
  }
}

ErrorMessage TeleopService::validate(const CommandMessage& cmd) const {
  ErrorMessage err;
  err.seq = cmd.seq;
  err.code = "out_of_range";
  const double v_max = scenario_.config.limits.v_max;
  auto bad = [&err](const char* field, const std::string& message) {
    err.field = field;
    err.message = message;
    return err;
  };
  if (cmd.mode != 1 && cmd.mode != 2) return bad("mode", "mode must be 1 or 2");
  if (!(std::abs(cmd.delta_front_deg) <= 90.0)) {
    return bad("delta_front_deg", "delta_front_deg must lie in [-90, 90]");
  }
  if (!(std::abs(cmd.delta_back_deg) <= 90.0)) {
    return bad("delta_back_deg", "delta_back_deg must lie in [-90, 90]");
  }
  if (!(std::abs(cmd.v_back) <= v_max)) {
    return bad("v_back", "v_back must lie in [-" + std::to_string(v_max) + ", " +
                             std::to_string(v_max) + "] m/s");
  }
  if (!(std::abs(cmd.v_front) <= v_max)) {
    return bad("v_front", "v_front must lie in [-" + std::to_string(v_max) + ", " +
                              std::to_string(v_max) + "] m/s");
  }
  if (cmd.mode == 1 && cmd.delta_front_deg != 0.0 && cmd.delta_back_deg != 0.0) {
    err.code = "mode_violation";
    return bad("delta_back_deg", "mode 1 steers one wheel only; the other angle must be 0");
  }
  err.code.clear();
  return err;
}

std::vector<std::string> TeleopService::receive(SessionId id, std::string_view frame) {
  Message msg;
  try {
    msg = decode(frame);
  } catch (const ProtocolError& e) {
    return {encode(ErrorMessage{"error", e.code(), e.field(), e.what(), std::nullopt})};
  }
  std::lock_guard lock(sessions_mutex_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) return {};
  Session& session = it->second;

  if (const auto* hello = std::get_if<Hello>(&msg)) {
    if (hello->role == Role::Driver && driver_ && *driver_ != id) {
      session.greeted = true;
      return {encode(ErrorMessage{"error", "driver_taken", "role",
                                  "another session is driving; joined as observer", std::nullopt})};
    }
    if (hello->role == Role::Driver) driver_ = id;
    else if (driver_ == id) driver_.reset();
    session.greeted = true;
    session.role = hello->role;
    Hello reply;
    reply.role = hello->role;
    reply.client = hello->client;
    reply.session = id;
    reply.telemetry_hz = config_.telemetry_hz;
    return {encode(reply)};
  }
  if (!session.greeted) {
    return {encode(ErrorMessage{"error", "hello_required", "type", "send hello first", std::nullopt})};
  }
  if (const auto* cmd = std::get_if<CommandMessage>(&msg)) {
    if (session.role != Role::Driver) {
      return {encode(ErrorMessage{"error", "not_driver", "role",
                                  "only the driver session may command", cmd->seq})};
    }
    if (session.last_seq && cmd->seq <= *session.last_seq) {
      return {encode(ErrorMessage{"warning", "stale_seq", "seq",
                                  "seq " + std::to_string(cmd->seq) + " is not after " +
                                      std::to_string(*session.last_seq) + "; ignored",
                                  cmd->seq})};
    }
    if (auto err = validate(*cmd); !err.code.empty()) return {encode(err)};
    session.last_seq = cmd->seq;
    pending_.command = *cmd;
    return {encode(AckMessage{"command", cmd->seq})};
  }
  if (const auto* ctl = std::get_if<ControlMessage>(&msg)) {
    if (session.role != Role::Driver) {
      return {encode(ErrorMessage{"error", "not_driver", "role",
                                  "only the driver session may pause, resume or reset",
                                  std::nullopt})};
    }
    pending_.controls.push_back(ctl->verb);
    return {encode(AckMessage{"control", std::nullopt})};
  }
  return {encode(ErrorMessage{"error", "unexpected_type", "type",
                              "clients may send hello, command and control only", std::nullopt})};
}

TelemetryMessage TeleopService::telemetry() const {
  const auto& s = loop_.state();
  TelemetryMessage m;
  m.time = s.time;
  m.step = loop_.steps();
  m.paused = loop_.paused();
  m.patch = s.pose.patch;
  m.u = s.pose.u;
  m.v = s.pose.v;
  m.heading = s.pose.heading;
  m.roll = s.free_joint.roll;
  m.world = {s.position.x(), s.position.y(), s.position.z()};
  m.delta_front_deg = s.steering.delta_front / kDeg;
  m.delta_back_deg = s.steering.delta_back / kDeg;
  m.margin = s.margin;
  m.moving_torque_fraction = s.moving_torque_fraction;
  m.steering_torque_fraction = s.steering_torque_fraction;
  m.events = recent_events_;
  return m;
}

void TeleopService::broadcast(const std::string& frame) {
  std::lock_guard lock(sessions_mutex_);
  for (auto& [id, session] : sessions_) {
    if (session.sink) session.sink(frame);
  }
}

void TeleopService::tick() {
  std::unique_lock lock(loop_mutex_);
  if (closed_) return;
  Pending pending;
  {
    std::lock_guard sessions_lock(sessions_mutex_);
    std::swap(pending, pending_);
  }
  const std::uint64_t tick_index = loop_.ticks();
  for (ControlVerb verb : pending.controls) {
    loop_.control(verb);
    if (verb == ControlVerb::Reset) applied_seq_.reset();
    log({{"type", "control"}, {"tick", tick_index}, {"verb", to_string(verb)}});
  }
  if (pending.command) {
    const auto c = to_sim_command(*pending.command);
    loop_.apply(c);
    applied_seq_ = pending.command->seq;
    log({{"type", "command"},
         {"tick", tick_index},
         {"seq", pending.command->seq},
         {"delta_front", c.steering.delta_front},
         {"delta_back", c.steering.delta_back},
         {"v_back", c.wheels.v_back},
         {"v_front", c.wheels.v_front}});
  }

  const auto events = loop_.tick();
  std::vector<std::string> frames;
  for (const auto& e : events) {
    auto m = to_message(e);
    frames.push_back(encode(m));
    recent_events_.push_back(std::move(m));
    if (recent_events_.size() > kRecentEvents) recent_events_.erase(recent_events_.begin());
  }
  if (loop_.ticks() % telemetry_every_ == 0) {
    auto t = std::make_shared<const TelemetryMessage>(telemetry());
    recent_events_.clear();
    frames.push_back(encode(*t));
    std::lock_guard tl(telemetry_mutex_);
    latest_ = std::move(t);
  }
  lock.unlock();
  for (const auto& f : frames) broadcast(f);
}

void TeleopService::run(std::stop_token stop, std::optional<double> wall_seconds) {
  using clock = std::chrono::steady_clock;
  const auto period = std::chrono::duration_cast<clock::duration>(std::chrono::duration<double>(dt_));
  const auto start = clock::now();
  auto next = start;
  while (!stop.stop_requested()) {
    if (wall_seconds && clock::now() - start >= std::chrono::duration<double>(*wall_seconds)) break;
    tick();
    next += period;
    std::this_thread::sleep_until(next);
  }
}

std::shared_ptr<const TelemetryMessage> TeleopService::latest_telemetry() const {
  std::lock_guard lock(telemetry_mutex_);
  return latest_;
}

std::uint64_t TeleopService::trajectory_hash() const {
  std::lock_guard lock(loop_mutex_);
  return loop_.hash();
}

std::uint64_t TeleopService::ticks() const {
  std::lock_guard lock(loop_mutex_);
  return loop_.ticks();
}

ReplayResult replay(std::istream& in, const sim::Scenario& scenario) {
  SimLoop loop(scenario);
  ReplayResult result;
  std::optional<std::uint64_t> end_tick;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::parse_error& e) {
      throw std::runtime_error("replay log line " + std::to_string(lineno) + ": " + e.what());
    }
    const std::string type = rec.value("type", "");
    if (type == "session") continue;
    if (type == "end") {
      end_tick = rec.at("tick").get<std::uint64_t>();
      result.recorded_hash = parse_hex(rec.at("hash").get<std::string>());
      break;
    }
    const auto tick = rec.at("tick").get<std::uint64_t>();
    if (tick < loop.ticks()) {
      throw std::runtime_error("replay log line " + std::to_string(lineno) + ": ticks go backwards");
    }
    while (loop.ticks() < tick) loop.tick();
    if (type == "control") {
      loop.control(verb_from(rec.at("verb").get<std::string>()));
    } else if (type == "command") {
      sim::Command c;
      c.steering.delta_front = rec.at("delta_front").get<double>();
      c.steering.delta_back = rec.at("delta_back").get<double>();
      c.wheels.v_back = rec.at("v_back").get<double>();
      c.wheels.v_front = rec.at("v_front").get<double>();
      loop.apply(c);
    } else {
      throw std::runtime_error("replay log line " + std::to_string(lineno) + ": unknown record '" +
                               type + "'");
    }
  }
  if (end_tick) {
    while (loop.ticks() < *end_tick) loop.tick();
  }
  result.hash = loop.hash();
  result.ticks = loop.ticks();
  result.steps = loop.steps();
  return result;
}

ReplayResult replay(const std::filesystem::path& log,
                    const std::optional<std::filesystem::path>& scenario) {
  std::ifstream in(log);
  if (!in) throw std::runtime_error("cannot open replay log " + log.string());
  std::string header;
  std::getline(in, header);
  const auto head = json::parse(header);
  if (head.value("type", "") != "session") throw std::runtime_error("replay log has no session header");
  std::filesystem::path path = scenario ? *scenario : std::filesystem::path(head.value("scenario", ""));
  if (path.empty()) throw std::runtime_error("replay log does not name a scenario; pass one explicitly");
  const auto sc = io::load_scenario(path);
  return replay(in, sc);
}

}  // namespace magbike::gateway
