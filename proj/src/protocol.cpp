#include "magbike/protocol.hpp"

namespace magbike::gateway {

using nlohmann::json;

std::string_view to_string(Role role) { return role == Role::Driver ? "driver" : "observer"; }

std::string_view to_string(ControlVerb verb) {
  switch (verb) {
    case ControlVerb::Pause: return "pause";
    case ControlVerb::Resume: return "resume";
    case ControlVerb::Reset: return "reset";
  }
  return "?";
}

namespace {

const json& field(const json& j, const char* name) {
  auto it = j.find(name);
  if (it == j.end()) throw ProtocolError("missing_field", name, std::string("missing '") + name + "'");
  return *it;
}

double number(const json& j, const char* name) {
  const auto& v = field(j, name);
  if (!v.is_number()) throw ProtocolError("bad_type", name, std::string("'") + name + "' must be a number");
  return v.get<double>();
}

std::int64_t integer(const json& j, const char* name) {
  const auto& v = field(j, name);
  if (!v.is_number_integer()) {
    throw ProtocolError("bad_type", name, std::string("'") + name + "' must be an integer");
  }
  return v.get<std::int64_t>();
}

std::string text(const json& j, const char* name) {
  const auto& v = field(j, name);
  if (!v.is_string()) throw ProtocolError("bad_type", name, std::string("'") + name + "' must be a string");
  return v.get<std::string>();
}

std::optional<std::int64_t> optional_seq(const json& j) {
  if (!j.contains("seq") || j["seq"].is_null()) return std::nullopt;
  return integer(j, "seq");
}

json event_json(const EventMessage& e) {
  return {{"type", "event"}, {"time", e.time}, {"kind", e.kind}, {"payload", e.payload}};
}

EventMessage event_from(const json& j) {
  EventMessage e;
  e.time = number(j, "time");
  e.kind = text(j, "kind");
  if (j.contains("payload")) e.payload = j["payload"];
  return e;
}

struct ToJson {
  json operator()(const Hello& m) const {
    json j{{"type", "hello"}, {"version", m.version}, {"role", to_string(m.role)}, {"client", m.client}};
    if (m.session) j["session"] = *m.session;
    if (m.telemetry_hz) j["telemetry_hz"] = *m.telemetry_hz;
    return j;
  }
  json operator()(const CommandMessage& m) const {
    return {{"type", "command"},          {"seq", m.seq},
            {"mode", m.mode},             {"delta_front_deg", m.delta_front_deg},
            {"delta_back_deg", m.delta_back_deg}, {"v_back", m.v_back},
            {"v_front", m.v_front}};
  }
  json operator()(const ControlMessage& m) const {
    return {{"type", "control"}, {"verb", to_string(m.verb)}};
  }
  json operator()(const TelemetryMessage& m) const {
    json events = json::array();
    for (const auto& e : m.events) events.push_back(event_json(e));
    return {{"type", "telemetry"},
            {"time", m.time},
            {"step", m.step},
            {"paused", m.paused},
            {"pose",
             {{"patch", m.patch},
              {"u", m.u},
              {"v", m.v},
              {"heading", m.heading},
              {"roll", m.roll},
              {"world", m.world}}},
            {"steering", {{"front_deg", m.delta_front_deg}, {"back_deg", m.delta_back_deg}}},
            {"margin", m.margin},
            {"torque", {{"moving", m.moving_torque_fraction}, {"steering", m.steering_torque_fraction}}},
            {"events", events},
            {"marker_count", m.marker_count}};
  }
  json operator()(const EventMessage& m) const { return event_json(m); }
  json operator()(const AckMessage& m) const {
    json j{{"type", "ack"}, {"of", m.of}};
    if (m.seq) j["seq"] = *m.seq;
    return j;
  }
  json operator()(const ErrorMessage& m) const {
    json j{{"type", "error"},
           {"severity", m.severity},
           {"code", m.code},
           {"field", m.field},
           {"message", m.message}};
    if (m.seq) j["seq"] = *m.seq;
    return j;
  }
};

}  // namespace

json to_json(const Message& message) { return std::visit(ToJson{}, message); }

Message from_json(const json& j) {
  if (!j.is_object()) throw ProtocolError("malformed", "", "frame must be a JSON object");
  const std::string type = text(j, "type");
  if (type == "hello") {
    Hello m;
    m.version = static_cast<int>(integer(j, "version"));
    if (m.version != kProtocolVersion) {
      throw ProtocolError("unsupported_version", "version",
                          "protocol version " + std::to_string(m.version) + " not supported");
    }
    const std::string role = text(j, "role");
    if (role == "driver") m.role = Role::Driver;
    else if (role == "observer") m.role = Role::Observer;
    else throw ProtocolError("bad_value", "role", "role must be 'driver' or 'observer'");
    if (j.contains("client")) m.client = text(j, "client");
    if (j.contains("session")) m.session = field(j, "session").get<std::uint64_t>();
    if (j.contains("telemetry_hz")) m.telemetry_hz = number(j, "telemetry_hz");
    return m;
  }
  if (type == "command") {
    CommandMessage m;
    m.seq = integer(j, "seq");
    m.mode = static_cast<int>(integer(j, "mode"));
    m.delta_front_deg = number(j, "delta_front_deg");
    m.delta_back_deg = number(j, "delta_back_deg");
    m.v_back = number(j, "v_back");
    m.v_front = number(j, "v_front");
    return m;
  }
  if (type == "control") {
    const std::string verb = text(j, "verb");
    if (verb == "pause") return ControlMessage{ControlVerb::Pause};
    if (verb == "resume") return ControlMessage{ControlVerb::Resume};
    if (verb == "reset") return ControlMessage{ControlVerb::Reset};
    throw ProtocolError("bad_value", "verb", "verb must be pause, resume or reset");
  }
  if (type == "telemetry") {
    TelemetryMessage m;
    m.time = number(j, "time");
    m.step = field(j, "step").get<std::uint64_t>();
    m.paused = field(j, "paused").get<bool>();
    const auto& pose = field(j, "pose");
    m.patch = text(pose, "patch");
    m.u = number(pose, "u");
    m.v = number(pose, "v");
    m.heading = number(pose, "heading");
    m.roll = number(pose, "roll");
    m.world = field(pose, "world").get<std::array<double, 3>>();
    const auto& steer = field(j, "steering");
    m.delta_front_deg = number(steer, "front_deg");
    m.delta_back_deg = number(steer, "back_deg");
    m.margin = number(j, "margin");
    const auto& torque = field(j, "torque");
    m.moving_torque_fraction = number(torque, "moving");
    m.steering_torque_fraction = number(torque, "steering");
    for (const auto& e : field(j, "events")) m.events.push_back(event_from(e));
    m.marker_count = field(j, "marker_count").get<std::size_t>();
    return m;
  }
  if (type == "event") return event_from(j);
  if (type == "ack") {
    AckMessage m;
    m.of = text(j, "of");
    m.seq = optional_seq(j);
    return m;
  }
  if (type == "error") {
    ErrorMessage m;
    m.severity = text(j, "severity");
    m.code = text(j, "code");
    m.field = j.value("field", "");
    m.message = j.value("message", "");
    m.seq = optional_seq(j);
    return m;
  }
  throw ProtocolError("unknown_type", "type", "unknown message type '" + type + "'");
}

std::string encode(const Message& message) { return to_json(message).dump(); }

Message decode(std::string_view frame) {
  json j;
  try {
    j = json::parse(frame);
  } catch (const json::parse_error& e) {
    throw ProtocolError("malformed", "", std::string("not valid JSON: ") + e.what());
  }
  try {
    return from_json(j);
  } catch (const json::exception& e) {
    throw ProtocolError("bad_type", "", e.what());
  }
}

}  // namespace magbike::gateway
