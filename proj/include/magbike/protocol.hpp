#pragma once

// Teleoperation wire protocol: one JSON object per WebSocket text frame,
// discriminated by "type". Version 1.
//
//   hello      {"type":"hello","version":1,"role":"driver"|"observer","client":"..."}
//              server reply: same type with "session" and "telemetry_hz" filled in
//   command    {"type":"command","seq":3,"mode":1|2,"delta_front_deg":..,"delta_back_deg":..,
//               "v_back":..,"v_front":..}
//   control    {"type":"control","verb":"pause"|"resume"|"reset"}
//   telemetry  {"type":"telemetry","time":..,"step":..,"paused":false,"pose":{patch,u,v,heading,
//               roll,world:[x,y,z]},"steering":{front_deg,back_deg},"margin":..,
//               "torque":{"moving":..,"steering":..},"events":[...],"marker_count":0}
//   event      {"type":"event","time":..,"kind":"fall_risk",...,"payload":{...}}
//   ack        {"type":"ack","of":"command","seq":3}
//   error      {"type":"error","severity":"error"|"warning","code":"out_of_range",
//               "field":"delta_front_deg","message":"...","seq":3}

#include <nlohmann/json.hpp>

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace magbike::gateway {

inline constexpr int kProtocolVersion = 1;

enum class Role { Driver, Observer };
enum class ControlVerb { Pause, Resume, Reset };

std::string_view to_string(Role role);
std::string_view to_string(ControlVerb verb);

struct Hello {
  int version{kProtocolVersion};
  Role role{Role::Observer};
  std::string client;
  std::optional<std::uint64_t> session;
  std::optional<double> telemetry_hz;
  bool operator==(const Hello&) const = default;
};

struct CommandMessage {
  std::int64_t seq{0};
  int mode{1};
  double delta_front_deg{0.0};
  double delta_back_deg{0.0};
  double v_back{0.0};
  double v_front{0.0};
  bool operator==(const CommandMessage&) const = default;
};

struct ControlMessage {
  ControlVerb verb{ControlVerb::Pause};
  bool operator==(const ControlMessage&) const = default;
};

struct EventMessage {
  double time{0.0};
  std::string kind;
  nlohmann::json payload = nlohmann::json::object();
  bool operator==(const EventMessage&) const = default;
};

struct TelemetryMessage {
  double time{0.0};
  std::uint64_t step{0};
  bool paused{false};
  std::string patch;
  double u{0.0};
  double v{0.0};
  double heading{0.0};
  double roll{0.0};
  std::array<double, 3> world{0.0, 0.0, 0.0};
  double delta_front_deg{0.0};
  double delta_back_deg{0.0};
  double margin{0.0};
  double moving_torque_fraction{0.0};
  double steering_torque_fraction{0.0};
  std::vector<EventMessage> events;
  std::size_t marker_count{0};
  bool operator==(const TelemetryMessage&) const = default;
};

struct AckMessage {
  std::string of;
  std::optional<std::int64_t> seq;
  bool operator==(const AckMessage&) const = default;
};

struct ErrorMessage {
  std::string severity{"error"};
  std::string code;
  std::string field;
  std::string message;
  std::optional<std::int64_t> seq;
  bool operator==(const ErrorMessage&) const = default;
};

using Message = std::variant<Hello, CommandMessage, ControlMessage, TelemetryMessage,
                             EventMessage, AckMessage, ErrorMessage>;

/// Malformed frame; code/field say what was wrong.
class ProtocolError : public std::runtime_error {
 public:
  ProtocolError(std::string code, std::string field, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)), field_(std::move(field)) {}
  const std::string& code() const { return code_; }
  const std::string& field() const { return field_; }

 private:
  std::string code_;
  std::string field_;
};

std::string encode(const Message& message);
Message decode(std::string_view frame);

nlohmann::json to_json(const Message& message);
Message from_json(const nlohmann::json& j);

}  // namespace magbike::gateway
