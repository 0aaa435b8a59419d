#include "magbike/gateway_config.hpp"
#include "magbike/protocol.hpp"

#include <gtest/gtest.h>

#include <map>

using namespace magbike::gateway;

namespace {

void expect_round_trip(const Message& m) {
  const auto frame = encode(m);
  EXPECT_EQ(decode(frame), m) << frame;
}

std::string error_code_of(std::string_view frame) {
  try {
    decode(frame);
  } catch (const ProtocolError& e) {
    return e.code();
  }
  return "";
}

}  // namespace

TEST(Protocol, RoundTripsEveryMessageType) {
  Hello h;
  h.role = Role::Driver;
  h.client = "console";
  expect_round_trip(h);
  h.session = 7;
  h.telemetry_hz = 20.0;
  expect_round_trip(h);

  expect_round_trip(CommandMessage{12, 2, 30.5, -15.25, 0.1, -0.05});
  for (auto verb : {ControlVerb::Pause, ControlVerb::Resume, ControlVerb::Reset}) {
    expect_round_trip(ControlMessage{verb});
  }

  EventMessage ev{1.25, "fall_risk", {{"margin", 1.7}, {"patch", "deck"}}};
  expect_round_trip(ev);

  TelemetryMessage t;
  t.time = 3.5;
  t.step = 350;
  t.paused = true;
  t.patch = "web";
  t.u = 0.25;
  t.v = 0.125;
  t.heading = -1.5;
  t.roll = 0.1;
  t.world = {1.0, -2.0, 0.5};
  t.delta_front_deg = 45.0;
  t.delta_back_deg = -10.0;
  t.margin = 4.75;
  t.moving_torque_fraction = 0.5;
  t.steering_torque_fraction = 0.25;
  t.events = {ev};
  t.marker_count = 3;
  expect_round_trip(t);

  expect_round_trip(AckMessage{"command", 4});
  expect_round_trip(AckMessage{"control", std::nullopt});
  expect_round_trip(ErrorMessage{"warning", "stale_seq", "seq", "old", 3});
  expect_round_trip(ErrorMessage{"error", "hello_required", "type", "send hello", std::nullopt});
}

TEST(Protocol, HelloDefaultsRoleAndVersion) {
  const auto m = decode(R"({"type":"hello","version":1,"role":"observer"})");
  ASSERT_TRUE(std::holds_alternative<Hello>(m));
  EXPECT_EQ(std::get<Hello>(m).role, Role::Observer);
}

TEST(Protocol, MalformedFramesNameTheProblem) {
  EXPECT_EQ(error_code_of("not json"), "malformed");
  EXPECT_EQ(error_code_of("[1,2]"), "malformed");
  EXPECT_EQ(error_code_of(R"({"type":"teleport"})"), "unknown_type");
  EXPECT_EQ(error_code_of(R"({"type":"hello","version":2,"role":"driver"})"), "unsupported_version");
  EXPECT_EQ(error_code_of(R"({"type":"hello","version":1,"role":"pilot"})"), "bad_value");
  EXPECT_EQ(error_code_of(R"({"type":"control","verb":"jump"})"), "bad_value");
  EXPECT_EQ(error_code_of(R"({"type":"command","mode":1,"delta_front_deg":0,"delta_back_deg":0,"v_back":0,"v_front":0})"),
            "missing_field");
  EXPECT_EQ(error_code_of(R"({"type":"command","seq":"x","mode":1,"delta_front_deg":0,"delta_back_deg":0,"v_back":0,"v_front":0})"),
            "bad_type");
}

TEST(Protocol, MissingFieldIsNamed) {
  try {
    decode(R"({"type":"command","seq":1,"mode":1,"delta_front_deg":0,"delta_back_deg":0,"v_back":0})");
    FAIL();
  } catch (const ProtocolError& e) {
    EXPECT_EQ(e.field(), "v_front");
  }
}

TEST(GatewayConfig, ParsesToml) {
  const auto c = parse_gateway_config(R"(
[server]
address = "0.0.0.0"
port = 9001
[telemetry]
rate_hz = 10.0
[limits]
v_max = 0.15
steer_rate = 2.5
[session]
replay_log = "run.jsonl"
)");
  EXPECT_EQ(c.address, "0.0.0.0");
  EXPECT_EQ(c.port, 9001);
  EXPECT_EQ(c.telemetry_hz, 10.0);
  EXPECT_EQ(c.v_max, 0.15);
  EXPECT_EQ(c.steer_rate, 2.5);
  EXPECT_EQ(c.replay_log, "run.jsonl");
}

TEST(GatewayConfig, DefaultsWhenEmpty) {
  const auto c = parse_gateway_config("");
  EXPECT_EQ(c.address, "127.0.0.1");
  EXPECT_EQ(c.port, 8765);
  EXPECT_FALSE(c.v_max);
}

TEST(GatewayConfig, RejectsBadValues) {
  EXPECT_THROW(parse_gateway_config("[server]\nport = 70000\n"), ConfigError);
  EXPECT_THROW(parse_gateway_config("[telemetry]\nrate_hz = 0\n"), ConfigError);
  EXPECT_THROW(parse_gateway_config("[server\n"), ConfigError);
}

TEST(GatewayConfig, EnvironmentOverridesFile) {
  auto c = parse_gateway_config("[server]\nport = 9001\n[telemetry]\nrate_hz = 10.0\n");
  const std::map<std::string, std::string> env{{"MAGBIKE_PORT", "9100"}, {"MAGBIKE_V_MAX", "0.1"}};
  apply_env(c, [&env](const std::string& name) -> std::optional<std::string> {
    if (auto it = env.find(name); it != env.end()) return it->second;
    return std::nullopt;
  });
  EXPECT_EQ(c.port, 9100);
  EXPECT_EQ(c.v_max, 0.1);
  EXPECT_EQ(c.telemetry_hz, 10.0);
}

TEST(GatewayConfig, BadEnvironmentValueThrows) {
  GatewayConfig c;
  EXPECT_THROW(apply_env(c, [](const std::string& name) -> std::optional<std::string> {
                 if (name == "MAGBIKE_TELEMETRY_HZ") return "fast";
                 return std::nullopt;
               }),
               ConfigError);
}
