#include "magbike/scenario_io.hpp"
#include "magbike/ws_server.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

#include <thread>

using namespace magbike;
using namespace magbike::gateway;
using nlohmann::json;
using namespace std::chrono_literals;

namespace {

sim::Scenario corner() { return io::load_scenario(test::data_dir() / "scenarios/corner_internal.yaml"); }

json hello(WebSocketClient& c, const char* role) {
  c.send(json{{"type", "hello"}, {"version", 1}, {"role", role}}.dump());
  const auto r = c.receive_type("hello", 2s);
  if (!r) {
    ADD_FAILURE() << "no hello reply";
    return {};
  }
  return json::parse(*r);
}

}  // namespace

TEST(WebSocket, EphemeralPortAndHandshake) {
  TeleopService svc(corner(), {});
  WebSocketServer server(svc, "127.0.0.1", 0);
  EXPECT_GT(server.port(), 0);
  server.start();
  WebSocketClient c("127.0.0.1", server.port());
  const auto r = hello(c, "driver");
  EXPECT_EQ(r["role"], "driver");
  EXPECT_TRUE(r.contains("session"));
  server.stop();
}

TEST(WebSocket, BusyPortThrows) {
  TeleopService svc(corner(), {});
  WebSocketServer first(svc, "127.0.0.1", 0);
  EXPECT_THROW(WebSocketServer(svc, "127.0.0.1", first.port()), std::runtime_error);
}

TEST(WebSocket, ObserversReceiveIdenticalTelemetryAndOnlyDriverCommands) {
  TeleopService svc(corner(), {});
  WebSocketServer server(svc, "127.0.0.1", 0);
  server.start();
  WebSocketClient driver("127.0.0.1", server.port());
  WebSocketClient a("127.0.0.1", server.port());
  WebSocketClient b("127.0.0.1", server.port());
  hello(driver, "driver");
  hello(a, "observer");
  hello(b, "observer");

  a.send(R"({"type":"command","seq":1,"mode":1,"delta_front_deg":0,"delta_back_deg":0,"v_back":0.2,"v_front":0.2})");
  const auto refused = a.receive_type("error", 2s);
  ASSERT_TRUE(refused);
  EXPECT_EQ(json::parse(*refused)["code"], "not_driver");

  driver.send(R"({"type":"command","seq":1,"mode":1,"delta_front_deg":0,"delta_back_deg":0,"v_back":0.1,"v_front":0.1})");
  const auto ack = driver.receive_type("ack", 2s);
  ASSERT_TRUE(ack);
  EXPECT_EQ(json::parse(*ack)["seq"], 1);

  // Tick by hand so both observers see exactly the same frames.
  for (int i = 0; i < 50; ++i) svc.tick();
  std::vector<std::string> ta, tb;
  for (int i = 0; i < 10; ++i) {
    auto fa = a.receive_type("telemetry", 2s);
    auto fb = b.receive_type("telemetry", 2s);
    ASSERT_TRUE(fa && fb);
    ta.push_back(*fa);
    tb.push_back(*fb);
  }
  EXPECT_EQ(ta, tb);
  const auto last = json::parse(ta.back());
  EXPECT_NEAR(last["pose"]["u"].get<double>(), 0.4 + 50 * 0.01 * 0.1, 1e-9);
  server.stop();
}

TEST(WebSocket, RealTimeLoopStreamsTelemetry) {
  TeleopService svc(corner(), {});
  WebSocketServer server(svc, "127.0.0.1", 0);
  server.start();
  std::jthread loop([&svc](std::stop_token st) { svc.run(st); });
  WebSocketClient c("127.0.0.1", server.port());
  hello(c, "observer");
  int count = 0;
  for (int i = 0; i < 5; ++i) {
    if (c.receive_type("telemetry", 1s)) ++count;
  }
  EXPECT_EQ(count, 5);
  loop.request_stop();
  loop.join();
  server.stop();
}

TEST(WebSocket, ClientDisconnectIsNoticed) {
  TeleopService svc(corner(), {});
  WebSocketServer server(svc, "127.0.0.1", 0);
  server.start();
  {
    WebSocketClient c("127.0.0.1", server.port());
    hello(c, "observer");
    EXPECT_EQ(server.connections(), 1u);
    c.close();
  }
  for (int i = 0; i < 100 && server.connections() != 0; ++i) std::this_thread::sleep_for(10ms);
  EXPECT_EQ(server.connections(), 0u);
  server.stop();
}
