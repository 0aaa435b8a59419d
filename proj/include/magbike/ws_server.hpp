#pragma once

// WebSocket transport for TeleopService (text frames only).

#include "magbike/teleop.hpp"

#include <chrono>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>

namespace magbike::gateway {

class WebSocketServer {
 public:
  /// Binds immediately; throws std::runtime_error if the port is taken.
  /// Port 0 picks an ephemeral port.
  WebSocketServer(TeleopService& service, const std::string& address, std::uint16_t port);
  ~WebSocketServer();
  WebSocketServer(const WebSocketServer&) = delete;
  WebSocketServer& operator=(const WebSocketServer&) = delete;

  std::uint16_t port() const;
  /// Starts the network thread.
  void start();
  void stop();
  std::size_t connections() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Blocking client with a background reader, for tests and tools.
class WebSocketClient {
 public:
  WebSocketClient(const std::string& host, std::uint16_t port);
  ~WebSocketClient();
  WebSocketClient(const WebSocketClient&) = delete;
  WebSocketClient& operator=(const WebSocketClient&) = delete;

  void send(const std::string& frame);
  /// Next frame, or nullopt after the timeout or once the connection closed.
  std::optional<std::string> receive(std::chrono::milliseconds timeout);
  /// Next frame of the given message type, skipping others.
  std::optional<std::string> receive_type(const std::string& type, std::chrono::milliseconds timeout);
  void close();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace magbike::gateway
