#pragma once

// Service configuration: TOML file, then MAGBIKE_* environment variables,
// then command-line flags (applied by the caller), each overriding the last.
//
//   [server]
//   address = "127.0.0.1"
//   port = 8765
//   [telemetry]
//   rate_hz = 20.0
//   [limits]
//   v_max = 0.2
//   steer_rate = 3.0
//   [session]
//   replay_log = "session.jsonl"
//
// Environment: MAGBIKE_ADDRESS, MAGBIKE_PORT, MAGBIKE_TELEMETRY_HZ,
// MAGBIKE_V_MAX, MAGBIKE_STEER_RATE, MAGBIKE_REPLAY_LOG.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>

namespace magbike::gateway {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GatewayConfig {
  std::string address{"127.0.0.1"};
  std::uint16_t port{8765};
  double telemetry_hz{20.0};
  std::optional<double> v_max;
  std::optional<double> steer_rate;
  std::filesystem::path replay_log;
};

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;

/// Reads the process environment.
std::optional<std::string> process_env(const std::string& name);

GatewayConfig parse_gateway_config(const std::string& toml_text, const std::string& source = "config");
GatewayConfig load_gateway_config(const std::filesystem::path& path);
void apply_env(GatewayConfig& config, const EnvLookup& env = process_env);

}  // namespace magbike::gateway
