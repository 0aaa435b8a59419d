#include "magbike/gateway_config.hpp"

#include <toml.hpp>

#include <cstdlib>
#include <fstream>
#include <sstream>

namespace magbike::gateway {

namespace {

std::uint16_t to_port(std::int64_t p, const std::string& where) {
  if (p < 0 || p > 65535) throw ConfigError(where + ": port must lie in [0, 65535]");
  return static_cast<std::uint16_t>(p);
}

double positive(double x, const std::string& where) {
  if (!(x > 0.0)) throw ConfigError(where + " must be > 0");
  return x;
}

double env_number(const std::string& name, const std::string& text) {
  try {
    std::size_t used = 0;
    const double x = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return x;
  } catch (const std::exception&) {
    throw ConfigError(name + "='" + text + "' is not a number");
  }
}

}  // namespace

std::optional<std::string> process_env(const std::string& name) {
  if (const char* v = std::getenv(name.c_str())) return std::string(v);
  return std::nullopt;
}

GatewayConfig parse_gateway_config(const std::string& text, const std::string& source) {
  toml::table tbl;
  try {
    tbl = toml::parse(text, source);
  } catch (const toml::parse_error& e) {
    std::ostringstream msg;
    msg << source << ": " << e.description() << " at line " << e.source().begin.line;
    throw ConfigError(msg.str());
  }
  GatewayConfig c;
  if (auto v = tbl["server"]["address"].value<std::string>()) c.address = *v;
  if (auto v = tbl["server"]["port"].value<std::int64_t>()) c.port = to_port(*v, source);
  if (auto v = tbl["telemetry"]["rate_hz"].value<double>()) {
    c.telemetry_hz = positive(*v, "telemetry.rate_hz");
  }
  if (auto v = tbl["limits"]["v_max"].value<double>()) c.v_max = positive(*v, "limits.v_max");
  if (auto v = tbl["limits"]["steer_rate"].value<double>()) {
    c.steer_rate = positive(*v, "limits.steer_rate");
  }
  if (auto v = tbl["session"]["replay_log"].value<std::string>()) c.replay_log = *v;
  return c;
}

GatewayConfig load_gateway_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  auto c = parse_gateway_config(buf.str(), path.string());
  if (!c.replay_log.empty() && c.replay_log.is_relative()) {
    c.replay_log = path.parent_path() / c.replay_log;
  }
  return c;
}

void apply_env(GatewayConfig& c, const EnvLookup& env) {
  if (auto v = env("MAGBIKE_ADDRESS")) c.address = *v;
  if (auto v = env("MAGBIKE_PORT")) {
    c.port = to_port(static_cast<std::int64_t>(env_number("MAGBIKE_PORT", *v)), "MAGBIKE_PORT");
  }
  if (auto v = env("MAGBIKE_TELEMETRY_HZ")) {
    c.telemetry_hz = positive(env_number("MAGBIKE_TELEMETRY_HZ", *v), "MAGBIKE_TELEMETRY_HZ");
  }
  if (auto v = env("MAGBIKE_V_MAX")) c.v_max = positive(env_number("MAGBIKE_V_MAX", *v), "MAGBIKE_V_MAX");
  if (auto v = env("MAGBIKE_STEER_RATE")) {
    c.steer_rate = positive(env_number("MAGBIKE_STEER_RATE", *v), "MAGBIKE_STEER_RATE");
  }
  if (auto v = env("MAGBIKE_REPLAY_LOG")) c.replay_log = *v;
}

}  // namespace magbike::gateway
