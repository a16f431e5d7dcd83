#pragma once

#include <atomic>
#include <chrono>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

#include "otg/kinematics.hpp"
#include "otg/robot_config.hpp"
#include "otg/servo_runtime.hpp"
#include "otg/sim_harness.hpp"

namespace otg::bridge {

struct ServerOptions {
  std::string host = "127.0.0.1";
  unsigned short port = 8765;  // 0 binds any free port
  double ui_rate_hz = 60.0;
  RuntimeOptions runtime;
  ActuatorModel actuator;  // applied to commands before they are reported
  IkSettings ik;
  std::optional<JointVector> initial_q;  // default: middle of the position limits
};

/// WebSocket bridge for one operator console at a time. Targets go through
/// the live servo runtime; state is pushed at the UI rate.
class BridgeServer {
 public:
  BridgeServer(RobotConfig config, ServoSettings settings, ServerOptions options);
  ~BridgeServer();
  BridgeServer(const BridgeServer&) = delete;
  BridgeServer& operator=(const BridgeServer&) = delete;

  /// Binds and starts serving; returns the bound port.
  unsigned short start();
  void stop();

  std::uint64_t sessions_served() const { return sessions_served_.load(); }
  std::uint64_t sessions_refused() const { return sessions_refused_.load(); }
  ServoDiagnostics diagnostics() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  std::atomic<std::uint64_t> sessions_served_{0};
  std::atomic<std::uint64_t> sessions_refused_{0};
};

/// Position limits midpoint; unbounded joints start at zero.
JointVector default_initial_position(const JointLimits& limits);

}  // namespace otg::bridge
