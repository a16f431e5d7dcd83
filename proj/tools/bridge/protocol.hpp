#pragma once

#include <optional>
#include <string>
#include <variant>

#include "otg/kinematics.hpp"
#include "otg/robot_config.hpp"
#include "otg/servo_engine.hpp"
#include "otg/servo_runtime.hpp"

namespace otg::bridge {

struct TargetJoints {
  JointVector q;
  std::optional<double> t;
};

struct TargetPose {
  Pose pose;
  bool has_orientation = false;
  std::optional<double> t;
};

struct ModeRequest {
  ServoMode mode;
};

struct StartRequest {};
struct StopRequest {};

using Inbound = std::variant<TargetJoints, TargetPose, ModeRequest, StartRequest, StopRequest>;

/// Throws otg::Error(Input) with a client-facing message.
Inbound parse_message(const std::string& text, Eigen::Index dof);

struct StateView {
  RuntimeSnapshot snapshot;
  JointVector q;  // actuator position shown to the client
  Pose ee;
  double t = 0.0;
};

std::string state_message(const StateView& view, const JointLimits& limits);
std::string error_message(const std::string& message, double t, const std::string& code = "bad_request");
std::string mode_ack(ServoMode mode, double t);
std::string ack(const std::string& what, double t);
std::string config_message(const RobotConfig& config, ServoMode mode, double ui_rate_hz, double t);

}  // namespace otg::bridge
