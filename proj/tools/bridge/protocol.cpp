#include "bridge/protocol.hpp"

#include <cmath>

#include <nlohmann/json.hpp>

#include "otg/error.hpp"

namespace otg::bridge {
namespace {

using nlohmann::json;

[[noreturn]] void reject(const std::string& what) { throw Error(ErrorKind::Input, what); }

std::optional<double> stamp(const json& m) {
  if (!m.contains("t") || m["t"].is_null()) return std::nullopt;
  if (!m["t"].is_number()) reject("'t' must be a number");
  return m["t"].get<double>();
}

double number(const json& m, const char* key) {
  if (!m.contains(key) || !m[key].is_number()) reject(std::string("'") + key + "' must be a number");
  const double v = m[key].get<double>();
  if (!std::isfinite(v)) reject(std::string("'") + key + "' must be finite");
  return v;
}

json vector_json(const JointVector& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

json quaternion_json(const Eigen::Quaterniond& q) { return {{"w", q.w()}, {"x", q.x()}, {"y", q.y()}, {"z", q.z()}}; }

Eigen::Quaterniond parse_quaternion(const json& j) {
  Eigen::Quaterniond q;
  if (j.is_object()) {
    q = Eigen::Quaterniond(number(j, "w"), number(j, "x"), number(j, "y"), number(j, "z"));
  } else if (j.is_array() && j.size() == 4 && std::all_of(j.begin(), j.end(), [](const json& v) { return v.is_number(); })) {
    q = Eigen::Quaterniond(j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>());
  } else {
    reject("'quaternion' must be {w,x,y,z} or [w,x,y,z]");
  }
  if (!(q.norm() > 1e-9) || !q.coeffs().allFinite()) reject("'quaternion' must be nonzero");
  return q.normalized();
}

}  // namespace

Inbound parse_message(const std::string& text, Eigen::Index dof) {
  json m;
  try {
    m = json::parse(text);
  } catch (const json::parse_error&) {
    reject("message is not valid JSON");
  }
  if (!m.is_object() || !m.contains("type") || !m["type"].is_string()) reject("message needs a string 'type'");
  const std::string type = m["type"].get<std::string>();

  if (type == "target_joints") {
    if (!m.contains("q") || !m["q"].is_array()) reject("'q' must be an array");
    if (static_cast<Eigen::Index>(m["q"].size()) != dof) {
      reject("'q' has " + std::to_string(m["q"].size()) + " values, robot has " + std::to_string(dof) + " joints");
    }
    JointVector q(dof);
    for (Eigen::Index i = 0; i < dof; ++i) {
      const json& v = m["q"][static_cast<std::size_t>(i)];
      if (!v.is_number() || !std::isfinite(v.get<double>())) reject("'q' entries must be finite numbers");
      q(i) = v.get<double>();
    }
    return TargetJoints{q, stamp(m)};
  }
  if (type == "target_pose") {
    TargetPose p;
    p.pose.translation = {number(m, "x"), number(m, "y"), number(m, "z")};
    if (m.contains("quaternion") && !m["quaternion"].is_null()) {
      p.pose.rotation = parse_quaternion(m["quaternion"]);
      p.has_orientation = true;
    }
    p.t = stamp(m);
    return p;
  }
  if (type == "mode") {
    if (!m.contains("value") || !m["value"].is_string()) reject("'value' must be \"precise\" or \"rapid\"");
    try {
      return ModeRequest{parse_servo_mode(m["value"].get<std::string>())};
    } catch (const Error&) {
      reject("'value' must be \"precise\" or \"rapid\"");
    }
  }
  if (type == "start") return StartRequest{};
  if (type == "stop") return StopRequest{};
  reject("unknown message type '" + type + "'");
}

std::string state_message(const StateView& v, const JointLimits& limits) {
  json clamped = json::array();
  for (Eigen::Index j = 0; j < v.q.size(); ++j) {
    clamped.push_back(v.q(j) <= limits.lower(j) || v.q(j) >= limits.upper(j));
  }
  const json msg{
      {"type", "state"},
      {"q", vector_json(v.q)},
      {"ee",
       {{"x", v.ee.translation.x()},
        {"y", v.ee.translation.y()},
        {"z", v.ee.translation.z()},
        {"quaternion", quaternion_json(v.ee.rotation)}}},
      {"t", v.t},
      {"tick", v.snapshot.tick},
      {"clamped", clamped},
      {"metrics", {{"acc", vector_json(v.snapshot.qdd.cwiseAbs())}}},
      {"mode", to_string(v.snapshot.mode)},
      {"servo", v.snapshot.servo_active},
  };
  return msg.dump();
}

std::string error_message(const std::string& message, double t, const std::string& code) {
  return json{{"type", "error"}, {"code", code}, {"message", message}, {"t", t}}.dump();
}

std::string mode_ack(ServoMode mode, double t) { return json{{"type", "mode_ack"}, {"value", to_string(mode)}, {"t", t}}.dump(); }

std::string ack(const std::string& what, double t) { return json{{"type", "ack"}, {"value", what}, {"t", t}}.dump(); }

std::string config_message(const RobotConfig& config, ServoMode mode, double ui_rate_hz, double t) {
  json msg{{"type", "config"}, {"config", json::parse(config_to_json(config, -1))}};
  msg["mode"] = to_string(mode);
  msg["ui_rate_hz"] = ui_rate_hz;
  msg["t"] = t;
  return msg.dump();
}

}  // namespace otg::bridge
