#include "otg/robot_config.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <nlohmann/json.hpp>

#include "otg/error.hpp"

namespace otg {
namespace {

using nlohmann::json;

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json vec3(const Eigen::Vector3d& v) { return json::array({v.x(), v.y(), v.z()}); }

Eigen::Vector3d read_vec3(const json& j, const std::string& what) {
  if (!j.is_array() || j.size() != 3) throw Error(ErrorKind::Parse, what + " must be an array of three numbers");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

json origin_json(const Origin& o) { return {{"xyz", vec3(o.xyz)}, {"rpy", vec3(o.rpy)}}; }

Origin read_origin(const json& j, const std::string& what) {
  Origin o;
  if (j.contains("xyz")) o.xyz = read_vec3(j.at("xyz"), what + ".xyz");
  if (j.contains("rpy")) o.rpy = read_vec3(j.at("rpy"), what + ".rpy");
  return o;
}

double bound(const json& j, double unbounded) { return j.is_null() ? unbounded : j.get<double>(); }

}  // namespace

RobotConfig generate_config(const RobotModel& model, const std::string& base, const std::string& tip,
                            double accel_scale) {
  if (!(accel_scale > 0.0) || !std::isfinite(accel_scale)) {
    throw Error(ErrorKind::InvalidParameter, "accel_scale must be positive");
  }
  RobotConfig c;
  c.robot_name = model.name;
  c.base = base;
  c.tip = tip;
  std::vector<double> lower, upper, vel;
  for (std::size_t idx : model.chain_between(base, tip)) {
    const UrdfJoint& j = model.joints[idx];
    c.chain.push_back({j.name, j.type, j.axis, j.origin});
    if (!j.movable()) continue;
    c.joint_names.push_back(j.name);
    c.joint_types.push_back(j.type);
    lower.push_back(j.limit->lower);
    upper.push_back(j.limit->upper);
    vel.push_back(j.limit->velocity);
  }
  if (c.joint_names.empty()) throw Error(ErrorKind::ChainResolution, "chain '" + base + "' -> '" + tip + "' has no movable joints");
  const auto n = static_cast<Eigen::Index>(vel.size());
  c.limits.lower = Eigen::Map<const Eigen::VectorXd>(lower.data(), n);
  c.limits.upper = Eigen::Map<const Eigen::VectorXd>(upper.data(), n);
  c.limits.velocity = Eigen::Map<const Eigen::VectorXd>(vel.data(), n);
  c.limits.acceleration = c.limits.velocity * (accel_scale / kAccelerationReferenceTime);
  return c;
}

RobotConfig generate_config(const RobotModel& model, double accel_scale) {
  if (model.chain.empty()) {
    throw Error(ErrorKind::ChainResolution, "robot '" + model.name + "' branches; name a base and tip link");
  }
  const UrdfJoint& first = model.joints[model.chain.front()];
  const UrdfJoint& last = model.joints[model.chain.back()];
  return generate_config(model, first.parent, last.child, accel_scale);
}

std::string config_to_json(const RobotConfig& c, int indent) {
  json joints = json::array();
  for (Eigen::Index i = 0; i < c.dof(); ++i) {
    const auto& name = c.joint_names[static_cast<std::size_t>(i)];
    const ChainSegment* seg = nullptr;
    for (const auto& s : c.chain) {
      if (s.name == name) seg = &s;
    }
    json j{{"name", name},
           {"type", to_string(c.joint_types[static_cast<std::size_t>(i)])},
           {"position_limits", json::array({number_or_null(c.limits.lower(i)), number_or_null(c.limits.upper(i))})},
           {"velocity_limit", c.limits.velocity(i)},
           {"acceleration_limit", c.limits.acceleration(i)}};
    if (seg) {
      j["axis"] = vec3(seg->axis);
      j["origin"] = origin_json(seg->origin);
    }
    joints.push_back(std::move(j));
  }
  json segments = json::array();
  for (const auto& s : c.chain) {
    segments.push_back({{"name", s.name}, {"type", to_string(s.type)}, {"axis", vec3(s.axis)}, {"origin", origin_json(s.origin)}});
  }
  const json doc{{"robot_name", c.robot_name},
                 {"dof", c.dof()},
                 {"joints", joints},
                 {"chain", {{"base", c.base}, {"tip", c.tip}, {"segments", segments}}}};
  return doc.dump(indent);
}

RobotConfig config_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::Parse, std::string("config is not valid JSON: ") + e.what());
  }
  try {
    RobotConfig c;
    c.robot_name = doc.value("robot_name", "");
    const auto& chain = doc.at("chain");
    c.base = chain.value("base", "");
    c.tip = chain.value("tip", "");
    for (const auto& s : chain.at("segments")) {
      c.chain.push_back({s.at("name").get<std::string>(), parse_joint_type(s.at("type").get<std::string>()),
                         read_vec3(s.at("axis"), "axis"), read_origin(s.at("origin"), "origin")});
    }
    const auto& joints = doc.at("joints");
    const auto n = static_cast<Eigen::Index>(joints.size());
    c.limits.lower.resize(n);
    c.limits.upper.resize(n);
    c.limits.velocity.resize(n);
    c.limits.acceleration.resize(n);
    constexpr double inf = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto& j = joints[static_cast<std::size_t>(i)];
      c.joint_names.push_back(j.at("name").get<std::string>());
      c.joint_types.push_back(parse_joint_type(j.value("type", std::string("revolute"))));
      const auto& pl = j.at("position_limits");
      c.limits.lower(i) = bound(pl.at(0), -inf);
      c.limits.upper(i) = bound(pl.at(1), inf);
      c.limits.velocity(i) = j.at("velocity_limit").get<double>();
      c.limits.acceleration(i) = j.at("acceleration_limit").get<double>();
    }
    if (doc.contains("dof") && doc.at("dof").get<Eigen::Index>() != n) {
      throw Error(ErrorKind::Validation, "dof does not match the joints array");
    }
    if (!(c.limits.velocity.array() > 0.0).all() || !(c.limits.acceleration.array() > 0.0).all()) {
      throw Error(ErrorKind::Validation, "velocity and acceleration limits must be positive");
    }
    if (!(c.limits.lower.array() <= c.limits.upper.array()).all()) {
      throw Error(ErrorKind::Validation, "position limits must satisfy lower <= upper");
    }
    std::size_t movable = 0;
    for (const auto& s : c.chain) movable += s.type != JointType::Fixed;
    if (movable != static_cast<std::size_t>(n)) throw Error(ErrorKind::Validation, "chain and joints disagree on dof");
    return c;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Validation, std::string("malformed config: ") + e.what());
  }
}

RobotConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Input, "cannot open config file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return config_from_json(buf.str());
}

void save_config(const RobotConfig& config, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Input, "cannot write config file '" + path + "'");
  out << config_to_json(config) << '\n';
}

}  // namespace otg
