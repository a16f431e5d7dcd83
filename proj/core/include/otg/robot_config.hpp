#pragma once

#include <string>
#include <vector>

#include "otg/types.hpp"
#include "otg/urdf.hpp"

namespace otg {

/// One joint of the resolved chain, fixed joints included.
struct ChainSegment {
  std::string name;
  JointType type = JointType::Fixed;
  Eigen::Vector3d axis = Eigen::Vector3d::UnitX();
  Origin origin;
};

/// Everything the engine and kinematics need; no URDF beyond this point.
struct RobotConfig {
  std::string robot_name;
  std::string base;
  std::string tip;
  std::vector<std::string> joint_names;  // movable joints, chain order
  std::vector<JointType> joint_types;
  JointLimits limits;
  std::vector<ChainSegment> chain;

  Eigen::Index dof() const { return static_cast<Eigen::Index>(joint_names.size()); }
};

/// Acceleration limits are synthesized as accel_scale * velocity / 0.1 s.
constexpr double kAccelerationReferenceTime = 0.1;

RobotConfig generate_config(const RobotModel& model, const std::string& base, const std::string& tip,
                            double accel_scale = 1.0);
/// Uses the model's single root-to-leaf chain.
RobotConfig generate_config(const RobotModel& model, double accel_scale = 1.0);

std::string config_to_json(const RobotConfig& config, int indent = 2);
RobotConfig config_from_json(const std::string& text);
RobotConfig load_config(const std::string& path);
void save_config(const RobotConfig& config, const std::string& path);

}  // namespace otg
