#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Geometry>

namespace otg {

enum class JointType { Revolute, Continuous, Prismatic, Fixed };

const char* to_string(JointType type) noexcept;
JointType parse_joint_type(const std::string& text);

struct Origin {
  Eigen::Vector3d xyz = Eigen::Vector3d::Zero();
  Eigen::Vector3d rpy = Eigen::Vector3d::Zero();

  /// Rotation is Rz(yaw) * Ry(pitch) * Rx(roll).
  Eigen::Isometry3d transform() const;
};

struct JointLimit {
  double lower = 0.0;
  double upper = 0.0;
  double velocity = 0.0;
  double effort = 0.0;
};

struct UrdfJoint {
  std::string name;
  JointType type = JointType::Fixed;
  std::string parent;
  std::string child;
  Eigen::Vector3d axis = Eigen::Vector3d::UnitX();
  Origin origin;
  std::optional<JointLimit> limit;

  bool movable() const { return type != JointType::Fixed; }
};

struct RobotModel {
  std::string name;
  std::vector<std::string> links;
  std::vector<UrdfJoint> joints;
  /// Joint indices from the root to the single leaf; empty when the tree branches.
  std::vector<std::size_t> chain;

  std::string root_link() const;
  const UrdfJoint* find_joint(const std::string& name) const;
  bool has_link(const std::string& name) const;
  /// Joint indices from base to tip. Throws ChainResolution.
  std::vector<std::size_t> chain_between(const std::string& base, const std::string& tip) const;
  /// Movable joints in the whole model.
  std::size_t dof() const;
};

RobotModel parse_urdf(const std::string& document);
RobotModel load_urdf(const std::string& path);
std::string serialize_urdf(const RobotModel& model);

/// Field-by-field comparison with numeric tolerance.
bool equivalent(const RobotModel& a, const RobotModel& b, double tol = 1e-12);

}  // namespace otg
