#pragma once

#include <Eigen/Geometry>

#include "otg/robot_config.hpp"

namespace otg {

struct Pose {
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();
  Eigen::Quaterniond rotation = Eigen::Quaterniond::Identity();

  Eigen::Isometry3d isometry() const;
  static Pose from_isometry(const Eigen::Isometry3d& t);
};

struct IkSettings {
  double damping = 0.05;
  int max_iters = 500;
  double pos_tol = 1e-7;   // m
  double rot_tol = 1e-6;   // rad
  double step_clamp = 0.2; // rad per iteration, max-norm
  /// Scales the orientation residual; 0 solves for position only.
  double orientation_weight = 1.0;

  void validate() const;
};

struct IkResult {
  bool converged = false;
  JointVector q;  // best iterate, always inside the position limits
  int iterations = 0;
  double position_error = 0.0;
  double rotation_error = 0.0;
};

Eigen::Isometry3d tip_transform(const RobotConfig& config, const JointVector& q);
Pose forward_kinematics(const RobotConfig& config, const JointVector& q);

/// Geometric Jacobian in the base frame: rows 0-2 linear, 3-5 angular.
Eigen::Matrix<double, 6, Eigen::Dynamic> jacobian(const RobotConfig& config, const JointVector& q);

/// Axis-angle vector of target * current^-1.
Eigen::Vector3d orientation_error(const Eigen::Quaterniond& target, const Eigen::Quaterniond& current);

/// Damped least squares. An unreachable target is reported through
/// `converged == false`, never thrown.
IkResult ik_solve(const RobotConfig& config, const Pose& target, const JointVector& seed, const IkSettings& settings = {});

}  // namespace otg
