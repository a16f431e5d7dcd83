#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

namespace otg {

/// Joint positions in radians (metres for prismatic joints).
using JointVector = Eigen::VectorXd;

/// Rows are knots, columns are joints.
using WaypointMatrix = Eigen::MatrixXd;

struct TimedWaypoint {
  double stamp = 0.0;  // seconds, monotonic
  JointVector q;
};

/// One position command on the output grid. `tick` counts output periods
/// since the engine epoch; `time` is tick * dt_output.
struct Command {
  std::int64_t tick = 0;
  double time = 0.0;
  JointVector q;
};

using CommandStream = std::vector<Command>;

struct JointLimits {
  JointVector lower;
  JointVector upper;
  JointVector velocity;
  JointVector acceleration;

  Eigen::Index dof() const { return velocity.size(); }
  /// Clamp into [lower, upper]; returns true if any entry moved.
  bool clamp(JointVector& q) const;
  bool contains(const JointVector& q, double slack = 0.0) const;
};

}  // namespace otg
