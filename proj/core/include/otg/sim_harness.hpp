#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "otg/servo_engine.hpp"
#include "otg/types.hpp"

namespace otg {

enum class ActuatorMode { Perfect, FirstOrderLag };

struct ActuatorModel {
  ActuatorMode mode = ActuatorMode::Perfect;
  double time_constant = 0.02;  // s, lag mode
  double rate_hz = 200.0;       // feedback rate, lag mode

  void validate() const;
};

/// Uniformly sampled feedback, rows = samples.
struct Trace {
  std::vector<double> times;
  Eigen::MatrixXd positions;
  Eigen::MatrixXd velocities;
  Eigen::MatrixXd accelerations;

  Eigen::Index size() const { return positions.rows(); }
  Eigen::Index dof() const { return positions.cols(); }
};

/// Central differences, second-order one-sided at the ends.
Trace differentiate(std::vector<double> times, Eigen::MatrixXd positions);

/// Perfect mode echoes the commands; lag mode integrates dx/dt = (u - x)/τ
/// exactly over a zero-order-held input, starting from `initial` (default:
/// first command) at the first command time.
Trace simulate(const CommandStream& commands, const ActuatorModel& model,
               const std::optional<JointVector>& initial = std::nullopt);

/// Per-joint mean |acceleration|.
JointVector mav(const Trace& trace);
JointVector mean_abs(const Eigen::MatrixXd& samples);
/// Per-joint population standard deviation of |acceleration|.
JointVector abs_acceleration_std(const Trace& trace);

/// The "no interpolation" stream: each input repeated on every output tick
/// until the next one is due. Ticks 1..ticks, same timing rule as run_servo.
CommandStream zero_order_hold(const std::vector<TimedWaypoint>& inputs, double dt_output, std::int64_t ticks);

struct ComparisonReport {
  JointVector mav_uttg, mav_hold;
  JointVector std_uttg, std_hold;
  /// Per joint; NaN where the baseline joint never moves.
  JointVector reduction_per_joint;
  /// Mean over joints with a nonzero baseline; empty when there are none.
  std::optional<double> reduction_percent;
  JointVector rmse_uttg, rmse_hold;
  std::size_t commands = 0;
  double dt_output = 0.0;
};

ComparisonReport compare_baseline(const std::vector<TimedWaypoint>& inputs, const ServoSettings& settings,
                                  const ActuatorModel& actuator = {}, const RunOptions& options = {});

std::string report_to_json(const ComparisonReport& report, int indent = 2);
void write_trace_csv(std::ostream& out, const Trace& trace);

/// Reference streams, 20 Hz over 5 s (100 samples from t = 0).
/// Two-joint sinusoid (0.5 Hz / 0.3 Hz, amplitudes 0.8 / 0.5 rad) under a
/// sin² window so it starts and ends at rest.
std::vector<TimedWaypoint> standard_stream();
/// Holds `a` for the first second, then jumps to `b` and holds.
std::vector<TimedWaypoint> step_stream(const JointVector& a, const JointVector& b);
std::vector<TimedWaypoint> step_stream();
std::vector<TimedWaypoint> constant_stream(const JointVector& q, std::size_t samples = 100, double rate_hz = 20.0);

}  // namespace otg
