#pragma once

#include <cstdint>
#include <deque>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "otg/preprocess.hpp"
#include "otg/spline.hpp"
#include "otg/time_allocation.hpp"
#include "otg/types.hpp"

namespace otg {

enum class ServoMode { Precise, Rapid };

const char* to_string(ServoMode mode) noexcept;
ServoMode parse_servo_mode(const std::string& text);

struct ServoSettings {
  ServoMode mode = ServoMode::Precise;
  std::optional<double> mu;  // unset: 0.999 precise, 0.9 rapid
  double beta = 0.5;
  double dt_output = 0.005;
  double dt_servo = 0.05;
  JointLimits limits;
  std::size_t buffer_capacity = 1024;
  /// Keep every planned trajectory for inspection.
  bool record_plans = false;

  double effective_mu() const;
  double effective_mu(ServoMode m) const;
  std::int64_t servo_ticks() const;
  void validate() const;
};

/// Multi-producer FIFO of timestamped targets. Full buffers drop their oldest
/// entry; non-increasing timestamps are rejected.
class WaypointBuffer {
 public:
  explicit WaypointBuffer(std::size_t capacity = 1024);

  bool push(TimedWaypoint wp);
  std::optional<TimedWaypoint> pop_front();
  /// Newest entry; everything older is discarded and counted in `skipped`.
  std::optional<TimedWaypoint> pop_newest(std::size_t* skipped = nullptr);
  std::vector<TimedWaypoint> drain();

  std::size_t size() const;
  bool empty() const;
  std::size_t capacity() const { return capacity_; }
  std::uint64_t dropped() const;
  std::uint64_t rejected() const;

 private:
  mutable std::mutex mutex_;
  std::deque<TimedWaypoint> entries_;
  std::size_t capacity_;
  std::optional<double> last_stamp_;
  std::uint64_t dropped_ = 0;
  std::uint64_t rejected_ = 0;
};

/// [q_current, q_end, q_new] with points closer than 1e-6 rad (max-norm) merged.
WaypointMatrix plan_joint_path(const JointVector& q_current, const JointVector& q_end, const JointVector& q_new);

/// Commands at every output tick in (0, horizon] of `traj`, the horizon
/// clamped to the trajectory. `first_tick` numbers the first command.
CommandStream execute_trajectory(const CubicSplineTrajectory& traj, double horizon, double dt_output,
                                 std::int64_t first_tick = 1);

enum class PlanKind { PointToPoint, Precise, Rapid, Brake };

struct PlanRecord {
  PlanKind kind;
  std::int64_t start_tick;  // tick whose state the plan starts from
  CubicSplineTrajectory trajectory;
  std::vector<std::int64_t> knot_ticks;  // issued knots, relative to start_tick
  WaypointMatrix targets;                // issued knots after the first (live) one
  std::vector<double> target_stamps;
};

/// A precise-mode target at the tick its segment finished.
struct Visit {
  double stamp;
  std::int64_t tick;
  JointVector target;
  JointVector reached;
};

struct ServoDiagnostics {
  std::uint64_t commands = 0;
  std::uint64_t plans = 0;
  std::uint64_t brake_plans = 0;
  std::uint64_t skipped_waypoints = 0;  // discarded by rapid mode
  std::uint64_t clamped_targets = 0;
  std::uint64_t clamped_commands = 0;
  std::uint64_t planner_failures = 0;
  std::uint64_t dropped_inputs = 0;  // buffer overflow
  std::uint64_t stale_inputs = 0;
  std::uint64_t filtered_inputs = 0;  // deadband suppressions
  std::vector<double> replan_latency_us;
  JointVector max_abs_velocity;
  JointVector max_abs_acceleration;
  std::string last_error;
};

/// Single-threaded planner and executor. Each step() emits the command for
/// the next output tick, replanning first when a decision point is due.
class ServoEngine {
 public:
  ServoEngine(ServoSettings settings, JointVector initial_q);

  /// Advances one output tick. Returns nothing until the first waypoint has
  /// been taken.
  std::optional<Command> step(WaypointBuffer& buffer, bool start_servo);

  /// Stream stopped, nothing buffered or pending, and the robot at rest.
  bool finished(const WaypointBuffer& buffer, bool start_servo) const;

  /// Takes effect at the next decision point.
  void request_mode(ServoMode mode);
  ServoMode mode() const { return mode_; }

  bool started() const { return started_; }
  std::int64_t tick() const { return tick_; }
  const JointVector& position() const { return q_; }
  const JointVector& velocity() const { return qd_; }
  const JointVector& acceleration() const { return qdd_; }
  const ServoSettings& settings() const { return settings_; }
  const ServoDiagnostics& diagnostics() const { return diag_; }
  ServoDiagnostics& diagnostics() { return diag_; }
  const std::vector<PlanRecord>& plans() const { return plans_; }
  /// Waypoints reached at the end of an executed segment, in order.
  const std::vector<Visit>& visits() const { return visits_; }

 private:
  struct Target {
    double stamp;
    JointVector q;
  };

  void plan_if_due(WaypointBuffer& buffer, bool start_servo);
  void precise_step(WaypointBuffer& buffer, bool start_servo);
  void rapid_step(WaypointBuffer& buffer, bool start_servo);
  void start_ptp(const Target& target);
  void plan_precise(bool start_servo);
  void plan_rapid(const Target& target, bool start_servo);
  void plan_brake();
  void go_idle();
  void record_arrivals();
  void install(PlanKind kind, CubicSplineTrajectory traj, std::vector<Target> targets);
  void on_failure(const std::exception& e);
  bool moving() const;
  bool traj_finished() const;
  std::int64_t remaining_ticks() const;
  Target take(const TimedWaypoint& wp);
  double segment_time(double gap, const JointVector& from, const JointVector& to) const;
  /// Terminal velocity and acceleration from the newest stream samples.
  std::pair<JointVector, JointVector> terminal_state(bool start_servo) const;
  void remember(const Target& t);
  StretchWeights fit_weights(const std::vector<double>& durations, std::size_t knots, double mu) const;
  AllocationSettings allocation() const;

  ServoSettings settings_;
  ServoMode mode_;
  std::optional<ServoMode> requested_mode_;

  bool started_ = false;
  std::int64_t tick_ = 0;
  JointVector q_, qd_, qdd_;

  std::optional<CubicSplineTrajectory> traj_;
  std::int64_t clock_ = 0;        // ticks into traj_
  std::int64_t total_ticks_ = 0;  // traj_ length in ticks
  std::vector<std::int64_t> knot_ticks_;
  std::size_t next_knot_ = 1;
  std::int64_t decision_tick_ = 0;

  std::deque<Target> pending_;       // precise: targets ahead of the robot
  std::optional<Target> last_target_;  // most recent target reached or aimed at
  std::optional<Target> carry_;        // newest precise target handed to rapid mode
  std::deque<Target> recent_;          // last three stream samples taken

  ServoDiagnostics diag_;
  std::vector<PlanRecord> plans_;
  std::vector<Visit> visits_;
};

struct RunOptions {
  std::optional<FilterSettings> filter;
  /// Stop delivering input and clear StartServo from this tick on.
  std::optional<std::int64_t> stop_tick;
  /// Mode changes applied when the given tick is reached.
  std::vector<std::pair<std::int64_t, ServoMode>> mode_changes;
  /// Abort guard on run length after the last delivery.
  double max_tail_seconds = 120.0;
};

struct ServoRun {
  CommandStream commands;
  ServoDiagnostics diagnostics;
  std::vector<PlanRecord> plans;
  std::vector<Visit> visits;
  std::vector<TimedWaypoint> forwarded;  // inputs that reached the buffer
};

/// Deterministic single-threaded run on a simulated clock. Inputs are
/// delivered once their stamp, relative to the first one, is due.
ServoRun run_servo(std::span<const TimedWaypoint> inputs, const JointVector& initial_q, const ServoSettings& settings,
                   const RunOptions& options = {});

}  // namespace otg
