#pragma once

#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "otg/spline.hpp"
#include "otg/types.hpp"

namespace otg {

struct AllocationSettings {
  double dt_output = 0.005;  // durations are rounded up to whole periods
  double beta = 0.5;
  double dilation = 1.1;
  int max_iterations = 50;
};

/// Builds a spline over the given knots; called once per dilation round.
using SplineBuilder = std::function<CubicSplineTrajectory(const KnotSequence&)>;

struct Allocation {
  std::vector<double> durations;
  CubicSplineTrajectory trajectory;
  int dilations = 0;
};

/// max_j max(1.5|Δq_j|/v_j, sqrt(6|Δq_j|/a_j)), the rest-to-rest cubic bound.
double heuristic_duration(const JointVector& from, const JointVector& to, const JointLimits& limits);

/// Round up to a whole number of output periods, at least one.
double quantize_duration(double seconds, double dt_output);

/// Starting durations: timestamp gaps when given, otherwise the heuristic.
std::vector<double> initial_durations(const WaypointMatrix& Q, std::optional<std::span<const double>> stamps,
                                      const JointLimits& limits, double dt_output);

/// True when the trajectory's exact velocity and acceleration peaks are inside the limits.
bool within_rate_limits(const CubicSplineTrajectory& traj, const JointLimits& limits);

/// Dilate all durations by settings.dilation until `build` yields a
/// rate-compliant spline. Throws TimeAllocationFailure past the iteration cap.
Allocation allocate(std::vector<double> durations, const JointLimits& limits, const AllocationSettings& settings,
                    const SplineBuilder& build);

/// Durations for a rest-to-rest interpolating spline through Q.
std::vector<double> allocate_times(const WaypointMatrix& Q, std::optional<std::span<const double>> stamps,
                                   const JointLimits& limits, const AllocationSettings& settings = {});

/// Rest-to-rest point-to-point motion (static closed form over one segment).
/// q_from outside the position limits throws OutOfLimits; q_to is clamped and
/// `target_clamped` reports it.
CubicSplineTrajectory solve_ptp(const JointVector& q_from, const JointVector& q_to, const JointLimits& limits,
                                const AllocationSettings& settings = {}, bool* target_clamped = nullptr);

}  // namespace otg
