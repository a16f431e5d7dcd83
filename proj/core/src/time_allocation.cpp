#include "otg/time_allocation.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "otg/error.hpp"

namespace otg {
namespace {

constexpr double kRateSlack = 1e-9;

void check_limits(const JointLimits& limits, Eigen::Index dof) {
  if (limits.dof() != dof || limits.acceleration.size() != dof || limits.lower.size() != dof ||
      limits.upper.size() != dof) {
    throw Error(ErrorKind::DofMismatch, "joint limits do not match waypoint DoF " + std::to_string(dof));
  }
  if (!(limits.velocity.array() > 0.0).all() || !(limits.acceleration.array() > 0.0).all()) {
    throw Error(ErrorKind::InvalidParameter, "velocity and acceleration limits must be positive");
  }
}

}  // namespace

double heuristic_duration(const JointVector& from, const JointVector& to, const JointLimits& limits) {
  double t = 0.0;
  for (Eigen::Index j = 0; j < from.size(); ++j) {
    const double dq = std::abs(to(j) - from(j));
    t = std::max({t, 1.5 * dq / limits.velocity(j), std::sqrt(6.0 * dq / limits.acceleration(j))});
  }
  return t;
}

double quantize_duration(double seconds, double dt_output) {
  const double ticks = std::ceil(seconds / dt_output - 1e-9);
  return std::max(1.0, ticks) * dt_output;
}

std::vector<double> initial_durations(const WaypointMatrix& Q, std::optional<std::span<const double>> stamps,
                                      const JointLimits& limits, double dt_output) {
  if (Q.rows() < 2) throw Error(ErrorKind::InvalidParameter, "time allocation needs at least two waypoints");
  if (!(dt_output > 0.0)) throw Error(ErrorKind::InvalidParameter, "dt_output must be > 0");
  check_limits(limits, Q.cols());
  if (stamps && stamps->size() != static_cast<std::size_t>(Q.rows())) {
    throw Error(ErrorKind::InvalidParameter, "timestamp count does not match waypoints");
  }
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(Q.rows() - 1));
  for (Eigen::Index i = 0; i + 1 < Q.rows(); ++i) {
    double t = 0.0;
    if (stamps) {
      t = (*stamps)[static_cast<std::size_t>(i + 1)] - (*stamps)[static_cast<std::size_t>(i)];
      if (!(t > 0.0)) throw Error(ErrorKind::StaleInput, "timestamps must be strictly increasing");
    } else {
      t = heuristic_duration(Q.row(i).transpose(), Q.row(i + 1).transpose(), limits);
    }
    out.push_back(quantize_duration(t, dt_output));
  }
  return out;
}

bool within_rate_limits(const CubicSplineTrajectory& traj, const JointLimits& limits) {
  const KinematicPeaks peaks = kinematic_peaks(traj);
  return (peaks.max_abs_velocity.array() <= limits.velocity.array() * (1.0 + kRateSlack)).all() &&
         (peaks.max_abs_acceleration.array() <= limits.acceleration.array() * (1.0 + kRateSlack)).all();
}

Allocation allocate(std::vector<double> durations, const JointLimits& limits, const AllocationSettings& settings,
                    const SplineBuilder& build) {
  if (!(settings.dilation > 1.0)) throw Error(ErrorKind::InvalidParameter, "dilation factor must exceed 1");
  for (int round = 0; round <= settings.max_iterations; ++round) {
    CubicSplineTrajectory traj = build(KnotSequence(durations, settings.beta));
    if (within_rate_limits(traj, limits)) return {std::move(durations), std::move(traj), round};
    for (double& t : durations) t = quantize_duration(t * settings.dilation, settings.dt_output);
  }
  throw Error(ErrorKind::TimeAllocationFailure,
              "limits still violated after " + std::to_string(settings.max_iterations) + " dilations");
}

std::vector<double> allocate_times(const WaypointMatrix& Q, std::optional<std::span<const double>> stamps,
                                   const JointLimits& limits, const AllocationSettings& settings) {
  const BoundaryState rest = BoundaryState::rest(Q.cols());
  return allocate(initial_durations(Q, stamps, limits, settings.dt_output), limits, settings,
                  [&](const KnotSequence& knots) { return interpolating_spline(Q, rest, knots); })
      .durations;
}

CubicSplineTrajectory solve_ptp(const JointVector& q_from, const JointVector& q_to, const JointLimits& limits,
                                const AllocationSettings& settings, bool* target_clamped) {
  if (q_from.size() != q_to.size()) throw Error(ErrorKind::DofMismatch, "point-to-point endpoints differ in DoF");
  check_limits(limits, q_from.size());
  if (!limits.contains(q_from, 1e-9)) throw Error(ErrorKind::OutOfLimits, "start configuration outside position limits");
  JointVector target = q_to;
  const bool clamped = limits.clamp(target);
  if (target_clamped) *target_clamped = clamped;

  if ((target - q_from).lpNorm<Eigen::Infinity>() == 0.0) {
    return CubicSplineTrajectory::hold(q_from, settings.dt_output);
  }
  WaypointMatrix Q(2, q_from.size());
  Q.row(0) = q_from.transpose();
  Q.row(1) = target.transpose();
  const double t0 = quantize_duration(heuristic_duration(q_from, target, limits), settings.dt_output);
  return allocate({t0}, limits, settings,
                  [&](const KnotSequence& knots) { return static_min_stretch(Q, 0.0, knots); })
      .trajectory;
}

}  // namespace otg
