#include "otg/preprocess.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "otg/error.hpp"

namespace otg {

void FilterSettings::validate() const {
  if (!(cutoff_hz > 0.0)) throw Error(ErrorKind::InvalidParameter, "filter cutoff must be > 0");
  if (!(deadband >= 0.0)) throw Error(ErrorKind::InvalidParameter, "deadband must be >= 0");
}

WaypointFilter::WaypointFilter(FilterSettings settings) : settings_(settings) { settings_.validate(); }

void WaypointFilter::reset() {
  primed_ = false;
  state_.resize(0);
  last_forwarded_.resize(0);
}

FilterResult WaypointFilter::push(const TimedWaypoint& raw) {
  if (primed_ && !(raw.stamp > last_stamp_)) {
    ++stale_;
    return {FilterOutcome::Stale, {}};
  }
  if (primed_ && raw.q.size() != state_.size()) {
    throw Error(ErrorKind::DofMismatch, "waypoint has " + std::to_string(raw.q.size()) + " joints, expected " +
                                            std::to_string(state_.size()));
  }

  if (!primed_) {
    state_ = raw.q;
    last_stamp_ = raw.stamp;
    last_forwarded_ = state_;
    primed_ = true;
    return {FilterOutcome::Forwarded, {raw.stamp, state_}};
  }

  const double dt = raw.stamp - last_stamp_;
  last_stamp_ = raw.stamp;
  if (settings_.enabled) {
    const double rc = 1.0 / (2.0 * std::numbers::pi * settings_.cutoff_hz);
    const double alpha = dt / (dt + rc);
    state_ += alpha * (raw.q - state_);
  } else {
    state_ = raw.q;
  }

  if ((state_ - last_forwarded_).lpNorm<Eigen::Infinity>() < settings_.deadband) {
    ++suppressed_;
    return {FilterOutcome::Suppressed, {}};
  }
  last_forwarded_ = state_;
  return {FilterOutcome::Forwarded, {raw.stamp, state_}};
}

std::optional<TimedWaypoint> WaypointFilter::filter(const TimedWaypoint& raw) {
  const FilterResult r = push(raw);
  if (r.outcome == FilterOutcome::Stale) {
    throw Error(ErrorKind::StaleInput, "timestamp " + std::to_string(raw.stamp) + " does not advance past " +
                                           std::to_string(last_stamp_));
  }
  if (r.outcome == FilterOutcome::Suppressed) return std::nullopt;
  return r.waypoint;
}

}  // namespace otg
