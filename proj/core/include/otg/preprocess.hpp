#pragma once

#include <cstdint>
#include <optional>

#include "otg/types.hpp"

namespace otg {

struct FilterSettings {
  double cutoff_hz = 5.0;
  double deadband = 0.0;  // max-norm, radians
  bool enabled = true;    // low-pass stage; the deadband applies either way

  void validate() const;
};

enum class FilterOutcome { Forwarded, Suppressed, Stale };

struct FilterResult {
  FilterOutcome outcome = FilterOutcome::Suppressed;
  TimedWaypoint waypoint;  // meaningful only when forwarded
};

/// First-order low-pass with a post-smoothing deadband. One instance per
/// input stream.
class WaypointFilter {
 public:
  explicit WaypointFilter(FilterSettings settings = {});

  FilterResult push(const TimedWaypoint& raw);
  /// Throwing variant: a non-increasing timestamp raises StaleInput.
  std::optional<TimedWaypoint> filter(const TimedWaypoint& raw);

  void reset();
  const FilterSettings& settings() const { return settings_; }
  std::uint64_t stale_count() const { return stale_; }
  std::uint64_t suppressed_count() const { return suppressed_; }

 private:
  FilterSettings settings_;
  bool primed_ = false;
  double last_stamp_ = 0.0;
  JointVector state_;
  JointVector last_forwarded_;
  std::uint64_t stale_ = 0;
  std::uint64_t suppressed_ = 0;
};

}  // namespace otg
