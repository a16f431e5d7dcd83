#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "otg/types.hpp"

namespace otg {

/// Nine significant digits, the precision used for every CSV value.
std::string format_value(double v);

/// Columns t,q_0,...,q_{n-1}. A file with no rows yields an empty vector;
/// `dof` receives the column count from the header when present.
std::vector<TimedWaypoint> read_waypoints_csv(std::istream& in, Eigen::Index* dof = nullptr);
std::vector<TimedWaypoint> read_waypoints_csv_file(const std::string& path, Eigen::Index* dof = nullptr);
void write_waypoints_csv(std::ostream& out, const std::vector<TimedWaypoint>& waypoints, Eigen::Index dof);

void write_commands_csv(std::ostream& out, const CommandStream& commands, Eigen::Index dof);
/// Ticks are recovered as round(t / dt_output).
CommandStream read_commands_csv(std::istream& in, double dt_output);

}  // namespace otg
