#include "otg/csv.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "otg/error.hpp"

namespace otg {
namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) {
    const auto b = cell.find_first_not_of(" \t\r");
    const auto e = cell.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? std::string() : cell.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double to_double(const std::string& cell, std::size_t line) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(cell, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (cell.empty() || used != cell.size()) {
    throw Error(ErrorKind::Parse, "line " + std::to_string(line) + ": '" + cell + "' is not a number");
  }
  return v;
}

void write_header(std::ostream& out, Eigen::Index dof) {
  out << 't';
  for (Eigen::Index j = 0; j < dof; ++j) out << ",q_" << j;
  out << '\n';
}

void write_row(std::ostream& out, double t, const JointVector& q) {
  out << format_value(t);
  for (Eigen::Index j = 0; j < q.size(); ++j) out << ',' << format_value(q(j));
  out << '\n';
}

}  // namespace

std::string format_value(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::vector<TimedWaypoint> read_waypoints_csv(std::istream& in, Eigen::Index* dof) {
  std::vector<TimedWaypoint> out;
  std::string line;
  std::size_t lineno = 0;
  Eigen::Index cols = -1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto cells = split(line);
    if (cols < 0) {
      if (cells.empty() || cells.front() != "t") throw Error(ErrorKind::Parse, "header must start with 't'");
      for (std::size_t j = 1; j < cells.size(); ++j) {
        if (cells[j] != "q_" + std::to_string(j - 1)) {
          throw Error(ErrorKind::Parse, "header column " + std::to_string(j) + " must be q_" + std::to_string(j - 1));
        }
      }
      cols = static_cast<Eigen::Index>(cells.size()) - 1;
      continue;
    }
    if (static_cast<Eigen::Index>(cells.size()) != cols + 1) {
      throw Error(ErrorKind::Parse, "line " + std::to_string(lineno) + ": expected " + std::to_string(cols + 1) + " columns");
    }
    TimedWaypoint wp{to_double(cells[0], lineno), JointVector(cols)};
    for (Eigen::Index j = 0; j < cols; ++j) wp.q(j) = to_double(cells[static_cast<std::size_t>(j + 1)], lineno);
    if (!out.empty() && !(wp.stamp > out.back().stamp)) {
      throw Error(ErrorKind::Input, "line " + std::to_string(lineno) + ": rows must be sorted by strictly increasing t");
    }
    out.push_back(std::move(wp));
  }
  if (dof && cols >= 0) *dof = cols;
  return out;
}

std::vector<TimedWaypoint> read_waypoints_csv_file(const std::string& path, Eigen::Index* dof) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Input, "cannot open '" + path + "'");
  return read_waypoints_csv(in, dof);
}

void write_waypoints_csv(std::ostream& out, const std::vector<TimedWaypoint>& waypoints, Eigen::Index dof) {
  write_header(out, dof);
  for (const auto& wp : waypoints) write_row(out, wp.stamp, wp.q);
}

void write_commands_csv(std::ostream& out, const CommandStream& commands, Eigen::Index dof) {
  write_header(out, dof);
  for (const auto& c : commands) write_row(out, c.time, c.q);
}

CommandStream read_commands_csv(std::istream& in, double dt_output) {
  CommandStream out;
  for (auto& wp : read_waypoints_csv(in)) {
    out.push_back({std::llround(wp.stamp / dt_output), wp.stamp, std::move(wp.q)});
  }
  return out;
}

}  // namespace otg
