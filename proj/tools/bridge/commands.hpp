#pragma once

#include <iosfwd>
#include <optional>
#include <string>

#include "otg/error.hpp"
#include "otg/servo_engine.hpp"
#include "otg/sim_harness.hpp"

namespace otg::bridge {

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kChainResolution = 2,
  kDofMismatch = 3,
  kBadInput = 4,  // parse, validation and topology errors
};

int exit_code(ErrorKind kind);

struct GenConfigArgs {
  std::string urdf;
  std::optional<std::string> base;
  std::optional<std::string> tip;
  std::string output;
  double accel_scale = 1.0;
};

struct ServoArgs {
  std::string config;
  std::string input;
  std::string output;
  ServoMode mode = ServoMode::Precise;
  std::optional<double> mu;
  double beta = 0.5;
  double output_rate_hz = 200.0;
  double servo_dt = 0.05;
  double filter_cutoff_hz = 0.0;  // 0 disables the input filter
  double deadband = 0.0;
};

struct CompareArgs {
  ServoArgs servo;  // `output` unused
  std::string report;
  std::optional<std::string> trace;
  ActuatorMode actuator = ActuatorMode::Perfect;
  double time_constant = 0.02;
};

/// Each verb prints a short summary to `log` and returns an ExitCode.
int run_gen_config(const GenConfigArgs& args, std::ostream& log);
int run_servo_file(const ServoArgs& args, std::ostream& log);
int run_compare(const CompareArgs& args, std::ostream& log);

ServoSettings servo_settings(const ServoArgs& args, const JointLimits& limits);
std::optional<FilterSettings> filter_settings(const ServoArgs& args);

}  // namespace otg::bridge
