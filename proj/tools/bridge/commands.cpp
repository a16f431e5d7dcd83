#include "bridge/commands.hpp"

#include <fstream>
#include <ostream>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "otg/csv.hpp"
#include "otg/robot_config.hpp"
#include "otg/urdf.hpp"

namespace otg::bridge {
namespace {

template <typename F>
int guarded(std::ostream& log, F&& body) {
  try {
    return body();
  } catch (const Error& e) {
    log << "error: " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    log << "error: " << e.what() << '\n';
    return kFailure;
  }
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Input, "cannot write " + path);
  return out;
}

std::vector<double> values(const JointVector& v) { return {v.data(), v.data() + v.size()}; }

struct Loaded {
  RobotConfig config;
  std::vector<TimedWaypoint> inputs;
};

Loaded load_inputs(const ServoArgs& args) {
  Loaded l{load_config(args.config), {}};
  Eigen::Index columns = -1;
  l.inputs = read_waypoints_csv_file(args.input, &columns);
  if (columns >= 0 && columns != l.config.dof()) {
    throw Error(ErrorKind::DofMismatch, fmt::format("{} has {} joint columns, {} expects {}", args.input, columns,
                                                    l.config.robot_name, l.config.dof()));
  }
  return l;
}

}  // namespace

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::ChainResolution:
      return kChainResolution;
    case ErrorKind::DofMismatch:
      return kDofMismatch;
    case ErrorKind::Parse:
    case ErrorKind::Validation:
    case ErrorKind::Topology:
    case ErrorKind::Input:
      return kBadInput;
    default:
      return kFailure;
  }
}

ServoSettings servo_settings(const ServoArgs& args, const JointLimits& limits) {
  ServoSettings s;
  s.mode = args.mode;
  s.mu = args.mu;
  s.beta = args.beta;
  if (!(args.output_rate_hz > 0.0)) throw Error(ErrorKind::InvalidParameter, "output rate must be > 0");
  s.dt_output = 1.0 / args.output_rate_hz;
  s.dt_servo = args.servo_dt;
  s.limits = limits;
  s.validate();
  return s;
}

std::optional<FilterSettings> filter_settings(const ServoArgs& args) {
  if (args.filter_cutoff_hz <= 0.0 && args.deadband <= 0.0) return std::nullopt;
  FilterSettings f;
  f.enabled = args.filter_cutoff_hz > 0.0;
  if (f.enabled) f.cutoff_hz = args.filter_cutoff_hz;
  f.deadband = args.deadband;
  f.validate();
  return f;
}

int run_gen_config(const GenConfigArgs& args, std::ostream& log) {
  return guarded(log, [&] {
    const RobotModel model = load_urdf(args.urdf);
    RobotConfig config;
    if (args.base && !args.tip) throw Error(ErrorKind::ChainResolution, "--tip is required with --base");
    if (args.tip) {
      config = generate_config(model, args.base.value_or(model.root_link()), *args.tip, args.accel_scale);
    } else {
      config = generate_config(model, args.accel_scale);
    }
    save_config(config, args.output);
    log << fmt::format("{}: {} -> {}, {} joints\n", config.robot_name, config.base, config.tip, config.dof());
    for (Eigen::Index j = 0; j < config.dof(); ++j) {
      const auto& l = config.limits;
      log << fmt::format("  {:<16} [{:.4g}, {:.4g}] rad  v {:.4g}  a {:.4g}\n", config.joint_names[static_cast<std::size_t>(j)],
                         l.lower(j), l.upper(j), l.velocity(j), l.acceleration(j));
    }
    return int{kOk};
  });
}

int run_servo_file(const ServoArgs& args, std::ostream& log) {
  return guarded(log, [&] {
    const Loaded in = load_inputs(args);
    ServoSettings settings = servo_settings(args, in.config.limits);
    RunOptions options;
    options.filter = filter_settings(args);
    std::ofstream out = open_output(args.output);
    if (in.inputs.empty()) {
      write_commands_csv(out, {}, in.config.dof());
      log << "no waypoints; wrote an empty command stream\n";
      return int{kOk};
    }
    JointVector q0 = in.inputs.front().q;
    settings.limits.clamp(q0);  // the simulated robot starts at the first target, inside its limits
    const ServoRun run = run_servo(in.inputs, q0, settings, options);
    write_commands_csv(out, run.commands, in.config.dof());
    const auto& d = run.diagnostics;
    log << fmt::format("{} waypoints -> {} commands at {:g} Hz ({} mode)\n", in.inputs.size(), run.commands.size(),
                       args.output_rate_hz, to_string(args.mode));
    log << fmt::format("replans {}  brakes {}  skipped {}  dropped {}  stale {}  filtered {}  failures {}\n", d.plans,
                       d.brake_plans, d.skipped_waypoints, d.dropped_inputs, d.stale_inputs, d.filtered_inputs,
                       d.planner_failures);
    log << fmt::format("max |v| [{:.4g}]\nmax |a| [{:.4g}]\n", fmt::join(values(d.max_abs_velocity), ", "),
                       fmt::join(values(d.max_abs_acceleration), ", "));
    if (!d.last_error.empty()) log << "last planner error: " << d.last_error << '\n';
    return int{kOk};
  });
}

int run_compare(const CompareArgs& args, std::ostream& log) {
  return guarded(log, [&] {
    const Loaded in = load_inputs(args.servo);
    const ServoSettings settings = servo_settings(args.servo, in.config.limits);
    RunOptions options;
    options.filter = filter_settings(args.servo);
    ActuatorModel actuator;
    actuator.mode = args.actuator;
    actuator.time_constant = args.time_constant;
    actuator.validate();

    const ComparisonReport report = compare_baseline(in.inputs, settings, actuator, options);
    std::ofstream out = open_output(args.report);
    out << report_to_json(report) << '\n';
    if (args.trace) {
      const ServoRun run = run_servo(in.inputs, in.inputs.front().q, settings, options);
      std::ofstream trace = open_output(*args.trace);
      write_trace_csv(trace, simulate(run.commands, actuator, in.inputs.front().q));
    }
    log << fmt::format("MAV interpolated [{:.4g}]  held [{:.4g}]\n", fmt::join(values(report.mav_uttg), ", "),
                       fmt::join(values(report.mav_hold), ", "));
    if (report.reduction_percent) {
      log << fmt::format("mean MAV reduction {:.1f}%\n", *report.reduction_percent);
    } else {
      log << "mean MAV reduction n/a (baseline has no acceleration)\n";
    }
    return int{kOk};
  });
}

}  // namespace otg::bridge
