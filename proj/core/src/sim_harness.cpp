#include "otg/sim_harness.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>

#include <nlohmann/json.hpp>

#include "otg/csv.hpp"
#include "otg/error.hpp"

namespace otg {
namespace {

// Baseline MAV below this is finite-difference roundoff on a still joint.
constexpr double kStillJointMav = 1e-9;

JointVector row_mean(const Eigen::MatrixXd& m) { return m.colwise().mean().transpose(); }

// Input stream sampled at time t (relative to its first stamp), linear between samples.
JointVector reference_at(const std::vector<TimedWaypoint>& inputs, double t) {
  const double t0 = inputs.front().stamp;
  const auto it = std::upper_bound(inputs.begin(), inputs.end(), t,
                                   [t0](double v, const TimedWaypoint& w) { return v < w.stamp - t0; });
  if (it == inputs.begin()) return inputs.front().q;
  if (it == inputs.end()) return inputs.back().q;
  const auto& b = *it;
  const auto& a = *(it - 1);
  const double s = (t - (a.stamp - t0)) / (b.stamp - a.stamp);
  return a.q + s * (b.q - a.q);
}

JointVector tracking_rmse(const Trace& trace, const std::vector<TimedWaypoint>& inputs) {
  JointVector sum = JointVector::Zero(trace.dof());
  for (Eigen::Index i = 0; i < trace.size(); ++i) {
    const JointVector e = trace.positions.row(i).transpose() - reference_at(inputs, trace.times[static_cast<std::size_t>(i)]);
    sum += e.cwiseAbs2();
  }
  return (sum / static_cast<double>(std::max<Eigen::Index>(1, trace.size()))).cwiseSqrt();
}

nlohmann::json to_array(const JointVector& v) {
  auto out = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    out.push_back(std::isfinite(v(i)) ? nlohmann::json(v(i)) : nlohmann::json(nullptr));
  }
  return out;
}

}  // namespace

void ActuatorModel::validate() const {
  if (mode == ActuatorMode::FirstOrderLag && !(time_constant > 0.0)) {
    throw Error(ErrorKind::InvalidParameter, "lag time constant must be > 0");
  }
  if (!(rate_hz > 0.0)) throw Error(ErrorKind::InvalidParameter, "feedback rate must be > 0");
}

Trace differentiate(std::vector<double> times, Eigen::MatrixXd x) {
  const Eigen::Index n = x.rows();
  if (n < 3 || static_cast<Eigen::Index>(times.size()) != n) {
    throw Error(ErrorKind::Input, "a trace needs at least three samples");
  }
  const double h = (times.back() - times.front()) / static_cast<double>(n - 1);
  if (!(h > 0.0)) throw Error(ErrorKind::Input, "trace times must increase");
  Eigen::MatrixXd v(n, x.cols()), a(n, x.cols());
  for (Eigen::Index i = 1; i + 1 < n; ++i) {
    v.row(i) = (x.row(i + 1) - x.row(i - 1)) / (2.0 * h);
    a.row(i) = (x.row(i + 1) - 2.0 * x.row(i) + x.row(i - 1)) / (h * h);
  }
  v.row(0) = (-3.0 * x.row(0) + 4.0 * x.row(1) - x.row(2)) / (2.0 * h);
  v.row(n - 1) = (3.0 * x.row(n - 1) - 4.0 * x.row(n - 2) + x.row(n - 3)) / (2.0 * h);
  if (n >= 4) {
    a.row(0) = (2.0 * x.row(0) - 5.0 * x.row(1) + 4.0 * x.row(2) - x.row(3)) / (h * h);
    a.row(n - 1) = (2.0 * x.row(n - 1) - 5.0 * x.row(n - 2) + 4.0 * x.row(n - 3) - x.row(n - 4)) / (h * h);
  } else {
    a.row(0) = a.row(1);
    a.row(n - 1) = a.row(n - 2);
  }
  return {std::move(times), std::move(x), std::move(v), std::move(a)};
}

Trace simulate(const CommandStream& commands, const ActuatorModel& model, const std::optional<JointVector>& initial) {
  model.validate();
  if (commands.empty()) throw Error(ErrorKind::Input, "no commands to simulate");
  for (std::size_t i = 1; i < commands.size(); ++i) {
    if (!(commands[i].time > commands[i - 1].time)) throw Error(ErrorKind::Input, "commands are not time-ordered");
  }
  const Eigen::Index dof = commands.front().q.size();

  if (model.mode == ActuatorMode::Perfect) {
    const double h = commands.size() > 1 ? commands[1].time - commands[0].time : 0.0;
    std::vector<double> times;
    Eigen::MatrixXd x(static_cast<Eigen::Index>(commands.size()), dof);
    for (std::size_t i = 0; i < commands.size(); ++i) {
      if (i > 0 && std::abs(commands[i].time - commands[i - 1].time - h) > 1e-9) {
        throw Error(ErrorKind::Input, "perfect-mode commands must be uniformly spaced");
      }
      times.push_back(commands[i].time);
      x.row(static_cast<Eigen::Index>(i)) = commands[i].q.transpose();
    }
    return differentiate(std::move(times), std::move(x));
  }

  const double h = 1.0 / model.rate_hz;
  const double decay = std::exp(-h / model.time_constant);
  const double t_start = commands.front().time;
  const auto steps = static_cast<Eigen::Index>(std::floor((commands.back().time - t_start) / h + 1e-9)) + 1;
  std::vector<double> times;
  Eigen::MatrixXd x(steps, dof);
  JointVector state = initial ? *initial : commands.front().q;
  std::size_t held = 0;
  for (Eigen::Index k = 0; k < steps; ++k) {
    const double t = t_start + static_cast<double>(k) * h;
    times.push_back(t);
    x.row(k) = state.transpose();
    while (held + 1 < commands.size() && commands[held + 1].time <= t + 1e-12) ++held;
    const JointVector& u = commands[held].q;
    state = u + (state - u) * decay;
  }
  return differentiate(std::move(times), std::move(x));
}

JointVector mean_abs(const Eigen::MatrixXd& samples) {
  if (samples.rows() == 0) throw Error(ErrorKind::Input, "no samples");
  return row_mean(samples.cwiseAbs());
}

JointVector mav(const Trace& trace) {
  if (trace.size() < 3) throw Error(ErrorKind::Input, "MAV needs at least three samples");
  return mean_abs(trace.accelerations);
}

JointVector abs_acceleration_std(const Trace& trace) {
  if (trace.size() < 3) throw Error(ErrorKind::Input, "a spread needs at least three samples");
  const Eigen::MatrixXd a = trace.accelerations.cwiseAbs();
  const Eigen::RowVectorXd mean = a.colwise().mean();
  return ((a.rowwise() - mean).cwiseAbs2().colwise().mean()).cwiseSqrt().transpose();
}

CommandStream zero_order_hold(const std::vector<TimedWaypoint>& inputs, double dt_output, std::int64_t ticks) {
  CommandStream out;
  if (inputs.empty()) return out;
  const double t0 = inputs.front().stamp;
  std::size_t current = 0;
  for (std::int64_t k = 1; k <= ticks; ++k) {
    const double t = static_cast<double>(k) * dt_output;
    // Same delivery rule as run_servo: an input is usable once its stamp is due.
    while (current + 1 < inputs.size() && inputs[current + 1].stamp - t0 <= t - dt_output + 1e-9) ++current;
    out.push_back({k, t, inputs[current].q});
  }
  return out;
}

ComparisonReport compare_baseline(const std::vector<TimedWaypoint>& inputs, const ServoSettings& settings,
                                  const ActuatorModel& actuator, const RunOptions& options) {
  if (inputs.size() < 2) throw Error(ErrorKind::Input, "comparison needs at least two waypoints");
  const JointVector q0 = inputs.front().q;
  const ServoRun run = run_servo(inputs, q0, settings, options);
  if (run.commands.size() < 3) throw Error(ErrorKind::Input, "engine produced too few commands to compare");
  const CommandStream hold = zero_order_hold(inputs, settings.dt_output, static_cast<std::int64_t>(run.commands.size()));

  const Trace uttg = simulate(run.commands, actuator, q0);
  const Trace base = simulate(hold, actuator, q0);

  ComparisonReport r;
  r.mav_uttg = mav(uttg);
  r.mav_hold = mav(base);
  r.std_uttg = abs_acceleration_std(uttg);
  r.std_hold = abs_acceleration_std(base);
  r.reduction_per_joint = JointVector::Constant(q0.size(), std::numeric_limits<double>::quiet_NaN());
  double sum = 0.0;
  int counted = 0;
  for (Eigen::Index j = 0; j < q0.size(); ++j) {
    if (r.mav_hold(j) > kStillJointMav) {
      r.reduction_per_joint(j) = 100.0 * (1.0 - r.mav_uttg(j) / r.mav_hold(j));
      sum += r.reduction_per_joint(j);
      ++counted;
    }
  }
  if (counted > 0) r.reduction_percent = sum / counted;
  r.rmse_uttg = tracking_rmse(uttg, inputs);
  r.rmse_hold = tracking_rmse(base, inputs);
  r.commands = run.commands.size();
  r.dt_output = settings.dt_output;
  return r;
}

std::string report_to_json(const ComparisonReport& r, int indent) {
  const nlohmann::json doc{
      {"mav_uttg", to_array(r.mav_uttg)},
      {"mav_hold", to_array(r.mav_hold)},
      {"std_uttg", to_array(r.std_uttg)},
      {"std_hold", to_array(r.std_hold)},
      {"reduction_per_joint", to_array(r.reduction_per_joint)},
      {"reduction_percent", r.reduction_percent ? nlohmann::json(*r.reduction_percent) : nlohmann::json(nullptr)},
      {"rmse", to_array(r.rmse_uttg)},
      {"rmse_hold", to_array(r.rmse_hold)},
      {"commands", r.commands},
      {"dt_output", r.dt_output},
  };
  return doc.dump(indent);
}

void write_trace_csv(std::ostream& out, const Trace& trace) {
  out << 't';
  for (const char* prefix : {"q_", "v_", "a_"}) {
    for (Eigen::Index j = 0; j < trace.dof(); ++j) out << ',' << prefix << j;
  }
  out << '\n';
  for (Eigen::Index i = 0; i < trace.size(); ++i) {
    out << format_value(trace.times[static_cast<std::size_t>(i)]);
    for (const Eigen::MatrixXd* m : {&trace.positions, &trace.velocities, &trace.accelerations}) {
      for (Eigen::Index j = 0; j < trace.dof(); ++j) out << ',' << format_value((*m)(i, j));
    }
    out << '\n';
  }
}

std::vector<TimedWaypoint> standard_stream() {
  constexpr int kSamples = 100;
  constexpr double kRate = 20.0;
  const double span = (kSamples - 1) / kRate;
  const double amp[2] = {0.8, 0.5};
  const double freq[2] = {0.5, 0.3};
  std::vector<TimedWaypoint> out;
  for (int k = 0; k < kSamples; ++k) {
    const double t = k / kRate;
    const double window = std::pow(std::sin(std::numbers::pi * t / span), 2);
    JointVector q(2);
    for (int j = 0; j < 2; ++j) q(j) = amp[j] * window * std::sin(2.0 * std::numbers::pi * freq[j] * t);
    out.push_back({t, q});
  }
  return out;
}

std::vector<TimedWaypoint> step_stream(const JointVector& a, const JointVector& b) {
  std::vector<TimedWaypoint> out;
  for (int k = 0; k < 100; ++k) out.push_back({k / 20.0, k < 20 ? a : b});
  return out;
}

std::vector<TimedWaypoint> step_stream() {
  JointVector a(2), b(2);
  a << 0.6, -0.4;
  b << -0.5, 0.7;
  return step_stream(a, b);
}

std::vector<TimedWaypoint> constant_stream(const JointVector& q, std::size_t samples, double rate_hz) {
  std::vector<TimedWaypoint> out;
  for (std::size_t k = 0; k < samples; ++k) out.push_back({static_cast<double>(k) / rate_hz, q});
  return out;
}

}  // namespace otg
