#include "otg/servo_engine.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>

#include "otg/error.hpp"

namespace otg {
namespace {

constexpr double kMergeTolerance = 1e-6;
constexpr double kRestTolerance = 1e-8;
// Input gaps longer than this are pauses, not motion timing.
constexpr double kPauseGap = 1.0;
// Largest eigenvalue of the position-to-energy form of a uniform spline is about 48 / T^3;
// fit weights on that scale make (1 - mu) / mu the relative smoothing of the stiffest mode.
constexpr double kStiffestMode = 48.0;

std::int64_t to_ticks(double seconds, double dt) { return std::llround(seconds / dt); }

double max_norm(const JointVector& v) { return v.size() == 0 ? 0.0 : v.lpNorm<Eigen::Infinity>(); }

}  // namespace

const char* to_string(ServoMode mode) noexcept { return mode == ServoMode::Precise ? "precise" : "rapid"; }

ServoMode parse_servo_mode(const std::string& text) {
  if (text == "precise") return ServoMode::Precise;
  if (text == "rapid") return ServoMode::Rapid;
  throw Error(ErrorKind::InvalidParameter, "unknown servo mode '" + text + "' (expected precise or rapid)");
}

double ServoSettings::effective_mu() const { return effective_mu(mode); }

double ServoSettings::effective_mu(ServoMode m) const {
  if (mu) return *mu;
  return m == ServoMode::Precise ? 0.999 : 0.9;
}

std::int64_t ServoSettings::servo_ticks() const { return std::max<std::int64_t>(1, to_ticks(dt_servo, dt_output)); }

void ServoSettings::validate() const {
  if (!(dt_output > 0.0)) throw Error(ErrorKind::InvalidParameter, "dt_output must be > 0");
  if (!(dt_servo >= dt_output * (1.0 - 1e-12))) throw Error(ErrorKind::InvalidParameter, "dt_servo must be >= dt_output");
  if (mu && !(*mu > 0.0 && *mu <= 1.0)) throw Error(ErrorKind::InvalidParameter, "mu must lie in (0, 1]");
  if (!(beta > 0.0 && beta < 1.0)) throw Error(ErrorKind::InvalidParameter, "beta must lie in (0, 1)");
  if (buffer_capacity == 0) throw Error(ErrorKind::InvalidParameter, "buffer capacity must be positive");
  const Eigen::Index n = limits.dof();
  if (n == 0 || limits.lower.size() != n || limits.upper.size() != n || limits.acceleration.size() != n) {
    throw Error(ErrorKind::InvalidParameter, "joint limits are incomplete");
  }
  if (!(limits.velocity.array() > 0.0).all() || !(limits.acceleration.array() > 0.0).all()) {
    throw Error(ErrorKind::InvalidParameter, "velocity and acceleration limits must be positive");
  }
}

WaypointBuffer::WaypointBuffer(std::size_t capacity) : capacity_(std::max<std::size_t>(1, capacity)) {}

bool WaypointBuffer::push(TimedWaypoint wp) {
  std::lock_guard lock(mutex_);
  if (last_stamp_ && !(wp.stamp > *last_stamp_)) {
    ++rejected_;
    return false;
  }
  if (entries_.size() >= capacity_) {
    entries_.pop_front();
    ++dropped_;
  }
  last_stamp_ = wp.stamp;
  entries_.push_back(std::move(wp));
  return true;
}

std::optional<TimedWaypoint> WaypointBuffer::pop_front() {
  std::lock_guard lock(mutex_);
  if (entries_.empty()) return std::nullopt;
  TimedWaypoint wp = std::move(entries_.front());
  entries_.pop_front();
  return wp;
}

std::optional<TimedWaypoint> WaypointBuffer::pop_newest(std::size_t* skipped) {
  std::lock_guard lock(mutex_);
  if (skipped) *skipped = entries_.empty() ? 0 : entries_.size() - 1;
  if (entries_.empty()) return std::nullopt;
  TimedWaypoint wp = std::move(entries_.back());
  entries_.clear();
  return wp;
}

std::vector<TimedWaypoint> WaypointBuffer::drain() {
  std::lock_guard lock(mutex_);
  std::vector<TimedWaypoint> out(std::make_move_iterator(entries_.begin()), std::make_move_iterator(entries_.end()));
  entries_.clear();
  return out;
}

std::size_t WaypointBuffer::size() const {
  std::lock_guard lock(mutex_);
  return entries_.size();
}

bool WaypointBuffer::empty() const { return size() == 0; }

std::uint64_t WaypointBuffer::dropped() const {
  std::lock_guard lock(mutex_);
  return dropped_;
}

std::uint64_t WaypointBuffer::rejected() const {
  std::lock_guard lock(mutex_);
  return rejected_;
}

WaypointMatrix plan_joint_path(const JointVector& q_current, const JointVector& q_end, const JointVector& q_new) {
  if (q_end.size() != q_current.size() || q_new.size() != q_current.size()) {
    throw Error(ErrorKind::DofMismatch, "joint path points differ in DoF");
  }
  std::vector<JointVector> rows{q_current};
  for (const JointVector* q : {&q_end, &q_new}) {
    if (max_norm(*q - rows.back()) >= kMergeTolerance) {
      rows.push_back(*q);
    } else if (rows.size() > 1) {
      rows.back() = *q;
    }
  }
  WaypointMatrix out(static_cast<Eigen::Index>(rows.size()), q_current.size());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
  return out;
}

CommandStream execute_trajectory(const CubicSplineTrajectory& traj, double horizon, double dt_output,
                                 std::int64_t first_tick) {
  if (!(dt_output > 0.0)) throw Error(ErrorKind::InvalidParameter, "dt_output must be > 0");
  const double span = std::clamp(horizon, 0.0, traj.duration());
  const auto count = static_cast<std::int64_t>(std::floor(span / dt_output + 1e-9));
  CommandStream out;
  out.reserve(static_cast<std::size_t>(count));
  for (std::int64_t k = 1; k <= count; ++k) {
    const std::int64_t tick = first_tick + k - 1;
    out.push_back({tick, static_cast<double>(tick) * dt_output, traj.position(static_cast<double>(k) * dt_output)});
  }
  return out;
}

ServoEngine::ServoEngine(ServoSettings settings, JointVector initial_q)
    : settings_(std::move(settings)), mode_(settings_.mode), q_(std::move(initial_q)) {
  settings_.validate();
  if (q_.size() != settings_.limits.dof()) {
    throw Error(ErrorKind::DofMismatch, "initial state has " + std::to_string(q_.size()) + " joints, limits have " +
                                            std::to_string(settings_.limits.dof()));
  }
  if (!settings_.limits.contains(q_, 1e-9)) throw Error(ErrorKind::OutOfLimits, "initial state outside position limits");
  qd_ = JointVector::Zero(q_.size());
  qdd_ = JointVector::Zero(q_.size());
  diag_.max_abs_velocity = JointVector::Zero(q_.size());
  diag_.max_abs_acceleration = JointVector::Zero(q_.size());
}

void ServoEngine::request_mode(ServoMode mode) {
  if (mode == mode_) {
    requested_mode_.reset();
  } else {
    requested_mode_ = mode;
  }
}

std::optional<Command> ServoEngine::step(WaypointBuffer& buffer, bool start_servo) {
  plan_if_due(buffer, start_servo);
  ++tick_;
  if (!started_) return std::nullopt;

  const double dt = settings_.dt_output;
  if (traj_) {
    ++clock_;
    traj_->eval(static_cast<double>(clock_) * dt, q_, qd_, qdd_);
    record_arrivals();
  } else {
    qd_.setZero();
    qdd_.setZero();
  }
  Command cmd{tick_, static_cast<double>(tick_) * dt, q_};
  if (settings_.limits.clamp(cmd.q)) ++diag_.clamped_commands;
  diag_.max_abs_velocity = diag_.max_abs_velocity.cwiseMax(qd_.cwiseAbs());
  diag_.max_abs_acceleration = diag_.max_abs_acceleration.cwiseMax(qdd_.cwiseAbs());
  ++diag_.commands;
  return cmd;
}

bool ServoEngine::finished(const WaypointBuffer& buffer, bool start_servo) const {
  if (start_servo || !buffer.empty() || !pending_.empty() || carry_) return false;
  return !started_ || !traj_ || (traj_finished() && !moving());
}

void ServoEngine::record_arrivals() {
  while (next_knot_ < knot_ticks_.size() && clock_ >= knot_ticks_[next_knot_]) {
    if (!pending_.empty()) {
      visits_.push_back({pending_.front().stamp, tick_, pending_.front().q, q_});
      last_target_ = pending_.front();
      pending_.pop_front();
    }
    ++next_knot_;
  }
}

void ServoEngine::plan_if_due(WaypointBuffer& buffer, bool start_servo) {
  const std::uint64_t plans_before = diag_.plans;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    if (!started_) {
      std::optional<TimedWaypoint> first;
      if (mode_ == ServoMode::Rapid) {
        std::size_t skipped = 0;
        first = buffer.pop_newest(&skipped);
        diag_.skipped_waypoints += skipped;
      } else {
        first = buffer.pop_front();
      }
      if (!first) return;
      started_ = true;
      start_ptp(take(*first));
    } else {
      const bool due = !traj_ || clock_ >= decision_tick_;
      if (due && requested_mode_) {
        if (*requested_mode_ == ServoMode::Rapid && !pending_.empty()) {
          carry_ = pending_.back();
          pending_.clear();
        }
        mode_ = *requested_mode_;
        requested_mode_.reset();
        if (traj_) decision_tick_ = clock_;
      }
      if (mode_ == ServoMode::Precise) {
        precise_step(buffer, start_servo);
      } else {
        rapid_step(buffer, start_servo);
      }
    }
  } catch (const std::exception& e) {
    on_failure(e);
  }
  if (diag_.plans != plans_before) {
    const auto elapsed = std::chrono::steady_clock::now() - t0;
    diag_.replan_latency_us.push_back(std::chrono::duration<double, std::micro>(elapsed).count());
  }
}

void ServoEngine::precise_step(WaypointBuffer& buffer, bool start_servo) {
  if (carry_) {
    pending_.push_back(*carry_);
    carry_.reset();
  }
  const bool at_decision = traj_ && clock_ >= decision_tick_;
  if (!buffer.empty() && (!traj_ || pending_.empty() || at_decision)) {
    for (const TimedWaypoint& wp : buffer.drain()) {
      Target t = take(wp);
      if (!pending_.empty() && !(t.stamp > pending_.back().stamp)) continue;
      pending_.push_back(std::move(t));
    }
    plan_precise(start_servo);
    return;
  }
  if (!traj_) {
    if (!pending_.empty()) plan_precise(start_servo);
    return;
  }
  if (!at_decision) return;
  if (!pending_.empty()) {
    decision_tick_ = knot_ticks_[std::min(next_knot_, knot_ticks_.size() - 1)];
  } else if (traj_finished()) {
    moving() ? plan_brake() : go_idle();
  } else {
    decision_tick_ = total_ticks_;
  }
}

void ServoEngine::rapid_step(WaypointBuffer& buffer, bool start_servo) {
  const bool due = !traj_ || clock_ >= decision_tick_;
  if (!due) return;
  std::vector<TimedWaypoint> incoming = buffer.drain();
  if (!incoming.empty()) {
    diag_.skipped_waypoints += incoming.size() - 1 + (carry_ ? 1 : 0);
    carry_.reset();
    std::optional<Target> newest;
    for (const TimedWaypoint& wp : incoming) newest = take(wp);
    plan_rapid(*newest, start_servo);
    return;
  }
  if (carry_) {
    const Target t = *carry_;
    carry_.reset();
    plan_rapid(t, start_servo);
    return;
  }
  if (!traj_) return;
  if (traj_finished()) {
    moving() ? plan_brake() : go_idle();
    return;
  }
  decision_tick_ = std::min(clock_ + settings_.servo_ticks(), total_ticks_);
}

void ServoEngine::start_ptp(const Target& target) {
  CubicSplineTrajectory traj = solve_ptp(q_, target.q, settings_.limits, allocation());
  pending_.clear();
  if (mode_ == ServoMode::Precise) {
    pending_.push_back(target);
  } else {
    last_target_ = target;
  }
  install(PlanKind::PointToPoint, std::move(traj), {target});
}

void ServoEngine::plan_precise(bool start_servo) {
  const std::size_t n = pending_.size() + 1;
  const Eigen::Index dof = q_.size();
  WaypointMatrix Q(static_cast<Eigen::Index>(n), dof);
  Q.row(0) = q_.transpose();
  std::vector<double> durations;
  durations.reserve(n - 1);
  for (std::size_t i = 0; i < pending_.size(); ++i) {
    Q.row(static_cast<Eigen::Index>(i + 1)) = pending_[i].q.transpose();
    double gap = 0.0;
    if (i > 0) {
      gap = pending_[i].stamp - pending_[i - 1].stamp;
    } else if (last_target_) {
      gap = pending_[0].stamp - last_target_->stamp;
    }
    const JointVector from = i == 0 ? q_ : pending_[i - 1].q;
    durations.push_back(quantize_duration(segment_time(gap, from, pending_[i].q), settings_.dt_output));
  }

  auto [vf, af] = terminal_state(start_servo);
  const BoundaryState boundary{qd_, qdd_, vf, af};

  const double mu = settings_.effective_mu(ServoMode::Precise);
  Allocation result = allocate(std::move(durations), settings_.limits, allocation(), [&](const KnotSequence& knots) {
    return min_stretch_spline(Q, fit_weights(knots.raw(), n, mu), boundary, knots);
  });
  install(PlanKind::Precise, std::move(result.trajectory), std::vector<Target>(pending_.begin(), pending_.end()));
}

void ServoEngine::plan_rapid(const Target& target, bool start_servo) {
  const Eigen::Index dof = q_.size();
  const JointVector q_end = traj_ ? traj_->end_position() : q_;
  const std::int64_t remaining = traj_ ? remaining_ticks() : 0;
  WaypointMatrix Q = plan_joint_path(q_, q_end, target.q);

  const double gap = last_target_ ? target.stamp - last_target_->stamp : 0.0;
  const double dt = settings_.dt_output;
  const double t_new = quantize_duration(segment_time(gap, q_end, target.q), dt);
  // Never slower than the live plan, but free to catch up when the limits allow.
  const double t_rem = std::min(static_cast<double>(std::max<std::int64_t>(1, remaining)) * dt,
                                quantize_duration(heuristic_duration(q_, q_end, settings_.limits), dt));

  std::vector<double> durations;
  if (Q.rows() == 1) {
    if (!moving()) {
      last_target_ = target;
      go_idle();
      return;
    }
    Q.resize(2, dof);
    Q.row(0) = q_.transpose();
    Q.row(1) = target.q.transpose();
    durations = {quantize_duration(segment_time(gap, q_, target.q), dt)};
  } else if (Q.rows() == 2) {
    const bool at_end = max_norm(q_ - q_end) < kMergeTolerance;
    durations = {at_end || remaining == 0 ? t_new : t_rem};
  } else {
    durations = {t_rem, t_new};
  }

  auto [vf, af] = terminal_state(start_servo);
  const BoundaryState boundary{qd_, qdd_, vf, af};

  const auto knots_count = static_cast<std::size_t>(Q.rows());
  const double mu = settings_.effective_mu(ServoMode::Rapid);
  Allocation result = allocate(std::move(durations), settings_.limits, allocation(), [&](const KnotSequence& knots) {
    return min_stretch_spline(Q, fit_weights(knots.raw(), knots_count, mu), boundary, knots);
  });
  pending_.clear();
  last_target_ = target;
  install(PlanKind::Rapid, std::move(result.trajectory), {target});
}

void ServoEngine::plan_brake() {
  const Eigen::Index dof = q_.size();
  const auto& lim = settings_.limits;
  double t0 = 0.0;
  for (Eigen::Index j = 0; j < dof; ++j) {
    t0 = std::max(t0, (2.0 * std::abs(qd_(j)) + std::abs(qdd_(j)) * settings_.dt_output) / lim.acceleration(j) +
                          std::abs(qdd_(j)) / lim.acceleration(j));
  }
  const JointVector q0 = q_;
  const BoundaryState boundary{qd_, qdd_, JointVector::Zero(dof), JointVector::Zero(dof)};
  Allocation result = allocate({quantize_duration(t0, settings_.dt_output)}, lim, allocation(), [&](const KnotSequence& knots) {
    JointVector stop = q0 + boundary.v0 * (knots.total() / 2.0);
    lim.clamp(stop);
    WaypointMatrix Q(2, dof);
    Q.row(0) = q0.transpose();
    Q.row(1) = stop.transpose();
    return interpolating_spline(Q, boundary, knots);
  });
  pending_.clear();
  ++diag_.brake_plans;
  install(PlanKind::Brake, std::move(result.trajectory), {});
}

void ServoEngine::go_idle() {
  traj_.reset();
  clock_ = 0;
  total_ticks_ = 0;
  knot_ticks_.clear();
  next_knot_ = 1;
  decision_tick_ = 0;
  pending_.clear();
  qd_.setZero();
  qdd_.setZero();
}

void ServoEngine::install(PlanKind kind, CubicSplineTrajectory traj, std::vector<Target> targets) {
  const double dt = settings_.dt_output;
  knot_ticks_.clear();
  for (double t : traj.issued_times()) knot_ticks_.push_back(to_ticks(t, dt));
  total_ticks_ = knot_ticks_.back();
  clock_ = 0;
  next_knot_ = 1;
  decision_tick_ = mode_ == ServoMode::Precise ? knot_ticks_[1] : std::min(settings_.servo_ticks(), total_ticks_);
  ++diag_.plans;
  if (settings_.record_plans) {
    PlanRecord rec{kind, tick_, traj, knot_ticks_, WaypointMatrix(static_cast<Eigen::Index>(targets.size()), q_.size()), {}};
    for (std::size_t i = 0; i < targets.size(); ++i) {
      rec.targets.row(static_cast<Eigen::Index>(i)) = targets[i].q.transpose();
      rec.target_stamps.push_back(targets[i].stamp);
    }
    plans_.push_back(std::move(rec));
  }
  traj_ = std::move(traj);
}

void ServoEngine::on_failure(const std::exception& e) {
  ++diag_.planner_failures;
  diag_.last_error = e.what();
  if (moving()) {
    try {
      plan_brake();
      return;
    } catch (const std::exception& inner) {
      diag_.last_error += std::string("; brake failed: ") + inner.what();
    }
  }
  go_idle();
}

bool ServoEngine::moving() const { return max_norm(qd_) > kRestTolerance || max_norm(qdd_) > kRestTolerance; }

bool ServoEngine::traj_finished() const { return traj_ && clock_ >= total_ticks_; }

std::int64_t ServoEngine::remaining_ticks() const { return std::max<std::int64_t>(0, total_ticks_ - clock_); }

ServoEngine::Target ServoEngine::take(const TimedWaypoint& wp) {
  if (wp.q.size() != q_.size()) {
    throw Error(ErrorKind::DofMismatch,
                "waypoint has " + std::to_string(wp.q.size()) + " joints, expected " + std::to_string(q_.size()));
  }
  if (!wp.q.allFinite()) throw Error(ErrorKind::Input, "waypoint contains non-finite values");
  Target t{wp.stamp, wp.q};
  if (settings_.limits.clamp(t.q)) ++diag_.clamped_targets;
  remember(t);
  return t;
}

double ServoEngine::segment_time(double gap, const JointVector& from, const JointVector& to) const {
  if (gap > 0.0 && gap <= kPauseGap) return gap;
  return heuristic_duration(from, to, settings_.limits);
}

std::pair<JointVector, JointVector> ServoEngine::terminal_state(bool start_servo) const {
  const Eigen::Index dof = q_.size();
  JointVector v = JointVector::Zero(dof), a = JointVector::Zero(dof);
  if (!start_servo || recent_.size() < 2) return {v, a};
  const Target& q2 = recent_[recent_.size() - 1];
  const Target& q1 = recent_[recent_.size() - 2];
  const double h2 = q2.stamp - q1.stamp;
  if (!(h2 > 0.0) || h2 > kPauseGap) return {v, a};
  if (recent_.size() >= 3 && recent_[recent_.size() - 3].stamp < q1.stamp &&
      q1.stamp - recent_[recent_.size() - 3].stamp <= kPauseGap) {
    // Derivatives of the quadratic through the last three samples, at the newest.
    const Target& q0 = recent_[recent_.size() - 3];
    const double h1 = q1.stamp - q0.stamp, h = h1 + h2;
    v = q2.q * ((2.0 * h2 + h1) / (h2 * h)) - q1.q * (h / (h1 * h2)) + q0.q * (h2 / (h1 * h));
    a = 2.0 * (q0.q / (h1 * h) - q1.q / (h1 * h2) + q2.q / (h2 * h));
  } else {
    v = (q2.q - q1.q) / h2;
  }
  const auto& lim = settings_.limits;
  if ((v.array().abs() > lim.velocity.array()).any() || (a.array().abs() > lim.acceleration.array()).any()) {
    // A jump in the stream: arrive at rest instead.
    v.setZero();
    a.setZero();
  }
  return {v, a};
}

void ServoEngine::remember(const Target& t) {
  recent_.push_back(t);
  while (recent_.size() > 3) recent_.pop_front();
}

StretchWeights ServoEngine::fit_weights(const std::vector<double>& durations, std::size_t knots, double mu) const {
  const double t_ref = std::accumulate(durations.begin(), durations.end(), 0.0) / static_cast<double>(durations.size());
  StretchWeights w{mu, Eigen::VectorXd::Constant(static_cast<Eigen::Index>(knots), kStiffestMode / (t_ref * t_ref * t_ref))};
  w.w(0) = std::numeric_limits<double>::infinity();
  w.w(w.w.size() - 1) = std::numeric_limits<double>::infinity();
  return w;
}

AllocationSettings ServoEngine::allocation() const {
  return AllocationSettings{settings_.dt_output, settings_.beta, 1.1, 50};
}

ServoRun run_servo(std::span<const TimedWaypoint> inputs, const JointVector& initial_q, const ServoSettings& settings,
                   const RunOptions& options) {
  ServoSettings s = settings;
  ServoEngine engine(s, initial_q);
  WaypointBuffer buffer(s.buffer_capacity);
  std::optional<WaypointFilter> filter;
  if (options.filter) filter.emplace(*options.filter);

  ServoRun run;
  const double t0 = inputs.empty() ? 0.0 : inputs.front().stamp;
  const double dt = s.dt_output;
  std::size_t next = 0;
  bool running = !inputs.empty();
  std::int64_t last_delivery = 0;
  std::size_t next_mode = 0;
  auto mode_changes = options.mode_changes;
  std::sort(mode_changes.begin(), mode_changes.end(), [](const auto& a, const auto& b) { return a.first < b.first; });

  for (;;) {
    const std::int64_t c = engine.tick();
    while (next_mode < mode_changes.size() && mode_changes[next_mode].first <= c) {
      engine.request_mode(mode_changes[next_mode++].second);
    }
    if (options.stop_tick && c >= *options.stop_tick) {
      running = false;
    } else {
      while (next < inputs.size() && inputs[next].stamp - t0 <= static_cast<double>(c) * dt + 1e-9) {
        const TimedWaypoint& raw = inputs[next++];
        last_delivery = c;
        std::optional<TimedWaypoint> wp = raw;
        if (filter) {
          const FilterResult r = filter->push(raw);
          if (r.outcome == FilterOutcome::Stale) {
            ++engine.diagnostics().stale_inputs;
            wp.reset();
          } else if (r.outcome == FilterOutcome::Suppressed) {
            ++engine.diagnostics().filtered_inputs;
            wp.reset();
          } else {
            wp = r.waypoint;
          }
        }
        if (wp) {
          if (buffer.push(*wp)) {
            run.forwarded.push_back(*wp);
          } else {
            ++engine.diagnostics().stale_inputs;
          }
        }
      }
      if (next == inputs.size()) running = false;
    }

    if (engine.finished(buffer, running)) break;
    if (static_cast<double>(c - last_delivery) * dt > options.max_tail_seconds) {
      engine.diagnostics().last_error = "run did not settle within the tail limit";
      break;
    }
    if (auto cmd = engine.step(buffer, running)) run.commands.push_back(std::move(*cmd));
  }
  run.diagnostics = engine.diagnostics();
  run.diagnostics.dropped_inputs = buffer.dropped();
  run.plans = engine.plans();
  run.visits = engine.visits();
  return run;
}

}  // namespace otg
