#include "otg/servo_runtime.hpp"

namespace otg {
namespace {

std::int64_t now_ns() {
  return std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now().time_since_epoch()).count();
}

}  // namespace

ServoRuntime::ServoRuntime(ServoSettings settings, JointVector initial_q, RuntimeOptions options, CommandSink sink)
    : settings_(settings),
      options_(options),
      sink_(std::move(sink)),
      engine_(settings, initial_q),
      buffer_(settings.buffer_capacity),
      filter_(options.filter),
      commands_(std::max<std::size_t>(1, options.queue_capacity)) {
  snapshot_.q = initial_q;
  snapshot_.qd = JointVector::Zero(initial_q.size());
  snapshot_.qdd = JointVector::Zero(initial_q.size());
  snapshot_.mode = settings.mode;
}

ServoRuntime::~ServoRuntime() { stop(); }

void ServoRuntime::start() {
  if (alive_.exchange(true)) return;
  monitor_ = std::thread(&ServoRuntime::monitor_loop, this);
  executor_ = std::thread(&ServoRuntime::executor_loop, this);
  sender_ = std::thread(&ServoRuntime::sender_loop, this);
}

void ServoRuntime::stop() {
  if (!alive_.exchange(false)) return;
  commands_.close();
  for (std::thread* t : {&monitor_, &executor_, &sender_}) {
    if (t->joinable()) t->join();
  }
}

bool ServoRuntime::submit(const TimedWaypoint& waypoint) {
  FilterResult r;
  {
    std::lock_guard lock(filter_mutex_);
    r = filter_.push(waypoint);
  }
  if (r.outcome != FilterOutcome::Forwarded) {
    std::lock_guard lock(engine_mutex_);
    auto& d = engine_.diagnostics();
    ++(r.outcome == FilterOutcome::Stale ? d.stale_inputs : d.filtered_inputs);
    return false;
  }
  last_input_ns_ = now_ns();
  if (servo_requested_) start_servo_ = true;
  return buffer_.push(std::move(r.waypoint));
}

void ServoRuntime::set_servo(bool active) {
  servo_requested_ = active;
  if (!active) start_servo_ = false;
}

void ServoRuntime::request_mode(ServoMode mode) {
  std::lock_guard lock(engine_mutex_);
  engine_.request_mode(mode);
}

RuntimeSnapshot ServoRuntime::snapshot() const {
  std::lock_guard lock(snapshot_mutex_);
  return snapshot_;
}

ServoDiagnostics ServoRuntime::diagnostics() const {
  std::lock_guard lock(engine_mutex_);
  ServoDiagnostics d = engine_.diagnostics();
  d.dropped_inputs = buffer_.dropped();
  d.stale_inputs += buffer_.rejected();
  return d;
}

void ServoRuntime::monitor_loop() {
  const auto period = std::chrono::duration<double>(settings_.dt_servo);
  while (alive_) {
    const auto timeout = std::chrono::duration_cast<std::chrono::nanoseconds>(options_.input_timeout).count();
    if (start_servo_ && now_ns() - last_input_ns_.load() > timeout) start_servo_ = false;
    std::this_thread::sleep_for(period);
  }
}

void ServoRuntime::executor_loop() {
  const auto idle = std::chrono::duration<double>(settings_.dt_output / 2.0);
  while (alive_) {
    std::optional<Emitted> out;
    {
      std::lock_guard lock(engine_mutex_);
      if (auto cmd = engine_.step(buffer_, start_servo_)) {
        const bool clamped = cmd->q != engine_.position();
        out = Emitted{std::move(*cmd), engine_.velocity(), engine_.acceleration(), clamped, engine_.mode()};
      }
    }
    if (!out) {
      std::this_thread::sleep_for(idle);
      continue;
    }
    if (!commands_.push(std::move(*out))) return;
  }
}

void ServoRuntime::sender_loop() {
  const auto period = std::chrono::duration_cast<std::chrono::steady_clock::duration>(
      std::chrono::duration<double>(settings_.dt_output));
  auto next = std::chrono::steady_clock::now() + period;
  while (alive_) {
    std::this_thread::sleep_until(next);
    next += period;
    std::optional<Emitted> out = commands_.try_pop();
    if (!out) {
      std::lock_guard lock(engine_mutex_);
      if (engine_.started()) ++underruns_;
      continue;
    }
    if (sink_) sink_(out->command);
    std::lock_guard lock(snapshot_mutex_);
    snapshot_.tick = out->command.tick;
    snapshot_.time = out->command.time;
    snapshot_.q = std::move(out->command.q);
    snapshot_.qd = std::move(out->qd);
    snapshot_.qdd = std::move(out->qdd);
    snapshot_.clamped = out->clamped;
    snapshot_.mode = out->mode;
    snapshot_.servo_active = start_servo_;
  }
}

}  // namespace otg
