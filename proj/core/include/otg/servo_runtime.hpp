#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <functional>
#include <mutex>
#include <optional>
#include <thread>

#include "otg/preprocess.hpp"
#include "otg/servo_engine.hpp"

namespace otg {

/// Blocking FIFO with a fixed capacity.
template <typename T>
class BoundedQueue {
 public:
  explicit BoundedQueue(std::size_t capacity) : capacity_(capacity) {}

  /// Blocks while full; returns false once closed.
  bool push(T value) {
    std::unique_lock lock(mutex_);
    not_full_.wait(lock, [&] { return closed_ || items_.size() < capacity_; });
    if (closed_) return false;
    items_.push_back(std::move(value));
    return true;
  }

  std::optional<T> try_pop() {
    std::lock_guard lock(mutex_);
    if (items_.empty()) return std::nullopt;
    T v = std::move(items_.front());
    items_.pop_front();
    not_full_.notify_one();
    return v;
  }

  void close() {
    std::lock_guard lock(mutex_);
    closed_ = true;
    not_full_.notify_all();
  }

  std::size_t size() const {
    std::lock_guard lock(mutex_);
    return items_.size();
  }

 private:
  mutable std::mutex mutex_;
  std::condition_variable not_full_;
  std::deque<T> items_;
  std::size_t capacity_;
  bool closed_ = false;
};

struct RuntimeSnapshot {
  std::int64_t tick = 0;
  double time = 0.0;
  JointVector q;
  JointVector qd;
  JointVector qdd;
  bool clamped = false;
  ServoMode mode = ServoMode::Precise;
  bool servo_active = false;
};

struct RuntimeOptions {
  FilterSettings filter;
  /// Commands the executor may run ahead of the sender.
  std::size_t queue_capacity = 8;
  /// StartServo drops after this long without input.
  std::chrono::milliseconds input_timeout{500};
};

/// Live servo loop on three threads: a monitor owning StartServo, an
/// executor planning into a bounded command queue, and a sender draining it
/// once per output period.
class ServoRuntime {
 public:
  using CommandSink = std::function<void(const Command&)>;

  ServoRuntime(ServoSettings settings, JointVector initial_q, RuntimeOptions options = {}, CommandSink sink = {});
  ~ServoRuntime();
  ServoRuntime(const ServoRuntime&) = delete;
  ServoRuntime& operator=(const ServoRuntime&) = delete;

  void start();
  void stop();

  /// Filters and buffers one target; false when stale or suppressed.
  bool submit(const TimedWaypoint& waypoint);
  void set_servo(bool active);
  void request_mode(ServoMode mode);

  RuntimeSnapshot snapshot() const;
  ServoDiagnostics diagnostics() const;
  std::uint64_t underruns() const { return underruns_.load(); }
  const ServoSettings& settings() const { return settings_; }

 private:
  void monitor_loop();
  void executor_loop();
  void sender_loop();

  struct Emitted {
    Command command;
    JointVector qd, qdd;
    bool clamped;
    ServoMode mode;
  };

  ServoSettings settings_;
  RuntimeOptions options_;
  CommandSink sink_;

  mutable std::mutex engine_mutex_;
  ServoEngine engine_;
  WaypointBuffer buffer_;

  std::mutex filter_mutex_;
  WaypointFilter filter_;

  BoundedQueue<Emitted> commands_;
  std::atomic<bool> alive_{false};
  std::atomic<bool> servo_requested_{false};
  std::atomic<bool> start_servo_{false};
  std::atomic<std::int64_t> last_input_ns_{0};
  std::atomic<std::uint64_t> underruns_{0};

  mutable std::mutex snapshot_mutex_;
  RuntimeSnapshot snapshot_;

  std::thread monitor_, executor_, sender_;
};

}  // namespace otg
