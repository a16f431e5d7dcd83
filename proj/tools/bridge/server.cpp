#include "bridge/server.hpp"

#include <cmath>

#include <boost/asio/ip/tcp.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>
#include <spdlog/spdlog.h>

#include "bridge/protocol.hpp"
#include "otg/error.hpp"

namespace otg::bridge {
namespace {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;
using WsStream = websocket::stream<tcp::socket>;

template <typename>
inline constexpr bool kAlwaysFalse = false;

}  // namespace

JointVector default_initial_position(const JointLimits& limits) {
  JointVector q(limits.lower.size());
  for (Eigen::Index j = 0; j < q.size(); ++j) {
    const double lo = limits.lower(j), hi = limits.upper(j);
    q(j) = std::isfinite(lo) && std::isfinite(hi) ? 0.5 * (lo + hi) : std::clamp(0.0, lo, hi);
  }
  return q;
}

struct BridgeServer::Impl {
  Impl(BridgeServer& owner, RobotConfig c, ServoSettings s, ServerOptions o)
      : owner(owner),
        config(std::move(c)),
        settings(std::move(s)),
        options(std::move(o)),
        origin(std::chrono::steady_clock::now()),
        acceptor(ioc) {}

  BridgeServer& owner;
  RobotConfig config;
  ServoSettings settings;
  ServerOptions options;
  std::chrono::steady_clock::time_point origin;

  asio::io_context ioc;
  tcp::acceptor acceptor;
  std::unique_ptr<ServoRuntime> runtime;
  std::thread accept_thread;
  std::thread session_thread;
  std::atomic<bool> running{false};
  std::atomic<bool> session_active{false};

  std::mutex actuator_mutex;
  JointVector actuator_q;

  std::mutex stream_mutex;  // guards `stream` pointer for shutdown
  WsStream* stream = nullptr;

  double now() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - origin).count(); }

  void on_command(const Command& cmd) {
    std::lock_guard lock(actuator_mutex);
    if (options.actuator.mode == ActuatorMode::Perfect) {
      actuator_q = cmd.q;
    } else {
      const double decay = std::exp(-settings.dt_output / options.actuator.time_constant);
      actuator_q = cmd.q + (actuator_q - cmd.q) * decay;
    }
  }

  JointVector shown_position() {
    std::lock_guard lock(actuator_mutex);
    return actuator_q;
  }

  void accept_loop() {
    while (running) {
      tcp::socket socket(ioc);
      beast::error_code ec;
      acceptor.accept(socket, ec);
      if (!running) break;
      if (ec) {
        spdlog::warn("accept failed: {}", ec.message());
        continue;
      }
      if (session_active) {
        refuse(std::move(socket));
        continue;
      }
      if (session_thread.joinable()) session_thread.join();
      session_active = true;
      ++owner.sessions_served_;
      session_thread = std::thread([this, s = std::move(socket)]() mutable { serve_session(std::move(s)); });
    }
  }

  void refuse(tcp::socket socket) {
    ++owner.sessions_refused_;
    spdlog::info("refusing a second console session");
    try {
      WsStream ws(std::move(socket));
      ws.accept();
      ws.text(true);
      ws.write(asio::buffer(error_message("another console session is active", now(), "busy")));
      ws.close(websocket::close_reason(websocket::close_code::try_again_later, "busy"));
    } catch (const std::exception& e) {
      spdlog::debug("refused session ended: {}", e.what());
    }
  }

  void serve_session(tcp::socket socket) {
    WsStream ws(std::move(socket));
    std::mutex write_mutex;
    std::atomic<bool> open{true};
    auto send = [&](const std::string& text) {
      std::lock_guard lock(write_mutex);
      if (!open) return;
      beast::error_code ec;
      ws.text(true);
      ws.write(asio::buffer(text), ec);
      if (ec) open = false;
    };

    std::thread broadcaster;
    try {
      ws.accept();
      {
        std::lock_guard lock(stream_mutex);
        stream = &ws;
      }
      spdlog::info("console connected");
      send(config_message(config, runtime->snapshot().mode, options.ui_rate_hz, now()));
      broadcaster = std::thread([&] {
        const auto period = std::chrono::duration_cast<std::chrono::steady_clock::duration>(
            std::chrono::duration<double>(1.0 / options.ui_rate_hz));
        auto next = std::chrono::steady_clock::now();
        while (open && running) {
          next += period;
          StateView view{runtime->snapshot(), shown_position(), {}, now()};
          view.ee = forward_kinematics(config, view.q);
          send(state_message(view, config.limits));
          std::this_thread::sleep_until(next);
        }
      });

      Session session{*this, send};
      beast::flat_buffer buffer;
      while (open && running) {
        beast::error_code ec;
        ws.read(buffer, ec);
        if (ec) break;
        session.handle(beast::buffers_to_string(buffer.data()));
        buffer.consume(buffer.size());
      }
    } catch (const std::exception& e) {
      spdlog::warn("console session failed: {}", e.what());
    }
    open = false;
    if (broadcaster.joinable()) broadcaster.join();
    runtime->set_servo(false);
    {
      std::lock_guard lock(stream_mutex);
      stream = nullptr;
    }
    spdlog::info("console disconnected");
    session_active = false;
  }

  struct Session {
    Impl& server;
    std::function<void(const std::string&)> send;
    bool servo = false;
    std::optional<double> last_client_t;
    std::optional<double> last_stamp;
    std::optional<JointVector> last_target;

    void handle(const std::string& text) {
      const double t = server.now();
      try {
        std::visit([&](auto&& m) { dispatch(m, t); }, parse_message(text, server.config.dof()));
      } catch (const Error& e) {
        send(error_message(e.what(), t, e.kind() == ErrorKind::Input ? "bad_request" : "rejected"));
      }
    }

    template <typename M>
    void dispatch(const M& m, double t) {
      if constexpr (std::is_same_v<M, TargetJoints>) {
        submit(m.q, m.t, t);
      } else if constexpr (std::is_same_v<M, TargetPose>) {
        const JointVector seed = last_target ? *last_target : server.shown_position();
        IkSettings ik = server.options.ik;
        if (!m.has_orientation) ik.orientation_weight = 0.0;
        const IkResult r = ik_solve(server.config, m.pose, seed, ik);
        if (!r.converged) {
          send(error_message("pose is unreachable; holding the previous target", t, "unreachable"));
          return;
        }
        submit(r.q, m.t, t);
      } else if constexpr (std::is_same_v<M, ModeRequest>) {
        server.runtime->request_mode(m.mode);
        send(mode_ack(m.mode, t));
      } else if constexpr (std::is_same_v<M, StartRequest>) {
        servo = true;
        server.runtime->set_servo(true);
        send(ack("start", t));
      } else if constexpr (std::is_same_v<M, StopRequest>) {
        servo = false;
        server.runtime->set_servo(false);
        send(ack("stop", t));
      } else {
        static_assert(kAlwaysFalse<M>);
      }
    }

    void submit(const JointVector& q, std::optional<double> client_t, double t) {
      if (!servo) {
        send(error_message("servo is stopped; send start first", t, "not_started"));
        return;
      }
      if (client_t) {
        if (last_client_t && *client_t <= *last_client_t) {
          send(error_message("target timestamp is not newer than the previous one", t, "stale"));
          return;
        }
        last_client_t = client_t;
      }
      // Stamps come from the server clock so client clock skew never reorders the stream.
      const double stamp = last_stamp ? std::max(t, *last_stamp + 1e-6) : t;
      last_stamp = stamp;
      last_target = q;
      server.runtime->submit({stamp, q});
    }
  };
};

BridgeServer::BridgeServer(RobotConfig config, ServoSettings settings, ServerOptions options)
    : impl_(std::make_unique<Impl>(*this, std::move(config), std::move(settings), std::move(options))) {
  if (!(impl_->options.ui_rate_hz > 0.0)) throw Error(ErrorKind::InvalidParameter, "UI rate must be > 0");
  impl_->options.actuator.validate();
  impl_->options.ik.validate();
  if (impl_->settings.limits.dof() != impl_->config.dof()) impl_->settings.limits = impl_->config.limits;
  impl_->settings.validate();
}

BridgeServer::~BridgeServer() { stop(); }

unsigned short BridgeServer::start() {
  Impl& s = *impl_;
  if (s.running) return s.acceptor.local_endpoint().port();
  const JointVector q0 = s.options.initial_q ? *s.options.initial_q : default_initial_position(s.config.limits);
  if (q0.size() != s.config.dof()) throw Error(ErrorKind::DofMismatch, "initial position does not match the robot");
  s.actuator_q = q0;
  s.runtime = std::make_unique<ServoRuntime>(s.settings, q0, s.options.runtime,
                                             [&s](const Command& c) { s.on_command(c); });

  const tcp::endpoint endpoint(asio::ip::make_address(s.options.host), s.options.port);
  s.acceptor.open(endpoint.protocol());
  s.acceptor.set_option(asio::socket_base::reuse_address(true));
  s.acceptor.bind(endpoint);
  s.acceptor.listen();
  s.running = true;
  s.runtime->start();
  s.accept_thread = std::thread([&s] { s.accept_loop(); });
  const unsigned short port = s.acceptor.local_endpoint().port();
  spdlog::info("serving on ws://{}:{}", s.options.host, port);
  return port;
}

void BridgeServer::stop() {
  Impl& s = *impl_;
  if (!s.running.exchange(false)) return;
  beast::error_code ec;
  {
    // A blocking accept only returns on a connection; wake it with one.
    tcp::socket wake(s.ioc);
    auto local = s.acceptor.local_endpoint(ec);
    if (!ec) {
      if (local.address().is_unspecified()) local.address(asio::ip::make_address("127.0.0.1"));
      wake.connect(local, ec);
    }
  }
  if (s.accept_thread.joinable()) s.accept_thread.join();
  s.acceptor.close(ec);
  {
    std::lock_guard lock(s.stream_mutex);
    if (s.stream) {
      // Unblocks the session's pending read.
      s.stream->next_layer().shutdown(tcp::socket::shutdown_both, ec);
      s.stream->next_layer().close(ec);
    }
  }
  if (s.session_thread.joinable()) s.session_thread.join();
  if (s.runtime) s.runtime->stop();
}

ServoDiagnostics BridgeServer::diagnostics() const {
  return impl_->runtime ? impl_->runtime->diagnostics() : ServoDiagnostics{};
}

}  // namespace otg::bridge
