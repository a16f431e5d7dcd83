#include <atomic>
#include <csignal>
#include <cstdlib>
#include <iostream>
#include <thread>

#include <CLI11.hpp>
#include <spdlog/cfg/helpers.h>
#include <spdlog/spdlog.h>

#include "bridge/commands.hpp"
#include "bridge/server.hpp"
#include "otg/robot_config.hpp"

namespace {

std::atomic<bool> g_interrupted{false};

void on_signal(int) { g_interrupted = true; }

void configure_logging() {
  spdlog::set_level(spdlog::level::info);
  if (const char* level = std::getenv("UTTG_LOG")) spdlog::cfg::helpers::load_levels(level);
}

void add_servo_flags(CLI::App* app, otg::bridge::ServoArgs& a) {
  static const std::map<std::string, otg::ServoMode> modes{{"precise", otg::ServoMode::Precise},
                                                           {"rapid", otg::ServoMode::Rapid}};
  app->add_option("--config", a.config, "robot config JSON from gen-config")->required()->check(CLI::ExistingFile);
  app->add_option("--mode", a.mode, "precise or rapid")->transform(CLI::CheckedTransformer(modes, CLI::ignore_case));
  app->add_option("--mu", a.mu, "fit weight in (0, 1]; default 0.999 precise, 0.9 rapid");
  app->add_option("--beta", a.beta, "split point of a lone segment, (0, 1)");
  app->add_option("--output-rate", a.output_rate_hz, "command rate, Hz");
  app->add_option("--servo-dt", a.servo_dt, "rapid-mode replan period, s");
  app->add_option("--filter-cutoff", a.filter_cutoff_hz, "input low-pass cutoff, Hz; 0 disables");
  app->add_option("--deadband", a.deadband, "input deadband, rad");
}

int serve(const otg::bridge::ServoArgs& a, otg::bridge::ServerOptions options) {
  const otg::RobotConfig config = otg::load_config(a.config);
  const otg::ServoSettings settings = otg::bridge::servo_settings(a, config.limits);
  if (auto f = otg::bridge::filter_settings(a)) {
    options.runtime.filter = *f;
  } else {
    options.runtime.filter.enabled = false;
  }
  otg::bridge::BridgeServer server(config, settings, options);
  server.start();
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  while (!g_interrupted) std::this_thread::sleep_for(std::chrono::milliseconds(100));
  spdlog::info("shutting down");
  server.stop();
  const auto d = server.diagnostics();
  spdlog::info("{} commands, {} plans, {} planner failures", d.commands, d.plans, d.planner_failures);
  return otg::bridge::kOk;
}

}  // namespace

int main(int argc, char** argv) {
  configure_logging();
  CLI::App app{"Smooth joint-space servoing for teleoperation"};
  app.require_subcommand(1);

  otg::bridge::GenConfigArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-config", "robot config from a URDF kinematic chain");
  gen_cmd->add_option("--urdf", gen.urdf)->required()->check(CLI::ExistingFile);
  gen_cmd->add_option("--base", gen.base, "chain base link (default: root)");
  gen_cmd->add_option("--tip", gen.tip, "chain tip link (default: the single leaf)");
  gen_cmd->add_option("--output,-o", gen.output)->required();
  gen_cmd->add_option("--accel-scale", gen.accel_scale, "acceleration limit = scale * velocity / 0.1 s")
      ->check(CLI::PositiveNumber);

  otg::bridge::ServoArgs servo;
  auto* servo_cmd = app.add_subcommand("servo", "waypoint CSV to command CSV");
  add_servo_flags(servo_cmd, servo);
  servo_cmd->add_option("--input,-i", servo.input)->required()->check(CLI::ExistingFile);
  servo_cmd->add_option("--output,-o", servo.output)->required();

  otg::bridge::CompareArgs cmp;
  auto* cmp_cmd = app.add_subcommand("compare", "acceleration report against a zero-order hold");
  add_servo_flags(cmp_cmd, cmp.servo);
  cmp_cmd->add_option("--input,-i", cmp.servo.input)->required()->check(CLI::ExistingFile);
  cmp_cmd->add_option("--report,-o", cmp.report)->required();
  cmp_cmd->add_option("--trace", cmp.trace, "simulated feedback CSV");
  cmp_cmd->add_option("--actuator", cmp.actuator, "perfect or lag")
      ->transform(CLI::CheckedTransformer(
          std::map<std::string, otg::ActuatorMode>{{"perfect", otg::ActuatorMode::Perfect},
                                                   {"lag", otg::ActuatorMode::FirstOrderLag}},
          CLI::ignore_case));
  cmp_cmd->add_option("--time-constant", cmp.time_constant, "lag time constant, s");

  otg::bridge::ServoArgs live;
  live.filter_cutoff_hz = 5.0;
  otg::bridge::ServerOptions server;
  double timeout_ms = 500.0;
  auto* serve_cmd = app.add_subcommand("serve", "WebSocket bridge for the operator console");
  add_servo_flags(serve_cmd, live);
  serve_cmd->add_option("--host", server.host);
  serve_cmd->add_option("--port", server.port);
  serve_cmd->add_option("--ui-rate", server.ui_rate_hz, "state broadcast rate, Hz")->check(CLI::PositiveNumber);
  serve_cmd->add_option("--input-timeout", timeout_ms, "servo stops after this long without targets, ms");
  serve_cmd->add_option("--actuator", server.actuator.mode, "perfect or lag")
      ->transform(CLI::CheckedTransformer(
          std::map<std::string, otg::ActuatorMode>{{"perfect", otg::ActuatorMode::Perfect},
                                                   {"lag", otg::ActuatorMode::FirstOrderLag}},
          CLI::ignore_case));
  serve_cmd->add_option("--time-constant", server.actuator.time_constant, "lag time constant, s");

  CLI11_PARSE(app, argc, argv);

  if (*gen_cmd) return otg::bridge::run_gen_config(gen, std::cout);
  if (*servo_cmd) return otg::bridge::run_servo_file(servo, std::cout);
  if (*cmp_cmd) return otg::bridge::run_compare(cmp, std::cout);
  try {
    server.runtime.input_timeout = std::chrono::milliseconds(static_cast<long>(timeout_ms));
    return serve(live, server);
  } catch (const otg::Error& e) {
    spdlog::error("{}", e.what());
    return otg::bridge::exit_code(e.kind());
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return otg::bridge::kFailure;
  }
}
