// One PASS/FAIL line per acceptance criterion; exits nonzero if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <functional>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "otg/band_matrix.hpp"
#include "otg/error.hpp"
#include "otg/kinematics.hpp"
#include "otg/robot_config.hpp"
#include "otg/servo_engine.hpp"
#include "otg/sim_harness.hpp"
#include "otg/spline.hpp"
#include "otg/urdf.hpp"
#include "support/oracles.hpp"

namespace {

using namespace otg;
using Clock = std::chrono::steady_clock;

constexpr double kPi = std::numbers::pi;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fixture(const std::string& name) { return std::string(OTG_FIXTURE_DIR) + "/" + name; }

/// Collects failed checks; the first few are reported.
struct Verdict {
  std::vector<std::string> failures;
  std::string summary;

  void require(bool ok, const std::string& what) {
    if (!ok) failures.push_back(what);
  }
};

std::string joined(const JointVector& x) {
  std::string out;
  for (Eigen::Index i = 0; i < x.size(); ++i) out += fmt::format("{}{:.2f}", i ? "/" : "", x(i));
  return out;
}

double max_abs(const Eigen::MatrixXd& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

RobotConfig planar_config() { return generate_config(load_urdf(fixture("planar_2link.urdf"))); }

ServoSettings servo_settings(ServoMode mode) {
  ServoSettings s;
  s.mode = mode;
  s.limits = planar_config().limits;
  s.record_plans = true;
  return s;
}

Verdict spline_correctness() {
  Verdict v;
  std::mt19937_64 rng(101);
  const auto t0 = Clock::now();
  double interp = 0.0, cont = 0.0, bound = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const auto inst = testing::random_instance(rng, 20, 7);
    const auto traj = interpolating_spline(inst.Q, inst.boundary, KnotSequence(inst.raw));
    interp = std::max(interp, max_abs(traj.issued_positions() - inst.Q));
    cont = std::max(cont, testing::continuity_defect(traj));
    const Sample s0 = traj.eval(0.0), sf = traj.eval(traj.duration());
    bound = std::max({bound, max_abs(s0.velocity - inst.boundary.v0), max_abs(s0.acceleration - inst.boundary.a0),
                      max_abs(sf.velocity - inst.boundary.vf), max_abs(sf.acceleration - inst.boundary.af)});
  }
  const double elapsed = seconds_since(t0);
  v.require(interp < 1e-9, fmt::format("interpolation error {:.3g}", interp));
  v.require(cont < 1e-9, fmt::format("continuity defect {:.3g}", cont));
  v.require(bound < 1e-8, fmt::format("boundary error {:.3g}", bound));
  v.require(elapsed < 5.0, fmt::format("runtime {:.2f} s", elapsed));
  v.summary = fmt::format("200 instances: interp {:.1e}, C2 {:.1e}, boundary {:.1e}, {:.2f} s", interp, cont, bound,
                          elapsed);
  return v;
}

double simpson_of(const CubicSplineTrajectory& traj) {
  double total = 0.0;
  for (Eigen::Index j = 0; j < traj.dof(); ++j) {
    testing::DenseSpline s;
    s.h = traj.segment_durations();
    for (std::size_t k = 0; k < traj.segment_count(); ++k) {
      const auto c = traj.coefficients(k);
      s.c.push_back({c(0, j), c(1, j), c(2, j), c(3, j)});
    }
    total += testing::simpson_energy(s);
  }
  return total;
}

double banded_vs_dense(const BandMatrix& m, const Eigen::MatrixXd& rhs) {
  const Eigen::MatrixXd x = solve_banded(m, rhs);
  const Eigen::MatrixXd ref = testing::dense_lu_solve(m.to_dense(), rhs);
  return max_abs(x - ref) / std::max(1.0, max_abs(ref));
}

Verdict oracle_equivalence() {
  Verdict v;
  std::mt19937_64 rng(202);
  std::uniform_real_distribution<double> lam(0.0, 10.0);
  const auto t0 = Clock::now();
  double band = 0.0, closed = 0.0, energy = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    auto inst = testing::random_instance(rng, 20, 7, true);
    while (inst.raw.size() < 2) inst = testing::random_instance(rng, 20, 7, true);
    const KnotSequence knots(inst.raw);
    const double lambda = lam(rng);

    // The interpolation system and the closed-form system, banded against dense.
    const BandMatrix A = assemble_A(knots), C = assemble_C(knots);
    const Eigen::MatrixXd S = Eigen::MatrixXd::Random(C.dimension(), inst.Q.cols());
    band = std::max(band, banded_vs_dense(A, C.multiply(S) - assemble_D(knots, inst.boundary)));
    const BandMatrix K = BandMatrix::sum(A, BandMatrix::product(C, C.transpose()), lambda);
    band = std::max(band, banded_vs_dense(K, C.multiply(S)));

    const auto fast = static_min_stretch(inst.Q, lambda, knots);
    const auto general = min_stretch_spline(inst.Q, {1.0 / (1.0 + lambda), {}}, inst.boundary, knots,
                                            EnergyModel::StiffnessApproximation);
    closed = std::max({closed, max_abs(fast.knot_positions() - general.knot_positions()),
                       max_abs(fast.knot_second_derivatives() - general.knot_second_derivatives())});

    const auto moving = testing::random_instance(rng, 20, 7);
    for (const auto& traj : {fast, interpolating_spline(moving.Q, moving.boundary, KnotSequence(moving.raw))}) {
      const double ref = simpson_of(traj);
      energy = std::max(energy, std::abs(stretch_energy(traj) - ref) / std::max(1.0, std::abs(ref)));
    }
  }
  const double elapsed = seconds_since(t0);
  v.require(band < 1e-10, fmt::format("banded vs dense {:.3g}", band));
  v.require(closed < 1e-8, fmt::format("closed form vs general {:.3g}", closed));
  v.require(energy < 1e-6, fmt::format("energy vs quadrature {:.3g}", energy));
  v.require(elapsed < 5.0, fmt::format("runtime {:.2f} s", elapsed));
  v.summary = fmt::format("100 instances: banded {:.1e}, closed form {:.1e}, energy {:.1e} rel, {:.2f} s", band, closed,
                          energy, elapsed);
  return v;
}

Verdict lambda_monotonicity() {
  Verdict v;
  std::mt19937_64 rng(303);
  int violations = 0;
  for (int trial = 0; trial < 50; ++trial) {
    auto inst = testing::random_instance(rng, 20, 7, true);
    while (inst.raw.size() < 2) inst = testing::random_instance(rng, 20, 7, true);
    const KnotSequence knots(inst.raw);
    double last_energy = std::numeric_limits<double>::infinity(), last_fit = -1.0;
    for (double lambda : {0.0, 0.01, 0.1, 1.0, 10.0, 100.0}) {
      const auto traj = static_min_stretch(inst.Q, lambda, knots);
      const double e = stretch_energy(traj);
      const double fit = (traj.issued_positions() - inst.Q).squaredNorm();
      if (e > last_energy + 1e-10) ++violations;
      if (fit < last_fit - 1e-10) ++violations;
      last_energy = e;
      last_fit = fit;
    }
  }
  v.require(violations == 0, fmt::format("{} violations", violations));
  v.summary = fmt::format("50 instances x 6 lambdas: {} violations", violations);
  return v;
}

Verdict frequency_bridging() {
  Verdict v;
  const auto inputs = standard_stream();
  std::string detail;
  for (ServoMode mode : {ServoMode::Precise, ServoMode::Rapid}) {
    const ServoRun run = run_servo(inputs, inputs.front().q, servo_settings(mode));
    const auto n = static_cast<double>(run.commands.size());
    v.require(std::abs(n - 1000.0) <= 1.0, fmt::format("{}: {} commands", to_string(mode), n));
    double worst = 0.0;
    for (std::size_t i = 0; i < run.commands.size(); ++i) {
      const Command& c = run.commands[i];
      worst = std::max(worst, std::abs(c.time - 0.005 * static_cast<double>(c.tick)));
      if (i > 0) worst = std::max(worst, std::abs(c.time - run.commands[i - 1].time - 0.005));
      v.require(c.tick == static_cast<std::int64_t>(i) + 1, fmt::format("{}: tick gap at {}", to_string(mode), i));
    }
    v.require(worst < 1e-12, fmt::format("{}: spacing error {:.3g}", to_string(mode), worst));
    detail += fmt::format("{} {} cmds; ", to_string(mode), run.commands.size());
  }
  v.summary = detail + "5 ms spacing";
  return v;
}

Verdict smoothness() {
  Verdict v;
  const auto t0 = Clock::now();
  const ComparisonReport r = compare_baseline(standard_stream(), servo_settings(ServoMode::Precise));
  const double elapsed = seconds_since(t0);
  const double reduction = r.reduction_percent.value_or(std::numeric_limits<double>::quiet_NaN());
  v.require(r.reduction_percent && reduction >= 80.0, fmt::format("reduction {:.1f}%", reduction));
  v.require((r.std_uttg.array() < r.std_hold.array()).all(), "|a| std not lower on every joint");
  v.require(elapsed < 10.0, fmt::format("runtime {:.2f} s", elapsed));
  v.summary = fmt::format("MAV reduction {:.1f}%, |a| std {} vs hold {}, {:.2f} s", reduction,
                          joined(r.std_uttg), joined(r.std_hold), elapsed);
  return v;
}

Verdict mode_semantics() {
  Verdict v;
  const auto inputs = step_stream();
  const JointVector target = inputs.back().q;
  RunOptions opt;
  opt.filter = FilterSettings{};
  const ServoSettings precise_settings = servo_settings(ServoMode::Precise);
  const ServoRun precise = run_servo(inputs, inputs.front().q, precise_settings, opt);
  const ServoRun rapid = run_servo(inputs, inputs.front().q, servo_settings(ServoMode::Rapid), opt);
  const double tp = testing::settle_time(precise.commands, target, 0.01);
  const double tr = testing::settle_time(rapid.commands, target, 0.01);
  v.require(std::isfinite(tp) && std::isfinite(tr) && tr < tp, fmt::format("settle rapid {} s, precise {} s", tr, tp));
  v.require(precise_settings.effective_mu() == 0.999, "precise mu is not 0.999");

  const auto& fwd = precise.forwarded;
  double spacing = 0.0;
  for (std::size_t i = 1; i < fwd.size(); ++i) spacing += (fwd[i].q - fwd[i - 1].q).norm();
  spacing /= static_cast<double>(std::max<std::size_t>(1, fwd.size() - 1));
  double worst = 0.0;
  v.require(precise.visits.size() == fwd.size(),
            fmt::format("{} visits for {} filtered waypoints", precise.visits.size(), fwd.size()));
  for (std::size_t i = 0; i < std::min(fwd.size(), precise.visits.size()); ++i) {
    worst = std::max(worst, (precise.visits[i].reached - fwd[i].q).norm());
  }
  v.require(fwd.size() > 1 && worst <= 0.01 * spacing,
            fmt::format("visit error {:.3g} vs 1% of spacing {:.3g}", worst, 0.01 * spacing));
  v.summary = fmt::format("settle rapid {:.3f} s < precise {:.3f} s; {} visits, worst {:.1e} <= {:.1e}", tr, tp,
                          precise.visits.size(), worst, 0.01 * spacing);
  return v;
}

Verdict stitch_continuity() {
  Verdict v;
  const auto inputs = standard_stream();
  double stitch = 0.0, ratio = 0.0;
  std::size_t outside = 0, plans = 0;
  for (ServoMode mode : {ServoMode::Precise, ServoMode::Rapid}) {
    const ServoSettings s = servo_settings(mode);
    const ServoRun run = run_servo(inputs, inputs.front().q, s);
    plans += run.plans.size();
    stitch = std::max(stitch, testing::stitch_defect(run.plans, s.dt_output));
    for (const auto& p : run.plans) ratio = std::max(ratio, testing::sampled_rate_ratio(p.trajectory, s.limits, 1000.0));
    for (const auto& c : run.commands) outside += s.limits.contains(c.q) ? 0 : 1;
  }
  v.require(stitch < 1e-8, fmt::format("stitch defect {:.3g}", stitch));
  v.require(outside == 0, fmt::format("{} commands outside limits", outside));
  v.require(ratio <= 1.0 + 1e-9, fmt::format("sampled v/a at {:.6f} of limit", ratio));
  v.summary = fmt::format("{} plans: stitch {:.1e}, peak v/a {:.3f} of limit, {} out of range", plans, stitch, ratio,
                          outside);
  return v;
}

Verdict realtime_budget() {
  Verdict v;
  std::mt19937_64 rng(808);
  std::normal_distribution<double> step(0.0, 0.05);
  WaypointMatrix Q(50, 7);
  Q.row(0).setZero();
  for (Eigen::Index i = 1; i < 50; ++i) {
    for (Eigen::Index j = 0; j < 7; ++j) Q(i, j) = Q(i - 1, j) + step(rng);
  }
  const KnotSequence knots(std::vector<double>(49, 0.05));
  const StretchWeights weights{0.999, {}};
  const BoundaryState rest = BoundaryState::rest(7);
  std::vector<double> ms;
  double sink = 0.0;
  for (int rep = 0; rep < 520; ++rep) {
    const auto t0 = Clock::now();
    const auto traj = min_stretch_spline(Q, weights, rest, knots);
    const double elapsed = seconds_since(t0) * 1e3;
    sink += traj.duration();
    if (rep >= 20) ms.push_back(elapsed);
  }
  std::sort(ms.begin(), ms.end());
  const double median = ms[ms.size() / 2];
  const double p99 = ms[static_cast<std::size_t>(0.99 * static_cast<double>(ms.size() - 1))];
  v.require(median < 5.0, fmt::format("median {:.3f} ms", median));
  v.require(p99 < 20.0, fmt::format("p99 {:.3f} ms", p99));
  v.require(sink > 0.0, "no trajectory");
  v.summary = fmt::format("7 DoF x 50 waypoints, 500 runs: median {:.3f} ms, p99 {:.3f} ms", median, p99);
  return v;
}

void check_limits_against_model(Verdict& v, const RobotConfig& c, const RobotModel& m) {
  for (Eigen::Index j = 0; j < c.dof(); ++j) {
    const UrdfJoint* joint = m.find_joint(c.joint_names[static_cast<std::size_t>(j)]);
    v.require(joint && joint->limit, c.joint_names[static_cast<std::size_t>(j)] + " missing from model");
    if (!joint || !joint->limit) continue;
    const bool bounded = joint->type != JointType::Continuous;
    const bool ok = (!bounded || (c.limits.lower(j) == joint->limit->lower && c.limits.upper(j) == joint->limit->upper)) &&
                    c.limits.velocity(j) == joint->limit->velocity &&
                    std::abs(c.limits.acceleration(j) - joint->limit->velocity / kAccelerationReferenceTime) < 1e-12;
    v.require(ok, fmt::format("{}: limits differ from the URDF", joint->name));
  }
}

Verdict config_pipeline() {
  Verdict v;
  struct Case {
    const char* file;
    const char* base;
    const char* tip;
    Eigen::Index dof;
  };
  const Case cases[] = {{"planar_2link.urdf", nullptr, nullptr, 2},
                        {"arm7.urdf", nullptr, nullptr, 7},
                        {"dual_arm.urdf", "world", "left_hand", 7},
                        {"dual_arm.urdf", "world", "right_hand", 7}};
  std::string detail;
  for (const Case& k : cases) {
    const RobotModel m = load_urdf(fixture(k.file));
    v.require(equivalent(m, parse_urdf(serialize_urdf(m))), fmt::format("{}: URDF round trip", k.file));
    const RobotConfig c = k.base ? generate_config(m, k.base, k.tip) : generate_config(m);
    v.require(c.dof() == k.dof, fmt::format("{}: dof {}", k.file, c.dof()));
    check_limits_against_model(v, c, m);
    const RobotConfig back = config_from_json(config_to_json(c));
    v.require(back.joint_names == c.joint_names && back.limits.lower == c.limits.lower &&
                  back.limits.upper == c.limits.upper && back.limits.velocity == c.limits.velocity &&
                  back.limits.acceleration == c.limits.acceleration,
              fmt::format("{}: config round trip", k.file));
    detail += fmt::format("{}{}{} {} dof; ", k.file, k.tip ? ":" : "", k.tip ? k.tip : "", c.dof());
  }

  const RobotModel dual = load_urdf(fixture("dual_arm.urdf"));
  const RobotConfig left = generate_config(dual, "world", "left_hand");
  RobotModel edited = dual;
  for (auto& j : edited.joints) {
    if (j.limit && j.name.find("right") != std::string::npos) j.limit->velocity *= 2.0;
  }
  const RobotConfig left_again = generate_config(edited, "world", "left_hand");
  v.require(left_again.joint_names == left.joint_names && left_again.limits.velocity == left.limits.velocity,
            "editing the right arm changed the left config");
  v.require(generate_config(edited, "world", "right_hand").limits.velocity ==
                2.0 * generate_config(dual, "world", "right_hand").limits.velocity,
            "right arm edit not picked up");
  v.summary = detail + "dual-arm chains independent";
  return v;
}

JointVector random_q(const RobotConfig& c, std::mt19937_64& rng, double margin) {
  JointVector q(c.dof());
  for (Eigen::Index j = 0; j < c.dof(); ++j) {
    double lo = c.limits.lower(j), hi = c.limits.upper(j);
    if (!std::isfinite(lo)) lo = -kPi;
    if (!std::isfinite(hi)) hi = kPi;
    std::uniform_real_distribution<double> d(lo + margin * (hi - lo), hi - margin * (hi - lo));
    q(j) = d(rng);
  }
  return q;
}

Verdict kinematics() {
  Verdict v;
  const RobotModel dual = load_urdf(fixture("dual_arm.urdf"));
  const std::vector<RobotConfig> chains = {planar_config(), generate_config(load_urdf(fixture("arm7.urdf"))),
                                           generate_config(dual, "world", "left_hand"),
                                           generate_config(dual, "world", "right_hand")};
  std::mt19937_64 rng(1010);
  double jac = 0.0, pos = 0.0, rot = 0.0;
  std::string detail;
  for (const RobotConfig& c : chains) {
    constexpr double h = 1e-6;
    for (int trial = 0; trial < 25; ++trial) {
      const JointVector q = random_q(c, rng, 0.0);
      const auto J = jacobian(c, q);
      for (Eigen::Index j = 0; j < c.dof(); ++j) {
        JointVector qp = q, qm = q;
        qp(j) += h;
        qm(j) -= h;
        const Pose p = forward_kinematics(c, qp), m = forward_kinematics(c, qm);
        const Eigen::AngleAxisd rel(p.rotation * m.rotation.inverse());
        const Eigen::Vector3d dv = (p.translation - m.translation) / (2.0 * h);
        const Eigen::Vector3d dw = rel.axis() * rel.angle() / (2.0 * h);
        jac = std::max({jac, max_abs(J.col(j).segment<3>(0) - dv), max_abs(J.col(j).segment<3>(3) - dw)});
      }
    }

    int solved = 0;
    for (int trial = 0; trial < 100; ++trial) {
      const JointVector truth = random_q(c, rng, 0.05);
      JointVector seed = truth + 0.3 * JointVector::Random(c.dof());
      c.limits.clamp(seed);
      const Pose target = forward_kinematics(c, truth);
      const IkResult r = ik_solve(c, target, seed);
      if (!r.converged) continue;
      ++solved;
      const Pose got = forward_kinematics(c, r.q);
      pos = std::max(pos, (got.translation - target.translation).norm());
      rot = std::max(rot, got.rotation.angularDistance(target.rotation));
    }
    v.require(solved == 100, fmt::format("{} -> {}: {}/100 solved", c.base, c.tip, solved));

    Pose far = forward_kinematics(c, JointVector::Zero(c.dof()));
    far.translation += Eigen::Vector3d(25.0, -25.0, 25.0);
    bool reported = false;
    try {
      const IkResult r = ik_solve(c, far, JointVector::Zero(c.dof()));
      reported = !r.converged && c.limits.contains(r.q, 1e-12);
    } catch (const std::exception&) {
      reported = false;
    }
    v.require(reported, fmt::format("{} -> {}: unreachable target not reported", c.base, c.tip));
    detail += fmt::format("{} {}/100; ", c.tip, solved);
  }
  v.require(jac < 1e-5, fmt::format("Jacobian vs FD {:.3g}", jac));
  v.require(pos < 1e-6 && rot < 1e-6, fmt::format("FK(IK) error {:.3g} m, {:.3g} rad", pos, rot));
  v.summary = detail + fmt::format("Jacobian {:.1e}, FK(IK) {:.1e} m {:.1e} rad", jac, pos, rot);
  return v;
}

}  // namespace

int main() {
  const std::pair<const char*, std::function<Verdict()>> criteria[] = {
      {"spline correctness", spline_correctness},
      {"oracle equivalence", oracle_equivalence},
      {"smoothing monotonicity", lambda_monotonicity},
      {"frequency bridging", frequency_bridging},
      {"smoothness vs hold", smoothness},
      {"mode semantics", mode_semantics},
      {"stitch continuity", stitch_continuity},
      {"real-time budget", realtime_budget},
      {"config pipeline", config_pipeline},
      {"kinematics", kinematics},
  };
  int failed = 0;
  int index = 0;
  for (const auto& [name, run] : criteria) {
    ++index;
    Verdict v;
    try {
      v = run();
    } catch (const std::exception& e) {
      v.failures.push_back(std::string("threw ") + e.what());
    }
    const bool ok = v.failures.empty();
    failed += ok ? 0 : 1;
    std::string line = fmt::format("{} {:>2} {}: {}", ok ? "PASS" : "FAIL", index, name, v.summary);
    for (std::size_t i = 0; i < std::min<std::size_t>(3, v.failures.size()); ++i) line += " | " + v.failures[i];
    std::puts(line.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%d criteria passed\n", index - failed, index);
  return failed == 0 ? 0 : 1;
}
