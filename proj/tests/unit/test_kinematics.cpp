#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <string>

#include <gtest/gtest.h>

#include "otg/error.hpp"
#include "otg/kinematics.hpp"

namespace otg {
namespace {

constexpr double kPi = std::numbers::pi;

std::string fixture(const std::string& name) { return std::string(OTG_FIXTURE_DIR) + "/" + name; }

RobotConfig planar() { return generate_config(load_urdf(fixture("planar_2link.urdf"))); }

std::vector<RobotConfig> all_fixture_chains() {
  const RobotModel dual = load_urdf(fixture("dual_arm.urdf"));
  return {planar(), generate_config(load_urdf(fixture("arm7.urdf"))), generate_config(dual, "world", "left_hand"),
          generate_config(dual, "world", "right_hand")};
}

JointVector random_q(const RobotConfig& c, std::mt19937_64& rng, double margin = 0.0) {
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

TEST(Kinematics, PlanarStraightAndBent) {
  const RobotConfig c = planar();
  EXPECT_LT((forward_kinematics(c, Eigen::Vector2d(0, 0)).translation - Eigen::Vector3d(2, 0, 0)).norm(), 1e-15);
  const Pose bent = forward_kinematics(c, Eigen::Vector2d(kPi / 2, 0));
  EXPECT_LT((bent.translation - Eigen::Vector3d(0, 2, 0)).norm(), 1e-12);
  // Independent composition: two planar rotations with 1 m links.
  const double a = 0.7, b = -1.3;
  const Eigen::Vector3d hand(std::cos(a) + std::cos(a + b), std::sin(a) + std::sin(a + b), 0.0);
  EXPECT_LT((forward_kinematics(c, Eigen::Vector2d(a, b)).translation - hand).norm(), 1e-12);
  EXPECT_NEAR(forward_kinematics(c, Eigen::Vector2d(a, b)).rotation.angularDistance(
                  Eigen::Quaterniond(Eigen::AngleAxisd(a + b, Eigen::Vector3d::UnitZ()))),
              0.0, 1e-12);
}

TEST(Kinematics, WrongDofThrows) {
  try {
    forward_kinematics(planar(), JointVector::Zero(3));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::DofMismatch);
  }
}

TEST(Kinematics, QuaternionNormalized) {
  std::mt19937_64 rng(3);
  for (const RobotConfig& c : all_fixture_chains()) {
    for (int i = 0; i < 20; ++i) EXPECT_NEAR(forward_kinematics(c, random_q(c, rng)).rotation.norm(), 1.0, 1e-9);
  }
}

TEST(Kinematics, ContinuousJointPeriodic) {
  const RobotConfig c = generate_config(parse_urdf(R"(<robot name="r">
    <link name="a"/><link name="b"/><link name="c"/>
    <joint name="spin" type="continuous"><parent link="a"/><child link="b"/><axis xyz="0 0.6 0.8"/>
      <limit effort="1" velocity="4"/></joint>
    <joint name="tool" type="fixed"><parent link="b"/><child link="c"/><origin xyz="0.3 0.1 0.2" rpy="0.1 0.2 0.3"/></joint>
    </robot>)"));
  for (double q : {-2.0, 0.3, 1.7}) {
    const Pose p0 = forward_kinematics(c, JointVector::Constant(1, q));
    const Pose p1 = forward_kinematics(c, JointVector::Constant(1, q + 2.0 * kPi));
    EXPECT_LT((p0.translation - p1.translation).norm(), 1e-12);
    EXPECT_LT(p0.rotation.angularDistance(p1.rotation), 1e-12);
  }
}

TEST(Kinematics, PrismaticColumnHasNoAngularPart) {
  const RobotConfig c = generate_config(parse_urdf(R"(<robot name="r">
    <link name="a"/><link name="b"/><link name="c"/>
    <joint name="turn" type="revolute"><parent link="a"/><child link="b"/><axis xyz="0 0 1"/>
      <limit lower="-3" upper="3" effort="1" velocity="1"/></joint>
    <joint name="slide" type="prismatic"><parent link="b"/><child link="c"/><origin xyz="0.5 0 0"/><axis xyz="1 0 0"/>
      <limit lower="0" upper="1" effort="1" velocity="1"/></joint>
    </robot>)"));
  const Eigen::Vector2d q(0.4, 0.3);
  const auto J = jacobian(c, q);
  EXPECT_LT(J.col(1).segment<3>(3).norm(), 1e-15);
  EXPECT_LT((J.col(1).segment<3>(0) - Eigen::Vector3d(std::cos(0.4), std::sin(0.4), 0)).norm(), 1e-12);
  EXPECT_LT((forward_kinematics(c, q).translation - 0.8 * Eigen::Vector3d(std::cos(0.4), std::sin(0.4), 0)).norm(),
            1e-12);
}

TEST(Kinematics, PlanarStretchHasNoXVelocity) {
  const auto J = jacobian(planar(), Eigen::Vector2d(0, 0));
  EXPECT_NEAR(J(0, 0), 0.0, 1e-15);
  EXPECT_NEAR(J(0, 1), 0.0, 1e-15);
  EXPECT_NEAR(J(1, 0), 2.0, 1e-15);
  EXPECT_NEAR(J(1, 1), 1.0, 1e-15);
}

TEST(Kinematics, JacobianMatchesCentralDifferences) {
  std::mt19937_64 rng(11);
  constexpr double h = 1e-6;
  for (const RobotConfig& c : all_fixture_chains()) {
    for (int trial = 0; trial < 25; ++trial) {
      const JointVector q = random_q(c, rng);
      const auto J = jacobian(c, q);
      for (Eigen::Index j = 0; j < c.dof(); ++j) {
        JointVector qp = q, qm = q;
        qp(j) += h;
        qm(j) -= h;
        const Pose p = forward_kinematics(c, qp), m = forward_kinematics(c, qm);
        const Eigen::Vector3d dv = (p.translation - m.translation) / (2.0 * h);
        const Eigen::AngleAxisd rel(p.rotation * m.rotation.inverse());
        const Eigen::Vector3d dw = rel.axis() * rel.angle() / (2.0 * h);
        EXPECT_LT((J.col(j).segment<3>(0) - dv).cwiseAbs().maxCoeff(), 1e-5) << c.robot_name << " joint " << j;
        EXPECT_LT((J.col(j).segment<3>(3) - dw).cwiseAbs().maxCoeff(), 1e-5) << c.robot_name << " joint " << j;
      }
    }
  }
}

TEST(Kinematics, OrientationErrorIsAxisAngle) {
  const Eigen::Quaterniond a(Eigen::AngleAxisd(0.3, Eigen::Vector3d(1, 2, 3).normalized()));
  const Eigen::Quaterniond d(Eigen::AngleAxisd(0.4, Eigen::Vector3d(0, 1, 0)));
  EXPECT_LT((orientation_error(d * a, a) - Eigen::Vector3d(0, 0.4, 0)).norm(), 1e-12);
  EXPECT_LT(orientation_error(a, a).norm(), 1e-15);
  // q and -q are the same rotation.
  const Eigen::Quaterniond neg(-a.w(), -a.x(), -a.y(), -a.z());
  EXPECT_LT(orientation_error(neg, a).norm(), 1e-12);
}

TEST(Kinematics, IkFixedPointReturnsSeed) {
  std::mt19937_64 rng(5);
  for (const RobotConfig& c : all_fixture_chains()) {
    const JointVector seed = random_q(c, rng);
    const IkResult r = ik_solve(c, forward_kinematics(c, seed), seed);
    EXPECT_TRUE(r.converged);
    EXPECT_EQ(r.iterations, 0);
    EXPECT_EQ(r.q, seed);
  }
}

TEST(Kinematics, FkOfIkWithinTolerancePerFixture) {
  std::mt19937_64 rng(2024);
  for (const RobotConfig& c : all_fixture_chains()) {
    int solved = 0;
    for (int trial = 0; trial < 100; ++trial) {
      const JointVector truth = random_q(c, rng, 0.05);
      JointVector seed = truth + 0.3 * JointVector::Random(c.dof());
      c.limits.clamp(seed);
      const Pose target = forward_kinematics(c, truth);
      const IkResult r = ik_solve(c, target, seed);
      ASSERT_TRUE(c.limits.contains(r.q, 1e-12));
      if (!r.converged) continue;
      ++solved;
      const Pose got = forward_kinematics(c, r.q);
      EXPECT_LT((got.translation - target.translation).norm(), 1e-6);
      EXPECT_LT(got.rotation.angularDistance(target.rotation), 1e-6);
    }
    EXPECT_EQ(solved, 100) << c.robot_name << " " << c.tip;
  }
}

TEST(Kinematics, PlanarRandomReachablePositions) {
  const RobotConfig c = planar();
  IkSettings s;
  s.orientation_weight = 0.0;
  std::mt19937_64 rng(8);
  for (int i = 0; i < 100; ++i) {
    const JointVector truth = random_q(c, rng, 0.05);
    JointVector seed = truth + 0.3 * JointVector::Random(2);
    c.limits.clamp(seed);
    Pose target;
    target.translation = forward_kinematics(c, truth).translation;
    const IkResult res = ik_solve(c, target, seed, s);
    ASSERT_TRUE(res.converged) << truth.transpose();
    EXPECT_LT((forward_kinematics(c, res.q).translation - target.translation).norm(), 1e-6);
  }
}

TEST(Kinematics, UnreachableReportedNotThrown) {
  const RobotConfig c = planar();
  IkSettings s;
  s.orientation_weight = 0.0;
  Pose far;
  far.translation = Eigen::Vector3d(2.5, 0.4, 0.0);
  IkResult r;
  EXPECT_NO_THROW(r = ik_solve(c, far, Eigen::Vector2d(0.2, 0.2), s));
  EXPECT_FALSE(r.converged);
  EXPECT_TRUE(c.limits.contains(r.q, 1e-12));
  EXPECT_GT(r.position_error, 0.4);
  // Out of the plane is out of reach too.
  far.translation = Eigen::Vector3d(1.0, 0.0, 0.5);
  EXPECT_FALSE(ik_solve(c, far, Eigen::Vector2d(0.2, 0.2), s).converged);
}

TEST(Kinematics, IkIteratesStayInLimits) {
  const RobotConfig c = generate_config(load_urdf(fixture("arm7.urdf")));
  std::mt19937_64 rng(17);
  IkSettings s;
  s.max_iters = 1;
  for (int i = 0; i < 50; ++i) {
    // One iteration at a time so every intermediate iterate is observed.
    JointVector q = random_q(c, rng);
    const Pose target = forward_kinematics(c, random_q(c, rng));
    for (int k = 0; k < 40; ++k) {
      q = ik_solve(c, target, q, s).q;
      ASSERT_TRUE(c.limits.contains(q, 1e-12));
    }
  }
}

TEST(Kinematics, SettingsValidated) {
  IkSettings s;
  s.damping = 0.0;
  EXPECT_THROW(s.validate(), Error);
  s = {};
  s.max_iters = 0;
  EXPECT_THROW(s.validate(), Error);
  s = {};
  s.step_clamp = -1.0;
  EXPECT_THROW(ik_solve(planar(), Pose{}, Eigen::Vector2d(0, 0), s), Error);
}

}  // namespace
}  // namespace otg
