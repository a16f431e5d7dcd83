#include "otg/kinematics.hpp"

#include <algorithm>
#include <string>
#include <vector>

#include "otg/error.hpp"

namespace otg {
namespace {

void check_dof(const RobotConfig& config, const JointVector& q) {
  if (q.size() != config.dof()) {
    throw Error(ErrorKind::DofMismatch,
                "expected " + std::to_string(config.dof()) + " joint values, got " + std::to_string(q.size()));
  }
}

Eigen::Isometry3d joint_motion(const ChainSegment& s, double q) {
  Eigen::Isometry3d m = Eigen::Isometry3d::Identity();
  if (s.type == JointType::Prismatic) {
    m.translation() = s.axis * q;
  } else if (s.type != JointType::Fixed) {
    m.linear() = Eigen::AngleAxisd(q, s.axis).toRotationMatrix();
  }
  return m;
}

}  // namespace

Eigen::Isometry3d Pose::isometry() const {
  Eigen::Isometry3d t = Eigen::Isometry3d::Identity();
  t.linear() = rotation.normalized().toRotationMatrix();
  t.translation() = translation;
  return t;
}

Pose Pose::from_isometry(const Eigen::Isometry3d& t) {
  return {t.translation(), Eigen::Quaterniond(t.rotation()).normalized()};
}

void IkSettings::validate() const {
  if (!(damping > 0.0) || max_iters <= 0 || !(pos_tol > 0.0) || !(rot_tol > 0.0) || !(step_clamp > 0.0) ||
      !(orientation_weight >= 0.0)) {
    throw Error(ErrorKind::InvalidParameter, "IK settings must be positive");
  }
}

Eigen::Isometry3d tip_transform(const RobotConfig& config, const JointVector& q) {
  check_dof(config, q);
  Eigen::Isometry3d t = Eigen::Isometry3d::Identity();
  Eigen::Index j = 0;
  for (const auto& s : config.chain) {
    t = t * s.origin.transform();
    if (s.type != JointType::Fixed) t = t * joint_motion(s, q(j++));
  }
  return t;
}

Pose forward_kinematics(const RobotConfig& config, const JointVector& q) {
  return Pose::from_isometry(tip_transform(config, q));
}

Eigen::Matrix<double, 6, Eigen::Dynamic> jacobian(const RobotConfig& config, const JointVector& q) {
  check_dof(config, q);
  Eigen::Matrix<double, 6, Eigen::Dynamic> J(6, config.dof());
  std::vector<Eigen::Vector3d> axes, points;
  std::vector<bool> prismatic;
  Eigen::Isometry3d t = Eigen::Isometry3d::Identity();
  Eigen::Index j = 0;
  for (const auto& s : config.chain) {
    t = t * s.origin.transform();
    if (s.type == JointType::Fixed) continue;
    axes.push_back(t.linear() * s.axis);
    points.push_back(t.translation());
    prismatic.push_back(s.type == JointType::Prismatic);
    t = t * joint_motion(s, q(j++));
  }
  const Eigen::Vector3d tip = t.translation();
  for (Eigen::Index i = 0; i < config.dof(); ++i) {
    const auto k = static_cast<std::size_t>(i);
    if (prismatic[k]) {
      J.col(i) << axes[k], Eigen::Vector3d::Zero();
    } else {
      J.col(i) << axes[k].cross(tip - points[k]), axes[k];
    }
  }
  return J;
}

Eigen::Vector3d orientation_error(const Eigen::Quaterniond& target, const Eigen::Quaterniond& current) {
  Eigen::Quaterniond d = target.normalized() * current.normalized().conjugate();
  if (d.w() < 0.0) d.coeffs() = -d.coeffs();
  const Eigen::AngleAxisd aa(d);
  return aa.axis() * aa.angle();
}

IkResult ik_solve(const RobotConfig& config, const Pose& target, const JointVector& seed, const IkSettings& settings) {
  settings.validate();
  check_dof(config, seed);
  const bool use_rotation = settings.orientation_weight > 0.0;
  const Eigen::Index rows = use_rotation ? 6 : 3;
  const Eigen::Index dof = config.dof();

  IkResult r;
  r.q = seed;
  config.limits.clamp(r.q);
  for (int it = 0;; ++it) {
    const Pose cur = forward_kinematics(config, r.q);
    const Eigen::Vector3d ep = target.translation - cur.translation;
    const Eigen::Vector3d er = orientation_error(target.rotation, cur.rotation);
    r.position_error = ep.norm();
    r.rotation_error = er.norm();
    r.iterations = it;
    if (r.position_error < settings.pos_tol && (!use_rotation || r.rotation_error < settings.rot_tol)) {
      r.converged = true;
      return r;
    }
    if (it >= settings.max_iters) return r;

    Eigen::VectorXd e(rows);
    e.head<3>() = ep;
    if (use_rotation) e.tail<3>() = settings.orientation_weight * er;
    Eigen::MatrixXd J = jacobian(config, r.q).topRows(rows);
    if (use_rotation) J.bottomRows<3>() *= settings.orientation_weight;

    // Damping fades with the residual so the last steps are Gauss-Newton.
    const double lambda = settings.damping * std::min(1.0, e.norm());
    JointVector dq = JointVector::Zero(dof);
    std::vector<bool> locked(static_cast<std::size_t>(dof), false);
    for (int pass = 0; pass < 2; ++pass) {
      Eigen::MatrixXd Jf = J;
      for (Eigen::Index j = 0; j < dof; ++j) {
        if (locked[static_cast<std::size_t>(j)]) Jf.col(j).setZero();
      }
      const Eigen::MatrixXd JJt = Jf * Jf.transpose() + lambda * lambda * Eigen::MatrixXd::Identity(rows, rows);
      dq = Jf.transpose() * JJt.ldlt().solve(e);
      bool changed = false;
      for (Eigen::Index j = 0; j < dof; ++j) {
        const bool pinned = (r.q(j) <= config.limits.lower(j) && dq(j) < 0.0) ||
                            (r.q(j) >= config.limits.upper(j) && dq(j) > 0.0);
        if (pinned && !locked[static_cast<std::size_t>(j)]) locked[static_cast<std::size_t>(j)] = changed = true;
      }
      if (!changed) break;
    }
    const double step = dq.lpNorm<Eigen::Infinity>();
    if (step > settings.step_clamp) dq *= settings.step_clamp / step;
    r.q += dq;
    config.limits.clamp(r.q);
  }
}

}  // namespace otg
