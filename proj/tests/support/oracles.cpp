#include "support/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace otg::testing {

double DenseSpline::total() const { return std::accumulate(h.begin(), h.end(), 0.0); }

std::size_t DenseSpline::locate(double& t) const {
  std::size_t k = 0;
  while (k + 1 < h.size() && t > h[k]) {
    t -= h[k];
    ++k;
  }
  return k;
}

double DenseSpline::position(double t) const {
  const auto k = locate(t);
  const auto& a = c[k];
  return a[0] + t * (a[1] + t * (a[2] + t * a[3]));
}

double DenseSpline::velocity(double t) const {
  const auto k = locate(t);
  const auto& a = c[k];
  return a[1] + t * (2 * a[2] + 3 * t * a[3]);
}

double DenseSpline::acceleration(double t) const {
  const auto k = locate(t);
  const auto& a = c[k];
  return 2 * a[2] + 6 * t * a[3];
}

std::vector<double> augmented_durations(const std::vector<double>& raw, double beta) {
  std::vector<double> r = raw;
  if (r.size() == 1) r = {beta * raw[0], (1 - beta) * raw[0]};
  std::vector<double> out{beta * r.front(), (1 - beta) * r.front()};
  for (std::size_t i = 1; i + 1 < r.size(); ++i) out.push_back(r[i]);
  out.push_back((1 - beta) * r.back());
  out.push_back(beta * r.back());
  return out;
}

std::vector<std::size_t> issued_indices(std::size_t raw_segments) {
  if (raw_segments == 1) return {0, 4};
  std::vector<std::size_t> out{0};
  for (std::size_t i = 2; i <= raw_segments; ++i) out.push_back(i);
  out.push_back(raw_segments + 2);
  return out;
}

Eigen::MatrixXd dense_lu_solve(Eigen::MatrixXd m, Eigen::MatrixXd rhs) {
  const Eigen::Index n = m.rows();
  for (Eigen::Index k = 0; k < n; ++k) {
    Eigen::Index p = k;
    for (Eigen::Index i = k + 1; i < n; ++i) {
      if (std::abs(m(i, k)) > std::abs(m(p, k))) p = i;
    }
    if (m(p, k) == 0.0) throw std::runtime_error("singular oracle system");
    m.row(k).swap(m.row(p));
    rhs.row(k).swap(rhs.row(p));
    for (Eigen::Index i = k + 1; i < n; ++i) {
      const double f = m(i, k) / m(k, k);
      if (f == 0.0) continue;
      m.row(i).tail(n - k) -= f * m.row(k).tail(n - k);
      rhs.row(i) -= f * rhs.row(k);
    }
  }
  for (Eigen::Index k = n - 1; k >= 0; --k) {
    rhs.row(k) -= m.row(k).tail(n - k - 1) * rhs.bottomRows(n - k - 1);
    rhs.row(k) /= m(k, k);
  }
  return rhs;
}

DenseSpline dense_spline(const std::vector<double>& h, const std::vector<double>& positions, const Ends& ends) {
  const auto N = static_cast<Eigen::Index>(h.size());
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(4 * N, 4 * N);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(4 * N);
  Eigen::Index row = 0;
  auto col = [](Eigen::Index seg, int k) { return 4 * seg + k; };
  auto at_end = [&](Eigen::Index seg, int deriv) {
    const double T = h[static_cast<std::size_t>(seg)];
    Eigen::RowVector4d r;
    if (deriv == 0) r << 1, T, T * T, T * T * T;
    if (deriv == 1) r << 0, 1, 2 * T, 3 * T * T;
    if (deriv == 2) r << 0, 0, 2, 6 * T;
    return r;
  };
  // Known knot positions at segment starts (assistant knots excluded).
  for (Eigen::Index i = 0; i < N; ++i) {
    if (i == 1 || i == N - 1) continue;
    M(row, col(i, 0)) = 1;
    b(row++) = positions[static_cast<std::size_t>(i)];
  }
  M.block(row, col(N - 1, 0), 1, 4) = at_end(N - 1, 0);
  b(row++) = positions[static_cast<std::size_t>(N)];
  for (Eigen::Index i = 0; i + 1 < N; ++i) {
    for (int d = 0; d < 3; ++d) {
      M.block(row, col(i, 0), 1, 4) = at_end(i, d);
      M(row, col(i + 1, d)) = -(d == 2 ? 2.0 : 1.0);
      ++row;
    }
  }
  M(row, col(0, 1)) = 1;
  b(row++) = ends.v0;
  M(row, col(0, 2)) = 2;
  b(row++) = ends.a0;
  M.block(row, col(N - 1, 0), 1, 4) = at_end(N - 1, 1);
  b(row++) = ends.vf;
  M.block(row, col(N - 1, 0), 1, 4) = at_end(N - 1, 2);
  b(row++) = ends.af;
  if (row != 4 * N) throw std::logic_error("oracle equation count");

  const Eigen::VectorXd x = dense_lu_solve(M, b);
  DenseSpline s{h, {}};
  for (Eigen::Index i = 0; i < N; ++i) s.c.push_back({x(4 * i), x(4 * i + 1), x(4 * i + 2), x(4 * i + 3)});
  return s;
}

double simpson_energy(const DenseSpline& s) {
  double e = 0.0;
  for (std::size_t k = 0; k < s.h.size(); ++k) {
    const auto& c = s.c[k];
    const double T = s.h[k];
    auto acc2 = [&](double t) {
      const double a = 2 * c[2] + 6 * c[3] * t;
      return a * a;
    };
    e += T / 6.0 * (acc2(0) + 4 * acc2(T / 2) + acc2(T));
  }
  return e;
}

std::vector<double> dense_min_stretch(const std::vector<double>& raw, double beta, const std::vector<double>& q,
                                      const std::vector<double>& w, double mu, const Ends& ends) {
  const std::vector<double> h = augmented_durations(raw, beta);
  const std::vector<std::size_t> issued = issued_indices(raw.size());
  std::vector<double> base(h.size() + 1, 0.0);
  std::vector<std::size_t> free;      // augmented indices optimized over
  std::vector<double> free_weight;    // fitting weight (0 for the split knot)
  std::vector<double> free_target;
  for (std::size_t i = 0; i < issued.size(); ++i) {
    if (std::isinf(w[i]) || mu == 1.0) {
      base[issued[i]] = q[i];
    } else {
      free.push_back(issued[i]);
      free_weight.push_back(w[i]);
      free_target.push_back(q[i]);
    }
  }
  if (raw.size() == 1) {
    free.push_back(2);
    free_weight.push_back(0.0);
    free_target.push_back(0.0);
  }
  if (free.empty()) return base;

  const auto n = static_cast<Eigen::Index>(free.size());
  auto energy = [&](const Eigen::VectorXd& x) {
    std::vector<double> p = base;
    for (Eigen::Index i = 0; i < n; ++i) p[free[static_cast<std::size_t>(i)]] = x(i);
    return simpson_energy(dense_spline(h, p, ends));
  };
  // Energy is an exact quadratic in x: recover Hessian and gradient at 0.
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(n);
  const double e0 = energy(zero);
  Eigen::MatrixXd H(n, n);
  Eigen::VectorXd g(n), ep(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double plus = energy(Eigen::VectorXd::Unit(n, i));
    const double minus = energy(-Eigen::VectorXd::Unit(n, i));
    ep(i) = plus;
    H(i, i) = plus + minus - 2 * e0;
    g(i) = (plus - minus) / 2;
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      H(i, j) = H(j, i) = energy(Eigen::VectorXd::Unit(n, i) + Eigen::VectorXd::Unit(n, j)) - ep(i) - ep(j) + e0;
    }
  }
  // d/dx [γ(½xᵀHx + gᵀx) + mu Σ w (x - q)²] = 0, γ = 1 - mu (1 when interpolating)
  const double gamma = mu == 1.0 ? 1.0 : 1.0 - mu;
  Eigen::MatrixXd K = gamma * H;
  Eigen::VectorXd r = -gamma * g;
  for (Eigen::Index i = 0; i < n; ++i) {
    K(i, i) += 2 * mu * free_weight[static_cast<std::size_t>(i)];
    r(i) += 2 * mu * free_weight[static_cast<std::size_t>(i)] * free_target[static_cast<std::size_t>(i)];
  }
  const Eigen::VectorXd x = dense_lu_solve(K, r);
  for (Eigen::Index i = 0; i < n; ++i) base[free[static_cast<std::size_t>(i)]] = x(i);
  return base;
}

RandomInstance random_instance(std::mt19937_64& rng, int max_knots, int max_dof, bool at_rest) {
  std::uniform_int_distribution<int> knots(2, max_knots);
  std::uniform_int_distribution<int> dofs(1, max_dof);
  std::uniform_real_distribution<double> dur(0.1, 1.0), pos(-1.0, 1.0), rate(-0.5, 0.5);
  const int n = knots(rng);
  const int dof = dofs(rng);
  RandomInstance r;
  for (int i = 0; i + 1 < n; ++i) r.raw.push_back(dur(rng));
  r.Q.resize(n, dof);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < dof; ++j) r.Q(i, j) = pos(rng);
  }
  r.boundary = BoundaryState::rest(dof);
  if (!at_rest) {
    for (JointVector* v : {&r.boundary.v0, &r.boundary.a0, &r.boundary.vf, &r.boundary.af}) {
      for (int j = 0; j < dof; ++j) (*v)(j) = rate(rng);
    }
  }
  return r;
}

JointLimits uniform_limits(Eigen::Index dof, double velocity, double acceleration, double position) {
  return {JointVector::Constant(dof, -position), JointVector::Constant(dof, position), JointVector::Constant(dof, velocity),
          JointVector::Constant(dof, acceleration)};
}

double sampled_rate_ratio(const CubicSplineTrajectory& traj, const JointLimits& limits, double rate_hz) {
  double worst = 0.0;
  const auto n = static_cast<long>(std::ceil(traj.duration() * rate_hz));
  for (long i = 0; i <= n; ++i) {
    const Sample s = traj.eval(std::min(traj.duration(), static_cast<double>(i) / rate_hz));
    worst = std::max({worst, s.velocity.cwiseAbs().cwiseQuotient(limits.velocity).maxCoeff(),
                      s.acceleration.cwiseAbs().cwiseQuotient(limits.acceleration).maxCoeff()});
  }
  return worst;
}

Ends ends_of(const BoundaryState& b, Eigen::Index j) { return {b.v0(j), b.a0(j), b.vf(j), b.af(j)}; }

SegmentEnd segment_start(const CubicSplineTrajectory& traj, std::size_t k) {
  const auto c = traj.coefficients(k);
  return {c.row(0).transpose(), c.row(1).transpose(), 2.0 * c.row(2).transpose()};
}

SegmentEnd segment_end(const CubicSplineTrajectory& traj, std::size_t k) {
  const auto c = traj.coefficients(k);
  const double T = traj.segment_durations()[k];
  return {(c.row(0) + T * c.row(1) + T * T * c.row(2) + T * T * T * c.row(3)).transpose(),
          (c.row(1) + 2 * T * c.row(2) + 3 * T * T * c.row(3)).transpose(),
          (2 * c.row(2) + 6 * T * c.row(3)).transpose()};
}

double continuity_defect(const CubicSplineTrajectory& traj) {
  double worst = 0.0;
  for (std::size_t k = 0; k + 1 < traj.segment_count(); ++k) {
    const SegmentEnd a = segment_end(traj, k);
    const SegmentEnd b = segment_start(traj, k + 1);
    worst = std::max({worst, (a.q - b.q).cwiseAbs().maxCoeff(), (a.v - b.v).cwiseAbs().maxCoeff(),
                      (a.a - b.a).cwiseAbs().maxCoeff()});
  }
  return worst;
}

double stitch_defect(const std::vector<PlanRecord>& plans, double dt_output) {
  double worst = 0.0;
  for (std::size_t i = 1; i < plans.size(); ++i) {
    const auto& prev = plans[i - 1];
    const auto& cur = plans[i];
    const double offset = static_cast<double>(cur.start_tick - prev.start_tick) * dt_output;
    const Sample a = prev.trajectory.eval(offset);
    const Sample b = cur.trajectory.eval(0.0);
    worst = std::max({worst, (a.position - b.position).cwiseAbs().maxCoeff(),
                      (a.velocity - b.velocity).cwiseAbs().maxCoeff(),
                      (a.acceleration - b.acceleration).cwiseAbs().maxCoeff()});
  }
  return worst;
}

double settle_time(const CommandStream& commands, const JointVector& target, double tol) {
  double since = std::numeric_limits<double>::infinity();
  for (const Command& c : commands) {
    if ((c.q - target).cwiseAbs().maxCoeff() <= tol) {
      if (!std::isfinite(since)) since = c.time;
    } else {
      since = std::numeric_limits<double>::infinity();
    }
  }
  return since;
}

}  // namespace otg::testing
