#include "otg/spline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "otg/error.hpp"

namespace otg {
namespace {

void validate_durations(std::span<const double> durations) {
  if (durations.empty()) throw Error(ErrorKind::InvalidDuration, "no segment durations");
  for (double t : durations) {
    if (!(t > 0.0) || !std::isfinite(t)) {
      throw Error(ErrorKind::InvalidDuration, "segment duration must be positive and finite, got " + std::to_string(t));
    }
  }
}

void validate_beta(double beta) {
  if (!(beta > 0.0 && beta < 1.0)) {
    throw Error(ErrorKind::InvalidParameter, "beta must lie in (0, 1), got " + std::to_string(beta));
  }
}

// Issued waypoints mapped onto the solved knots; a split segment gets a
// linearly interpolated placeholder for its free knot.
Eigen::MatrixXd solved_waypoints(const WaypointMatrix& Q, const KnotSequence& knots) {
  const auto issued = static_cast<Eigen::Index>(knots.raw().size()) + 1;
  if (Q.rows() != issued) {
    throw Error(ErrorKind::InvalidParameter, "waypoint count " + std::to_string(Q.rows()) +
                                                 " does not match " + std::to_string(issued) + " knots");
  }
  if (!knots.has_split_knot()) return Q;
  Eigen::MatrixXd out(3, Q.cols());
  out.row(0) = Q.row(0);
  out.row(1) = Q.row(0) + knots.beta() * (Q.row(1) - Q.row(0));
  out.row(2) = Q.row(1);
  return out;
}

struct KnotRole {
  bool pinned = true;
  double fit = 0.0;
};

// Interleaved unknowns (S_i, m_i, ν_i) give a banded system with bandwidth 5:
//   pinned:  S_i = Q_i
//   free:    f_i (S_i − Q_i) − (Cᵀν)_i = 0
//            γ (G m + e)_i + (Aᵀν)_i = 0
//            (A m)_i − (C S)_i = −D_i
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> solve_optimality(const Eigen::MatrixXd& Q, const std::vector<KnotRole>& roles,
                                                             double energy_weight, const BandMatrix& gradient,
                                                             const Eigen::MatrixXd& gradient_offset, const BandMatrix& A,
                                                             const BandMatrix& C, const Eigen::MatrixXd& D) {
  const Eigen::Index n = A.dimension();
  const Eigen::Index dof = Q.cols();
  BandMatrix K(3 * n, 5, 5);
  Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(3 * n, dof);

  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index lo = std::max<Eigen::Index>(0, i - 1);
    const Eigen::Index hi = std::min<Eigen::Index>(n - 1, i + 1);
    const auto& role = roles[static_cast<std::size_t>(i)];

    const Eigen::Index fit_row = 3 * i;
    if (role.pinned) {
      K.at(fit_row, 3 * i) = 1.0;
      rhs.row(fit_row) = Q.row(i);
    } else {
      K.at(fit_row, 3 * i) = role.fit;
      for (Eigen::Index r = lo; r <= hi; ++r) K.at(fit_row, 3 * r + 2) -= C(r, i);
      rhs.row(fit_row) = role.fit * Q.row(i);
    }

    const Eigen::Index energy_row = 3 * i + 1;
    for (Eigen::Index j = lo; j <= hi; ++j) {
      K.at(energy_row, 3 * j + 1) += energy_weight * gradient(i, j);
      K.at(energy_row, 3 * j + 2) += A(j, i);
    }
    rhs.row(energy_row) = -energy_weight * gradient_offset.row(i);

    const Eigen::Index constraint_row = 3 * i + 2;
    for (Eigen::Index j = lo; j <= hi; ++j) {
      K.at(constraint_row, 3 * j + 1) += A(i, j);
      K.at(constraint_row, 3 * j) -= C(i, j);
    }
    rhs.row(constraint_row) = -D.row(i);
  }

  BandedLU(K).solve_in_place(rhs);
  Eigen::MatrixXd S(n, dof), m(n, dof);
  for (Eigen::Index i = 0; i < n; ++i) {
    S.row(i) = rhs.row(3 * i);
    m.row(i) = rhs.row(3 * i + 1);
  }
  return {S, m};
}

// Inner block of the energy matrix over the augmented knots (boundary second
// derivatives are fixed), plus the linear term they induce.
std::pair<BandMatrix, Eigen::MatrixXd> exact_energy(const KnotSequence& knots, const BoundaryState& boundary) {
  const auto& h = knots.augmented();
  const BandMatrix full = assemble_Abar(h);
  const Eigen::Index n = knots.system_size();
  BandMatrix inner(n, 1, 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = std::max<Eigen::Index>(0, i - 1); j <= std::min<Eigen::Index>(n - 1, i + 1); ++j) {
      inner.at(i, j) = full(i + 1, j + 1);
    }
  }
  Eigen::MatrixXd offset = Eigen::MatrixXd::Zero(n, boundary.dof());
  offset.row(0) += full(1, 0) * boundary.a0.transpose();
  offset.row(n - 1) += full(n, n + 1) * boundary.af.transpose();
  return {inner, offset};
}

void check_boundary(const BoundaryState& b, Eigen::Index dof) {
  if (b.v0.size() != dof || b.a0.size() != dof || b.vf.size() != dof || b.af.size() != dof) {
    throw Error(ErrorKind::InvalidParameter, "boundary state dimension does not match waypoint DoF");
  }
  if (!b.v0.allFinite() || !b.a0.allFinite() || !b.vf.allFinite() || !b.af.allFinite()) {
    throw Error(ErrorKind::InvalidParameter, "boundary state must be finite");
  }
}

CubicSplineTrajectory solve_with_roles(const WaypointMatrix& Q, const std::vector<KnotRole>& issued_roles,
                                       double energy_weight, const BoundaryState& boundary, const KnotSequence& knots,
                                       EnergyModel model) {
  check_boundary(boundary, Q.cols());
  const Eigen::MatrixXd Qs = solved_waypoints(Q, knots);
  std::vector<KnotRole> roles = issued_roles;
  if (knots.has_split_knot()) roles.insert(roles.begin() + 1, KnotRole{false, 0.0});

  const BandMatrix A = assemble_A(knots);
  const BandMatrix C = assemble_C(knots);
  const Eigen::MatrixXd D = assemble_D(knots, boundary);

  const bool all_pinned = std::all_of(roles.begin(), roles.end(), [](const KnotRole& r) { return r.pinned; });
  if (all_pinned) {
    Eigen::MatrixXd m = C.multiply(Qs) - D;
    BandedLU(A).solve_in_place(m);
    return assemble_trajectory(Qs, m, boundary, knots);
  }

  if (model == EnergyModel::Exact) {
    auto [E, e] = exact_energy(knots, boundary);
    auto [S, m] = solve_optimality(Qs, roles, energy_weight, E, e, A, C, D);
    return assemble_trajectory(S, m, boundary, knots);
  }
  const Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(A.dimension(), Q.cols());
  auto [S, m] = solve_optimality(Qs, roles, energy_weight, A.transpose(), zero, A, C, D);
  return assemble_trajectory(S, m, boundary, knots);
}

}  // namespace

KnotSequence::KnotSequence(std::vector<double> raw_durations, double beta)
    : raw_(std::move(raw_durations)), beta_(beta) {
  validate_durations(raw_);
  validate_beta(beta_);
  solved_raw_ = raw_.size() == 1 ? build_time_vector(raw_, beta_) : raw_;
  augmented_ = build_time_vector(solved_raw_, beta_);
}

double KnotSequence::total() const { return std::accumulate(raw_.begin(), raw_.end(), 0.0); }

std::vector<double> build_time_vector(std::span<const double> raw, double beta) {
  validate_durations(raw);
  validate_beta(beta);
  const std::size_t n = raw.size();
  if (n == 1) return {beta * raw[0], (1.0 - beta) * raw[0]};
  std::vector<double> out;
  out.reserve(n + 2);
  out.push_back(beta * raw[0]);
  out.push_back((1.0 - beta) * raw[0]);
  for (std::size_t i = 1; i + 1 < n; ++i) out.push_back(raw[i]);
  out.push_back((1.0 - beta) * raw[n - 1]);
  out.push_back(beta * raw[n - 1]);
  return out;
}

BoundaryState BoundaryState::rest(Eigen::Index dof) {
  const JointVector z = JointVector::Zero(dof);
  return {z, z, z, z};
}

BandMatrix assemble_A(const KnotSequence& knots) {
  const auto& h = knots.augmented();
  const Eigen::Index n = knots.system_size() - 1;  // last row index
  BandMatrix A(n + 1, 1, 1);
  const auto hh = [&](Eigen::Index k) { return h[static_cast<std::size_t>(k)]; };

  A.at(0, 0) = (3.0 * hh(0) + 2.0 * hh(1) + hh(0) * hh(0) / hh(1)) / 6.0;
  A.at(0, 1) = hh(1) / 6.0;
  for (Eigen::Index r = 1; r < n; ++r) {
    A.at(r, r - 1) = hh(r) / 6.0;
    A.at(r, r) = 2.0 * (hh(r) + hh(r + 1)) / 6.0;
    A.at(r, r + 1) = hh(r + 1) / 6.0;
  }
  A.at(1, 0) -= hh(0) * hh(0) / (6.0 * hh(1));
  A.at(n - 1, n) -= hh(n + 1) * hh(n + 1) / (6.0 * hh(n));
  A.at(n, n - 1) = hh(n) / 6.0;
  A.at(n, n) = (3.0 * hh(n + 1) + 2.0 * hh(n) + hh(n + 1) * hh(n + 1) / hh(n)) / 6.0;
  return A;
}

BandMatrix assemble_C(const KnotSequence& knots) {
  const auto& h = knots.augmented();
  const Eigen::Index n = knots.system_size() - 1;
  BandMatrix C(n + 1, 1, 1);
  const auto inv = [&](Eigen::Index k) { return 1.0 / h[static_cast<std::size_t>(k)]; };

  C.at(0, 0) = -inv(1);
  C.at(0, 1) = inv(1);
  for (Eigen::Index r = 1; r < n; ++r) {
    C.at(r, r - 1) = inv(r);
    C.at(r, r) = -inv(r) - inv(r + 1);
    C.at(r, r + 1) = inv(r + 1);
  }
  C.at(n, n - 1) = inv(n);
  C.at(n, n) = -inv(n);
  return C;
}

BandMatrix assemble_Abar(std::span<const double> T) {
  validate_durations(T);
  const auto n = static_cast<Eigen::Index>(T.size());
  BandMatrix M(n + 1, 1, 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double t = T[static_cast<std::size_t>(i)];
    M.at(i, i) += 2.0 * t / 6.0;
    M.at(i + 1, i + 1) += 2.0 * t / 6.0;
    M.at(i, i + 1) = t / 6.0;
    M.at(i + 1, i) = t / 6.0;
  }
  return M;
}

Eigen::MatrixXd assemble_D(const KnotSequence& knots, const BoundaryState& b) {
  const auto& h = knots.augmented();
  const Eigen::Index n = knots.system_size() - 1;
  const double h0 = h[0], h1 = h[1];
  const double he = h[static_cast<std::size_t>(n + 1)], hp = h[static_cast<std::size_t>(n)];

  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(n + 1, b.dof());
  D.row(0) += ((1.0 + h0 / h1) * b.v0 + (h0 / 2.0 + h0 * h0 / (3.0 * h1)) * b.a0).transpose();
  D.row(1) += (-(h0 / h1) * (b.v0 + h0 / 3.0 * b.a0)).transpose();
  D.row(n - 1) += ((he / hp) * (b.vf - he / 3.0 * b.af)).transpose();
  D.row(n) += (-(1.0 + he / hp) * b.vf + (he / 2.0 + he * he / (3.0 * hp)) * b.af).transpose();
  return D;
}

CubicSplineTrajectory assemble_trajectory(const Eigen::MatrixXd& S, const Eigen::MatrixXd& m,
                                          const BoundaryState& b, const KnotSequence& knots) {
  const Eigen::Index n = knots.system_size() - 1;
  const Eigen::Index dof = S.cols();
  const auto& h = knots.augmented();
  const double h0 = h[0];
  const double he = h[static_cast<std::size_t>(n + 1)];

  Eigen::MatrixXd M(n + 3, dof);
  M.row(0) = b.a0.transpose();
  M.middleRows(1, n + 1) = m;
  M.row(n + 2) = b.af.transpose();

  Eigen::MatrixXd P(n + 3, dof);
  P.row(0) = S.row(0);
  P.row(1) = S.row(0) + h0 * b.v0.transpose() + h0 * h0 / 3.0 * b.a0.transpose() + h0 * h0 / 6.0 * M.row(1);
  for (Eigen::Index k = 1; k < n; ++k) P.row(k + 1) = S.row(k);
  P.row(n + 1) = S.row(n) - he * b.vf.transpose() + he * he / 3.0 * b.af.transpose() + he * he / 6.0 * M.row(n + 1);
  P.row(n + 2) = S.row(n);

  std::vector<double> issued{0.0};
  for (double t : knots.raw()) issued.push_back(issued.back() + t);
  return CubicSplineTrajectory(h, P, M, std::move(issued));
}

CubicSplineTrajectory::CubicSplineTrajectory(std::vector<double> durations, Eigen::MatrixXd knots,
                                             Eigen::MatrixXd second, std::vector<double> issued_times)
    : durations_(std::move(durations)),
      knots_(std::move(knots)),
      second_(std::move(second)),
      issued_times_(std::move(issued_times)) {
  const auto segments = static_cast<Eigen::Index>(durations_.size());
  if (segments == 0 || knots_.rows() != segments + 1 || second_.rows() != segments + 1 ||
      second_.cols() != knots_.cols()) {
    throw Error(ErrorKind::InvalidParameter, "inconsistent trajectory arrays");
  }
  starts_.resize(durations_.size() + 1);
  starts_[0] = 0.0;
  coeffs_.resize(4 * segments, knots_.cols());
  for (Eigen::Index k = 0; k < segments; ++k) {
    const double hk = durations_[static_cast<std::size_t>(k)];
    starts_[static_cast<std::size_t>(k + 1)] = starts_[static_cast<std::size_t>(k)] + hk;
    const auto s0 = knots_.row(k), s1 = knots_.row(k + 1);
    const auto m0 = second_.row(k), m1 = second_.row(k + 1);
    coeffs_.row(4 * k) = s0;
    coeffs_.row(4 * k + 1) = (s1 - s0) / hk - hk * (2.0 * m0 + m1) / 6.0;
    coeffs_.row(4 * k + 2) = m0 / 2.0;
    coeffs_.row(4 * k + 3) = (m1 - m0) / (6.0 * hk);
  }
  // Pin the cumulative end to the issued total so tick arithmetic lands exactly.
  if (!issued_times_.empty()) starts_.back() = issued_times_.back();
}

CubicSplineTrajectory CubicSplineTrajectory::hold(const JointVector& q, double duration) {
  if (!(duration > 0.0)) throw Error(ErrorKind::InvalidDuration, "hold duration must be positive");
  Eigen::MatrixXd knots(2, q.size());
  knots.row(0) = q.transpose();
  knots.row(1) = q.transpose();
  return CubicSplineTrajectory({duration}, knots, Eigen::MatrixXd::Zero(2, q.size()), {0.0, duration});
}

Eigen::MatrixXd CubicSplineTrajectory::issued_positions() const {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(issued_times_.size()), dof());
  for (std::size_t i = 0; i < issued_times_.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = position(issued_times_[i]).transpose();
  }
  return out;
}

std::size_t CubicSplineTrajectory::locate(double t) const {
  const auto it = std::upper_bound(starts_.begin(), starts_.end(), t);
  const auto idx = static_cast<std::ptrdiff_t>(it - starts_.begin()) - 1;
  return static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(idx, 0, static_cast<std::ptrdiff_t>(durations_.size()) - 1));
}

bool CubicSplineTrajectory::eval(double t, Eigen::Ref<Eigen::VectorXd> p, Eigen::Ref<Eigen::VectorXd> v,
                                 Eigen::Ref<Eigen::VectorXd> a) const {
  constexpr double kSlack = 1e-9;
  const double total = duration();
  const bool clamped = t < -kSlack || t > total + kSlack || !std::isfinite(t);
  if (!std::isfinite(t)) t = 0.0;
  t = std::clamp(t, 0.0, total);
  const std::size_t k = locate(t);
  const double tau = t - starts_[k];
  const auto c = coeffs_.middleRows(4 * static_cast<Eigen::Index>(k), 4);
  p = (c.row(0) + tau * (c.row(1) + tau * (c.row(2) + tau * c.row(3)))).transpose();
  v = (c.row(1) + tau * (2.0 * c.row(2) + 3.0 * tau * c.row(3))).transpose();
  a = (2.0 * c.row(2) + 6.0 * tau * c.row(3)).transpose();
  return clamped;
}

Sample CubicSplineTrajectory::eval(double t) const {
  Sample s{JointVector(dof()), JointVector(dof()), JointVector(dof()), false};
  s.clamped = eval(t, s.position, s.velocity, s.acceleration);
  return s;
}

JointVector CubicSplineTrajectory::position(double t) const { return eval(t).position; }

CubicSplineTrajectory interpolating_spline(const WaypointMatrix& Q, const BoundaryState& boundary,
                                           const KnotSequence& knots) {
  if (Q.rows() < 2) throw Error(ErrorKind::InvalidParameter, "interpolation needs at least two waypoints");
  std::vector<KnotRole> roles(static_cast<std::size_t>(Q.rows()), KnotRole{true, 0.0});
  return solve_with_roles(Q, roles, 1.0, boundary, knots, EnergyModel::Exact);
}

CubicSplineTrajectory min_stretch_spline(const WaypointMatrix& Q, const StretchWeights& weights,
                                         const BoundaryState& boundary, const KnotSequence& knots, EnergyModel model) {
  if (Q.rows() < 2) throw Error(ErrorKind::InvalidParameter, "min-stretch spline needs at least two waypoints");
  if (!(weights.mu > 0.0) || weights.mu > 1.0 || !std::isfinite(weights.mu)) {
    throw Error(ErrorKind::InvalidParameter, "mu must lie in (0, 1], got " + std::to_string(weights.mu));
  }
  const double mu = std::max(weights.mu, StretchWeights::kMuFloor);
  Eigen::VectorXd w = weights.w.size() == 0 ? Eigen::VectorXd::Ones(Q.rows()) : weights.w;
  if (w.size() != Q.rows()) throw Error(ErrorKind::InvalidParameter, "fitting weight count does not match waypoints");
  if ((w.array() < 0.0).any() || w.hasNaN()) throw Error(ErrorKind::InvalidParameter, "fitting weights must be >= 0");

  std::vector<KnotRole> roles(static_cast<std::size_t>(Q.rows()));
  for (Eigen::Index i = 0; i < Q.rows(); ++i) {
    auto& r = roles[static_cast<std::size_t>(i)];
    if (mu == 1.0) {
      r.pinned = w(i) > 0.0;
    } else {
      r.pinned = std::isinf(w(i));
      r.fit = r.pinned ? 0.0 : mu * w(i);
    }
  }
  const double energy_weight = mu == 1.0 ? 1.0 : 1.0 - mu;
  return solve_with_roles(Q, roles, energy_weight, boundary, knots, mu == 1.0 ? EnergyModel::Exact : model);
}

CubicSplineTrajectory static_min_stretch(const WaypointMatrix& Q, double lambda, const KnotSequence& knots) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw Error(ErrorKind::InvalidParameter, "lambda must be finite and >= 0");
  }
  const BoundaryState rest = BoundaryState::rest(Q.cols());
  if (knots.has_split_knot()) {
    // The closed form needs every knot issued; a lone segment has a free split knot.
    return min_stretch_spline(Q, StretchWeights{1.0 / (1.0 + lambda), {}}, rest, knots);
  }
  if (Q.rows() != knots.system_size()) throw Error(ErrorKind::InvalidParameter, "waypoint count does not match knots");

  const BandMatrix A = assemble_A(knots);
  const BandMatrix C = assemble_C(knots);
  const BandMatrix CCt = BandMatrix::product(C, C.transpose());
  const BandMatrix system = BandMatrix::sum(A, CCt, lambda);
  Eigen::MatrixXd m = C.multiply(Q);
  BandedLU(system).solve_in_place(m);
  const Eigen::MatrixXd S = Q - lambda * C.transpose().multiply(m);
  return assemble_trajectory(S, m, rest, knots);
}

double stretch_energy(const CubicSplineTrajectory& traj) {
  const Eigen::MatrixXd& M = traj.knot_second_derivatives();
  const BandMatrix Abar = assemble_Abar(traj.segment_durations());
  return (M.transpose() * Abar.multiply(M)).trace();
}

KinematicPeaks kinematic_peaks(const CubicSplineTrajectory& traj) {
  const Eigen::Index dof = traj.dof();
  constexpr double inf = std::numeric_limits<double>::infinity();
  KinematicPeaks out{JointVector::Constant(dof, inf), JointVector::Constant(dof, -inf), JointVector::Zero(dof),
                     JointVector::Zero(dof)};
  const auto& h = traj.segment_durations();
  for (std::size_t k = 0; k < h.size(); ++k) {
    const auto c = traj.coefficients(k);
    const double T = h[k];
    for (Eigen::Index j = 0; j < dof; ++j) {
      const double a = c(0, j), b = c(1, j), cc = c(2, j), d = c(3, j);
      const auto pos = [&](double t) { return a + t * (b + t * (cc + t * d)); };
      const auto vel = [&](double t) { return b + t * (2.0 * cc + 3.0 * t * d); };
      const auto acc = [&](double t) { return 2.0 * cc + 6.0 * t * d; };

      auto visit_position = [&](double t) {
        const double p = pos(t);
        out.min_position(j) = std::min(out.min_position(j), p);
        out.max_position(j) = std::max(out.max_position(j), p);
      };
      visit_position(0.0);
      visit_position(T);
      // Stationary points of position: 3d t² + 2c t + b = 0.
      const double qa = 3.0 * d, qb = 2.0 * cc, qc = b;
      if (std::abs(qa) > 1e-300) {
        const double disc = qb * qb - 4.0 * qa * qc;
        if (disc >= 0.0) {
          const double sq = std::sqrt(disc);
          for (double t : {(-qb + sq) / (2.0 * qa), (-qb - sq) / (2.0 * qa)}) {
            if (t > 0.0 && t < T) visit_position(t);
          }
        }
      } else if (std::abs(qb) > 1e-300) {
        const double t = -qc / qb;
        if (t > 0.0 && t < T) visit_position(t);
      }

      double vmax = std::max(std::abs(vel(0.0)), std::abs(vel(T)));
      if (std::abs(d) > 1e-300) {
        const double t = -cc / (3.0 * d);
        if (t > 0.0 && t < T) vmax = std::max(vmax, std::abs(vel(t)));
      }
      out.max_abs_velocity(j) = std::max(out.max_abs_velocity(j), vmax);
      out.max_abs_acceleration(j) =
          std::max({out.max_abs_acceleration(j), std::abs(acc(0.0)), std::abs(acc(T))});
    }
  }
  return out;
}

}  // namespace otg
