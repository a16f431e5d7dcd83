#pragma once

#include <span>
#include <vector>

#include <Eigen/Core>

#include "otg/band_matrix.hpp"
#include "otg/types.hpp"

namespace otg {

/// Segment durations of a cubic spline with assigned boundary velocity and
/// acceleration. The first and last raw segments are each split by `beta`
/// around an assistant knot whose position is solved, not issued.
///
/// A single raw segment cannot carry four boundary conditions with two
/// assistant knots, so it is first split at `beta` into two raw segments;
/// the knot at the split is free (never issued).
class KnotSequence {
 public:
  KnotSequence(std::vector<double> raw_durations, double beta = 0.5);

  const std::vector<double>& raw() const { return raw_; }
  /// Raw durations actually solved over (differs from raw() only when a lone
  /// segment has been split).
  const std::vector<double>& solved_raw() const { return solved_raw_; }
  const std::vector<double>& augmented() const { return augmented_; }
  double beta() const { return beta_; }
  bool has_split_knot() const { return raw_.size() == 1; }
  double total() const;

  /// Number of unknown second derivatives (= solved knot count).
  Eigen::Index system_size() const { return static_cast<Eigen::Index>(solved_raw_.size()) + 1; }

 private:
  std::vector<double> raw_;
  std::vector<double> solved_raw_;
  std::vector<double> augmented_;
  double beta_;
};

/// [βT0, (1−β)T0, T1, …, T(n−2), (1−β)T(n−1), βT(n−1)] for n >= 2; a lone
/// segment yields its split [βT, (1−β)T].
std::vector<double> build_time_vector(std::span<const double> raw_durations, double beta);

struct BoundaryState {
  JointVector v0, a0, vf, af;

  static BoundaryState rest(Eigen::Index dof);
  Eigen::Index dof() const { return v0.size(); }
};

/// Fit-vs-smoothness trade-off. `w` holds per-knot fitting weights; empty
/// means identity. A weight of +infinity pins that knot to its waypoint.
struct StretchWeights {
  double mu = 0.999;
  Eigen::VectorXd w;

  double lambda() const { return (1.0 - mu) / mu; }
  static constexpr double kMuFloor = 1e-6;
};

/// Operator used for the smoothness gradient in the general solver.
enum class EnergyModel {
  /// Exact integral of squared acceleration over the augmented knots.
  Exact,
  /// Stiffness band A standing in for the energy matrix; reproduces the
  /// closed form used by static_min_stretch when D = 0 and W = I.
  StiffnessApproximation,
};

struct Sample {
  JointVector position, velocity, acceleration;
  bool clamped = false;
};

/// Piecewise cubic joint trajectory. Immutable once built.
class CubicSplineTrajectory {
 public:
  CubicSplineTrajectory() = default;

  /// Build from full knot arrays (augmented knots, rows = knots).
  CubicSplineTrajectory(std::vector<double> segment_durations, Eigen::MatrixXd knot_positions,
                        Eigen::MatrixXd knot_second_derivatives, std::vector<double> issued_times);

  /// Constant trajectory at q lasting `duration` seconds.
  static CubicSplineTrajectory hold(const JointVector& q, double duration);

  bool empty() const { return durations_.empty(); }
  Eigen::Index dof() const { return knots_.cols(); }
  double duration() const { return starts_.empty() ? 0.0 : starts_.back(); }
  std::size_t segment_count() const { return durations_.size(); }

  const std::vector<double>& segment_durations() const { return durations_; }
  const Eigen::MatrixXd& knot_positions() const { return knots_; }
  const Eigen::MatrixXd& knot_second_derivatives() const { return second_; }
  /// Coefficients (a, b, c, d) of segment i, one column per joint.
  Eigen::Ref<const Eigen::MatrixXd> coefficients(std::size_t segment) const {
    return coeffs_.middleRows(4 * static_cast<Eigen::Index>(segment), 4);
  }

  /// Times of the issued (non-assistant) knots, first is 0, last is duration().
  const std::vector<double>& issued_times() const { return issued_times_; }
  /// Positions attained at issued_times(), rows = knots.
  Eigen::MatrixXd issued_positions() const;

  /// Evaluate at global time t; outside [0, duration()] the nearer end is used
  /// and `clamped` is set. Never throws.
  Sample eval(double t) const;
  /// Allocation-free variant; returns the clamped flag.
  bool eval(double t, Eigen::Ref<Eigen::VectorXd> position, Eigen::Ref<Eigen::VectorXd> velocity,
            Eigen::Ref<Eigen::VectorXd> acceleration) const;
  JointVector position(double t) const;

  JointVector start_position() const { return knots_.row(0).transpose(); }
  JointVector end_position() const { return knots_.row(knots_.rows() - 1).transpose(); }

 private:
  std::size_t locate(double t) const;

  std::vector<double> durations_;
  std::vector<double> starts_;  // cumulative, size = segments + 1
  Eigen::MatrixXd knots_;
  Eigen::MatrixXd second_;
  Eigen::MatrixXd coeffs_;  // 4 rows per segment
  std::vector<double> issued_times_;
};

/// Band matrices of the boundary-assigned spline system  A m = C S − D.
BandMatrix assemble_A(const KnotSequence& knots);
BandMatrix assemble_C(const KnotSequence& knots);
/// Energy matrix over the given durations: diag (1/6)[2T0, 2(T0+T1), …, 2T(n−1)],
/// off-diagonal T_i / 6.
BandMatrix assemble_Abar(std::span<const double> durations);
/// Boundary vector D (rows = system_size(), columns = joints).
Eigen::MatrixXd assemble_D(const KnotSequence& knots, const BoundaryState& boundary);

/// Rebuild the full trajectory from solved knot positions S and second
/// derivatives m (both system_size() rows).
CubicSplineTrajectory assemble_trajectory(const Eigen::MatrixXd& S, const Eigen::MatrixXd& m,
                                          const BoundaryState& boundary, const KnotSequence& knots);

/// Spline through every issued waypoint with the given boundary state.
CubicSplineTrajectory interpolating_spline(const WaypointMatrix& Q, const BoundaryState& boundary,
                                           const KnotSequence& knots);

/// Minimizes  μ·tr((Q−S)ᵀW(Q−S)) + (1−μ)·∫‖s̈‖²  subject to the spline
/// equations, solved as one banded first-order-optimality system.
CubicSplineTrajectory min_stretch_spline(const WaypointMatrix& Q, const StretchWeights& weights,
                                         const BoundaryState& boundary, const KnotSequence& knots,
                                         EnergyModel model = EnergyModel::Exact);

/// Rest-to-rest closed form  m = (A + λCCᵀ)⁻¹ C Q,  S = Q − λCᵀm.
CubicSplineTrajectory static_min_stretch(const WaypointMatrix& Q, double lambda, const KnotSequence& knots);

/// ∫‖s̈‖² dt summed over joints (= tr(Mᵀ Ā M) on the augmented knots).
double stretch_energy(const CubicSplineTrajectory& traj);

/// Exact per-joint extrema over the whole trajectory.
struct KinematicPeaks {
  JointVector min_position, max_position, max_abs_velocity, max_abs_acceleration;
};
KinematicPeaks kinematic_peaks(const CubicSplineTrajectory& traj);

}  // namespace otg
