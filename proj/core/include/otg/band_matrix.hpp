#pragma once

#include <vector>

#include <Eigen/Core>

namespace otg {

/// Square band matrix with `lower` sub-diagonals and `upper` super-diagonals.
/// Storage follows the LAPACK general-band layout: entry (i, j) lives at
/// row (upper + i - j) of a (lower + upper + 1) x n array. Entries outside the
/// band read as zero and may not be written.
class BandMatrix {
 public:
  BandMatrix() = default;
  BandMatrix(Eigen::Index n, int lower, int upper);

  Eigen::Index dimension() const { return n_; }
  int lower_bandwidth() const { return lower_; }
  int upper_bandwidth() const { return upper_; }

  bool in_band(Eigen::Index i, Eigen::Index j) const {
    return j - i <= upper_ && i - j <= lower_;
  }
  double operator()(Eigen::Index i, Eigen::Index j) const {
    return in_band(i, j) ? bands_(upper_ + i - j, j) : 0.0;
  }
  double& at(Eigen::Index i, Eigen::Index j);

  Eigen::MatrixXd to_dense() const;
  Eigen::MatrixXd multiply(const Eigen::MatrixXd& x) const;
  BandMatrix transpose() const;
  double max_abs() const { return bands_.cwiseAbs().maxCoeff(); }

  /// Band-preserving product and sum; the result bandwidths are widened as needed.
  static BandMatrix product(const BandMatrix& lhs, const BandMatrix& rhs);
  static BandMatrix sum(const BandMatrix& a, const BandMatrix& b, double scale_b = 1.0);

  const Eigen::MatrixXd& bands() const { return bands_; }

 private:
  Eigen::Index n_ = 0;
  int lower_ = 0;
  int upper_ = 0;
  Eigen::MatrixXd bands_;
};

/// LU factorization with partial (row) pivoting that preserves band
/// structure; the upper band grows to lower + upper as in LAPACK dgbtrf.
/// Factor once, then solve any number of right-hand sides.
class BandedLU {
 public:
  /// Pivots smaller than `pivot_tolerance * max|M|` are declared singular.
  explicit BandedLU(const BandMatrix& m, double pivot_tolerance = 1e-12);

  Eigen::MatrixXd solve(const Eigen::MatrixXd& rhs) const;
  void solve_in_place(Eigen::MatrixXd& rhs) const;

 private:
  Eigen::Index n_;
  int kl_;
  int ku_;  // upper bandwidth of U after fill-in: original upper + lower
  // Row i holds columns [i - kl, i + ku_]; entry (i, j) sits at column j - i + kl.
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> lu_;
  std::vector<Eigen::Index> pivots_;
};

/// Solve M x = rhs exploiting band structure.
Eigen::MatrixXd solve_banded(const BandMatrix& m, const Eigen::MatrixXd& rhs);

}  // namespace otg
