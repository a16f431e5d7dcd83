#include "otg/band_matrix.hpp"

#include <algorithm>
#include <cmath>

#include "otg/error.hpp"

namespace otg {

BandMatrix::BandMatrix(Eigen::Index n, int lower, int upper)
    : n_(n), lower_(lower), upper_(upper), bands_(Eigen::MatrixXd::Zero(lower + upper + 1, n)) {
  if (n <= 0 || lower < 0 || upper < 0) {
    throw Error(ErrorKind::InvalidParameter, "band matrix needs positive dimension and bandwidths >= 0");
  }
}

double& BandMatrix::at(Eigen::Index i, Eigen::Index j) {
  if (!in_band(i, j) || i < 0 || j < 0 || i >= n_ || j >= n_) {
    throw Error(ErrorKind::InvalidParameter, "band matrix write outside the band");
  }
  return bands_(upper_ + i - j, j);
}

Eigen::MatrixXd BandMatrix::to_dense() const {
  Eigen::MatrixXd dense = Eigen::MatrixXd::Zero(n_, n_);
  for (Eigen::Index j = 0; j < n_; ++j) {
    const Eigen::Index i0 = std::max<Eigen::Index>(0, j - upper_);
    const Eigen::Index i1 = std::min<Eigen::Index>(n_ - 1, j + lower_);
    for (Eigen::Index i = i0; i <= i1; ++i) dense(i, j) = bands_(upper_ + i - j, j);
  }
  return dense;
}

Eigen::MatrixXd BandMatrix::multiply(const Eigen::MatrixXd& x) const {
  Eigen::MatrixXd y = Eigen::MatrixXd::Zero(n_, x.cols());
  for (Eigen::Index i = 0; i < n_; ++i) {
    const Eigen::Index j0 = std::max<Eigen::Index>(0, i - lower_);
    const Eigen::Index j1 = std::min<Eigen::Index>(n_ - 1, i + upper_);
    for (Eigen::Index j = j0; j <= j1; ++j) y.row(i) += bands_(upper_ + i - j, j) * x.row(j);
  }
  return y;
}

BandMatrix BandMatrix::transpose() const {
  BandMatrix t(n_, upper_, lower_);
  for (Eigen::Index j = 0; j < n_; ++j) {
    const Eigen::Index i0 = std::max<Eigen::Index>(0, j - upper_);
    const Eigen::Index i1 = std::min<Eigen::Index>(n_ - 1, j + lower_);
    for (Eigen::Index i = i0; i <= i1; ++i) t.at(j, i) = (*this)(i, j);
  }
  return t;
}

BandMatrix BandMatrix::product(const BandMatrix& lhs, const BandMatrix& rhs) {
  if (lhs.n_ != rhs.n_) throw Error(ErrorKind::InvalidParameter, "band product dimension mismatch");
  const Eigen::Index n = lhs.n_;
  BandMatrix out(n, lhs.lower_ + rhs.lower_, lhs.upper_ + rhs.upper_);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index k0 = std::max<Eigen::Index>(0, i - lhs.lower_);
    const Eigen::Index k1 = std::min<Eigen::Index>(n - 1, i + lhs.upper_);
    for (Eigen::Index k = k0; k <= k1; ++k) {
      const double lik = lhs(i, k);
      if (lik == 0.0) continue;
      const Eigen::Index j0 = std::max<Eigen::Index>(0, k - rhs.lower_);
      const Eigen::Index j1 = std::min<Eigen::Index>(n - 1, k + rhs.upper_);
      for (Eigen::Index j = j0; j <= j1; ++j) out.at(i, j) += lik * rhs(k, j);
    }
  }
  return out;
}

BandMatrix BandMatrix::sum(const BandMatrix& a, const BandMatrix& b, double scale_b) {
  if (a.n_ != b.n_) throw Error(ErrorKind::InvalidParameter, "band sum dimension mismatch");
  BandMatrix out(a.n_, std::max(a.lower_, b.lower_), std::max(a.upper_, b.upper_));
  for (Eigen::Index i = 0; i < a.n_; ++i) {
    const Eigen::Index j0 = std::max<Eigen::Index>(0, i - out.lower_);
    const Eigen::Index j1 = std::min<Eigen::Index>(a.n_ - 1, i + out.upper_);
    for (Eigen::Index j = j0; j <= j1; ++j) out.at(i, j) = a(i, j) + scale_b * b(i, j);
  }
  return out;
}

BandedLU::BandedLU(const BandMatrix& m, double pivot_tolerance)
    : n_(m.dimension()),
      kl_(m.lower_bandwidth()),
      ku_(m.upper_bandwidth() + m.lower_bandwidth()),
      lu_(Eigen::MatrixXd::Zero(m.dimension(), 2 * m.lower_bandwidth() + m.upper_bandwidth() + 1)),
      pivots_(static_cast<std::size_t>(m.dimension())) {
  auto cell = [&](Eigen::Index i, Eigen::Index j) -> double& { return lu_(i, j - i + kl_); };

  for (Eigen::Index i = 0; i < n_; ++i) {
    const Eigen::Index j0 = std::max<Eigen::Index>(0, i - kl_);
    const Eigen::Index j1 = std::min<Eigen::Index>(n_ - 1, i + m.upper_bandwidth());
    for (Eigen::Index j = j0; j <= j1; ++j) cell(i, j) = m(i, j);
  }

  const double threshold = pivot_tolerance * std::max(m.max_abs(), 1e-300);
  for (Eigen::Index k = 0; k < n_; ++k) {
    const Eigen::Index last_row = std::min<Eigen::Index>(n_ - 1, k + kl_);
    Eigen::Index p = k;
    for (Eigen::Index i = k + 1; i <= last_row; ++i) {
      if (std::abs(cell(i, k)) > std::abs(cell(p, k))) p = i;
    }
    pivots_[static_cast<std::size_t>(k)] = p;
    if (std::abs(cell(p, k)) < threshold) {
      throw Error(ErrorKind::SingularSystem, "pivot below tolerance at row " + std::to_string(k));
    }
    const Eigen::Index last_col = std::min<Eigen::Index>(n_ - 1, k + ku_);
    if (p != k) {
      for (Eigen::Index j = k; j <= last_col; ++j) std::swap(cell(k, j), cell(p, j));
    }
    const double pivot = cell(k, k);
    for (Eigen::Index i = k + 1; i <= last_row; ++i) {
      const double l = cell(i, k) / pivot;
      cell(i, k) = l;
      if (l == 0.0) continue;
      for (Eigen::Index j = k + 1; j <= last_col; ++j) cell(i, j) -= l * cell(k, j);
    }
  }
}

void BandedLU::solve_in_place(Eigen::MatrixXd& b) const {
  if (b.rows() != n_) throw Error(ErrorKind::InvalidParameter, "rhs row count does not match dimension");
  auto cell = [&](Eigen::Index i, Eigen::Index j) { return lu_(i, j - i + kl_); };
  for (Eigen::Index k = 0; k < n_; ++k) {
    const Eigen::Index p = pivots_[static_cast<std::size_t>(k)];
    if (p != k) b.row(k).swap(b.row(p));
    const Eigen::Index last_row = std::min<Eigen::Index>(n_ - 1, k + kl_);
    for (Eigen::Index i = k + 1; i <= last_row; ++i) b.row(i) -= cell(i, k) * b.row(k);
  }
  for (Eigen::Index i = n_ - 1; i >= 0; --i) {
    const Eigen::Index last_col = std::min<Eigen::Index>(n_ - 1, i + ku_);
    for (Eigen::Index j = i + 1; j <= last_col; ++j) b.row(i) -= cell(i, j) * b.row(j);
    b.row(i) /= cell(i, i);
  }
}

Eigen::MatrixXd BandedLU::solve(const Eigen::MatrixXd& rhs) const {
  Eigen::MatrixXd x = rhs;
  solve_in_place(x);
  return x;
}

Eigen::MatrixXd solve_banded(const BandMatrix& m, const Eigen::MatrixXd& rhs) {
  return BandedLU(m).solve(rhs);
}

}  // namespace otg
