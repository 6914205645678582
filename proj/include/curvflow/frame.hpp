// Orthonormal k-frames in R^n (rows of a k x n matrix), Stiefel-manifold
// helpers (tangent projection, Gram-Schmidt retraction), deterministic
// completion to a full orthonormal basis, and Haar-like random frames.

#ifndef CURVFLOW_FRAME_HPP
#define CURVFLOW_FRAME_HPP

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>

#include "curvflow/lambda2.hpp"

namespace curvflow {

/// Modified Gram-Schmidt on the rows of m (in place), with the positive
/// diagonal sign convention: each row is divided by its positive residual
/// norm, never negated.  Throws if the rows are numerically rank deficient.
template <typename Scalar>
void gram_schmidt_rows(MatrixX<Scalar>& m, Scalar rank_tol = Scalar(1e-10)) {
  const int k = static_cast<int>(m.rows());
  for (int r = 0; r < k; ++r) {
    for (int pass = 0; pass < 2; ++pass)  // re-orthogonalize once for accuracy
      for (int s = 0; s < r; ++s) m.row(r) -= m.row(r).dot(m.row(s)) * m.row(s);
    const Scalar nrm = m.row(r).norm();
    if (nrm <= rank_tol)
      throw std::invalid_argument("gram_schmidt_rows: rows are numerically rank deficient");
    m.row(r) /= nrm;
  }
}

template <typename Scalar>
class OrthonormalFrame {
 public:
  OrthonormalFrame() : n_(0), k_(0) {}

  /// Validating constructor: rows must already be orthonormal to 1e-12 of a
  /// Gram-matrix entry; mild drift (< 1e-6) is repaired by Gram-Schmidt.
  OrthonormalFrame(int n, int k, const MatrixX<Scalar>& rows) : n_(n), k_(k), rows_(rows) {
    if (k < 1 || k > n) throw std::invalid_argument("OrthonormalFrame: need 1 <= k <= n");
    if (rows.rows() != k || rows.cols() != n)
      throw std::invalid_argument("OrthonormalFrame: row matrix must be k x n");
    const Scalar resid = gram_residual();
    if (resid > Scalar(1e-6))
      throw std::invalid_argument("OrthonormalFrame: rows are not orthonormal");
    if (resid > Scalar(1e-12)) gram_schmidt_rows(rows_);
  }

  /// Orthonormalize arbitrary rows (used for retractions and random frames).
  static OrthonormalFrame FromRows(const MatrixX<Scalar>& rows) {
    MatrixX<Scalar> m = rows;
    gram_schmidt_rows(m);
    OrthonormalFrame f;
    f.n_ = static_cast<int>(m.cols());
    f.k_ = static_cast<int>(m.rows());
    f.rows_ = std::move(m);
    return f;
  }

  int n() const { return n_; }
  int k() const { return k_; }
  const MatrixX<Scalar>& rows() const { return rows_; }
  VectorX<Scalar> vector(int r) const { return rows_.row(r).transpose(); }

  /// Max-abs entry of rows * rows^T - Id.
  Scalar gram_residual() const {
    return (rows_ * rows_.transpose() - MatrixX<Scalar>::Identity(k_, k_))
        .template lpNorm<Eigen::Infinity>();
  }

 private:
  int n_, k_;
  MatrixX<Scalar> rows_;
};

/// Projection of an ambient k x n perturbation onto the Stiefel tangent space
/// at f: g - sym(g f^T) f.
template <typename Scalar>
MatrixX<Scalar> tangent_project(const OrthonormalFrame<Scalar>& f, const MatrixX<Scalar>& g) {
  const MatrixX<Scalar> a = g * f.rows().transpose();
  return g - ((a + a.transpose()) / Scalar(2)) * f.rows();
}

/// Gram-Schmidt retraction: orthonormalize f + t row by row.  Agrees with
/// f + t to first order for tangent t, and retract(f, 0) = f.
template <typename Scalar>
OrthonormalFrame<Scalar> stiefel_retract(const OrthonormalFrame<Scalar>& f,
                                         const MatrixX<Scalar>& t) {
  return OrthonormalFrame<Scalar>::FromRows(f.rows() + t);
}

/// Haar-like random frame: Gram-Schmidt of k Gaussian rows.
template <typename Scalar, class Urbg>
OrthonormalFrame<Scalar> random_frame(int n, int k, Urbg& rng) {
  std::normal_distribution<Scalar> gauss(Scalar(0), Scalar(1));
  for (int attempt = 0; attempt < 64; ++attempt) {
    MatrixX<Scalar> m(k, n);
    for (int r = 0; r < k; ++r)
      for (int c = 0; c < n; ++c) m(r, c) = gauss(rng);
    try {
      return OrthonormalFrame<Scalar>::FromRows(m);
    } catch (const std::invalid_argument&) {
      continue;  // astronomically rare rank deficiency: redraw
    }
  }
  throw std::runtime_error("random_frame: repeated rank deficiency");
}

/// Deterministic completion of a frame to a full orthonormal basis of R^n:
/// the first k rows are the frame itself, the rest come from Gram-Schmidt of
/// the standard basis vectors taken in order (skipping near-dependent ones).
template <typename Scalar>
MatrixX<Scalar> complete_basis(const OrthonormalFrame<Scalar>& f) {
  const int n = f.n();
  const int k = f.k();
  MatrixX<Scalar> basis(n, n);
  basis.topRows(k) = f.rows();
  int filled = k;
  for (int c = 0; c < n && filled < n; ++c) {
    VectorX<Scalar> v = VectorX<Scalar>::Unit(n, c);
    for (int pass = 0; pass < 2; ++pass)
      for (int r = 0; r < filled; ++r)
        v -= basis.row(r).dot(v.transpose()) * basis.row(r).transpose();
    const Scalar nrm = v.norm();
    if (nrm > Scalar(1e-2)) {
      basis.row(filled++) = (v / nrm).transpose();
    }
  }
  if (filled < n) throw std::runtime_error("complete_basis: failed to complete frame");
  return basis;
}

using OrthonormalFramed = OrthonormalFrame<double>;

}  // namespace curvflow

#endif  // CURVFLOW_FRAME_HPP
