// Index bookkeeping for the exterior square Lambda^2(R^n).
//
// Convention used throughout the library: the basis {e_i ^ e_j : i < j} of
// Lambda^2(R^n) is declared orthonormal, and an operator on Lambda^2 is stored
// as the dense N x N array with N = n(n-1)/2 whose ((i,j),(k,l)) entry is the
// curvature component R_{ijkl} itself.  Under this convention the curvature
// operator of the round unit sphere, I = (1/2) id ^ id, is represented by the
// identity matrix.

#ifndef CURVFLOW_LAMBDA2_HPP
#define CURVFLOW_LAMBDA2_HPP

#include <Eigen/Dense>

#include <stdexcept>
#include <utility>
#include <vector>

namespace curvflow {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Number of unordered index pairs {i,j}, i < j, drawn from {0,...,n-1}.
inline int pair_count(int n) { return n * (n - 1) / 2; }

/// Lexicographic index of the pair (i,j) with 0 <= i < j < n.
inline int pair_index(int n, int i, int j) {
  return i * n - i * (i + 1) / 2 + (j - i - 1);
}

/// Pair-index lookup tables for one dimension n.
class Lambda2Index {
 public:
  explicit Lambda2Index(int n) : n_(n) {
    if (n < 2) throw std::invalid_argument("Lambda2Index: need n >= 2");
    pairs_.reserve(pair_count(n));
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) pairs_.emplace_back(i, j);
  }

  int n() const { return n_; }
  int size() const { return static_cast<int>(pairs_.size()); }
  int index(int i, int j) const { return pair_index(n_, i, j); }
  std::pair<int, int> pair(int a) const { return pairs_[a]; }

 private:
  int n_;
  std::vector<std::pair<int, int>> pairs_;
};

/// Coordinates of the simple two-form u ^ v in the {e_i ^ e_j : i<j} basis.
template <typename Scalar>
VectorX<Scalar> wedge_coords(const VectorX<Scalar>& u, const VectorX<Scalar>& v) {
  const int n = static_cast<int>(u.size());
  VectorX<Scalar> w(pair_count(n));
  int a = 0;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j, ++a) w[a] = u[i] * v[j] - u[j] * v[i];
  return w;
}

/// Antisymmetric n x n matrix X with X(i,j) = w[pair_index(i,j)] for i < j.
/// For w the Lambda^2 coordinates of a two-form phi, the bilinear form
/// (u,v) -> <phi, u ^ v> equals u^T X v.
template <typename Scalar>
MatrixX<Scalar> antisym_matrix(int n, const VectorX<Scalar>& w) {
  MatrixX<Scalar> x = MatrixX<Scalar>::Zero(n, n);
  int a = 0;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j, ++a) {
      x(i, j) = w[a];
      x(j, i) = -w[a];
    }
  return x;
}

/// Matrix of the induced map Lambda^2(Q) on the {e_i ^ e_j : i<j} basis:
/// column (i,j) holds the coordinates of (Q e_i) ^ (Q e_j).  Orthogonal Q
/// yields an orthogonal pushforward under the declared inner product.
template <typename Scalar>
MatrixX<Scalar> lambda2_pushforward(const MatrixX<Scalar>& q) {
  const int n = static_cast<int>(q.rows());
  const int N = pair_count(n);
  MatrixX<Scalar> p(N, N);
  int col = 0;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j, ++col) {
      int row = 0;
      for (int k = 0; k < n; ++k)
        for (int l = k + 1; l < n; ++l, ++row)
          p(row, col) = q(k, i) * q(l, j) - q(l, i) * q(k, j);
    }
  return p;
}

}  // namespace curvflow

#endif  // CURVFLOW_LAMBDA2_HPP
