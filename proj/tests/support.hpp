// Shared test utilities: independent brute-force oracles (dense four-index
// tensors, full 24-permutation alternation, least-squares Bianchi projection
// via an explicit constraint solve, Householder-QR random frames) that never
// reuse the library's own shortcut formulas.

#ifndef CURVFLOW_TESTS_SUPPORT_HPP
#define CURVFLOW_TESTS_SUPPORT_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <utility>
#include <vector>

#include "curvflow/curvature_operator.hpp"
#include "curvflow/frame.hpp"
#include "curvflow/lambda2.hpp"

namespace testsupport {

using curvflow::CurvatureOperator;
using curvflow::CurvatureOperatord;
using curvflow::Lambda2Index;
using curvflow::MatrixX;
using curvflow::OrthonormalFramed;
using curvflow::VectorX;

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// ----------------------------------------------------------------------------
// Dense four-index tensor
// ----------------------------------------------------------------------------

class Tensor4 {
 public:
  explicit Tensor4(int n) : n_(n), v_(static_cast<std::size_t>(n) * n * n * n, 0.0) {}

  int n() const { return n_; }
  double& at(int i, int j, int k, int l) {
    return v_[((static_cast<std::size_t>(i) * n_ + j) * n_ + k) * n_ + l];
  }
  double at(int i, int j, int k, int l) const {
    return v_[((static_cast<std::size_t>(i) * n_ + j) * n_ + k) * n_ + l];
  }

  static Tensor4 from_operator(const CurvatureOperatord& r) {
    Tensor4 t(r.n());
    for (int i = 0; i < r.n(); ++i)
      for (int j = 0; j < r.n(); ++j)
        for (int k = 0; k < r.n(); ++k)
          for (int l = 0; l < r.n(); ++l) t.at(i, j, k, l) = r.entry(i, j, k, l);
    return t;
  }

  CurvatureOperatord to_operator() const {
    const Lambda2Index idx(n_);
    Matrix m(idx.size(), idx.size());
    for (int a = 0; a < idx.size(); ++a) {
      const auto [i, j] = idx.pair(a);
      for (int b = 0; b < idx.size(); ++b) {
        const auto [k, l] = idx.pair(b);
        m(a, b) = at(i, j, k, l);
      }
    }
    return CurvatureOperatord(n_, m);
  }

  double max_abs() const {
    double m = 0;
    for (double x : v_) m = std::max(m, std::abs(x));
    return m;
  }

 private:
  int n_;
  std::vector<double> v_;
};

/// Direct multilinear contraction sum_{ijkl} t_ijkl u_i v_j w_k z_l.
inline double contract(const Tensor4& t, const Vector& u, const Vector& v, const Vector& w,
                       const Vector& z) {
  double s = 0;
  for (int i = 0; i < t.n(); ++i)
    for (int j = 0; j < t.n(); ++j)
      for (int k = 0; k < t.n(); ++k)
        for (int l = 0; l < t.n(); ++l) s += t.at(i, j, k, l) * u[i] * v[j] * w[k] * z[l];
  return s;
}

/// Full 24-term alternation (the Lambda^4 projection of a 4-tensor), written
/// without any symmetry shortcuts.
inline Tensor4 alternation(const Tensor4& t) {
  std::array<int, 4> perm{0, 1, 2, 3};
  std::vector<std::pair<std::array<int, 4>, int>> perms;  // permutation, sign
  do {
    int inversions = 0;
    for (int a = 0; a < 4; ++a)
      for (int b = a + 1; b < 4; ++b)
        if (perm[a] > perm[b]) ++inversions;
    perms.push_back({perm, (inversions % 2 == 0) ? 1 : -1});
  } while (std::next_permutation(perm.begin(), perm.end()));

  Tensor4 out(t.n());
  for (int i = 0; i < t.n(); ++i)
    for (int j = 0; j < t.n(); ++j)
      for (int k = 0; k < t.n(); ++k)
        for (int l = 0; l < t.n(); ++l) {
          const std::array<int, 4> x{i, j, k, l};
          double s = 0;
          for (const auto& [p, sign] : perms)
            s += sign * t.at(x[p[0]], x[p[1]], x[p[2]], x[p[3]]);
          out.at(i, j, k, l) = s / 24.0;
        }
  return out;
}

/// Max cyclic-sum violation |R_ijkl + R_iklj + R_iljk| over all quadruples.
inline double bianchi_violation(const Tensor4& t) {
  double m = 0;
  for (int i = 0; i < t.n(); ++i)
    for (int j = 0; j < t.n(); ++j)
      for (int k = 0; k < t.n(); ++k)
        for (int l = 0; l < t.n(); ++l)
          m = std::max(m, std::abs(t.at(i, j, k, l) + t.at(i, k, l, j) + t.at(i, l, j, k)));
  return m;
}

// ----------------------------------------------------------------------------
// Least-squares Bianchi projection through an explicit constraint solve
// ----------------------------------------------------------------------------

/// Orthogonal projection of the symmetric two-form array onto the subspace
/// where every strictly increasing quadruple satisfies
/// M_(ij),(kl) - M_(ik),(jl) + M_(il),(jk) = 0, computed as
/// x - A^T (A A^T)^{-1} A x on the strictly-upper coordinates.  Tensor- and
/// array-Frobenius norms are proportional, so this is the Frobenius-nearest
/// Bianchi operator.
inline CurvatureOperatord bianchi_project_oracle(const CurvatureOperatord& r) {
  const int n = r.n();
  const Lambda2Index idx(n);
  const int nn = idx.size();

  std::vector<std::pair<int, int>> coords;  // strictly upper (a < b)
  Matrix coord_of = Matrix::Constant(nn, nn, -1);
  for (int a = 0; a < nn; ++a)
    for (int b = a + 1; b < nn; ++b) {
      coord_of(a, b) = static_cast<double>(coords.size());
      coords.push_back({a, b});
    }
  auto coord = [&](int a, int b) {
    return static_cast<int>(coord_of(std::min(a, b), std::max(a, b)));
  };

  std::vector<std::array<int, 4>> quads;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      for (int k = j + 1; k < n; ++k)
        for (int l = k + 1; l < n; ++l) quads.push_back({i, j, k, l});

  Matrix cons = Matrix::Zero(static_cast<int>(quads.size()), static_cast<int>(coords.size()));
  for (int row = 0; row < static_cast<int>(quads.size()); ++row) {
    const auto [i, j, k, l] = quads[row];
    cons(row, coord(idx.index(i, j), idx.index(k, l))) += 1.0;
    cons(row, coord(idx.index(i, k), idx.index(j, l))) -= 1.0;
    cons(row, coord(idx.index(i, l), idx.index(j, k))) += 1.0;
  }

  Vector x(coords.size());
  for (std::size_t c = 0; c < coords.size(); ++c) x[c] = r.matrix()(coords[c].first, coords[c].second);

  if (!quads.empty()) {
    const Matrix gram = cons * cons.transpose();
    const Vector lam = gram.ldlt().solve(cons * x);
    x -= cons.transpose() * lam;
  }

  Matrix m = r.matrix();
  for (std::size_t c = 0; c < coords.size(); ++c) {
    m(coords[c].first, coords[c].second) = x[c];
    m(coords[c].second, coords[c].first) = x[c];
  }
  return CurvatureOperatord(n, m);
}

// ----------------------------------------------------------------------------
// Randomness helpers (independent of the library's frame utilities)
// ----------------------------------------------------------------------------

inline Matrix gaussian_matrix(int rows, int cols, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Matrix m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = g(rng);
  return m;
}

inline Vector gaussian_vector(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Vector v(n);
  for (int i = 0; i < n; ++i) v[i] = g(rng);
  return v;
}

/// Random orthonormal k-frame from a Householder QR factorization (not the
/// library's Gram-Schmidt path).
inline OrthonormalFramed householder_frame(int n, int k, std::mt19937_64& rng) {
  const Matrix g = gaussian_matrix(n, n, rng);
  const Eigen::HouseholderQR<Matrix> qr(g);
  const Matrix q = qr.householderQ();
  Matrix rows(k, n);
  for (int r = 0; r < k; ++r) rows.row(r) = q.col(r).transpose();
  return OrthonormalFramed(n, k, rows);
}

/// Random Gaussian symmetric array, Bianchi-projected through the ORACLE.
inline CurvatureOperatord random_bianchi_oracle(int n, std::mt19937_64& rng) {
  const int nn = curvflow::pair_count(n);
  return bianchi_project_oracle(CurvatureOperatord(n, gaussian_matrix(nn, nn, rng)));
}

/// Brute-force minimum of a frame objective over random 4-frames.
template <class Fn>
double sampled_min(const Fn& f, int n, int k, int count, std::mt19937_64& rng) {
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < count; ++i) best = std::min(best, f(householder_frame(n, k, rng)));
  return best;
}

inline double rel(double value, double scale) { return std::abs(value) / std::max(scale, 1e-300); }

}  // namespace testsupport

#endif  // CURVFLOW_TESTS_SUPPORT_HPP
