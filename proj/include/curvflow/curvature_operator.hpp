// Algebraic curvature operators on Lambda^2(R^n), stored as dense symmetric
// N x N arrays (N = n(n-1)/2) in the orthonormal {e_i ^ e_j : i<j} basis.
// The ((i,j),(k,l)) array entry is the component R_{ijkl}; index antisymmetry
// in each pair is realized by the accessors, pair symmetry by the array.

#ifndef CURVFLOW_CURVATURE_OPERATOR_HPP
#define CURVFLOW_CURVATURE_OPERATOR_HPP

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "curvflow/lambda2.hpp"

namespace curvflow {

template <typename Scalar>
class CurvatureOperator {
 public:
  CurvatureOperator() : n_(0) {}

  /// Zero operator on Lambda^2(R^n).
  explicit CurvatureOperator(int n)
      : n_(check_dim(n)), m_(MatrixX<Scalar>::Zero(pair_count(n), pair_count(n))) {}

  /// Wrap an existing Lambda^2 array (must be N x N with N = n(n-1)/2 and
  /// symmetric; symmetry is the caller's responsibility and is enforced to
  /// machine precision by symmetrization here).
  CurvatureOperator(int n, const MatrixX<Scalar>& lambda2_array) : n_(check_dim(n)) {
    const int N = pair_count(n);
    if (lambda2_array.rows() != N || lambda2_array.cols() != N)
      throw std::invalid_argument("CurvatureOperator: array size does not match n");
    m_ = ((lambda2_array + lambda2_array.transpose()) / Scalar(2)).eval();
  }

  /// Curvature operator of the round unit sphere, I = (1/2) id ^ id: the
  /// identity array in this basis convention.
  static CurvatureOperator Identity(int n) {
    CurvatureOperator r(n);
    r.m_.setIdentity();
    return r;
  }

  int n() const { return n_; }
  int lambda2_dim() const { return static_cast<int>(m_.rows()); }
  const MatrixX<Scalar>& matrix() const { return m_; }
  MatrixX<Scalar>& matrix() { return m_; }

  /// Component R_{ijkl} with full antisymmetry in (i,j) and (k,l).
  Scalar entry(int i, int j, int k, int l) const {
    check_index(i);
    check_index(j);
    check_index(k);
    check_index(l);
    if (i == j || k == l) return Scalar(0);
    Scalar sign(1);
    if (i > j) {
      std::swap(i, j);
      sign = -sign;
    }
    if (k > l) {
      std::swap(k, l);
      sign = -sign;
    }
    return sign * m_(pair_index(n_, i, j), pair_index(n_, k, l));
  }

  Scalar operator()(int i, int j, int k, int l) const { return entry(i, j, k, l); }

  /// Add v to the component R_{ijkl} (and to every entry tied to it by the
  /// pair symmetries).  Indices must be distinct within each pair.
  void add(int i, int j, int k, int l, Scalar v) {
    check_index(i);
    check_index(j);
    check_index(k);
    check_index(l);
    if (i == j || k == l)
      throw std::invalid_argument("CurvatureOperator::add: repeated index within a pair");
    Scalar sign(1);
    if (i > j) {
      std::swap(i, j);
      sign = -sign;
    }
    if (k > l) {
      std::swap(k, l);
      sign = -sign;
    }
    const int a = pair_index(n_, i, j);
    const int b = pair_index(n_, k, l);
    m_(a, b) += sign * v;
    if (a != b) m_(b, a) += sign * v;
  }

  Scalar trace() const { return m_.trace(); }
  Scalar norm() const { return m_.norm(); }

  CurvatureOperator& operator+=(const CurvatureOperator& o) {
    m_ += o.m_;
    return *this;
  }
  CurvatureOperator& operator-=(const CurvatureOperator& o) {
    m_ -= o.m_;
    return *this;
  }
  CurvatureOperator& operator*=(Scalar c) {
    m_ *= c;
    return *this;
  }

 private:
  static int check_dim(int n) {
    if (n < 2) throw std::invalid_argument("CurvatureOperator: need n >= 2");
    return n;
  }
  void check_index(int i) const {
    if (i < 0 || i >= n_) throw std::out_of_range("CurvatureOperator: index out of range");
  }

  int n_;
  MatrixX<Scalar> m_;
};

template <typename Scalar>
CurvatureOperator<Scalar> operator+(CurvatureOperator<Scalar> a, const CurvatureOperator<Scalar>& b) {
  return a += b;
}
template <typename Scalar>
CurvatureOperator<Scalar> operator-(CurvatureOperator<Scalar> a, const CurvatureOperator<Scalar>& b) {
  return a -= b;
}
template <typename Scalar>
CurvatureOperator<Scalar> operator*(Scalar c, CurvatureOperator<Scalar> a) {
  return a *= c;
}
template <typename Scalar>
CurvatureOperator<Scalar> operator*(CurvatureOperator<Scalar> a, Scalar c) {
  return a *= c;
}

/// One component assignment for from_components: indices and a value.
template <typename Scalar>
struct ComponentAssignment {
  int i, j, k, l;
  Scalar value;
};

/// Build an operator from sparse component assignments.  Each assignment sets
/// the full symmetry orbit of (i,j,k,l) under pair antisymmetry and pair
/// exchange; two assignments landing on the same orbit must agree (after sign
/// normalization) or the call is rejected naming the orbit.
template <typename Scalar>
CurvatureOperator<Scalar> from_components(int n,
                                          const std::vector<ComponentAssignment<Scalar>>& entries) {
  CurvatureOperator<Scalar> r(n);
  std::map<std::pair<int, int>, Scalar> seen;  // canonical (a,b) with a <= b
  for (const auto& e : entries) {
    int i = e.i, j = e.j, k = e.k, l = e.l;
    if (i < 0 || j < 0 || k < 0 || l < 0 || i >= n || j >= n || k >= n || l >= n)
      throw std::out_of_range("from_components: index out of range");
    if (i == j || k == l)
      throw std::invalid_argument("from_components: repeated index within a pair");
    Scalar sign(1);
    if (i > j) {
      std::swap(i, j);
      sign = -sign;
    }
    if (k > l) {
      std::swap(k, l);
      sign = -sign;
    }
    int a = pair_index(n, i, j);
    int b = pair_index(n, k, l);
    if (a > b) std::swap(a, b);
    const Scalar canon = sign * e.value;
    auto [it, inserted] = seen.emplace(std::make_pair(a, b), canon);
    if (!inserted) {
      if (it->second != canon)
        throw std::invalid_argument(
            "from_components: conflicting values for symmetry orbit of (" + std::to_string(e.i) +
            "," + std::to_string(e.j) + "," + std::to_string(e.k) + "," + std::to_string(e.l) + ")");
      continue;
    }
    r.matrix()(a, b) = canon;
    r.matrix()(b, a) = canon;
  }
  return r;
}

/// Multilinear evaluation R(u, v, w, z) = sum R_{ijkl} u_i v_j w_k z_l.
template <typename Scalar>
Scalar evaluate(const CurvatureOperator<Scalar>& r, const VectorX<Scalar>& u,
                const VectorX<Scalar>& v, const VectorX<Scalar>& w, const VectorX<Scalar>& z) {
  return wedge_coords<Scalar>(u, v).dot(r.matrix() * wedge_coords<Scalar>(w, z));
}

/// Totally antisymmetric (Lambda^4) part of a pair-symmetric tensor:
/// B_{ijkl} = (R_{ijkl} + R_{iklj} + R_{iljk}) / 3.
template <typename Scalar>
CurvatureOperator<Scalar> alternating_part(const CurvatureOperator<Scalar>& r) {
  const int n = r.n();
  CurvatureOperator<Scalar> b(n);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const int a = pair_index(n, i, j);
      for (int k = 0; k < n; ++k)
        for (int l = k + 1; l < n; ++l) {
          const int c = pair_index(n, k, l);
          if (c < a) continue;
          const Scalar v =
              (r.entry(i, j, k, l) + r.entry(i, k, l, j) + r.entry(i, l, j, k)) / Scalar(3);
          b.matrix()(a, c) = v;
          b.matrix()(c, a) = v;
        }
    }
  return b;
}

/// Largest absolute first-Bianchi cyclic sum, relative to the operator's
/// max-abs entry (0 for the zero operator).
template <typename Scalar>
Scalar bianchi_residual(const CurvatureOperator<Scalar>& r) {
  using std::abs;
  const int n = r.n();
  Scalar worst(0);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      for (int k = j + 1; k < n; ++k)
        for (int l = k + 1; l < n; ++l) {
          const Scalar s = r.entry(i, j, k, l) + r.entry(i, k, l, j) + r.entry(i, l, j, k);
          if (abs(s) > worst) worst = abs(s);
        }
  const Scalar scale = r.matrix().size() ? r.matrix().template lpNorm<Eigen::Infinity>() : Scalar(0);
  return scale > Scalar(0) ? worst / scale : worst;
}

/// Orthogonal projection onto the first-Bianchi subspace: subtract the
/// totally antisymmetric part.  Among all Bianchi tensors this minimizes the
/// Frobenius distance to the input (the Lambda^4 summand is orthogonal to the
/// Bianchi summand), and it is the identity on Bianchi tensors.
template <typename Scalar>
CurvatureOperator<Scalar> bianchi_project(const CurvatureOperator<Scalar>& r) {
  return r - alternating_part(r);
}

/// Ricci contraction Ric_{ik} = sum_j R_{ijkj}; symmetric n x n.
template <typename Scalar>
MatrixX<Scalar> ricci(const CurvatureOperator<Scalar>& r) {
  const int n = r.n();
  MatrixX<Scalar> ric = MatrixX<Scalar>::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int k = i; k < n; ++k) {
      Scalar s(0);
      for (int j = 0; j < n; ++j) s += r.entry(i, j, k, j);
      ric(i, k) = s;
      ric(k, i) = s;
    }
  return ric;
}

/// Scalar curvature: trace of the Ricci contraction (= 2 trace of the array).
template <typename Scalar>
Scalar scalar_curvature(const CurvatureOperator<Scalar>& r) {
  return Scalar(2) * r.trace();
}

/// Trace-free Ricci part.
template <typename Scalar>
MatrixX<Scalar> ricci_traceless(const CurvatureOperator<Scalar>& r) {
  MatrixX<Scalar> ric = ricci(r);
  const int n = r.n();
  return ric - (ric.trace() / Scalar(n)) * MatrixX<Scalar>::Identity(n, n);
}

/// Kulkarni-Nomizu product of two symmetric bilinear forms:
/// (A ^ B)_{ijkl} = A_ik B_jl - A_il B_jk - A_jk B_il + A_jl B_ik.
template <typename Scalar>
CurvatureOperator<Scalar> kulkarni_nomizu(const MatrixX<Scalar>& a, const MatrixX<Scalar>& b) {
  const int n = static_cast<int>(a.rows());
  if (a.rows() != a.cols() || b.rows() != b.cols() || b.rows() != n)
    throw std::invalid_argument("kulkarni_nomizu: inputs must be square of equal size");
  CurvatureOperator<Scalar> r(n);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const int p = pair_index(n, i, j);
      for (int k = 0; k < n; ++k)
        for (int l = k + 1; l < n; ++l) {
          const int q = pair_index(n, k, l);
          if (q < p) continue;
          const Scalar v = a(i, k) * b(j, l) - a(i, l) * b(j, k) - a(j, k) * b(i, l) +
                           a(j, l) * b(i, k);
          r.matrix()(p, q) = v;
          r.matrix()(q, p) = v;
        }
    }
  return r;
}

/// Zero extension to R^{n+extra}: components with all indices < n are copied,
/// every component touching a new index vanishes.
template <typename Scalar>
CurvatureOperator<Scalar> extend(const CurvatureOperator<Scalar>& r, int extra) {
  if (extra < 0) throw std::invalid_argument("extend: extra must be >= 0");
  const int n = r.n();
  const int m = n + extra;
  CurvatureOperator<Scalar> e(m);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const int src_a = pair_index(n, i, j);
      const int dst_a = pair_index(m, i, j);
      for (int k = 0; k < n; ++k)
        for (int l = k + 1; l < n; ++l)
          e.matrix()(dst_a, pair_index(m, k, l)) = r.matrix()(src_a, pair_index(n, k, l));
    }
  return e;
}

/// Pullback along the linear map q: components of the operator
/// R'(u,v,w,z) = R(qu, qv, qw, qz).  For orthogonal q this is the change of
/// basis to the frame with vectors q e_i.
template <typename Scalar>
CurvatureOperator<Scalar> conjugate(const CurvatureOperator<Scalar>& r, const MatrixX<Scalar>& q) {
  if (q.rows() != r.n() || q.cols() != r.n())
    throw std::invalid_argument("conjugate: matrix size does not match operator dimension");
  const MatrixX<Scalar> p = lambda2_pushforward(q);
  return CurvatureOperator<Scalar>(r.n(), p.transpose() * r.matrix() * p);
}

using CurvatureOperatord = CurvatureOperator<double>;

}  // namespace curvflow

#endif  // CURVFLOW_CURVATURE_OPERATOR_HPP
