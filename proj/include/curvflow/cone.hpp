// The deformed cone family: standard Ricci decomposition, the linear
// transform l_ab(R) = R + b Ric0 ^ id + (a/n) scal id ^ id and its inverse,
// the one-parameter cone family C(s) checked through the preimage, a
// finite-difference transversality probe along Q(R), the single-step
// pinching predicate, and ratio-based delta-pinching.

#ifndef CURVFLOW_CONE_HPP
#define CURVFLOW_CONE_HPP

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>

#include "curvflow/conditions.hpp"
#include "curvflow/curvature_operator.hpp"
#include "curvflow/lambda2.hpp"
#include "curvflow/ode.hpp"

namespace curvflow {

// ---------------------------------------------------------------------------
// Ricci decomposition
// ---------------------------------------------------------------------------

template <typename Scalar>
struct RicciDecomposition {
  Scalar scal = 0;               // scalar curvature
  MatrixX<Scalar> ric0;          // trace-free Ricci part
  CurvatureOperator<Scalar> weyl_part;  // residual, Ricci-flat
};

/// R = scal/(2n(n-1)) id^id + 1/(n-2) ric0^id + weyl_part.
template <typename Scalar>
RicciDecomposition<Scalar> decompose(const CurvatureOperator<Scalar>& r) {
  const int n = r.n();
  if (n < 4) throw std::invalid_argument("decompose: needs n >= 4");
  RicciDecomposition<Scalar> d;
  d.scal = scalar_curvature(r);
  d.ric0 = ricci_traceless(r);
  const MatrixX<Scalar> id = MatrixX<Scalar>::Identity(n, n);
  CurvatureOperator<Scalar> rest = r;
  rest -= (d.scal / Scalar(2 * n * (n - 1))) * kulkarni_nomizu<Scalar>(id, id);
  rest -= (Scalar(1) / Scalar(n - 2)) * kulkarni_nomizu<Scalar>(d.ric0, id);
  d.weyl_part = rest;
  return d;
}

template <typename Scalar>
CurvatureOperator<Scalar> recompose(const RicciDecomposition<Scalar>& d) {
  const int n = d.weyl_part.n();
  const MatrixX<Scalar> id = MatrixX<Scalar>::Identity(n, n);
  CurvatureOperator<Scalar> r = d.weyl_part;
  r += (d.scal / Scalar(2 * n * (n - 1))) * kulkarni_nomizu<Scalar>(id, id);
  r += (Scalar(1) / Scalar(n - 2)) * kulkarni_nomizu<Scalar>(d.ric0, id);
  return r;
}

// ---------------------------------------------------------------------------
// The l_{a,b} transform
// ---------------------------------------------------------------------------

/// l_ab(R) = R + b Ric0 ^ id + (a/n) scal id ^ id.  Acting on the
/// decomposition summands it scales the scalar part by 1 + 2a(n-1), the
/// trace-free Ricci part by 1 + (n-2)b, and leaves the Weyl part alone.
template <typename Scalar>
CurvatureOperator<Scalar> l_ab(const CurvatureOperator<Scalar>& r, Scalar a, Scalar b) {
  const int n = r.n();
  const MatrixX<Scalar> id = MatrixX<Scalar>::Identity(n, n);
  CurvatureOperator<Scalar> out = r;
  out += b * kulkarni_nomizu<Scalar>(ricci_traceless(r), id);
  out += (a / Scalar(n)) * scalar_curvature(r) * kulkarni_nomizu<Scalar>(id, id);
  return out;
}

template <typename Scalar>
Scalar l_ab_scalar_factor(int n, Scalar a) {
  return Scalar(1) + Scalar(2) * a * Scalar(n - 1);
}
template <typename Scalar>
Scalar l_ab_ricci_factor(int n, Scalar b) {
  return Scalar(1) + Scalar(n - 2) * b;
}

/// Inverse of l_ab via the diagonal action on the decomposition.  Rejects
/// parameter combinations for which a summand factor vanishes.
template <typename Scalar>
CurvatureOperator<Scalar> l_ab_inverse(const CurvatureOperator<Scalar>& r, Scalar a, Scalar b) {
  const int n = r.n();
  const Scalar fs = l_ab_scalar_factor(n, a);
  const Scalar fr = l_ab_ricci_factor(n, b);
  if (std::abs(fs) < Scalar(1e-12))
    throw std::invalid_argument("l_ab_inverse: scalar-part factor 1 + 2a(n-1) vanishes");
  if (std::abs(fr) < Scalar(1e-12))
    throw std::invalid_argument("l_ab_inverse: ricci-part factor 1 + (n-2)b vanishes");
  RicciDecomposition<Scalar> d = decompose(r);
  d.scal /= fs;
  d.ric0 /= fr;
  return recompose(d);
}

// ---------------------------------------------------------------------------
// Cone family parameters
// ---------------------------------------------------------------------------

enum class ConeRegime { b_regime, a_regime };

template <typename Scalar>
struct ConeParams {
  Scalar s = 0;
  ConeRegime regime = ConeRegime::b_regime;
  Scalar a = 0, b = 0, p = 0;
};

/// One-parameter family: for s <= 1/2 take b = s and derive a and p from
/// 2a = (2b + (n-2)b^2) / (1 + (n-2)b^2),  p = 1 - 1/(1 + (n-2)b^2);
/// for s > 1/2 take a = s, b = 1/2 and p = 1 - 4/(n - 2 + 8a).
template <typename Scalar>
ConeParams<Scalar> cone_params(Scalar s, int n) {
  if (!(s > Scalar(0))) throw std::invalid_argument("cone_params: s must be positive");
  if (n < 3) throw std::invalid_argument("cone_params: needs n >= 3");
  ConeParams<Scalar> cp;
  cp.s = s;
  if (s <= Scalar(0.5)) {
    cp.regime = ConeRegime::b_regime;
    cp.b = s;
    const Scalar w = Scalar(1) + Scalar(n - 2) * cp.b * cp.b;
    cp.a = (Scalar(2) * cp.b + Scalar(n - 2) * cp.b * cp.b) / (Scalar(2) * w);
    cp.p = Scalar(1) - Scalar(1) / w;
  } else {
    cp.regime = ConeRegime::a_regime;
    cp.a = s;
    cp.b = Scalar(0.5);
    cp.p = Scalar(1) - Scalar(4) / (Scalar(n - 2) + Scalar(8) * cp.a);
  }
  return cp;
}

// ---------------------------------------------------------------------------
// Membership, transversality, pinching
// ---------------------------------------------------------------------------

template <typename Scalar>
struct ConeMembership {
  bool inside = false;
  Scalar margin = 0;  // min of the two slacks, in curvature units (not scale-normalized)
  CurvatureOperator<Scalar> preimage;
  Scalar weighted_slack = 0;  // weighted isotropic minimum of the preimage
  Scalar ricci_slack = 0;     // min eig(Ric) - (p/n) scal of the preimage
  ConeParams<Scalar> params;
};

/// Membership in C(s) through the preimage P = l_ab_inverse(R): inside iff
/// the weighted isotropic minimum of P and the Ricci pinching slack
/// min-eig(Ric P) - (p/n) scal(P) both clear -tol * max(1, |P|).  The margin
/// is the smaller slack itself, so it scales linearly along rays.
template <typename Scalar>
ConeMembership<Scalar> cone_membership(const CurvatureOperator<Scalar>& r, Scalar s,
                                       Scalar tol = Scalar(1e-8),
                                       const OptimizerOptions<Scalar>& opts = {}) {
  ConeMembership<Scalar> out;
  out.params = cone_params(s, r.n());
  out.preimage = l_ab_inverse(r, out.params.a, out.params.b);

  const ConditionReport<Scalar> rep = weighted_isotropic_min(out.preimage, opts);
  out.weighted_slack = rep.value;

  const MatrixX<Scalar> ric = ricci(out.preimage);
  Eigen::SelfAdjointEigenSolver<MatrixX<Scalar>> es(ric);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("cone_membership: Ricci eigensolve failed");
  const Scalar lam_min = es.eigenvalues().minCoeff();
  out.ricci_slack =
      lam_min - (out.params.p / Scalar(r.n())) * scalar_curvature(out.preimage);

  out.margin = std::min(out.weighted_slack, out.ricci_slack);
  const Scalar scale = std::max(Scalar(1), out.preimage.norm());
  out.inside = out.margin >= -tol * scale;
  return out;
}

template <typename Scalar>
struct TransversalityReport {
  Scalar h = 0;
  Scalar margin_before = 0;
  Scalar margin_after = 0;  // margin of R + h Q(R) in the same cone
  Scalar delta = 0;
  bool improved = false;
};

/// Finite-difference probe of the flow transversality: compare the membership
/// margin of R with that of R + h Q(R) in the same cone C(s).  For operators
/// on or near the boundary a positive delta indicates the field points into
/// the cone.
template <typename Scalar>
TransversalityReport<Scalar> transversality_probe(const CurvatureOperator<Scalar>& r, Scalar s,
                                                  Scalar h,
                                                  const OptimizerOptions<Scalar>& opts = {}) {
  TransversalityReport<Scalar> rep;
  rep.h = h;
  rep.margin_before = cone_membership(r, s, Scalar(1e-8), opts).margin;
  const CurvatureOperator<Scalar> moved = r + h * q_fast(r);
  rep.margin_after = cone_membership(moved, s, Scalar(1e-8), opts).margin;
  rep.delta = rep.margin_after - rep.margin_before;
  rep.improved = rep.delta > Scalar(0);
  return rep;
}

/// Single inclusion step of the pinching-set construction:
/// does R + 2h Id lie in C(s + eps)?
template <typename Scalar>
bool pinching_step(const CurvatureOperator<Scalar>& r, Scalar s, Scalar eps, Scalar h,
                   Scalar tol = Scalar(1e-8), const OptimizerOptions<Scalar>& opts = {}) {
  if (!(h > Scalar(0)) || !(eps > Scalar(0)))
    throw std::invalid_argument("pinching_step: needs h > 0 and eps > 0");
  const CurvatureOperator<Scalar> shifted =
      r + (Scalar(2) * h) * CurvatureOperator<Scalar>::Identity(r.n());
  return cone_membership(shifted, s + eps, tol, opts).inside;
}

template <typename Scalar>
struct DeltaPinchingReport {
  bool pinched = false;
  Scalar kmin = 0, kmax = 0;
  Scalar ratio = 0;  // kmin / kmax when kmax > 0
  std::string reason;
};

/// Ratio definition of delta-pinching: Kmax > 0 and Kmin / Kmax >= delta - tol
/// with the sectional extremes certified by optimization.  Scale invariant.
template <typename Scalar>
DeltaPinchingReport<Scalar> delta_pinching_report(const CurvatureOperator<Scalar>& r, Scalar delta,
                                                  Scalar tol = Scalar(1e-8),
                                                  const OptimizerOptions<Scalar>& opts = {}) {
  if (!(delta > Scalar(0) && delta <= Scalar(1)))
    throw std::invalid_argument("delta_pinching_report: needs 0 < delta <= 1");
  const SectionalExtremes<Scalar> ext = sectional_extremes(r, opts);
  DeltaPinchingReport<Scalar> rep;
  rep.kmin = ext.kmin;
  rep.kmax = ext.kmax;
  if (!(ext.kmax > Scalar(0))) {
    rep.pinched = false;
    rep.reason = "maximum sectional curvature is not positive";
    return rep;
  }
  rep.ratio = ext.kmin / ext.kmax;
  rep.pinched = rep.ratio >= delta - tol;
  if (!rep.pinched) rep.reason = "sectional ratio below delta";
  return rep;
}

template <typename Scalar>
bool delta_pinched(const CurvatureOperator<Scalar>& r, Scalar delta, Scalar tol = Scalar(1e-8),
                   const OptimizerOptions<Scalar>& opts = {}) {
  return delta_pinching_report(r, delta, tol, opts).pinched;
}

}  // namespace curvflow

#endif  // CURVFLOW_CONE_HPP
