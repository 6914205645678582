// Curvature conditions as optimization problems over orthonormal frames:
// isotropic curvature on 4-frames, its weighted (lambda, mu) relaxation,
// two-positive flag curvature on 3-frames, sectional extremes on 2-frames,
// and the largest |R_1234| together with its classical 2/3 spread bound.
// Also: the exact quadratic frame identities satisfied by first-Bianchi
// operators, first-order minimizer residuals, and the second-variation block
// matrix with its trace inequality.

#ifndef CURVFLOW_CONDITIONS_HPP
#define CURVFLOW_CONDITIONS_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <stdexcept>
#include <thread>
#include <vector>

#include "curvflow/curvature_operator.hpp"
#include "curvflow/frame.hpp"
#include "curvflow/lambda2.hpp"

namespace curvflow {

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

template <typename Scalar>
struct OptimizerOptions {
  int restarts = 32;
  int max_iterations = 500;
  Scalar gradient_tolerance = Scalar(1e-10);
  Scalar armijo_c = Scalar(1e-4);
  Scalar backtrack = Scalar(0.5);
  Scalar initial_step = Scalar(1);
  std::uint64_t seed = 0;
  int jobs = 1;  // threads across restarts; results are merge-order deterministic
};

template <typename Scalar>
struct ConditionReport {
  Scalar value = 0;
  OrthonormalFrame<Scalar> witness;
  bool has_weights = false;
  Scalar lambda = 0, mu = 0;  // set when the condition carries (lambda, mu) weights
  Scalar gradient_norm = std::numeric_limits<Scalar>::infinity();
  int restarts_used = 0;
  bool converged = false;
};

namespace detail {

/// One projected-gradient descent with Gram-Schmidt retraction and Armijo
/// backtracking from a given start frame.
template <typename Scalar, class ValueFn, class GradFn>
void descend(OrthonormalFrame<Scalar>& f, Scalar& fval, Scalar& grad_norm, const ValueFn& value,
             const GradFn& gradient, const OptimizerOptions<Scalar>& opts) {
  fval = value(f);
  grad_norm = std::numeric_limits<Scalar>::infinity();
  Scalar step = opts.initial_step;
  for (int iter = 0; iter < opts.max_iterations; ++iter) {
    const MatrixX<Scalar> t = tangent_project(f, gradient(f));
    grad_norm = t.norm();
    if (grad_norm <= opts.gradient_tolerance) return;
    step = std::min(step * Scalar(2), Scalar(1e3));
    bool accepted = false;
    while (step > Scalar(1e-18)) {
      OrthonormalFrame<Scalar> cand = stiefel_retract<Scalar>(f, -step * t);
      const Scalar fc = value(cand);
      if (fc <= fval - opts.armijo_c * step * grad_norm * grad_norm) {
        f = cand;
        fval = fc;
        accepted = true;
        break;
      }
      step *= opts.backtrack;
    }
    if (!accepted) {  // line search stalled: re-measure gradient and stop
      const MatrixX<Scalar> t2 = tangent_project(f, gradient(f));
      grad_norm = t2.norm();
      return;
    }
  }
  const MatrixX<Scalar> t = tangent_project(f, gradient(f));
  grad_norm = t.norm();
}

template <typename Scalar, class ValueFn, class GradFn>
ConditionReport<Scalar> minimize_over_frames(int n, int k, const ValueFn& value,
                                             const GradFn& gradient,
                                             const OptimizerOptions<Scalar>& opts) {
  struct Restart {
    OrthonormalFrame<Scalar> frame;
    Scalar value = std::numeric_limits<Scalar>::infinity();
    Scalar grad_norm = std::numeric_limits<Scalar>::infinity();
    bool ok = false;
  };
  std::vector<Restart> results(std::max(opts.restarts, 1));

  auto run_one = [&](int idx) {
    std::mt19937_64 rng(mix_seed(opts.seed, static_cast<std::uint64_t>(idx)));
    Restart r;
    r.frame = random_frame<Scalar>(n, k, rng);
    descend(r.frame, r.value, r.grad_norm, value, gradient, opts);
    r.ok = true;
    results[idx] = r;
  };

  const int jobs = std::max(1, std::min(opts.jobs, static_cast<int>(results.size())));
  if (jobs == 1) {
    for (int i = 0; i < static_cast<int>(results.size()); ++i) run_one(i);
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < jobs; ++t)
      pool.emplace_back([&, t]() {
        for (std::size_t i = t; i < results.size(); i += jobs) run_one(static_cast<int>(i));
      });
    for (auto& th : pool) th.join();
  }

  // Deterministic merge: best value; restarts within rounding of the best
  // count as ties and the smallest gradient norm (then lowest index) wins,
  // so a certified minimizer is preferred among numerically equal ones.
  Scalar vmin = results[0].value;
  for (const Restart& r : results) vmin = std::min(vmin, r.value);
  const Scalar tie_band = Scalar(1e-10) * std::max(Scalar(1), std::abs(vmin));
  int best = -1;
  for (int i = 0; i < static_cast<int>(results.size()); ++i) {
    if (results[i].value > vmin + tie_band) continue;
    if (best < 0 || results[i].grad_norm < results[best].grad_norm) best = i;
  }

  ConditionReport<Scalar> rep;
  rep.witness = results[best].frame;
  rep.value = value(rep.witness);  // re-evaluated at the witness
  rep.gradient_norm = results[best].grad_norm;
  rep.restarts_used = static_cast<int>(results.size());
  rep.converged = rep.gradient_norm <= Scalar(1e-8);
  return rep;
}

/// Gradient building block: for m = M * coords(u ^ w), the antisymmetric
/// matrix X with u^T X w = R(u, ., w, .) pairings; d/du R(u,w,u,w) = 2 X w.
template <typename Scalar>
MatrixX<Scalar> pairing_matrix(const CurvatureOperator<Scalar>& r, const VectorX<Scalar>& u,
                               const VectorX<Scalar>& w) {
  return antisym_matrix<Scalar>(r.n(), (r.matrix() * wedge_coords<Scalar>(u, w)).eval());
}

}  // namespace detail

/// Sectional-type term R(f_a, f_b, f_a, f_b).
template <typename Scalar>
Scalar frame_sectional(const CurvatureOperator<Scalar>& r, const OrthonormalFrame<Scalar>& f,
                       int a, int b) {
  return evaluate(r, f.vector(a), f.vector(b), f.vector(a), f.vector(b));
}

// ---------------------------------------------------------------------------
// Condition values and their Euclidean frame gradients
// ---------------------------------------------------------------------------

/// Isotropic curvature of a 4-frame:
/// R_1313 + R_1414 + R_2323 + R_2424 - 2 R_1234.
template <typename Scalar>
Scalar isotropic_value(const CurvatureOperator<Scalar>& r, const OrthonormalFrame<Scalar>& f) {
  if (f.k() != 4) throw std::invalid_argument("isotropic_value: needs a 4-frame");
  return frame_sectional(r, f, 0, 2) + frame_sectional(r, f, 0, 3) + frame_sectional(r, f, 1, 2) +
         frame_sectional(r, f, 1, 3) -
         Scalar(2) * evaluate(r, f.vector(0), f.vector(1), f.vector(2), f.vector(3));
}

/// Weighted isotropic expression with weights lambda, mu in [-1, 1]:
/// R_1313 + l^2 R_1414 + m^2 R_2323 + l^2 m^2 R_2424 - 2 l m R_1234.
template <typename Scalar>
Scalar weighted_isotropic_value(const CurvatureOperator<Scalar>& r,
                                const OrthonormalFrame<Scalar>& f, Scalar lambda, Scalar mu) {
  if (f.k() != 4) throw std::invalid_argument("weighted_isotropic_value: needs a 4-frame");
  const Scalar l2 = lambda * lambda, m2 = mu * mu;
  return frame_sectional(r, f, 0, 2) + l2 * frame_sectional(r, f, 0, 3) +
         m2 * frame_sectional(r, f, 1, 2) + l2 * m2 * frame_sectional(r, f, 1, 3) -
         Scalar(2) * lambda * mu * evaluate(r, f.vector(0), f.vector(1), f.vector(2), f.vector(3));
}

/// Two-positive flag curvature of a 3-frame: R_1212 + R_1313.
template <typename Scalar>
Scalar flag2_value(const CurvatureOperator<Scalar>& r, const OrthonormalFrame<Scalar>& f) {
  if (f.k() != 3) throw std::invalid_argument("flag2_value: needs a 3-frame");
  return frame_sectional(r, f, 0, 1) + frame_sectional(r, f, 0, 2);
}

/// Sectional curvature of a 2-frame: R_1212.
template <typename Scalar>
Scalar sectional_value(const CurvatureOperator<Scalar>& r, const OrthonormalFrame<Scalar>& f) {
  if (f.k() != 2) throw std::invalid_argument("sectional_value: needs a 2-frame");
  return frame_sectional(r, f, 0, 1);
}

namespace detail {

/// Euclidean gradient of sum_i weight_i R(f_{a_i}, f_{b_i}, f_{a_i}, f_{b_i})
/// + cross * R(f1, f2, f3, f4), as a k x n matrix.
template <typename Scalar>
MatrixX<Scalar> weighted_frame_gradient(const CurvatureOperator<Scalar>& r,
                                        const OrthonormalFrame<Scalar>& f,
                                        const std::vector<std::array<int, 2>>& pairs,
                                        const std::vector<Scalar>& weights, Scalar cross) {
  MatrixX<Scalar> g = MatrixX<Scalar>::Zero(f.k(), f.n());
  for (std::size_t t = 0; t < pairs.size(); ++t) {
    if (weights[t] == Scalar(0)) continue;
    const int a = pairs[t][0], b = pairs[t][1];
    const MatrixX<Scalar> x = pairing_matrix(r, f.vector(a), f.vector(b));
    g.row(a) += (Scalar(2) * weights[t]) * (x * f.vector(b)).transpose();
    g.row(b) -= (Scalar(2) * weights[t]) * (x * f.vector(a)).transpose();
  }
  if (cross != Scalar(0)) {
    const MatrixX<Scalar> x34 = pairing_matrix(r, f.vector(2), f.vector(3));
    const MatrixX<Scalar> x12 = pairing_matrix(r, f.vector(0), f.vector(1));
    g.row(0) += cross * (x34 * f.vector(1)).transpose();
    g.row(1) -= cross * (x34 * f.vector(0)).transpose();
    g.row(2) += cross * (x12 * f.vector(3)).transpose();
    g.row(3) -= cross * (x12 * f.vector(2)).transpose();
  }
  return g;
}

}  // namespace detail

template <typename Scalar>
MatrixX<Scalar> isotropic_gradient(const CurvatureOperator<Scalar>& r,
                                   const OrthonormalFrame<Scalar>& f) {
  return detail::weighted_frame_gradient<Scalar>(
      r, f, {{0, 2}, {0, 3}, {1, 2}, {1, 3}}, {Scalar(1), Scalar(1), Scalar(1), Scalar(1)},
      Scalar(-2));
}

template <typename Scalar>
MatrixX<Scalar> weighted_isotropic_gradient(const CurvatureOperator<Scalar>& r,
                                            const OrthonormalFrame<Scalar>& f, Scalar lambda,
                                            Scalar mu) {
  const Scalar l2 = lambda * lambda, m2 = mu * mu;
  return detail::weighted_frame_gradient<Scalar>(r, f, {{0, 2}, {0, 3}, {1, 2}, {1, 3}},
                                                 {Scalar(1), l2, m2, l2 * m2},
                                                 Scalar(-2) * lambda * mu);
}

template <typename Scalar>
MatrixX<Scalar> flag2_gradient(const CurvatureOperator<Scalar>& r,
                               const OrthonormalFrame<Scalar>& f) {
  return detail::weighted_frame_gradient<Scalar>(r, f, {{0, 1}, {0, 2}}, {Scalar(1), Scalar(1)},
                                                 Scalar(0));
}

template <typename Scalar>
MatrixX<Scalar> sectional_gradient(const CurvatureOperator<Scalar>& r,
                                   const OrthonormalFrame<Scalar>& f) {
  return detail::weighted_frame_gradient<Scalar>(r, f, {{0, 1}}, {Scalar(1)}, Scalar(0));
}

// ---------------------------------------------------------------------------
// Inner (lambda, mu) minimization of the weighted expression on [-1,1]^2
// ---------------------------------------------------------------------------

template <typename Scalar>
struct WeightSolve {
  Scalar value = 0, lambda = 0, mu = 0;
};

/// Exact-enough minimization of
///   g(l, m) = c0 + c1 l^2 + c2 m^2 + c3 l^2 m^2 - 2 c4 l m
/// over the square [-1,1]^2: corners, closed-form edge minima, and a 21x21
/// grid refined by closed-form coordinate descent.
template <typename Scalar>
WeightSolve<Scalar> weighted_min_weights(Scalar c0, Scalar c1, Scalar c2, Scalar c3, Scalar c4) {
  auto g = [&](Scalar l, Scalar m) {
    return c0 + c1 * l * l + c2 * m * m + c3 * l * l * m * m - Scalar(2) * c4 * l * m;
  };
  auto clamp1 = [](Scalar v) { return std::max(Scalar(-1), std::min(Scalar(1), v)); };

  WeightSolve<Scalar> best{g(0, 0), Scalar(0), Scalar(0)};
  auto consider = [&](Scalar l, Scalar m) {
    const Scalar v = g(l, m);
    if (v < best.value) best = {v, l, m};
  };

  for (Scalar l : {Scalar(-1), Scalar(1)})
    for (Scalar m : {Scalar(-1), Scalar(1)}) consider(l, m);
  // Edges l = +-1: quadratic in m with leading coefficient c2 + c3.
  for (Scalar l : {Scalar(-1), Scalar(1)})
    if (c2 + c3 > Scalar(0)) consider(l, clamp1(c4 * l / (c2 + c3)));
  // Edges m = +-1: quadratic in l with leading coefficient c1 + c3.
  for (Scalar m : {Scalar(-1), Scalar(1)})
    if (c1 + c3 > Scalar(0)) consider(clamp1(c4 * m / (c1 + c3)), m);

  auto coordinate_refine = [&](Scalar l, Scalar m) {
    for (int round = 0; round < 40; ++round) {
      const Scalar al = c1 + c3 * m * m;
      Scalar nl = (al > Scalar(0)) ? clamp1(c4 * m / al) : (c4 * m >= Scalar(0) ? Scalar(1) : Scalar(-1));
      const Scalar am = c2 + c3 * nl * nl;
      Scalar nm = (am > Scalar(0)) ? clamp1(c4 * nl / am) : (c4 * nl >= Scalar(0) ? Scalar(1) : Scalar(-1));
      if (std::abs(nl - l) + std::abs(nm - m) < Scalar(1e-15)) {
        l = nl;
        m = nm;
        break;
      }
      l = nl;
      m = nm;
    }
    consider(l, m);
  };

  constexpr int kGrid = 21;
  Scalar grid_best_v = std::numeric_limits<Scalar>::infinity();
  Scalar gl = 0, gm = 0;
  for (int i = 0; i < kGrid; ++i)
    for (int j = 0; j < kGrid; ++j) {
      const Scalar l = Scalar(-1) + Scalar(2) * Scalar(i) / Scalar(kGrid - 1);
      const Scalar m = Scalar(-1) + Scalar(2) * Scalar(j) / Scalar(kGrid - 1);
      const Scalar v = g(l, m);
      consider(l, m);
      if (v < grid_best_v) {
        grid_best_v = v;
        gl = l;
        gm = m;
      }
    }
  coordinate_refine(gl, gm);
  coordinate_refine(best.lambda, best.mu);
  return best;
}

/// Inner solve for a fixed frame: coefficients read off the frame, then the
/// (lambda, mu) square minimized exactly.
template <typename Scalar>
WeightSolve<Scalar> weighted_isotropic_inner(const CurvatureOperator<Scalar>& r,
                                             const OrthonormalFrame<Scalar>& f) {
  const Scalar c0 = frame_sectional(r, f, 0, 2);
  const Scalar c1 = frame_sectional(r, f, 0, 3);
  const Scalar c2 = frame_sectional(r, f, 1, 2);
  const Scalar c3 = frame_sectional(r, f, 1, 3);
  const Scalar c4 = evaluate(r, f.vector(0), f.vector(1), f.vector(2), f.vector(3));
  return weighted_min_weights(c0, c1, c2, c3, c4);
}

// ---------------------------------------------------------------------------
// Minimizers
// ---------------------------------------------------------------------------

template <typename Scalar>
ConditionReport<Scalar> isotropic_min(const CurvatureOperator<Scalar>& r,
                                      const OptimizerOptions<Scalar>& opts = {}) {
  auto value = [&](const OrthonormalFrame<Scalar>& f) { return isotropic_value(r, f); };
  auto grad = [&](const OrthonormalFrame<Scalar>& f) { return isotropic_gradient(r, f); };
  return detail::minimize_over_frames<Scalar>(r.n(), 4, value, grad, opts);
}

/// Convenience monitors: isotropic minimum after one / two flat extensions.
template <typename Scalar>
ConditionReport<Scalar> tilde_isotropic_min(const CurvatureOperator<Scalar>& r,
                                            const OptimizerOptions<Scalar>& opts = {}) {
  return isotropic_min(extend(r, 1), opts);
}
template <typename Scalar>
ConditionReport<Scalar> hat_isotropic_min(const CurvatureOperator<Scalar>& r,
                                          const OptimizerOptions<Scalar>& opts = {}) {
  return isotropic_min(extend(r, 2), opts);
}

template <typename Scalar>
ConditionReport<Scalar> flag2_min(const CurvatureOperator<Scalar>& r,
                                  const OptimizerOptions<Scalar>& opts = {}) {
  auto value = [&](const OrthonormalFrame<Scalar>& f) { return flag2_value(r, f); };
  auto grad = [&](const OrthonormalFrame<Scalar>& f) { return flag2_gradient(r, f); };
  return detail::minimize_over_frames<Scalar>(r.n(), 3, value, grad, opts);
}

/// Outer Stiefel minimization with the (lambda, mu) square solved exactly at
/// every frame; the frame gradient uses the current inner minimizer.
template <typename Scalar>
ConditionReport<Scalar> weighted_isotropic_min(const CurvatureOperator<Scalar>& r,
                                               const OptimizerOptions<Scalar>& opts = {}) {
  auto value = [&](const OrthonormalFrame<Scalar>& f) {
    return weighted_isotropic_inner(r, f).value;
  };
  auto grad = [&](const OrthonormalFrame<Scalar>& f) {
    const WeightSolve<Scalar> w = weighted_isotropic_inner(r, f);
    return weighted_isotropic_gradient(r, f, w.lambda, w.mu);
  };
  ConditionReport<Scalar> rep = detail::minimize_over_frames<Scalar>(r.n(), 4, value, grad, opts);
  const WeightSolve<Scalar> w = weighted_isotropic_inner(r, rep.witness);
  rep.has_weights = true;
  rep.lambda = w.lambda;
  rep.mu = w.mu;
  rep.value = w.value;
  return rep;
}

template <typename Scalar>
struct SectionalExtremes {
  ConditionReport<Scalar> min_report, max_report;
  Scalar kmin = 0, kmax = 0;
};

template <typename Scalar>
SectionalExtremes<Scalar> sectional_extremes(const CurvatureOperator<Scalar>& r,
                                             const OptimizerOptions<Scalar>& opts = {}) {
  auto value = [&](const OrthonormalFrame<Scalar>& f) { return sectional_value(r, f); };
  auto grad = [&](const OrthonormalFrame<Scalar>& f) { return sectional_gradient(r, f); };
  auto neg_value = [&](const OrthonormalFrame<Scalar>& f) { return -sectional_value(r, f); };
  auto neg_grad = [&](const OrthonormalFrame<Scalar>& f) {
    return (-sectional_gradient(r, f)).eval();
  };
  SectionalExtremes<Scalar> s;
  s.min_report = detail::minimize_over_frames<Scalar>(r.n(), 2, value, grad, opts);
  s.max_report = detail::minimize_over_frames<Scalar>(r.n(), 2, neg_value, neg_grad, opts);
  s.max_report.value = -s.max_report.value;  // report the actual sectional value
  s.kmin = s.min_report.value;
  s.kmax = s.max_report.value;
  return s;
}

template <typename Scalar>
struct BergerReport {
  Scalar max_abs = 0;  // largest |R_1234| found over 4-frames
  OrthonormalFrame<Scalar> witness;
  Scalar kmin = 0, kmax = 0;
  Scalar bound = 0;  // (2/3)(kmax - kmin) + slack
  bool within = false;
  bool converged = false;
};

/// Largest |R(f1,f2,f3,f4)| over 4-frames, checked against the classical
/// bound (2/3)(Kmax - Kmin) obtained from the sectional extremes.
template <typename Scalar>
BergerReport<Scalar> berger_check(const CurvatureOperator<Scalar>& r,
                                  const OptimizerOptions<Scalar>& opts = {},
                                  Scalar slack = Scalar(1e-8)) {
  auto cross = [&](const OrthonormalFrame<Scalar>& f) {
    return evaluate(r, f.vector(0), f.vector(1), f.vector(2), f.vector(3));
  };
  auto cross_grad = [&](const OrthonormalFrame<Scalar>& f) {
    return detail::weighted_frame_gradient<Scalar>(r, f, {}, {}, Scalar(1));
  };
  auto neg_value = [&](const OrthonormalFrame<Scalar>& f) { return -cross(f); };
  auto neg_grad = [&](const OrthonormalFrame<Scalar>& f) { return (-cross_grad(f)).eval(); };

  const ConditionReport<Scalar> lo = detail::minimize_over_frames<Scalar>(r.n(), 4, cross, cross_grad, opts);
  const ConditionReport<Scalar> hi = detail::minimize_over_frames<Scalar>(r.n(), 4, neg_value, neg_grad, opts);

  BergerReport<Scalar> b;
  const Scalar from_lo = std::abs(lo.value);
  const Scalar from_hi = std::abs(-hi.value);
  if (from_lo >= from_hi) {
    b.max_abs = from_lo;
    b.witness = lo.witness;
    b.converged = lo.converged;
  } else {
    b.max_abs = from_hi;
    b.witness = hi.witness;
    b.converged = hi.converged;
  }
  const SectionalExtremes<Scalar> s = sectional_extremes(r, opts);
  b.kmin = s.kmin;
  b.kmax = s.kmax;
  b.bound = Scalar(2) / Scalar(3) * (s.kmax - s.kmin) + slack;
  b.within = b.max_abs <= b.bound;
  return b;
}

// ---------------------------------------------------------------------------
// Exact identities and minimizer residuals
// ---------------------------------------------------------------------------

template <typename Scalar>
struct FrameBlockResiduals {
  Scalar r1 = 0, r2 = 0;       // combinations within the frame
  VectorX<Scalar> r3, r4;      // combinations with one completed-basis index
  Scalar max_abs() const {
    Scalar m = std::max(std::abs(r1), std::abs(r2));
    for (int i = 0; i < r3.size(); ++i) m = std::max(m, std::abs(r3[i]));
    for (int i = 0; i < r4.size(); ++i) m = std::max(m, std::abs(r4[i]));
    return m;
  }
};

/// Combinations of curvature components that vanish to first order at a zero
/// minimizer of the isotropic value, evaluated in the frame completed to a
/// basis: r1 = R_1213 + R_1242 + R_3413 + R_3442,
///        r2 = R_1214 + R_1223 + R_3414 + R_3423,
///        r3[q] = R_133q + R_144q + R_432q,  r4[q] = R_233q + R_244q + R_341q.
template <typename Scalar>
FrameBlockResiduals<Scalar> first_order_residuals(const CurvatureOperator<Scalar>& r,
                                                  const OrthonormalFrame<Scalar>& f) {
  if (f.k() != 4) throw std::invalid_argument("first_order_residuals: needs a 4-frame");
  const MatrixX<Scalar> basis = complete_basis(f);
  const CurvatureOperator<Scalar> c = conjugate(r, MatrixX<Scalar>(basis.transpose()));
  FrameBlockResiduals<Scalar> out;
  out.r1 = c.entry(0, 1, 0, 2) + c.entry(0, 1, 3, 1) + c.entry(2, 3, 0, 2) + c.entry(2, 3, 3, 1);
  out.r2 = c.entry(0, 1, 0, 3) + c.entry(0, 1, 1, 2) + c.entry(2, 3, 0, 3) + c.entry(2, 3, 1, 2);
  const int extra = r.n() - 4;
  out.r3.resize(std::max(extra, 0));
  out.r4.resize(std::max(extra, 0));
  for (int q = 4; q < r.n(); ++q) {
    out.r3[q - 4] = c.entry(0, 2, 2, q) + c.entry(0, 3, 3, q) + c.entry(3, 2, 1, q);
    out.r4[q - 4] = c.entry(1, 2, 2, q) + c.entry(1, 3, 3, q) + c.entry(2, 3, 0, q);
  }
  return out;
}

/// Quadratic identity tying the frame-index contractions of a first-Bianchi
/// operator to the isotropic value; identically zero on Bianchi tensors.
/// Returns (left side) - (right side) with all contraction indices running
/// over the frame itself.
template <typename Scalar>
Scalar frame_block_identity_residual(const CurvatureOperator<Scalar>& r,
                                     const OrthonormalFrame<Scalar>& f) {
  if (f.k() != 4) throw std::invalid_argument("frame_block_identity_residual: needs a 4-frame");
  const CurvatureOperator<Scalar> c =
      conjugate(r, MatrixX<Scalar>(complete_basis(f).transpose()));
  Scalar lhs(0);
  for (int p = 0; p < 4; ++p)
    for (int q = 0; q < 4; ++q) {
      lhs += (c.entry(0, p, 0, q) + c.entry(1, p, 1, q)) *
             (c.entry(2, p, 2, q) + c.entry(3, p, 3, q));
      lhs -= c.entry(0, 1, p, q) * c.entry(2, 3, p, q);
      lhs -= (c.entry(0, p, 2, q) + c.entry(1, p, 3, q)) *
             (c.entry(2, p, 0, q) + c.entry(3, p, 1, q));
      lhs -= (c.entry(0, p, 3, q) - c.entry(1, p, 2, q)) *
             (c.entry(3, p, 0, q) - c.entry(2, p, 1, q));
    }
  const Scalar iso = c.entry(0, 2, 0, 2) + c.entry(0, 3, 0, 3) + c.entry(1, 2, 1, 2) +
                     c.entry(1, 3, 1, 3) - Scalar(2) * c.entry(0, 1, 2, 3);
  const Scalar r1 =
      c.entry(0, 1, 0, 2) + c.entry(0, 1, 3, 1) + c.entry(2, 3, 0, 2) + c.entry(2, 3, 3, 1);
  const Scalar r2 =
      c.entry(0, 1, 0, 3) + c.entry(0, 1, 1, 2) + c.entry(2, 3, 0, 3) + c.entry(2, 3, 1, 2);
  const Scalar rhs =
      (c.entry(0, 1, 0, 1) + c.entry(2, 3, 2, 3) + Scalar(2) * c.entry(0, 1, 2, 3)) * iso -
      r1 * r1 - r2 * r2;
  return lhs - rhs;
}

/// Mixed-index counterpart: contraction index p runs over the frame, q is one
/// fixed completed-basis index beyond it.  Vanishes when the one-extra-index
/// first-order combinations vanish (for Bianchi operators).
template <typename Scalar>
Scalar mixed_block_identity_residual(const CurvatureOperator<Scalar>& r,
                                     const OrthonormalFrame<Scalar>& f, int q) {
  if (f.k() != 4) throw std::invalid_argument("mixed_block_identity_residual: needs a 4-frame");
  if (q < 4 || q >= r.n())
    throw std::invalid_argument("mixed_block_identity_residual: q must index beyond the frame");
  const CurvatureOperator<Scalar> c =
      conjugate(r, MatrixX<Scalar>(complete_basis(f).transpose()));
  Scalar lhs(0), rhs(0);
  for (int p = 0; p < 4; ++p) {
    lhs += (c.entry(0, p, 0, q) + c.entry(1, p, 1, q)) *
           (c.entry(2, p, 2, q) + c.entry(3, p, 3, q));
    lhs -= c.entry(0, 1, p, q) * c.entry(2, 3, p, q);
    rhs += (c.entry(0, p, 2, q) + c.entry(1, p, 3, q)) *
           (c.entry(2, p, 0, q) + c.entry(3, p, 1, q));
    rhs += (c.entry(0, p, 3, q) - c.entry(1, p, 2, q)) *
           (c.entry(3, p, 0, q) - c.entry(2, p, 1, q));
  }
  return lhs - rhs;
}

// ---------------------------------------------------------------------------
// Second variation at a 4-frame
// ---------------------------------------------------------------------------

template <typename Scalar>
struct SecondVariationMatrix {
  MatrixX<Scalar> a, b, c, d, e, f;  // (n-4) x (n-4) blocks
  MatrixX<Scalar> l;                 // assembled 4(n-4) x 4(n-4) symmetric matrix
  MatrixX<Scalar> basis;             // completed basis used (rows)
};

/// Blocks over the completed-basis indices p, q >= 5 (1-based):
///   a_pq = R_1p1q + R_2p2q     b_pq = R_3p3q + R_4p4q
///   c_pq = R_3p1q + R_4p2q     d_pq = R_4p1q - R_3p2q
///   e_pq = R_12pq              f_pq = R_34pq
/// assembled as L = [[B,-F,-C,-D],[F,B,D,-C],[-C^T,D^T,A,-E],[-D^T,-C^T,E,A]].
template <typename Scalar>
SecondVariationMatrix<Scalar> second_variation(const CurvatureOperator<Scalar>& r,
                                               const OrthonormalFrame<Scalar>& f) {
  if (f.k() != 4) throw std::invalid_argument("second_variation: needs a 4-frame");
  const int m = r.n() - 4;
  if (m < 1) throw std::invalid_argument("second_variation: needs ambient dimension >= 5");
  SecondVariationMatrix<Scalar> sv;
  sv.basis = complete_basis(f);
  const CurvatureOperator<Scalar> c = conjugate(r, MatrixX<Scalar>(sv.basis.transpose()));
  sv.a.resize(m, m);
  sv.b.resize(m, m);
  sv.c.resize(m, m);
  sv.d.resize(m, m);
  sv.e.resize(m, m);
  sv.f.resize(m, m);
  for (int p = 0; p < m; ++p)
    for (int q = 0; q < m; ++q) {
      const int pp = p + 4, qq = q + 4;
      sv.a(p, q) = c.entry(0, pp, 0, qq) + c.entry(1, pp, 1, qq);
      sv.b(p, q) = c.entry(2, pp, 2, qq) + c.entry(3, pp, 3, qq);
      sv.c(p, q) = c.entry(2, pp, 0, qq) + c.entry(3, pp, 1, qq);
      sv.d(p, q) = c.entry(3, pp, 0, qq) - c.entry(2, pp, 1, qq);
      sv.e(p, q) = c.entry(0, 1, pp, qq);
      sv.f(p, q) = c.entry(2, 3, pp, qq);
    }
  sv.l.resize(4 * m, 4 * m);
  sv.l << sv.b, -sv.f, -sv.c, -sv.d,
      sv.f, sv.b, sv.d, -sv.c,
      -sv.c.transpose(), sv.d.transpose(), sv.a, -sv.e,
      -sv.d.transpose(), -sv.c.transpose(), sv.e, sv.a;
  return sv;
}

/// The second-variation quadratic form evaluated directly on four vectors
/// (each expected orthogonal to the frame); equals w^T L w for
/// w = (w1, w2, w3, w4) in completed-basis coordinates.
template <typename Scalar>
Scalar second_variation_quad_form(const CurvatureOperator<Scalar>& r,
                                  const OrthonormalFrame<Scalar>& f, const VectorX<Scalar>& w1,
                                  const VectorX<Scalar>& w2, const VectorX<Scalar>& w3,
                                  const VectorX<Scalar>& w4) {
  const VectorX<Scalar> e1 = f.vector(0), e2 = f.vector(1), e3 = f.vector(2), e4 = f.vector(3);
  auto R = [&](const VectorX<Scalar>& x, const VectorX<Scalar>& y, const VectorX<Scalar>& z,
               const VectorX<Scalar>& t) { return evaluate(r, x, y, z, t); };
  return R(w1, e3, w1, e3) + R(w1, e4, w1, e4) + R(w2, e3, w2, e3) + R(w2, e4, w2, e4) +
         R(e1, w3, e1, w3) + R(e2, w3, e2, w3) + R(e1, w4, e1, w4) + R(e2, w4, e2, w4) -
         Scalar(2) * (R(e3, w1, e1, w3) + R(e4, w1, e2, w3)) -
         Scalar(2) * (R(e4, w1, e1, w4) - R(e3, w1, e2, w4)) +
         Scalar(2) * (R(e4, w2, e1, w3) - R(e3, w2, e2, w3)) -
         Scalar(2) * (R(e3, w2, e1, w4) + R(e4, w2, e2, w4)) -
         Scalar(2) * R(w1, w2, e3, e4) - Scalar(2) * R(e1, e2, w3, w4);
}

template <typename Scalar>
struct TraceInequality {
  Scalar quarter_trace = 0;     // (1/4) tr(L U L U^T)
  Scalar block_expression = 0;  // tr(AB) + tr(EF) - tr(C^2) - tr(D^2)
};

/// The block permutation U = [[0,0,I,0],[0,0,0,-I],[-I,0,0,0],[0,I,0,0]]
/// turns the PSD trace (1/4) tr(L U L U^T) into tr(AB)+tr(EF)-tr(C^2)-tr(D^2).
template <typename Scalar>
TraceInequality<Scalar> trace_inequality(const SecondVariationMatrix<Scalar>& sv) {
  const int m = static_cast<int>(sv.a.rows());
  MatrixX<Scalar> u = MatrixX<Scalar>::Zero(4 * m, 4 * m);
  const MatrixX<Scalar> id = MatrixX<Scalar>::Identity(m, m);
  u.block(0, 2 * m, m, m) = id;
  u.block(m, 3 * m, m, m) = -id;
  u.block(2 * m, 0, m, m) = -id;
  u.block(3 * m, m, m, m) = id;
  TraceInequality<Scalar> t;
  t.quarter_trace = (sv.l * u * sv.l * u.transpose()).trace() / Scalar(4);
  t.block_expression = (sv.a * sv.b).trace() + (sv.e * sv.f).trace() - (sv.c * sv.c).trace() -
                       (sv.d * sv.d).trace();
  return t;
}

}  // namespace curvflow

#endif  // CURVFLOW_CONDITIONS_HPP
