// The quadratic vector field Q(R) driving the curvature-operator ODE
// dR/dt = Q(R), in two independent implementations (a literal index-sum
// reference and a matrix-product fast path), plus classical RK4 integration
// with optional step-doubling adaptivity, blowup detection, and the
// epsilon-regularized variant dR/dt = Q(R) + eps * Id.

#ifndef CURVFLOW_ODE_HPP
#define CURVFLOW_ODE_HPP

#include <cmath>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <vector>

#include "curvflow/curvature_operator.hpp"
#include "curvflow/lambda2.hpp"

namespace curvflow {

/// Reference implementation straight from the definition
///   Q_ijkl = sum_{p,q} [ R_ijpq R_klpq + 2 R_ipkq R_jplq - 2 R_iplq R_jpkq ],
/// evaluated after expanding the operator to a dense four-index table.
template <typename Scalar>
CurvatureOperator<Scalar> q_naive(const CurvatureOperator<Scalar>& r) {
  const int n = r.n();
  std::vector<Scalar> t(static_cast<std::size_t>(n) * n * n * n, Scalar(0));
  auto at = [&](int i, int j, int k, int l) -> Scalar& {
    return t[((static_cast<std::size_t>(i) * n + j) * n + k) * n + l];
  };
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l) at(i, j, k, l) = r.entry(i, j, k, l);

  CurvatureOperator<Scalar> out(n);
  MatrixX<Scalar>& m = out.matrix();
  const Lambda2Index idx(n);
  for (int a = 0; a < idx.size(); ++a) {
    const auto [i, j] = idx.pair(a);
    for (int b = a; b < idx.size(); ++b) {
      const auto [k, l] = idx.pair(b);
      Scalar sum(0);
      for (int p = 0; p < n; ++p)
        for (int q = 0; q < n; ++q)
          sum += at(i, j, p, q) * at(k, l, p, q) + Scalar(2) * at(i, p, k, q) * at(j, p, l, q) -
                 Scalar(2) * at(i, p, l, q) * at(j, p, k, q);
      m(a, b) = sum;
      m(b, a) = sum;
    }
  }
  return out;
}

namespace detail {

/// Fast path with an injectable sign on the third term (-2 is correct; the
/// flipped sign is kept for self-check demonstrations).
template <typename Scalar>
CurvatureOperator<Scalar> q_fast_signed(const CurvatureOperator<Scalar>& r, Scalar third_sign) {
  const int n = r.n();
  const Lambda2Index idx(n);
  const MatrixX<Scalar>& m = r.matrix();

  // First term: sum_{p<q} R_ijpq R_klpq doubled over unordered pairs = 2 M^2.
  const MatrixX<Scalar> sq = Scalar(2) * (m * m);

  // Pairing table B[(i,k),(p,q)] = R_ipkq; then (B B^T)[(i,k),(j,l)]
  // = sum_{p,q} R_ipkq R_jplq.
  MatrixX<Scalar> bmat(n * n, n * n);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < n; ++k)
      for (int p = 0; p < n; ++p)
        for (int q = 0; q < n; ++q) bmat(i * n + k, p * n + q) = r.entry(i, p, k, q);
  const MatrixX<Scalar> g = bmat * bmat.transpose();

  MatrixX<Scalar> out(idx.size(), idx.size());
  for (int a = 0; a < idx.size(); ++a) {
    const auto [i, j] = idx.pair(a);
    for (int b = 0; b < idx.size(); ++b) {
      const auto [k, l] = idx.pair(b);
      out(a, b) = sq(a, b) + Scalar(2) * g(i * n + k, j * n + l) +
                  third_sign * g(i * n + l, j * n + k);
    }
  }
  return CurvatureOperator<Scalar>(n, out);  // constructor symmetrizes
}

}  // namespace detail

/// Matrix-product evaluation of Q; agrees with q_naive to rounding.
template <typename Scalar>
CurvatureOperator<Scalar> q_fast(const CurvatureOperator<Scalar>& r) {
  return detail::q_fast_signed(r, Scalar(-2));
}

enum class StopReason { reached_end, blowup, step_underflow, max_steps };

inline const char* to_string(StopReason s) {
  switch (s) {
    case StopReason::reached_end: return "reached-end";
    case StopReason::blowup: return "blowup";
    case StopReason::step_underflow: return "step-underflow";
    case StopReason::max_steps: return "max-steps";
  }
  return "?";
}

template <typename Scalar>
struct EvolveOptions {
  Scalar step = Scalar(0);  // 0: auto, 1e-3 * tr(Id) / max(|tr(R0)|, 1)
  bool adaptive = false;
  Scalar error_target = Scalar(1e-8);   // step-doubling local target (relative)
  Scalar blowup_trace = Scalar(1e9);    // stop once tr(R) exceeds this
  Scalar min_step = Scalar(1e-12);
  long max_steps = 2000000;
  int record_stride = 1;       // store every k-th accepted state
  bool project_bianchi = true;  // keep the state on the first-Bianchi subspace
};

template <typename Scalar>
struct Trajectory {
  std::vector<Scalar> times;
  std::vector<CurvatureOperator<Scalar>> states;  // Bianchi-projected snapshots
  StopReason reason = StopReason::reached_end;
  Scalar final_time() const { return times.empty() ? Scalar(0) : times.back(); }
  const CurvatureOperator<Scalar>& final_state() const { return states.back(); }
};

namespace detail {

template <typename Scalar, class Rhs>
CurvatureOperator<Scalar> rk4_step(const CurvatureOperator<Scalar>& y, Scalar h, const Rhs& rhs) {
  const CurvatureOperator<Scalar> k1 = rhs(y);
  const CurvatureOperator<Scalar> k2 = rhs(y + (h / Scalar(2)) * k1);
  const CurvatureOperator<Scalar> k3 = rhs(y + (h / Scalar(2)) * k2);
  const CurvatureOperator<Scalar> k4 = rhs(y + h * k3);
  return y + (h / Scalar(6)) * (k1 + Scalar(2) * k2 + Scalar(2) * k3 + k4);
}

template <typename Scalar, class Rhs>
Trajectory<Scalar> evolve_impl(const CurvatureOperator<Scalar>& r0, Scalar t_end,
                               const EvolveOptions<Scalar>& opts, const Rhs& rhs) {
  if (!(t_end >= Scalar(0))) throw std::invalid_argument("evolve: t_end must be nonnegative");
  CurvatureOperator<Scalar> y = opts.project_bianchi ? bianchi_project(r0) : r0;
  const Scalar id_trace = Scalar(pair_count(r0.n()));
  Scalar h = opts.step > Scalar(0)
                 ? opts.step
                 : Scalar(1e-3) * id_trace / std::max(std::abs(y.trace()), Scalar(1));

  Trajectory<Scalar> traj;
  traj.times.push_back(Scalar(0));
  traj.states.push_back(y);

  Scalar t(0);
  long accepted = 0;
  for (long step_count = 0; step_count < opts.max_steps && t < t_end; ++step_count) {
    const Scalar h_try = std::min(h, t_end - t);
    CurvatureOperator<Scalar> y_next(y.n());
    Scalar h_used = h_try;
    if (!opts.adaptive) {
      y_next = rk4_step(y, h_try, rhs);
    } else {
      bool accepted_step = false;
      Scalar hh = h_try;
      while (!accepted_step) {
        const CurvatureOperator<Scalar> one = rk4_step(y, hh, rhs);
        const CurvatureOperator<Scalar> half = rk4_step(y, hh / Scalar(2), rhs);
        const CurvatureOperator<Scalar> two = rk4_step(half, hh / Scalar(2), rhs);
        const Scalar err = (two - one).norm() / Scalar(15);
        const Scalar tol = opts.error_target * std::max(y.norm(), Scalar(1));
        if (err <= tol || hh <= opts.min_step) {
          y_next = two;
          h_used = hh;
          h = (err <= tol / Scalar(4)) ? hh * Scalar(1.5) : hh;
          accepted_step = true;
        } else {
          hh /= Scalar(2);
          if (hh < opts.min_step) {
            traj.reason = StopReason::step_underflow;
            return traj;
          }
        }
      }
    }

    if (opts.project_bianchi) y_next = bianchi_project(y_next);
    const Scalar nrm = y_next.norm();
    if (!std::isfinite(nrm) || y_next.trace() > opts.blowup_trace) {
      traj.reason = StopReason::blowup;
      return traj;
    }

    y = y_next;
    t += h_used;
    ++accepted;
    if (accepted % std::max(opts.record_stride, 1) == 0 || t >= t_end) {
      traj.times.push_back(t);
      traj.states.push_back(y);
    }
    if (h_used < opts.min_step) {
      traj.reason = StopReason::step_underflow;
      return traj;
    }
  }
  traj.reason = (t >= t_end) ? StopReason::reached_end : StopReason::max_steps;
  if (traj.times.back() != t) {
    traj.times.push_back(t);
    traj.states.push_back(y);
  }
  return traj;
}

}  // namespace detail

/// Integrate dR/dt = Q(R) from r0 to t_end.
template <typename Scalar>
Trajectory<Scalar> evolve(const CurvatureOperator<Scalar>& r0, Scalar t_end,
                          const EvolveOptions<Scalar>& opts = {}) {
  return detail::evolve_impl(r0, t_end, opts,
                             [](const CurvatureOperator<Scalar>& y) { return q_fast(y); });
}

/// Integrate the regularized field dR/dt = Q(R) + eps * Id starting from
/// R(0) = r0 + eps * Id.
template <typename Scalar>
Trajectory<Scalar> evolve_regularized(const CurvatureOperator<Scalar>& r0, Scalar t_end,
                                      Scalar eps, const EvolveOptions<Scalar>& opts = {}) {
  const CurvatureOperator<Scalar> id = CurvatureOperator<Scalar>::Identity(r0.n());
  const CurvatureOperator<Scalar> start = r0 + eps * id;
  return detail::evolve_impl(start, t_end, opts, [&](const CurvatureOperator<Scalar>& y) {
    return q_fast(y) + eps * id;
  });
}

/// R normalized to unit trace; requires positive trace.
template <typename Scalar>
CurvatureOperator<Scalar> normalized_direction(const CurvatureOperator<Scalar>& r) {
  const Scalar tr = r.trace();
  if (!(tr > Scalar(0)))
    throw std::invalid_argument("normalized_direction: trace must be positive");
  return (Scalar(1) / tr) * r;
}

/// Relative distance between the trace-normalized operator and the
/// trace-normalized round operator: |R/tr R - Id/tr Id| / |Id/tr Id|.
template <typename Scalar>
Scalar direction_distance(const CurvatureOperator<Scalar>& r) {
  const CurvatureOperator<Scalar> id = CurvatureOperator<Scalar>::Identity(r.n());
  const CurvatureOperator<Scalar> id_dir = normalized_direction(id);
  return (normalized_direction(r) - id_dir).norm() / id_dir.norm();
}

}  // namespace curvflow

#endif  // CURVFLOW_ODE_HPP
