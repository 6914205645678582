// Acceptance battery: twelve numbered end-to-end checks covering the frame
// identity suite, the quadratic-field cross-check, ODE correctness and
// invariance, extension equivalences, the Berger bound, two-form normal
// forms, the deformation family, desk-scale convergence to the round
// direction, gradient correctness, and second-variation positivity.  Each
// criterion prints a single PASS/FAIL line; the exit code is zero iff all
// pass.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include "curvflow/cone.hpp"
#include "curvflow/conditions.hpp"
#include "curvflow/curvature_operator.hpp"
#include "curvflow/frame.hpp"
#include "curvflow/ode.hpp"
#include "curvflow/random.hpp"
#include "curvflow/two_form.hpp"

using namespace curvflow;

using Op = CurvatureOperatord;
using Frame = OrthonormalFrame<double>;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

namespace {

int failures = 0;

void report(int idx, const char* name, bool pass, const std::string& detail) {
  std::printf("[%2d] %s  %-34s %s\n", idx, pass ? "PASS" : "FAIL", name, detail.c_str());
  if (!pass) ++failures;
}

std::string fmt(const char* f, double a, double b = 0, double c = 0) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), f, a, b, c);
  return buf;
}

Matrix gaussian(int rows, int cols, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Matrix m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = g(rng);
  return m;
}

// --------------------------------------------------------------------------
// 1. Frame identity suite on random operators and frames.
// --------------------------------------------------------------------------
void criterion1() {
  std::mt19937_64 rng(101);
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    const int n = 4 + t % 5;
    const Op r = random_bianchi<double>(n, rng);
    const double scale = r.norm() * r.norm();
    for (int f = 0; f < 5; ++f) {
      const double res = std::abs(frame_block_identity_residual(r, random_frame<double>(n, 4, rng)));
      worst = std::max(worst, res / scale);
    }
  }
  report(1, "frame identity suite", worst <= 1e-10, fmt("max residual / |R|^2 = %.3g", worst));
}

// --------------------------------------------------------------------------
// 2. Quadratic field: fast contraction vs direct sum, and the round value.
// --------------------------------------------------------------------------
void criterion2() {
  std::mt19937_64 rng(102);
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    const int n = 4 + t % 5;
    const Op r = random_bianchi<double>(n, rng);
    const double gap = (q_fast(r) - q_naive(r)).norm() / (r.norm() * r.norm());
    worst = std::max(worst, gap);
  }
  double round_gap = 0.0;
  for (int n = 4; n <= 8; ++n) {
    const Op id = Op::Identity(n);
    round_gap = std::max(round_gap, (q_fast(id) - (2.0 * (n - 1)) * id).norm());
  }
  report(2, "quadratic field cross-check", worst <= 1e-11 && round_gap <= 1e-12,
         fmt("max rel gap = %.3g, round gap = %.3g", worst, round_gap));
}

// --------------------------------------------------------------------------
// 3. ODE correctness on the round line: closed form and observed order.
// --------------------------------------------------------------------------
void criterion3() {
  const int n = 4;
  const Op id = Op::Identity(n);
  const double k = 2.0 * (n - 1);   // dc/dt = k c^2, c(t) = 1/(1 - k t)
  const double t_star = 1.0 / k;

  EvolveOptions<double> opts;
  opts.step = 1e-4;
  opts.record_stride = 100;
  const double t_end = 0.8 * t_star;
  const auto traj = evolve(id, t_end, opts);
  double worst = 0.0;
  for (size_t i = 0; i < traj.times.size(); ++i) {
    const double expected = static_cast<double>(id.trace()) / (1.0 - k * traj.times[i]);
    worst = std::max(worst, std::abs(traj.states[i].trace() - expected) / expected);
  }

  // Observed order from one step-halving pair at t = 0.1.
  auto err_at = [&](double h) {
    EvolveOptions<double> o;
    o.step = h;
    o.record_stride = 1 << 30;
    const auto tr = evolve(id, 0.1, o);
    const double expected = id.trace() / (1.0 - k * 0.1);
    return std::abs(tr.final_state().trace() - expected);
  };
  const double e1 = err_at(2e-3), e2 = err_at(1e-3);
  const double order = std::log2(e1 / e2);
  report(3, "round-line ODE vs closed form", worst <= 1e-8 && order >= 3.7,
         fmt("max rel err = %.3g, observed order = %.2f", worst, order));
}

// --------------------------------------------------------------------------
// 4 & 5. Invariance along trajectories from nonnegative starts: the
// isotropic minimum and its weighted counterpart stay nonnegative.
// --------------------------------------------------------------------------
void criteria45() {
  std::mt19937_64 rng(104);
  OptimizerOptions<double> opt;
  opt.restarts = 8;
  opt.max_iterations = 300;

  double worst_iso = 0.0, worst_weighted = 0.0;
  for (int t = 0; t < 20; ++t) {
    const int n = 4 + t % 2;
    Op r0 = random_nonneg<double>(n, rng);
    r0 *= static_cast<double>(Op::Identity(n).trace()) / r0.trace();

    EvolveOptions<double> eopt;
    eopt.blowup_trace = 1e4;
    eopt.max_steps = 100000;
    const auto traj = evolve(r0, 5.0, eopt);

    const int count = static_cast<int>(traj.states.size());
    for (int m = 0; m < 12; ++m) {
      const int i = (count - 1) * m / 11;
      const Op& r = traj.states[i];
      const double tr = r.trace();
      worst_iso = std::max(worst_iso, -isotropic_min(r, opt).value / tr);
      worst_weighted = std::max(worst_weighted, -weighted_isotropic_min(r, opt).value / tr);
    }
  }
  report(4, "isotropic invariance along flows", worst_iso <= 1e-6,
         fmt("worst -min/trace = %.3g", worst_iso));
  report(5, "weighted invariance along flows", worst_weighted <= 1e-6,
         fmt("worst -min/trace = %.3g", worst_weighted));
}

// --------------------------------------------------------------------------
// 6. Weighted minimum vs the two-step extension: signs agree on a corpus
// spanning inside, outside, and straddling cases.
// --------------------------------------------------------------------------
void criterion6() {
  std::mt19937_64 rng(106);
  std::uniform_real_distribution<double> tdist(0.5, 3.0);
  OptimizerOptions<double> opt;
  opt.restarts = 16;
  opt.max_iterations = 400;

  int agree = 0, total = 0;
  double max_gap = 0.0;
  for (int t = 0; t < 50; ++t) {
    const int n = 4 + t % 2;
    Op r = Op::Identity(n);
    if (t % 10 < 3) {
      r = random_nonneg<double>(n, rng) + 0.05 * Op::Identity(n);
    } else if (t % 10 < 6) {
      r = (-1.0) * random_nonneg<double>(n, rng) - 0.1 * Op::Identity(n);
    } else {
      Op dir = random_bianchi<double>(n, rng);
      dir *= 1.0 / dir.norm();
      r = Op::Identity(n) + tdist(rng) * dir;
    }
    // The two minima agree as nonnegativity verdicts: a strictly interior
    // operator still has two-step-extension minimum exactly zero (frames in
    // the appended flat plane), so the comparison is nonnegative-vs-negative.
    const double band = 1e-6 * std::max(1.0, r.norm());
    const double w = weighted_isotropic_min(r, opt).value;
    const double h = hat_isotropic_min(r, opt).value;
    agree += ((w >= -band) == (h >= -band));
    ++total;
    max_gap = std::max(max_gap, std::abs(w - h));
  }
  report(6, "weighted vs two-step extension sign", agree == total,
         fmt("%g/50 agree, max |value gap| = %.3g (reported)", double(agree), max_gap));
}

// --------------------------------------------------------------------------
// 7. Berger bound on certified curvature-band samples.
// --------------------------------------------------------------------------
void criterion7() {
  std::mt19937_64 rng(107);
  OptimizerOptions<double> opt;
  opt.restarts = 12;
  opt.max_iterations = 400;
  double worst_cross = 0.0, worst_weighted = 0.0;
  for (int t = 0; t < 20; ++t) {
    const Op r = random_quarter_pinched<double>(4, rng);
    worst_cross = std::max(worst_cross, berger_check(r, opt).max_abs);
    worst_weighted = std::max(worst_weighted, -weighted_isotropic_min(r, opt).value);
  }
  report(7, "cross-curvature bound on banded samples",
         worst_cross <= 2.0 + 1e-6 && worst_weighted <= 1e-8,
         fmt("max |R(e1,e2,e3,e4)| = %.8f, worst -min = %.3g", worst_cross, worst_weighted));
}

// --------------------------------------------------------------------------
// 8. Two-form pair normal forms: synthesized pairs recovered exactly.
// --------------------------------------------------------------------------
void criterion8() {
  std::mt19937_64 rng(108);
  std::uniform_real_distribution<double> coeff(-2.0, 2.0), mag(0.3, 2.0), angle(-1.5, 1.5);

  auto row_wedge = [](const Matrix& b, int r, int s) {
    return wedge(Vector(b.row(r).transpose()), Vector(b.row(s).transpose()));
  };

  int self_dual = 0;
  double worst_rec = 0.0, worst_prod = 0.0;
  bool ok = true;
  for (int t = 0; t < 500 && ok; ++t) {
    // Random positively-oriented orthonormal basis.
    Matrix b = gaussian(4, 4, rng);
    gram_schmidt_rows(b);
    if (b.determinant() < 0) b.row(3) *= -1.0;

    double a1, a2, b1, b2;
    if (t % 4 == 1) {
      // Matched pair: both forms land in the same duality eigenspace.
      const double s = mag(rng), sign = (t % 8 == 1) ? 1.0 : -1.0;
      a1 = s;
      a2 = sign * s;
      b1 = s;
      b2 = sign * s;
      ++self_dual;
    } else {
      a1 = coeff(rng);
      a2 = coeff(rng);
      b1 = ((t % 2 == 0) ? 1.0 : -1.0) * mag(rng);
      b2 = a1 * a2 / b1;
    }
    const double th = angle(rng);
    const TwoFormd p = a1 * row_wedge(b, 0, 2) + a2 * row_wedge(b, 3, 1);
    const TwoFormd q = b1 * row_wedge(b, 0, 3) + b2 * row_wedge(b, 1, 2);
    const TwoFormd phi = std::cos(th) * p - std::sin(th) * q;
    const TwoFormd psi = std::sin(th) * p + std::cos(th) * q;

    const auto nf = normal_form_pair(phi, psi);
    const TwoFormd rp = nf.a1 * row_wedge(nf.basis, 0, 2) + nf.a2 * row_wedge(nf.basis, 3, 1);
    const TwoFormd rq = nf.b1 * row_wedge(nf.basis, 0, 3) + nf.b2 * row_wedge(nf.basis, 1, 2);
    const double c = std::cos(nf.theta), s = std::sin(nf.theta);
    const double rec = std::max((c * rp - s * rq - phi).norm(), (s * rp + c * rq - psi).norm());
    const double prod = std::abs(nf.a1 * nf.a2 - nf.b1 * nf.b2);
    worst_rec = std::max(worst_rec, rec);
    worst_prod = std::max(worst_prod, prod);
    ok = rec <= 1e-10 && prod <= 1e-10;
  }
  report(8, "pair normal-form synthesis", ok && self_dual >= 50,
         fmt("max reconstruction = %.3g, max product gap = %.3g, matched-duality cases = %g",
             worst_rec, worst_prod, double(self_dual)));
}

// --------------------------------------------------------------------------
// 9. Deformation family: inverse round trips, parameter pins, and the round
//    operator inside every tested cone.
// --------------------------------------------------------------------------
void criterion9() {
  std::mt19937_64 rng(109);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    const int n = 4 + t % 5;
    const Op r = random_bianchi<double>(n, rng);
    const double a = unit(rng), b = unit(rng);
    const double gap = (l_ab_inverse(l_ab(r, a, b), a, b) - r).norm() / std::max(1.0, r.norm());
    worst = std::max(worst, gap);
  }

  const auto p4 = cone_params(0.5, 4);
  const auto p6 = cone_params(1.0, 6);
  const bool pins = std::abs(p4.a - 0.5) <= 1e-12 && std::abs(p4.p - 1.0 / 3.0) <= 1e-12 &&
                    std::abs(p6.p - 2.0 / 3.0) <= 1e-12;

  OptimizerOptions<double> opt;
  opt.restarts = 8;
  bool inside = true;
  for (double s : {0.1, 0.25, 0.5, 1.0, 2.0})
    for (int n : {4, 6}) inside = inside && cone_membership(Op::Identity(n), s, 1e-8, opt).inside;

  report(9, "deformation family round trips", worst <= 1e-11 && pins && inside,
         fmt("max round-trip gap = %.3g, parameter pins ", worst) + (pins ? "ok" : "WRONG") +
             ", round operator inside all cones: " + (inside ? "yes" : "NO"));
}

// --------------------------------------------------------------------------
// 10. Desk-scale convergence: banded samples flow toward the round direction.
// --------------------------------------------------------------------------
void criterion10() {
  std::mt19937_64 rng(110);
  bool monotone = true;
  double worst_final = 0.0, worst_jump = 0.0;
  for (int t = 0; t < 10; ++t) {
    Op r0 = random_quarter_pinched<double>(4, rng);
    r0 *= static_cast<double>(Op::Identity(4).trace()) / r0.trace();

    EvolveOptions<double> eopt;
    eopt.adaptive = true;
    eopt.error_target = 1e-10;
    eopt.blowup_trace = 1e6;
    eopt.max_steps = 200000;
    const auto traj = evolve(r0, 5.0, eopt);

    double prev = direction_distance(traj.states.front());
    for (size_t i = 1; i < traj.states.size(); ++i) {
      const double cur = direction_distance(traj.states[i]);
      worst_jump = std::max(worst_jump, cur - prev);
      monotone = monotone && cur <= prev + 1e-9;
      prev = cur;
    }
    worst_final = std::max(worst_final, prev);
  }
  report(10, "flow toward the round direction", monotone && worst_final < 0.05,
         fmt("worst increase = %.3g, worst final distance = %.4f", worst_jump, worst_final));
}

// --------------------------------------------------------------------------
// 11. Analytic frame gradients vs central differences.
// --------------------------------------------------------------------------
void criterion11() {
  std::mt19937_64 rng(111);
  const double h = 1e-6;
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double worst = 0.0;
  for (int t = 0; t < 50; ++t) {
    const int n = 4 + t % 5;
    const Op r = random_bianchi<double>(n, rng);
    const Frame f = random_frame<double>(n, 4, rng);
    Matrix tan = tangent_project(f, gaussian(4, n, rng));
    tan /= tan.norm();

    const bool weighted = (t % 2 == 1);
    const double lambda = weighted ? u(rng) : 0.0;
    const double mu = weighted ? u(rng) : 0.0;
    auto value = [&](const Frame& at) {
      return weighted ? weighted_isotropic_value(r, at, lambda, mu) : isotropic_value(r, at);
    };
    const Matrix grad =
        weighted ? weighted_isotropic_gradient(r, f, lambda, mu) : isotropic_gradient(r, f);

    const double fd = (value(stiefel_retract(f, Matrix(h * tan))) -
                       value(stiefel_retract(f, Matrix(-h * tan)))) /
                      (2.0 * h);
    const double analytic = (tangent_project(f, grad).array() * tan.array()).sum();
    worst = std::max(worst,
                     std::abs(fd - analytic) / std::max({1.0, std::abs(analytic), r.norm()}));
  }
  report(11, "gradients vs central differences", worst <= 1e-6, fmt("max rel gap = %.3g", worst));
}

// --------------------------------------------------------------------------
// 12. Second variation at converged zero-minimizers, plus the block trace
//     inequality on pattern-consistent PSD matrices.
// --------------------------------------------------------------------------
void criterion12() {
  std::mt19937_64 rng(112);
  OptimizerOptions<double> opt;
  opt.restarts = 16;
  opt.max_iterations = 500;

  int found = 0, attempts = 0;
  double worst_eig = 0.0;
  while (found < 10 && attempts < 40) {
    ++attempts;
    const int n0 = 4 + attempts % 2;
    const Op r = extend(random_nonneg<double>(n0, rng), 2);
    const auto rep = isotropic_min(r, opt);
    if (!rep.converged || std::abs(rep.value) > 1e-6 * std::max(1.0, r.norm())) continue;
    ++found;
    const auto sv = second_variation(r, rep.witness);
    const double lmin = Eigen::SelfAdjointEigenSolver<Matrix>(sv.l).eigenvalues().minCoeff();
    worst_eig = std::max(worst_eig, -lmin / std::max(1.0, r.norm()));
  }

  double worst_trace = 0.0;
  for (int t = 0; t < 100; ++t) {
    const int m = 1 + t % 3;
    SecondVariationMatrix<double> sv;
    const Matrix ra = gaussian(m, m, rng), rb = gaussian(m, m, rng);
    const Matrix re = gaussian(m, m, rng), rf = gaussian(m, m, rng);
    sv.a = ra + ra.transpose();
    sv.b = rb + rb.transpose();
    sv.e = re - re.transpose();
    sv.f = rf - rf.transpose();
    sv.c = gaussian(m, m, rng);
    sv.d = gaussian(m, m, rng);
    auto assemble = [&]() {
      sv.l.resize(4 * m, 4 * m);
      sv.l << sv.b, -sv.f, -sv.c, -sv.d,
          sv.f, sv.b, sv.d, -sv.c,
          -sv.c.transpose(), sv.d.transpose(), sv.a, -sv.e,
          -sv.d.transpose(), -sv.c.transpose(), sv.e, sv.a;
    };
    assemble();
    const double shift =
        std::max(0.0, -Eigen::SelfAdjointEigenSolver<Matrix>(sv.l).eigenvalues().minCoeff()) + 0.1;
    sv.a += shift * Matrix::Identity(m, m);
    sv.b += shift * Matrix::Identity(m, m);
    assemble();
    const auto ti = trace_inequality(sv);
    const double scale = std::max(sv.l.squaredNorm(), 1.0);
    worst_trace = std::max(worst_trace, -ti.block_expression / scale);
  }

  report(12, "second variation positivity", found == 10 && worst_eig <= 1e-6 && worst_trace <= 1e-10,
         fmt("zero-minimizers = %g/10, worst -eig/|R| = %.3g, worst -trace/|L|^2 = %.3g",
             double(found), worst_eig, worst_trace));
}

}  // namespace

int main() {
  criterion1();
  criterion2();
  criterion3();
  criteria45();
  criterion6();
  criterion7();
  criterion8();
  criterion9();
  criterion10();
  criterion11();
  criterion12();
  std::printf("%s (%d/12 criteria)\n", failures == 0 ? "ALL PASS" : "FAILURES", 12 - failures);
  return failures == 0 ? 0 : 1;
}
