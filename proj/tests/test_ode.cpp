// The quadratic field Q and the RK4 evolution: reference-vs-fast agreement
// (with an extra tensor-level oracle written here), closed-form scalar lines,
// convergence order, regularized variant, stop reasons, and equivariance.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "curvflow/curvature_operator.hpp"
#include "curvflow/ode.hpp"
#include "support.hpp"

using namespace curvflow;
using testsupport::Tensor4;
using testsupport::bianchi_violation;
using testsupport::gaussian_matrix;
using testsupport::random_bianchi_oracle;

using Op = CurvatureOperatord;
using Matrix = Eigen::MatrixXd;

namespace {

// Independent oracle: the defining contraction evaluated on a dense
// four-index table, written without reference to either library path.
Op q_tensor_oracle(const Op& r) {
  const int n = r.n();
  const Tensor4 t = Tensor4::from_operator(r);
  Tensor4 out(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l) {
          double sum = 0.0;
          for (int p = 0; p < n; ++p)
            for (int q = 0; q < n; ++q)
              sum += t.at(i, j, p, q) * t.at(k, l, p, q) +
                     2.0 * t.at(i, p, k, q) * t.at(j, p, l, q) -
                     2.0 * t.at(i, p, l, q) * t.at(j, p, k, q);
          out.at(i, j, k, l) = sum;
        }
  return out.to_operator();
}

double op_dist(const Op& a, const Op& b) {
  return (a.matrix() - b.matrix()).lpNorm<Eigen::Infinity>();
}

// High-resolution scalar RK4 for f' = c f^2 + eps, the restriction of the
// (regularized) field to the line of multiples of the identity operator.
double scalar_line_oracle(double f0, double c, double eps, double t_end, int steps) {
  const double h = t_end / steps;
  double f = f0;
  auto fp = [&](double x) { return c * x * x + eps; };
  for (int s = 0; s < steps; ++s) {
    const double k1 = fp(f);
    const double k2 = fp(f + 0.5 * h * k1);
    const double k3 = fp(f + 0.5 * h * k2);
    const double k4 = fp(f + h * k3);
    f += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return f;
}

}  // namespace

TEST_CASE("q_naive: zero, identity line, homogeneity, output Bianchi") {
  CHECK(q_naive(Op(5)).norm() == 0.0);

  for (int n = 4; n <= 8; ++n) {
    const Op id = Op::Identity(n);
    const Op expect = (2.0 * (n - 1)) * id;
    CHECK(op_dist(q_naive(id), expect) <= 1e-12);
  }

  std::mt19937_64 rng(21);
  const Op r = random_bianchi_oracle(5, rng);
  const double scale = r.norm() * r.norm();
  CHECK(op_dist(q_naive(3.0 * r), 9.0 * q_naive(r)) <= 1e-10 * scale);
  CHECK(bianchi_violation(Tensor4::from_operator(q_naive(r))) <= 1e-10 * scale);
}

TEST_CASE("q: tensor-level oracle agrees with both implementations") {
  std::mt19937_64 rng(22);
  for (int n : {4, 5, 6}) {
    for (int trial = 0; trial < 3; ++trial) {
      const Op r = random_bianchi_oracle(n, rng);
      const double scale = r.norm() * r.norm();
      const Op oracle = q_tensor_oracle(r);
      CHECK(op_dist(q_naive(r), oracle) <= 1e-11 * scale);
      CHECK(op_dist(q_fast(r), oracle) <= 1e-11 * scale);
    }
  }
}

TEST_CASE("q_fast agrees with q_naive across dimensions; flipped sign differs") {
  std::mt19937_64 rng(23);
  for (int n = 4; n <= 8; ++n) {
    for (int trial = 0; trial < 5; ++trial) {
      const Op r = random_bianchi_oracle(n, rng);
      CHECK(op_dist(q_fast(r), q_naive(r)) <= 1e-11 * r.norm() * r.norm());
    }
  }
  CHECK(op_dist(q_fast(Op::Identity(6)), q_naive(Op::Identity(6))) <= 1e-12);

  // The deliberately sign-flipped variant must be detectably wrong.
  const Op r = random_bianchi_oracle(4, rng);
  CHECK(op_dist(detail::q_fast_signed(r, 2.0), q_naive(r)) > 1e-6 * r.norm() * r.norm());
}

TEST_CASE("evolve: zero stays zero; identity line matches the closed form") {
  const Trajectory<double> still = evolve(Op(4), 0.05);
  CHECK(still.reason == StopReason::reached_end);
  for (const auto& s : still.states) CHECK(s.norm() == 0.0);

  // R(t) = I / (1 - 2(n-1) t): for n = 4 the scalar factor at t = 0.01 is
  // 1/0.94.  Both fixed-step (auto h) and adaptive integration must match.
  const Op id = Op::Identity(4);
  for (bool adaptive : {false, true}) {
    EvolveOptions<double> opts;
    opts.adaptive = adaptive;
    const Trajectory<double> traj = evolve(id, 0.01, opts);
    CHECK(traj.reason == StopReason::reached_end);
    CHECK(traj.final_time() == doctest::Approx(0.01).epsilon(1e-12));
    const double factor = traj.final_state().trace() / id.trace();
    CHECK(std::abs(factor - 1.0 / 0.94) <= 1e-8 * (1.0 / 0.94));
    // The direction is constant along the line.
    for (const auto& s : traj.states) CHECK(direction_distance(s) <= 1e-12);
  }
}

TEST_CASE("evolve: fixed-step error decays at fourth order on the identity line") {
  const Op id = Op::Identity(4);
  const double t_end = 0.1;
  const double exact = 1.0 / (1.0 - 6.0 * t_end);
  auto err_at = [&](double h) {
    EvolveOptions<double> opts;
    opts.step = h;
    const Trajectory<double> traj = evolve(id, t_end, opts);
    return std::abs(traj.final_state().trace() / id.trace() - exact);
  };
  const double e1 = err_at(2e-3);
  const double e2 = err_at(1e-3);
  const double e3 = err_at(5e-4);
  const double order12 = std::log2(e1 / e2);
  const double order23 = std::log2(e2 / e3);
  CHECK(order12 >= 3.7);
  CHECK(order12 <= 4.5);
  CHECK(order23 >= 3.7);
  CHECK(order23 <= 4.5);
}

TEST_CASE("evolve_regularized: exact shift at t = 0 and scalar-oracle agreement") {
  // Zero initial data: the state at t = 0 is exactly eps * Id.
  const double eps = 1e-2;
  const Trajectory<double> traj = evolve_regularized(Op(4), 1.0, eps);
  CHECK(op_dist(traj.states.front(), eps * Op::Identity(4)) == 0.0);

  // Stays on the identity line and matches a much finer scalar integration
  // of f' = 2(n-1) f^2 + eps.
  const double f_end = scalar_line_oracle(eps, 6.0, eps, 1.0, 200000);
  const double factor = traj.final_state().trace() / Op::Identity(4).trace();
  CHECK(std::abs(factor - f_end) <= 1e-8 * std::abs(f_end));
  CHECK(direction_distance(traj.final_state()) <= 1e-10);

  // Without projection the shift is bitwise for arbitrary initial data too.
  std::mt19937_64 rng(24);
  const Op r0 = random_bianchi_oracle(4, rng);
  EvolveOptions<double> opts;
  opts.project_bianchi = false;
  const Trajectory<double> shifted = evolve_regularized(r0, 0.001, eps, opts);
  CHECK(op_dist(shifted.states.front(), r0 + eps * Op::Identity(4)) == 0.0);
}

TEST_CASE("evolve_regularized converges to evolve as eps shrinks") {
  std::mt19937_64 rng(25);
  // A mildly scaled random operator keeps the flow far from blowup on [0, t].
  const Op r0 = 0.5 * random_bianchi_oracle(4, rng);
  const double t_end = 0.02;
  EvolveOptions<double> opts;
  opts.step = 1e-4;
  const Op plain = evolve(r0, t_end, opts).final_state();
  double prev = std::numeric_limits<double>::infinity();
  double first = 0.0, last = 0.0;
  for (double eps : {1e-2, 1e-3, 1e-4}) {
    const double d = (evolve_regularized(r0, t_end, eps, opts).final_state() - plain).norm();
    CHECK(d < prev);
    prev = d;
    if (eps == 1e-2) first = d;
    last = d;
  }
  // The gap is O(eps), so two decades of eps shrink it by roughly 100x.
  CHECK(last <= 0.05 * first);
}

TEST_CASE("regularized trace increases from a nonnegative start") {
  // c * Id has Q + eps Id of strictly positive trace; check monotonicity on a
  // generic nonnegative combination 0.2*I + small Bianchi perturbation that
  // stays positive.
  std::mt19937_64 rng(26);
  Op r0 = 0.2 * Op::Identity(4);
  r0 += 0.01 * random_bianchi_oracle(4, rng);
  const Trajectory<double> traj = evolve_regularized(r0, 0.05, 1e-3);
  for (std::size_t i = 1; i < traj.states.size(); ++i)
    CHECK(traj.states[i].trace() > traj.states[i - 1].trace());
}

TEST_CASE("evolve preserves flat extensions and commutes with extend") {
  std::mt19937_64 rng(27);
  // A nonnegative-type start: Gram-squared generators keep the flow tame.
  const Matrix g = gaussian_matrix(4, 4, rng);
  const Matrix a = (g.transpose() * g) / 4.0;
  const Op core = kulkarni_nomizu(a, a);
  const Op big = extend(core, 2);
  REQUIRE(big.n() == 6);

  EvolveOptions<double> opts;
  opts.step = 1e-3;
  const Trajectory<double> traj_big = evolve(big, 0.01, opts);
  const Trajectory<double> traj_core = evolve(core, 0.01, opts);
  const Op fin = traj_big.final_state();

  // Entries touching the two appended flat directions stay (numerically) zero.
  double worst = 0.0;
  for (int i = 0; i < 6; ++i)
    for (int j = i + 1; j < 6; ++j)
      for (int k = 0; k < 6; ++k)
        for (int l = k + 1; l < 6; ++l)
          if (j >= 4 || l >= 4) worst = std::max(worst, std::abs(fin.entry(i, j, k, l)));
  CHECK(worst <= 1e-14 * std::max(fin.norm(), 1.0));

  // The core block evolves exactly as the unextended operator does.
  CHECK(op_dist(fin, extend(traj_core.final_state(), 2)) <= 1e-10 * traj_core.final_state().norm());
}

TEST_CASE("stop reasons: blowup, max steps, adaptive step underflow") {
  const Op id = Op::Identity(4);

  EvolveOptions<double> blow;
  blow.step = 1e-3;
  blow.blowup_trace = 1e6;
  const Trajectory<double> tb = evolve(id, 0.3, blow);
  CHECK(tb.reason == StopReason::blowup);
  CHECK(tb.final_time() < 0.3);
  CHECK(std::string(to_string(tb.reason)) == "blowup");

  EvolveOptions<double> steps;
  steps.step = 1e-5;
  steps.max_steps = 5;
  const Trajectory<double> tm = evolve(id, 1.0, steps);
  CHECK(tm.reason == StopReason::max_steps);
  CHECK(tm.final_time() == doctest::Approx(5e-5));

  EvolveOptions<double> under;
  under.adaptive = true;
  under.error_target = 1e-30;
  under.min_step = 1e-4;
  const Trajectory<double> tu = evolve(id, 0.1, under);
  CHECK(tu.reason == StopReason::step_underflow);

  CHECK_THROWS_AS(evolve(id, -1.0), std::invalid_argument);
}

TEST_CASE("record_stride keeps every k-th state plus the endpoint") {
  EvolveOptions<double> opts;
  opts.step = 1e-3;
  opts.record_stride = 5;
  const Trajectory<double> traj = evolve(Op::Identity(4), 0.02, opts);
  CHECK(traj.times.size() == 5);  // t = 0, 5h, 10h, 15h, 20h
  for (std::size_t i = 1; i < traj.times.size(); ++i) {
    CHECK(traj.times[i] > traj.times[i - 1]);
    CHECK(traj.times[i] == doctest::Approx(5e-3 * static_cast<double>(i)).epsilon(1e-12));
  }
}

TEST_CASE("normalized_direction and direction_distance") {
  const Op id = Op::Identity(5);
  const Op dir = normalized_direction(7.5 * id);
  CHECK(op_dist(dir, (1.0 / id.trace()) * id) <= 1e-15);
  CHECK(direction_distance(id) == 0.0);

  CHECK_THROWS_AS(normalized_direction(Op(5)), std::invalid_argument);
  CHECK_THROWS_AS(normalized_direction(-1.0 * id), std::invalid_argument);

  std::mt19937_64 rng(28);
  Op r = random_bianchi_oracle(5, rng);
  r += 3.0 * id;  // ensure positive trace
  CHECK(std::abs(direction_distance(5.0 * r) - direction_distance(r)) <= 1e-13);
}

TEST_CASE("the flow is equivariant under orthogonal conjugation") {
  std::mt19937_64 rng(29);
  const Op r0 = 0.5 * random_bianchi_oracle(5, rng);
  const Matrix q = testsupport::householder_frame(5, 5, rng).rows();

  EvolveOptions<double> opts;
  opts.step = 1e-3;
  const Op lhs = evolve(conjugate(r0, q), 0.02, opts).final_state();
  const Op rhs = conjugate(evolve(r0, 0.02, opts).final_state(), q);
  CHECK(op_dist(lhs, rhs) <= 1e-8 * std::max(rhs.norm(), 1.0));
}
