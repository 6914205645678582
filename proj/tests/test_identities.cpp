// The exact quadratic frame identities, the first-order minimizer residuals,
// the second-variation block matrix, and the U-conjugation trace identity.
// Mixed-identity instances are engineered by projecting random operators onto
// the kernel of the four linear constraints the identity requires.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include <Eigen/Eigenvalues>

#include "curvflow/conditions.hpp"
#include "curvflow/curvature_operator.hpp"
#include "curvflow/frame.hpp"
#include "support.hpp"

using namespace curvflow;
using testsupport::gaussian_matrix;
using testsupport::householder_frame;
using testsupport::random_bianchi_oracle;

using Op = CurvatureOperatord;
using Frame = OrthonormalFrame<double>;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

namespace {

double frob(const Op& a, const Op& b) {
  return (a.matrix().array() * b.matrix().array()).sum();
}

// Riesz representers of the four linear combinations that must vanish for the
// mixed identity at extension index q (0-based, q >= 4), written in the basis
// in which the frame is the first four vectors.  Off-diagonal array positions
// appear twice in the Frobenius pairing, hence the 1/2 weights.
std::vector<Op> mixed_constraint_representers(int n, int q) {
  std::vector<Op> reps;
  reps.push_back(from_components<double>(
      n, {{0, 2, 2, q, 0.5}, {0, 3, 3, q, 0.5}, {3, 2, 1, q, 0.5}}));
  reps.push_back(from_components<double>(
      n, {{1, 2, 2, q, 0.5}, {1, 3, 3, q, 0.5}, {2, 3, 0, q, 0.5}}));
  reps.push_back(from_components<double>(
      n, {{2, 0, 0, q, 0.5}, {2, 1, 1, q, 0.5}, {1, 0, 3, q, 0.5}}));
  reps.push_back(from_components<double>(
      n, {{3, 0, 0, q, 0.5}, {3, 1, 1, q, 0.5}, {0, 1, 2, q, 0.5}}));
  return reps;
}

// Orthogonal projection (in the array Frobenius sense, which the first-Bianchi
// projection preserves) of r onto the intersection of the constraint kernels.
Op project_to_constraint_kernel(const Op& r, const std::vector<Op>& reps) {
  const int m = static_cast<int>(reps.size());
  std::vector<Op> basis;
  for (const auto& g : reps) basis.push_back(bianchi_project(g));
  Matrix gram(m, m);
  Vector rhs(m);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < m; ++j) gram(i, j) = frob(basis[i], basis[j]);
    rhs[i] = frob(basis[i], r);
  }
  const Vector lambda = gram.ldlt().solve(rhs);
  Op out = r;
  for (int i = 0; i < m; ++i) out += (-lambda[i]) * basis[i];
  return out;
}

}  // namespace

TEST_CASE("first-order residuals vanish on the round operator") {
  std::mt19937_64 rng(51);
  for (int n : {5, 7}) {
    const Op id = Op::Identity(n);
    const Frame f = householder_frame(n, 4, rng);
    CHECK(first_order_residuals(id, f).max_abs() <= 1e-12);
  }
}

TEST_CASE("first-order residuals are generically nonzero (non-vacuity)") {
  std::mt19937_64 rng(52);
  const Op r = random_bianchi_oracle(6, rng);
  const Frame f = householder_frame(6, 4, rng);
  CHECK(first_order_residuals(r, f).max_abs() > 1e-6 * std::max(r.norm(), 1.0));
}

TEST_CASE("frame-block identity vanishes on every first-Bianchi operator") {
  std::mt19937_64 rng(53);
  int done = 0;
  for (int n = 4; n <= 8; ++n) {
    for (int trial = 0; trial < 20; ++trial) {
      const Op r = random_bianchi_oracle(n, rng);
      const Frame f = householder_frame(n, 4, rng);
      const double scale = r.norm() * r.norm();
      CHECK(std::abs(frame_block_identity_residual(r, f)) <= 1e-10 * scale);
      ++done;
    }
  }
  CHECK(done == 100);

  // Exactly zero structure on the round operator.
  const Frame std4(4, 4, Matrix::Identity(4, 4));
  CHECK(std::abs(frame_block_identity_residual(Op::Identity(4), std4)) <= 1e-13);
}

TEST_CASE("frame-block identity fails without the first Bianchi identity") {
  // A pure cross component R_1234 = 1 with no Bianchi partners: the left side
  // vanishes termwise while the right side evaluates to -4.
  const Op raw = from_components<double>(4, {{0, 1, 2, 3, 1.0}});
  const Frame std4(4, 4, Matrix::Identity(4, 4));
  CHECK(frame_block_identity_residual(raw, std4) == doctest::Approx(4.0).epsilon(1e-12));
}

TEST_CASE("mixed identity: round operator, engineered kernels, negative control") {
  const int n = 6;
  std::mt19937_64 rng(54);

  // Round operator: every mixed component vanishes.
  const Frame std4(n, 4, Matrix(Matrix::Identity(n, n).topRows(4)));
  for (int q = 4; q < n; ++q)
    CHECK(std::abs(mixed_block_identity_residual(Op::Identity(n), std4, q)) <= 1e-13);

  // Engineered instances at the standard frame: project random Bianchi
  // operators onto the kernel of the four constraint functionals for q.
  for (int q = 4; q < n; ++q) {
    const auto reps = mixed_constraint_representers(n, q);
    for (int trial = 0; trial < 10; ++trial) {
      const Op r = project_to_constraint_kernel(random_bianchi_oracle(n, rng), reps);
      const double scale = std::max(r.norm() * r.norm(), 1.0);
      for (const auto& g : reps) CHECK(std::abs(frob(g, r)) <= 1e-12 * std::max(r.norm(), 1.0));
      CHECK(std::abs(mixed_block_identity_residual(r, std4, q)) <= 1e-10 * scale);
    }
  }

  // Same construction pulled back to a random frame: the functionals live in
  // the completed-basis coordinates, so conjugate the representers back.
  const Frame f = householder_frame(n, 4, rng);
  const Matrix basis = complete_basis(f);
  const int q = 4;
  std::vector<Op> pulled;
  for (const auto& g : mixed_constraint_representers(n, q))
    pulled.push_back(conjugate(g, basis));
  const Op r = project_to_constraint_kernel(random_bianchi_oracle(n, rng), pulled);
  CHECK(std::abs(mixed_block_identity_residual(r, f, q)) <=
        1e-10 * std::max(r.norm() * r.norm(), 1.0));

  // Negative control: with the constraints violated the residual is not small.
  const Op free = random_bianchi_oracle(n, rng);
  CHECK(std::abs(mixed_block_identity_residual(free, std4, 4)) >
        1e-6 * std::max(free.norm() * free.norm(), 1.0));

  // Index validation.
  CHECK_THROWS_AS(mixed_block_identity_residual(free, std4, 3), std::invalid_argument);
  CHECK_THROWS_AS(mixed_block_identity_residual(free, std4, n), std::invalid_argument);
}

TEST_CASE("second variation on the round operator: A = B = 2 Id, rest zero") {
  std::mt19937_64 rng(55);
  const int n = 6, m = n - 4;
  const Frame f = householder_frame(n, 4, rng);
  const auto sv = second_variation(Op::Identity(n), f);

  CHECK((sv.a - 2.0 * Matrix::Identity(m, m)).lpNorm<Eigen::Infinity>() <= 1e-12);
  CHECK((sv.b - 2.0 * Matrix::Identity(m, m)).lpNorm<Eigen::Infinity>() <= 1e-12);
  for (const Matrix* z : {&sv.c, &sv.d, &sv.e, &sv.f})
    CHECK(z->lpNorm<Eigen::Infinity>() <= 1e-12);

  const Eigen::SelfAdjointEigenSolver<Matrix> es(sv.l);
  for (int i = 0; i < es.eigenvalues().size(); ++i)
    CHECK(es.eigenvalues()[i] == doctest::Approx(2.0).epsilon(1e-10));
}

TEST_CASE("second variation: assembled matrix matches the block pattern") {
  std::mt19937_64 rng(56);
  const int n = 7, m = n - 4;
  const Op r = random_bianchi_oracle(n, rng);
  const Frame f = householder_frame(n, 4, rng);
  const auto sv = second_variation(r, f);

  Matrix expect(4 * m, 4 * m);
  expect << sv.b, -sv.f, -sv.c, -sv.d,
      sv.f, sv.b, sv.d, -sv.c,
      -sv.c.transpose(), sv.d.transpose(), sv.a, -sv.e,
      -sv.d.transpose(), -sv.c.transpose(), sv.e, sv.a;
  CHECK((sv.l - expect).lpNorm<Eigen::Infinity>() == 0.0);

  // The pattern is symmetric because A, B are symmetric and E, F antisymmetric.
  CHECK((sv.l - sv.l.transpose()).lpNorm<Eigen::Infinity>() <= 1e-12 * std::max(r.norm(), 1.0));
  CHECK((sv.a - sv.a.transpose()).lpNorm<Eigen::Infinity>() <= 1e-13 * std::max(r.norm(), 1.0));
  CHECK((sv.e + sv.e.transpose()).lpNorm<Eigen::Infinity>() <= 1e-13 * std::max(r.norm(), 1.0));
}

TEST_CASE("quadratic form evaluated from curvature equals w^T L w") {
  std::mt19937_64 rng(57);
  for (int n : {5, 6, 8}) {
    const int m = n - 4;
    const Op r = random_bianchi_oracle(n, rng);
    const Frame f = householder_frame(n, 4, rng);
    const auto sv = second_variation(r, f);

    for (int trial = 0; trial < 5; ++trial) {
      // Random vectors in the orthogonal complement of the frame, built from
      // the completed basis rows so their coordinates are immediate.
      Matrix coeff = gaussian_matrix(4, m, rng);
      std::vector<Vector> w(4, Vector::Zero(n));
      for (int i = 0; i < 4; ++i)
        for (int p = 0; p < m; ++p) w[i] += coeff(i, p) * sv.basis.row(4 + p).transpose();

      Vector x(4 * m);
      for (int i = 0; i < 4; ++i) x.segment(i * m, m) = coeff.row(i).transpose();

      const double direct = second_variation_quad_form(r, f, w[0], w[1], w[2], w[3]);
      const double through_l = x.dot(sv.l * x);
      const double scale = std::max(r.norm() * x.squaredNorm(), 1.0);
      CHECK(std::abs(direct - through_l) <= 1e-10 * scale);
    }
  }
}

TEST_CASE("second variation is nonnegative at a converged zero minimizer") {
  std::mt19937_64 rng(58);
  const Matrix g = gaussian_matrix(4, 4, rng);
  const Matrix a = (g.transpose() * g) / 4.0;
  const Op r = extend(kulkarni_nomizu(a, a), 2);

  OptimizerOptions<double> opts;
  opts.restarts = 12;
  const auto rep = isotropic_min(r, opts);
  REQUIRE(rep.converged);
  REQUIRE(std::abs(rep.value) <= 1e-7 * std::max(r.norm(), 1.0));

  // First-order residuals are tied to the optimizer's gradient tolerance.
  CHECK(first_order_residuals(r, rep.witness).max_abs() <= 1e-4 * std::max(r.norm(), 1.0));

  const auto sv = second_variation(r, rep.witness);
  const Eigen::SelfAdjointEigenSolver<Matrix> es(sv.l);
  CHECK(es.eigenvalues().minCoeff() >= -1e-6 * std::max(r.norm(), 1.0));
}

TEST_CASE("trace identity: quarter trace equals the block expression") {
  std::mt19937_64 rng(59);
  for (int m : {1, 2, 3}) {
    for (int trial = 0; trial < 10; ++trial) {
      SecondVariationMatrix<double> sv;
      const Matrix ra = gaussian_matrix(m, m, rng), rb = gaussian_matrix(m, m, rng);
      const Matrix re = gaussian_matrix(m, m, rng), rf = gaussian_matrix(m, m, rng);
      sv.a = ra + ra.transpose();
      sv.b = rb + rb.transpose();
      sv.e = re - re.transpose();
      sv.f = rf - rf.transpose();
      sv.c = gaussian_matrix(m, m, rng);
      sv.d = gaussian_matrix(m, m, rng);
      sv.l.resize(4 * m, 4 * m);
      sv.l << sv.b, -sv.f, -sv.c, -sv.d,
          sv.f, sv.b, sv.d, -sv.c,
          -sv.c.transpose(), sv.d.transpose(), sv.a, -sv.e,
          -sv.d.transpose(), -sv.c.transpose(), sv.e, sv.a;

      const auto t = trace_inequality(sv);
      const double scale = std::max(sv.l.squaredNorm(), 1.0);
      CHECK(std::abs(t.quarter_trace - t.block_expression) <= 1e-12 * scale);
    }
  }
}

TEST_CASE("trace inequality holds for pattern-consistent PSD matrices") {
  std::mt19937_64 rng(60);
  for (int trial = 0; trial < 20; ++trial) {
    const int m = 1 + trial % 3;
    SecondVariationMatrix<double> sv;
    const Matrix ra = gaussian_matrix(m, m, rng), rb = gaussian_matrix(m, m, rng);
    const Matrix re = gaussian_matrix(m, m, rng), rf = gaussian_matrix(m, m, rng);
    sv.a = ra + ra.transpose();
    sv.b = rb + rb.transpose();
    sv.e = re - re.transpose();
    sv.f = rf - rf.transpose();
    sv.c = gaussian_matrix(m, m, rng);
    sv.d = gaussian_matrix(m, m, rng);
    auto assemble = [&]() {
      sv.l.resize(4 * m, 4 * m);
      sv.l << sv.b, -sv.f, -sv.c, -sv.d,
          sv.f, sv.b, sv.d, -sv.c,
          -sv.c.transpose(), sv.d.transpose(), sv.a, -sv.e,
          -sv.d.transpose(), -sv.c.transpose(), sv.e, sv.a;
    };
    assemble();

    // Shift the diagonal blocks until the assembled matrix is PSD; the shift
    // preserves the block pattern.
    const Eigen::SelfAdjointEigenSolver<Matrix> es(sv.l);
    const double shift = std::max(0.0, -es.eigenvalues().minCoeff()) + 0.1;
    sv.a += shift * Matrix::Identity(m, m);
    sv.b += shift * Matrix::Identity(m, m);
    assemble();
    REQUIRE(Eigen::SelfAdjointEigenSolver<Matrix>(sv.l).eigenvalues().minCoeff() >= -1e-12);

    const auto t = trace_inequality(sv);
    const double scale = std::max(sv.l.squaredNorm(), 1.0);
    CHECK(t.quarter_trace >= -1e-10 * scale);
    CHECK(t.block_expression >= -1e-10 * scale);
    CHECK(std::abs(t.quarter_trace - t.block_expression) <= 1e-12 * scale);
  }
}
