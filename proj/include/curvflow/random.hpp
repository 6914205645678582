// Random curvature-operator generators: unstructured first-Bianchi operators,
// nonnegative operators built from PSD Kulkarni-Nomizu squares, and strictly
// quarter-pinched operators produced by perturbing a round operator and
// certifying the sectional band by optimization.

#ifndef CURVFLOW_RANDOM_HPP
#define CURVFLOW_RANDOM_HPP

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

#include "curvflow/conditions.hpp"
#include "curvflow/curvature_operator.hpp"
#include "curvflow/frame.hpp"
#include "curvflow/lambda2.hpp"

namespace curvflow {

enum class RandomMode { arbitrary, nonneg, quarter_pinched };

inline RandomMode parse_random_mode(const std::string& s) {
  if (s == "arbitrary") return RandomMode::arbitrary;
  if (s == "nonneg_operator" || s == "nonneg") return RandomMode::nonneg;
  if (s == "quarter_pinched" || s == "quarter-pinched") return RandomMode::quarter_pinched;
  throw std::invalid_argument("unknown random mode: " + s +
                              " (expected arbitrary | nonneg_operator | quarter_pinched)");
}

inline std::string to_string(RandomMode m) {
  switch (m) {
    case RandomMode::arbitrary: return "arbitrary";
    case RandomMode::nonneg: return "nonneg_operator";
    case RandomMode::quarter_pinched: return "quarter_pinched";
  }
  return "?";
}

/// Unstructured operator: Gaussian symmetric two-form array projected onto
/// the first-Bianchi subspace.
template <typename Scalar, class Urbg>
CurvatureOperator<Scalar> random_bianchi(int n, Urbg& rng) {
  std::normal_distribution<Scalar> gauss(Scalar(0), Scalar(1));
  const int nn = pair_count(n);
  MatrixX<Scalar> m(nn, nn);
  for (int a = 0; a < nn; ++a)
    for (int b = 0; b < nn; ++b) m(a, b) = gauss(rng);
  return bianchi_project(CurvatureOperator<Scalar>(n, m));
}

/// Nonnegative operator: positive combination of Kulkarni-Nomizu squares of
/// PSD matrices; the two-form array is then PSD, so every sectional-type
/// expression (isotropic, flag, sectional) is nonnegative.
template <typename Scalar, class Urbg>
CurvatureOperator<Scalar> random_nonneg(int n, Urbg& rng) {
  std::normal_distribution<Scalar> gauss(Scalar(0), Scalar(1));
  std::uniform_real_distribution<Scalar> coeff(Scalar(0.1), Scalar(1));
  CurvatureOperator<Scalar> r(n);
  const int terms = pair_count(n);
  MatrixX<Scalar> g(n, n);
  for (int t = 0; t < terms; ++t) {
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) g(i, j) = gauss(rng);
    const MatrixX<Scalar> a = (g.transpose() * g / Scalar(n)).eval();
    r += coeff(rng) * kulkarni_nomizu(a, a);
  }
  return r;
}

template <typename Scalar>
struct QuarterPinchedOptions {
  Scalar kappa = Scalar(2.475);       // center of the target sectional band
  Scalar sigma_scale = Scalar(0.15);  // initial perturbation, relative to |id wedge id / 2|
  Scalar band_lo = Scalar(1);
  Scalar band_hi = Scalar(3.95);  // strictly inside ratio 1/4
  int sample_frames = 512;        // cheap rejection before certifying
  int max_attempts = 10000;
  int halve_after = 25;  // consecutive rejections before halving sigma
  OptimizerOptions<Scalar> certify;
  QuarterPinchedOptions() {
    certify.restarts = 8;
    certify.max_iterations = 200;
  }
};

/// Strictly quarter-pinched operator: kappa * Id + sigma * (random Bianchi
/// direction), accepted only when the certified sectional range lies inside
/// [band_lo, band_hi].  Sigma is halved after repeated rejections, so the
/// generator always terminates for sane options.
template <typename Scalar, class Urbg>
CurvatureOperator<Scalar> random_quarter_pinched(int n, Urbg& rng,
                                                 const QuarterPinchedOptions<Scalar>& opts = {}) {
  const CurvatureOperator<Scalar> id = CurvatureOperator<Scalar>::Identity(n);
  Scalar sigma = opts.sigma_scale * id.norm();
  int consecutive = 0;
  for (int attempt = 0; attempt < opts.max_attempts; ++attempt) {
    CurvatureOperator<Scalar> dir = random_bianchi<Scalar>(n, rng);
    const Scalar nrm = dir.norm();
    if (nrm <= Scalar(0)) continue;
    dir *= Scalar(1) / nrm;
    const CurvatureOperator<Scalar> cand = opts.kappa * id + sigma * dir;

    bool ok = true;
    for (int s = 0; s < opts.sample_frames && ok; ++s) {
      const OrthonormalFrame<Scalar> f = random_frame<Scalar>(n, 2, rng);
      const Scalar v = sectional_value(cand, f);
      ok = (v >= opts.band_lo && v <= opts.band_hi);
    }
    if (ok) {
      const SectionalExtremes<Scalar> ext = sectional_extremes(cand, opts.certify);
      if (ext.kmin >= opts.band_lo && ext.kmax <= opts.band_hi) return cand;
    }
    if (++consecutive >= opts.halve_after) {
      sigma /= Scalar(2);
      consecutive = 0;
    }
  }
  throw std::runtime_error("random_quarter_pinched: no candidate accepted");
}

template <typename Scalar, class Urbg>
CurvatureOperator<Scalar> random_operator(int n, RandomMode mode, Urbg& rng) {
  switch (mode) {
    case RandomMode::arbitrary: return random_bianchi<Scalar>(n, rng);
    case RandomMode::nonneg: return random_nonneg<Scalar>(n, rng);
    case RandomMode::quarter_pinched: return random_quarter_pinched<Scalar>(n, rng);
  }
  throw std::invalid_argument("random_operator: unknown mode");
}

/// Seeded convenience wrapper with a private engine.
template <typename Scalar>
CurvatureOperator<Scalar> random_operator_seeded(int n, RandomMode mode, std::uint64_t seed) {
  std::mt19937_64 rng(mix_seed(seed, 0));
  return random_operator<Scalar>(n, mode, rng);
}

}  // namespace curvflow

#endif  // CURVFLOW_RANDOM_HPP
