// curvflow command-line tool.
//
// Subcommands:
//   gen          write random curvature operators as JSON
//   check        run condition batteries on operator files, write a report
//   evolve       integrate dR/dt = Q(R) with monitor columns, write CSV
//   verify       seeded identity batteries; exit 0 iff everything passes
//   normal-form  two-form pair normal form (demo, synthesized, or from files)
//
// Exit codes: 0 success, 1 verification failure, 2 usage/config error,
// 3 numerical failure (integrator/optimizer/sampler).
//
// Configuration: every subcommand accepts --config FILE with plain key=value
// lines ('#' comments); keys mirror the long option names, unknown keys are
// rejected, and explicit command-line flags win over file values.

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "curvflow/cone.hpp"
#include "curvflow/conditions.hpp"
#include "curvflow/curvature_operator.hpp"
#include "curvflow/frame.hpp"
#include "curvflow/io.hpp"
#include "curvflow/lambda2.hpp"
#include "curvflow/ode.hpp"
#include "curvflow/random.hpp"
#include "curvflow/two_form.hpp"

using namespace curvflow;

namespace {

constexpr int kOk = 0;
constexpr int kVerifyFail = 1;
constexpr int kUsage = 2;
constexpr int kNumerical = 3;

using Op = CurvatureOperatord;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Usage/config problems detected after argument parsing.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Config file plumbing: bind option names to typed setters so a key=value
// file can fill in anything the command line did not set explicitly.
// ---------------------------------------------------------------------------

int to_int(const std::string& key, const std::string& s) {
  try {
    size_t used = 0;
    const int v = std::stoi(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw UsageError("config: key '" + key + "' needs an integer, got '" + s + "'");
  }
}

double to_dbl(const std::string& key, const std::string& s) {
  try {
    size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw UsageError("config: key '" + key + "' needs a number, got '" + s + "'");
  }
}

bool to_flag(const std::string& key, const std::string& s) {
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw UsageError("config: key '" + key + "' needs true/false, got '" + s + "'");
}

std::vector<double> to_dbl_list(const std::string& key, const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(to_dbl(key, item));
  if (out.empty()) throw UsageError("config: key '" + key + "' needs a comma list of numbers");
  return out;
}

class ConfigTable {
 public:
  void bind_int(const std::string& key, CLI::Option* opt, int& target) {
    table_[key] = {opt, [key, &target](const std::string& v) { target = to_int(key, v); }};
  }
  void bind_u64(const std::string& key, CLI::Option* opt, std::uint64_t& target) {
    table_[key] = {opt, [key, &target](const std::string& v) {
                     const int i = to_int(key, v);
                     if (i < 0) throw UsageError("config: key '" + key + "' needs a nonnegative integer");
                     target = static_cast<std::uint64_t>(i);
                   }};
  }
  void bind_dbl(const std::string& key, CLI::Option* opt, double& target) {
    table_[key] = {opt, [key, &target](const std::string& v) { target = to_dbl(key, v); }};
  }
  void bind_str(const std::string& key, CLI::Option* opt, std::string& target) {
    table_[key] = {opt, [&target](const std::string& v) { target = v; }};
  }
  void bind_flag(const std::string& key, CLI::Option* opt, bool& target) {
    table_[key] = {opt, [key, &target](const std::string& v) { target = to_flag(key, v); }};
  }
  /// Overlay file values onto every option the command line left untouched.
  void apply(const std::string& path, const std::string& command) const {
    if (path.empty()) return;
    std::map<std::string, std::string> cfg;
    try {
      cfg = parse_config_file(path);
    } catch (const std::runtime_error& e) {
      throw UsageError(e.what());
    }
    for (const auto& [key, value] : cfg) {
      const auto it = table_.find(key);
      if (it == table_.end())
        throw UsageError("config: unknown key '" + key + "' for subcommand '" + command + "'");
      if (it->second.opt != nullptr && it->second.opt->count() > 0) continue;  // flags win
      it->second.assign(value);
    }
  }

 private:
  struct Binding {
    CLI::Option* opt;
    std::function<void(const std::string&)> assign;
  };
  std::map<std::string, Binding> table_;
};

// ---------------------------------------------------------------------------
// Small shared helpers.
// ---------------------------------------------------------------------------

std::string iso_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw UsageError("cannot create output directory '" + dir + "': " + ec.message());
}

Op load_operator_or_usage(const std::string& path) {
  try {
    return load_operator(path);
  } catch (const std::runtime_error& e) {
    throw UsageError(e.what());
  }
}

std::string fmtg(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double bianchi_residual(const Op& r) { return (r - bianchi_project(r)).norm(); }

// ---------------------------------------------------------------------------
// gen
// ---------------------------------------------------------------------------

struct GenArgs {
  int n = 4;
  std::uint64_t seed = 0;
  std::string mode = "nonneg_operator";
  int count = 1;
  std::string out = ".";
  int jobs = 1;
  std::string config;
};

int cmd_gen(const GenArgs& a) {
  if (a.n < 4) throw UsageError("gen: need n >= 4");
  if (a.count < 1) throw UsageError("gen: need count >= 1");
  if (a.jobs < 1) throw UsageError("gen: need jobs >= 1");
  RandomMode mode{};
  try {
    mode = parse_random_mode(a.mode);
  } catch (const std::invalid_argument& e) {
    throw UsageError(std::string("gen: ") + e.what());
  }
  ensure_dir(a.out);

  int failed = 0;
  for (int k = 0; k < a.count; ++k) {
    std::mt19937_64 rng(mix_seed(a.seed, static_cast<std::uint64_t>(k)));
    Op r(4);
    try {
      r = random_operator<double>(a.n, mode, rng);
    } catch (const std::runtime_error& e) {
      std::fprintf(stderr, "gen: sample %d failed: %s\n", k, e.what());
      ++failed;
      continue;
    }
    char name[32];
    std::snprintf(name, sizeof(name), "op_%03d.json", k);
    const std::string path = a.out + "/" + name;
    save_operator(path, r);
    std::printf("%s  n=%d  trace=%.12g  bianchi-residual=%.3g\n", path.c_str(), a.n,
                static_cast<double>(r.trace()), bianchi_residual(r));
  }
  if (failed > 0) {
    std::fprintf(stderr, "gen: %d of %d samples failed\n", failed, a.count);
    return kNumerical;
  }
  return kOk;
}

// ---------------------------------------------------------------------------
// check
// ---------------------------------------------------------------------------

struct CheckArgs {
  std::vector<std::string> inputs;
  std::string battery = "isotropic,tilde,hat,flag2,weighted,sectional,berger,cone";
  std::string s_list_raw = "0.25,0.5,1.0";
  int restarts = 16;
  int max_iterations = 8000;  // extension minima crawl along flat valleys
  double tol = 1e-8;
  double pinch_eps = 0.05;
  double pinch_h = 0.01;
  std::uint64_t seed = 0;
  std::string out = ".";
  std::string sweep_out;
  int jobs = 1;
  std::string config;
};

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

int cmd_check(const CheckArgs& a) {
  const std::set<std::string> known = {"isotropic", "tilde", "hat",    "flag2",
                                       "weighted",  "sectional", "berger", "cone"};
  const std::vector<std::string> batteries = split_list(a.battery);
  if (batteries.empty()) throw UsageError("check: battery list is empty");
  for (const auto& b : batteries)
    if (!known.count(b))
      throw UsageError("check: unknown battery '" + b +
                       "' (expected isotropic|tilde|hat|flag2|weighted|sectional|berger|cone)");
  if (a.inputs.empty()) throw UsageError("check: need at least one operator file");
  if (a.restarts < 1 || a.max_iterations < 1)
    throw UsageError("check: optimizer settings must be positive");
  const std::vector<double> s_list = to_dbl_list("s-list", a.s_list_raw);
  for (double s : s_list)
    if (!(s > 0)) throw UsageError("check: every s value must be positive");
  ensure_dir(a.out);

  OptimizerOptions<double> opt;
  opt.restarts = a.restarts;
  opt.max_iterations = a.max_iterations;
  opt.seed = a.seed;
  opt.jobs = a.jobs;

  json results = json::array();
  std::string sweep_rows;
  for (size_t i = 0; i < a.inputs.size(); ++i) {
    const Op r = load_operator_or_usage(a.inputs[i]);
    json item;
    item["file"] = a.inputs[i];
    item["n"] = r.n();
    item["trace"] = static_cast<double>(r.trace());
    json bat;

    double kmin = 0.0, kmax = 0.0;
    bool have_extremes = false;
    auto extremes = [&]() {
      if (!have_extremes) {
        const auto se = sectional_extremes(r, opt);
        kmin = se.kmin;
        kmax = se.kmax;
        have_extremes = true;
      }
    };

    for (const auto& b : batteries) {
      if (b == "isotropic") bat["isotropic"] = report_to_json(isotropic_min(r, opt));
      if (b == "tilde") bat["tilde"] = report_to_json(tilde_isotropic_min(r, opt));
      if (b == "hat") bat["hat"] = report_to_json(hat_isotropic_min(r, opt));
      if (b == "flag2") bat["flag2"] = report_to_json(flag2_min(r, opt));
      if (b == "weighted") bat["weighted"] = report_to_json(weighted_isotropic_min(r, opt));
      if (b == "sectional") {
        extremes();
        json sec;
        sec["kmin"] = kmin;
        sec["kmax"] = kmax;
        bat["sectional"] = std::move(sec);
      }
      if (b == "berger") {
        const auto br = berger_check(r, opt);
        json bj;
        bj["max_abs"] = br.max_abs;
        bj["bound"] = br.bound;
        bj["kmin"] = br.kmin;
        bj["kmax"] = br.kmax;
        bj["within"] = br.within;
        bj["converged"] = br.converged;
        bat["berger"] = std::move(bj);
      }
      if (b == "cone") {
        extremes();
        json rows = json::array();
        for (double s : s_list) {
          const auto mem = cone_membership(r, s, a.tol, opt);
          const bool step = pinching_step(r, s, a.pinch_eps, a.pinch_h, a.tol, opt);
          json row;
          row["s"] = s;
          row["margin"] = mem.margin;
          row["inside"] = mem.inside;
          row["weighted_slack"] = mem.weighted_slack;
          row["ricci_slack"] = mem.ricci_slack;
          row["pinching_step"] = step;
          rows.push_back(std::move(row));
          if (!a.sweep_out.empty()) {
            const double ratio = (kmax != 0.0) ? kmin / kmax : std::numeric_limits<double>::quiet_NaN();
            sweep_rows += fmtg(s) + "," + std::to_string(i) + "," + fmtg(mem.margin) + "," +
                          fmtg(ratio) + "," + (step ? "true" : "false") + "\n";
          }
        }
        bat["cone"] = std::move(rows);
      }
    }
    item["batteries"] = std::move(bat);
    results.push_back(std::move(item));

    // One human-readable line per file.
    std::printf("%s: n=%d trace=%.6g", a.inputs[i].c_str(), r.n(), static_cast<double>(r.trace()));
    const json& done = results.back()["batteries"];
    if (done.contains("isotropic")) std::printf("  isotropic=%.6g", done["isotropic"]["value"].get<double>());
    if (done.contains("tilde")) std::printf("  tilde=%.6g", done["tilde"]["value"].get<double>());
    if (done.contains("hat")) std::printf("  hat=%.6g", done["hat"]["value"].get<double>());
    if (done.contains("flag2")) std::printf("  flag2=%.6g", done["flag2"]["value"].get<double>());
    if (done.contains("weighted")) std::printf("  weighted=%.6g", done["weighted"]["value"].get<double>());
    if (done.contains("sectional"))
      std::printf("  sectional=[%.6g,%.6g]", done["sectional"]["kmin"].get<double>(),
                  done["sectional"]["kmax"].get<double>());
    if (done.contains("berger")) std::printf("  berger-max=%.6g", done["berger"]["max_abs"].get<double>());
    if (done.contains("cone")) {
      std::printf("  cone:");
      for (const auto& row : done["cone"])
        std::printf(" s=%.3g %s", row["s"].get<double>(), row["inside"].get<bool>() ? "inside" : "outside");
    }
    std::printf("\n");
  }

  json report;
  report["command"] = "check";
  report["battery"] = a.battery;
  report["s_list"] = s_list;
  report["restarts"] = a.restarts;
  report["seed"] = a.seed;
  report["results"] = std::move(results);
  save_json(a.out + "/check_report.json", report);

  if (!a.sweep_out.empty()) {
    std::ofstream sw(a.sweep_out);
    if (!sw) throw UsageError("check: cannot open sweep file '" + a.sweep_out + "'");
    sw << "s,sample_id,margin,kmin_over_kmax,pinching_step\n" << sweep_rows;
  }
  return kOk;
}

// ---------------------------------------------------------------------------
// evolve
// ---------------------------------------------------------------------------

struct EvolveArgs {
  std::string init;  // operator JSON; empty = identity of dimension n
  int n = 4;
  double t_end = 0.0;
  double step = 0.0;
  bool adaptive = false;
  double error_target = 1e-8;
  double eps = 0.0;
  double blowup_trace = 1e9;
  int record_stride = 1;
  int monitor_stride = 1;
  int restarts = 8;
  int max_iterations = 8000;
  std::uint64_t seed = 0;
  std::string out = ".";
  int jobs = 1;
  std::string config;
};

int cmd_evolve(const EvolveArgs& a) {
  if (!(a.t_end > 0)) throw UsageError("evolve: t_end must be positive");
  if (a.step < 0) throw UsageError("evolve: step must be nonnegative (0 = automatic)");
  if (a.eps < 0) throw UsageError("evolve: eps must be nonnegative");
  if (a.record_stride < 1 || a.monitor_stride < 1)
    throw UsageError("evolve: strides must be >= 1");
  if (a.restarts < 1 || a.max_iterations < 1)
    throw UsageError("evolve: optimizer settings must be positive");
  ensure_dir(a.out);

  Op r0 = Op::Identity(4);
  if (!a.init.empty()) {
    r0 = load_operator_or_usage(a.init);
  } else {
    if (a.n < 4) throw UsageError("evolve: need n >= 4");
    r0 = Op::Identity(a.n);
  }
  if (r0.n() < 4) throw UsageError("evolve: monitors need operators with n >= 4");

  EvolveOptions<double> eopt;
  eopt.step = a.step;
  eopt.adaptive = a.adaptive;
  eopt.error_target = a.error_target;
  eopt.blowup_trace = a.blowup_trace;
  eopt.record_stride = a.record_stride;

  const auto t0 = std::chrono::steady_clock::now();
  const Trajectory<double> traj =
      (a.eps > 0) ? evolve_regularized(r0, a.t_end, a.eps, eopt) : evolve(r0, a.t_end, eopt);
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  OptimizerOptions<double> opt;
  opt.restarts = a.restarts;
  opt.max_iterations = a.max_iterations;
  opt.seed = a.seed;
  opt.jobs = a.jobs;

  std::ofstream csv(a.out + "/trajectory.csv");
  if (!csv) throw UsageError("evolve: cannot open trajectory.csv for writing");
  csv << csv_header() << "\n";
  const int count = static_cast<int>(traj.states.size());
  for (int i = 0; i < count; i += a.monitor_stride) {
    const Op& r = traj.states[i];
    const double dist = (r.trace() > 0) ? direction_distance(r)
                                        : std::numeric_limits<double>::quiet_NaN();
    csv << csv_row(traj.times[i], r.trace(), isotropic_min(r, opt).value,
                   tilde_isotropic_min(r, opt).value, hat_isotropic_min(r, opt).value, dist)
        << "\n";
  }
  // Always include the final state.
  if (count > 0 && (count - 1) % a.monitor_stride != 0) {
    const Op& r = traj.states.back();
    const double dist = (r.trace() > 0) ? direction_distance(r)
                                        : std::numeric_limits<double>::quiet_NaN();
    csv << csv_row(traj.times.back(), r.trace(), isotropic_min(r, opt).value,
                   tilde_isotropic_min(r, opt).value, hat_isotropic_min(r, opt).value, dist)
        << "\n";
  }
  csv.close();

  const bool failed =
      traj.reason == StopReason::step_underflow || traj.reason == StopReason::max_steps;
  json manifest;
  manifest["command"] = "evolve";
  json cfg;
  cfg["init"] = a.init.empty() ? std::string("identity") : a.init;
  cfg["n"] = r0.n();
  cfg["t_end"] = a.t_end;
  cfg["step"] = a.step;
  cfg["adaptive"] = a.adaptive;
  cfg["error_target"] = a.error_target;
  cfg["eps"] = a.eps;
  cfg["blowup_trace"] = a.blowup_trace;
  cfg["record_stride"] = a.record_stride;
  cfg["monitor_stride"] = a.monitor_stride;
  cfg["restarts"] = a.restarts;
  cfg["max_iterations"] = a.max_iterations;
  cfg["seed"] = a.seed;
  cfg["jobs"] = a.jobs;
  manifest["config"] = std::move(cfg);
  manifest["blowup"] = (traj.reason == StopReason::blowup);
  manifest["stop_reason"] = to_string(traj.reason);
  manifest["states_recorded"] = count;
  manifest["final_time"] = traj.final_time();
  // The stamp is the only part of any output that varies between identical
  // runs; everything else is byte-deterministic.
  json stamp;
  stamp["timestamp"] = iso_timestamp();
  stamp["wall_time_seconds"] = wall;
  manifest["stamp"] = std::move(stamp);
  save_json(a.out + "/evolve_manifest.json", manifest);

  std::printf("evolve: %d states to t=%.6g, stop=%s, csv=%s/trajectory.csv\n", count,
              traj.final_time(), to_string(traj.reason), a.out.c_str());
  if (failed) {
    std::fprintf(stderr, "evolve: integrator failed (%s); partial CSV retained\n",
                 to_string(traj.reason));
    return kNumerical;
  }
  return kOk;
}

// ---------------------------------------------------------------------------
// verify
// ---------------------------------------------------------------------------

struct VerifyArgs {
  int n = 0;  // 0 = all of 4..8
  int seeds = 100;
  bool inject_bug = false;
  std::uint64_t seed = 0;  // base offset for the per-task seeds
  std::string out;
  int jobs = 1;
  std::string config;
};

struct VerifyFailure {
  std::string battery;
  int n;
  int seed;
  double residual;
};

int cmd_verify(const VerifyArgs& a) {
  if (a.seeds < 1) throw UsageError("verify: need seeds >= 1");
  std::vector<int> dims;
  if (a.n == 0) {
    dims = {4, 5, 6, 7, 8};
  } else {
    if (a.n < 4 || a.n > 16) throw UsageError("verify: need 4 <= n <= 16");
    dims = {a.n};
  }

  std::vector<VerifyFailure> failures;
  long checks = 0;
  auto tally = [&](const std::string& battery, int n, int seed, double residual, double tol) {
    ++checks;
    if (!(residual <= tol)) failures.push_back({battery, n, seed, residual});
  };

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int n : dims) {
    for (int s = 0; s < a.seeds; ++s) {
      std::mt19937_64 rng(mix_seed(a.seed + s, static_cast<std::uint64_t>(n)));
      const Op r = random_bianchi<double>(n, rng);
      const double scale2 = r.norm() * r.norm();

      // Quadratic-field cross-check (optionally with the planted sign bug).
      const Op qf = a.inject_bug ? detail::q_fast_signed(r, 2.0) : q_fast(r);
      tally("q-cross-check", n, s, (qf - q_naive(r)).norm() / scale2, 1e-11);

      // Frame contraction identity.
      const OrthonormalFrame<double> f = random_frame<double>(n, 4, rng);
      tally("frame-identity", n, s, std::abs(frame_block_identity_residual(r, f)) / scale2,
            1e-10);

      // Deformation family round trip.
      const double da = unit(rng), db = unit(rng);
      tally("deformation-round-trip", n, s,
            (l_ab_inverse(l_ab(r, da, db), da, db) - r).norm() / std::max(1.0, r.norm()), 1e-11);

      // Block trace inequality on a pattern-consistent PSD matrix.
      {
        std::normal_distribution<double> g(0.0, 1.0);
        const int m = 1 + s % 3;
        auto gmat = [&](int rows, int cols) {
          Matrix mt(rows, cols);
          for (int i = 0; i < rows; ++i)
            for (int j = 0; j < cols; ++j) mt(i, j) = g(rng);
          return mt;
        };
        SecondVariationMatrix<double> sv;
        const Matrix ra = gmat(m, m), rb = gmat(m, m), re = gmat(m, m), rf = gmat(m, m);
        sv.a = ra + ra.transpose();
        sv.b = rb + rb.transpose();
        sv.e = re - re.transpose();
        sv.f = rf - rf.transpose();
        sv.c = gmat(m, m);
        sv.d = gmat(m, m);
        auto assemble = [&]() {
          sv.l.resize(4 * m, 4 * m);
          sv.l << sv.b, -sv.f, -sv.c, -sv.d,
              sv.f, sv.b, sv.d, -sv.c,
              -sv.c.transpose(), sv.d.transpose(), sv.a, -sv.e,
              -sv.d.transpose(), -sv.c.transpose(), sv.e, sv.a;
        };
        assemble();
        const double shift =
            std::max(0.0, -Eigen::SelfAdjointEigenSolver<Matrix>(sv.l).eigenvalues().minCoeff()) +
            0.1;
        sv.a += shift * Matrix::Identity(m, m);
        sv.b += shift * Matrix::Identity(m, m);
        assemble();
        const auto ti = trace_inequality(sv);
        tally("trace-inequality", n, s, -ti.block_expression / std::max(sv.l.squaredNorm(), 1.0),
              1e-10);
      }
    }
  }

  // Two-form pair synthesis round trips (inherently four-dimensional).
  {
    std::uniform_real_distribution<double> coeff(-2.0, 2.0), mag(0.3, 2.0), angle(-1.5, 1.5);
    std::normal_distribution<double> g(0.0, 1.0);
    for (int s = 0; s < a.seeds; ++s) {
      std::mt19937_64 rng(mix_seed(a.seed + s, 1001));
      Matrix b(4, 4);
      for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) b(i, j) = g(rng);
      gram_schmidt_rows(b);
      if (b.determinant() < 0) b.row(3) *= -1.0;
      auto row_wedge = [&](int r1, int r2) {
        return wedge(Vector(b.row(r1).transpose()), Vector(b.row(r2).transpose()));
      };
      double a1, a2, b1, b2;
      if (s % 4 == 1) {
        const double sv = mag(rng), sign = (s % 8 == 1) ? 1.0 : -1.0;
        a1 = sv;
        a2 = sign * sv;
        b1 = sv;
        b2 = sign * sv;
      } else {
        a1 = coeff(rng);
        a2 = coeff(rng);
        b1 = ((s % 2 == 0) ? 1.0 : -1.0) * mag(rng);
        b2 = a1 * a2 / b1;
      }
      const double th = angle(rng);
      const TwoFormd p = a1 * row_wedge(0, 2) + a2 * row_wedge(3, 1);
      const TwoFormd q = b1 * row_wedge(0, 3) + b2 * row_wedge(1, 2);
      const TwoFormd phi = std::cos(th) * p - std::sin(th) * q;
      const TwoFormd psi = std::sin(th) * p + std::cos(th) * q;
      double residual = std::numeric_limits<double>::infinity();
      try {
        const auto nf = normal_form_pair(phi, psi);
        auto nf_wedge = [&](int r1, int r2) {
          return wedge(Vector(nf.basis.row(r1).transpose()), Vector(nf.basis.row(r2).transpose()));
        };
        const TwoFormd rp = nf.a1 * nf_wedge(0, 2) + nf.a2 * nf_wedge(3, 1);
        const TwoFormd rq = nf.b1 * nf_wedge(0, 3) + nf.b2 * nf_wedge(1, 2);
        const double c = std::cos(nf.theta), sn = std::sin(nf.theta);
        residual = std::max((c * rp - sn * rq - phi).norm(), (sn * rp + c * rq - psi).norm());
      } catch (const std::exception&) {
        // residual stays infinite and is reported as a failure
      }
      tally("pair-synthesis", 4, s, residual, 1e-10);
    }
  }

  if (!a.out.empty()) {
    ensure_dir(a.out);
    json rep;
    rep["command"] = "verify";
    rep["dims"] = dims;
    rep["seeds"] = a.seeds;
    rep["inject_bug"] = a.inject_bug;
    rep["batteries"] = {"q-cross-check", "frame-identity", "deformation-round-trip",
                        "trace-inequality", "pair-synthesis"};
    rep["checks"] = checks;
    json fl = json::array();
    for (const auto& f : failures) {
      json one;
      one["battery"] = f.battery;
      one["n"] = f.n;
      one["seed"] = f.seed;
      one["residual"] = f.residual;
      fl.push_back(std::move(one));
    }
    rep["failures"] = std::move(fl);
    save_json(a.out + "/verify_report.json", rep);
  }

  if (failures.empty()) {
    std::printf("verify: %ld checks across %zu dimension(s) x %d seeds: all pass\n", checks,
                dims.size(), a.seeds);
    return kOk;
  }
  const size_t show = std::min<size_t>(failures.size(), 20);
  for (size_t i = 0; i < show; ++i)
    std::printf("FAIL %s  n=%d seed=%d residual=%.6g\n", failures[i].battery.c_str(),
                failures[i].n, failures[i].seed, failures[i].residual);
  if (failures.size() > show)
    std::printf("... and %zu more failures\n", failures.size() - show);
  std::printf("verify: %zu of %ld checks failed\n", failures.size(), checks);
  return kVerifyFail;
}

// ---------------------------------------------------------------------------
// normal-form
// ---------------------------------------------------------------------------

struct NormalFormArgs {
  std::string phi_file, psi_file;
  bool synthesize = false;
  std::uint64_t seed = 0;
  std::string out;
  std::string config;
};

int cmd_normal_form(const NormalFormArgs& a) {
  if (a.phi_file.empty() != a.psi_file.empty())
    throw UsageError("normal-form: provide both --phi and --psi, or neither");

  TwoFormd phi(4), psi(4);
  std::string source;
  if (!a.phi_file.empty()) {
    source = "files";
    try {
      phi = two_form_from_json(load_json(a.phi_file));
      psi = two_form_from_json(load_json(a.psi_file));
    } catch (const std::runtime_error& e) {
      throw UsageError(std::string("normal-form: ") + e.what());
    }
  } else if (a.synthesize) {
    source = "synthesized";
    std::mt19937_64 rng(mix_seed(a.seed, 0));
    std::normal_distribution<double> g(0.0, 1.0);
    std::uniform_real_distribution<double> coeff(-2.0, 2.0), mag(0.3, 2.0), angle(-1.5, 1.5);
    Matrix b(4, 4);
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) b(i, j) = g(rng);
    gram_schmidt_rows(b);
    if (b.determinant() < 0) b.row(3) *= -1.0;
    auto row_wedge = [&](int r1, int r2) {
      return wedge(Vector(b.row(r1).transpose()), Vector(b.row(r2).transpose()));
    };
    const double a1 = coeff(rng), a2 = coeff(rng);
    const double b1 = mag(rng), b2 = a1 * a2 / b1;
    const double th = angle(rng);
    const TwoFormd p = a1 * row_wedge(0, 2) + a2 * row_wedge(3, 1);
    const TwoFormd q = b1 * row_wedge(0, 3) + b2 * row_wedge(1, 2);
    phi = std::cos(th) * p - std::sin(th) * q;
    psi = std::sin(th) * p + std::cos(th) * q;
  } else {
    source = "demo";
    const Vector e1 = Vector::Unit(4, 0), e2 = Vector::Unit(4, 1), e3 = Vector::Unit(4, 2),
                 e4 = Vector::Unit(4, 3);
    phi = wedge(e1, e3);
    psi = wedge(e1, e4);
  }

  NormalFormd nf;
  try {
    nf = normal_form_pair(phi, psi);
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "normal-form: %s\n", e.what());
    return kUsage;
  } catch (const std::runtime_error& e) {
    std::fprintf(stderr, "normal-form: %s\n", e.what());
    return kNumerical;
  }

  auto nf_wedge = [&](int r1, int r2) {
    return wedge(Vector(nf.basis.row(r1).transpose()), Vector(nf.basis.row(r2).transpose()));
  };
  const TwoFormd rp = nf.a1 * nf_wedge(0, 2) + nf.a2 * nf_wedge(3, 1);
  const TwoFormd rq = nf.b1 * nf_wedge(0, 3) + nf.b2 * nf_wedge(1, 2);
  const double c = std::cos(nf.theta), sn = std::sin(nf.theta);
  const double res_phi = (c * rp - sn * rq - phi).norm();
  const double res_psi = (sn * rp + c * rq - psi).norm();
  const double scale = std::max({1.0, phi.norm(), psi.norm()});

  std::printf("normal-form (%s pair)\n", source.c_str());
  std::printf("theta = %.17g\n", nf.theta);
  std::printf("a1 = %.17g  a2 = %.17g\n", nf.a1, nf.a2);
  std::printf("b1 = %.17g  b2 = %.17g\n", nf.b1, nf.b2);
  std::printf("product gap |a1 a2 - b1 b2| = %.3g\n", std::abs(nf.a1 * nf.a2 - nf.b1 * nf.b2));
  for (int r = 0; r < 4; ++r)
    std::printf("basis e%d = [% .12g, % .12g, % .12g, % .12g]\n", r + 1, nf.basis(r, 0),
                nf.basis(r, 1), nf.basis(r, 2), nf.basis(r, 3));
  std::printf("reconstruction residuals: phi %.3g, psi %.3g\n", res_phi, res_psi);

  if (!a.out.empty()) {
    ensure_dir(a.out);
    json rep;
    rep["command"] = "normal-form";
    rep["source"] = source;
    rep["theta"] = nf.theta;
    rep["a1"] = nf.a1;
    rep["a2"] = nf.a2;
    rep["b1"] = nf.b1;
    rep["b2"] = nf.b2;
    json rows = json::array();
    for (int r = 0; r < 4; ++r) {
      json row = json::array();
      for (int c2 = 0; c2 < 4; ++c2) row.push_back(nf.basis(r, c2));
      rows.push_back(std::move(row));
    }
    rep["basis"] = std::move(rows);
    rep["residual_phi"] = res_phi;
    rep["residual_psi"] = res_psi;
    save_json(a.out + "/normal_form_report.json", rep);
  }

  if (a.synthesize && (res_phi > 1e-10 * scale || res_psi > 1e-10 * scale)) {
    std::fprintf(stderr, "normal-form: synthesized pair reconstruction above 1e-10\n");
    return kVerifyFail;
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"curvature-operator toolkit"};
  app.require_subcommand(1);

  // ---- gen ----
  GenArgs gen;
  ConfigTable gen_cfg;
  CLI::App* sgen = app.add_subcommand("gen", "generate random curvature operators as JSON");
  gen_cfg.bind_int("n", sgen->add_option("--n", gen.n, "ambient dimension (>= 4)"), gen.n);
  gen_cfg.bind_int("count", sgen->add_option("--count", gen.count, "number of operators"),
                   gen.count);
  gen_cfg.bind_u64("seed", sgen->add_option("--seed", gen.seed, "base seed"), gen.seed);
  gen_cfg.bind_str("mode",
                   sgen->add_option("--mode", gen.mode,
                                    "arbitrary | nonneg_operator | quarter_pinched"),
                   gen.mode);
  gen_cfg.bind_str("out", sgen->add_option("--out", gen.out, "output directory"), gen.out);
  gen_cfg.bind_int("jobs", sgen->add_option("--jobs", gen.jobs, "worker threads"), gen.jobs);
  sgen->add_option("--config", gen.config, "key=value config file");

  // ---- check ----
  CheckArgs check;
  ConfigTable check_cfg;
  CLI::App* schk = app.add_subcommand("check", "run condition batteries on operator files");
  schk->add_option("inputs", check.inputs, "operator JSON files");
  check_cfg.bind_str("battery",
                     schk->add_option("--battery", check.battery,
                                      "comma list: isotropic,tilde,hat,flag2,weighted,"
                                      "sectional,berger,cone"),
                     check.battery);
  check_cfg.bind_str("s-list",
                     schk->add_option("--s-list", check.s_list_raw,
                                      "comma list of cone parameters s"),
                     check.s_list_raw);
  check_cfg.bind_int("restarts", schk->add_option("--restarts", check.restarts, "optimizer restarts"),
                     check.restarts);
  check_cfg.bind_int("max-iterations",
                     schk->add_option("--max-iterations", check.max_iterations, "optimizer cap"),
                     check.max_iterations);
  check_cfg.bind_dbl("tol", schk->add_option("--tol", check.tol, "membership tolerance"), check.tol);
  check_cfg.bind_dbl("pinch-eps", schk->add_option("--pinch-eps", check.pinch_eps, "pinching eps"),
                     check.pinch_eps);
  check_cfg.bind_dbl("pinch-h", schk->add_option("--pinch-h", check.pinch_h, "pinching shift h"),
                     check.pinch_h);
  check_cfg.bind_u64("seed", schk->add_option("--seed", check.seed, "optimizer seed"), check.seed);
  check_cfg.bind_str("out", schk->add_option("--out", check.out, "output directory"), check.out);
  check_cfg.bind_str("sweep-out",
                     schk->add_option("--sweep-out", check.sweep_out, "cone sweep CSV path"),
                     check.sweep_out);
  check_cfg.bind_int("jobs", schk->add_option("--jobs", check.jobs, "worker threads"), check.jobs);
  schk->add_option("--config", check.config, "key=value config file");

  // ---- evolve ----
  EvolveArgs ev;
  ConfigTable ev_cfg;
  CLI::App* sev = app.add_subcommand("evolve", "integrate dR/dt = Q(R) with monitors");
  ev_cfg.bind_str("init", sev->add_option("--init", ev.init, "starting operator JSON"), ev.init);
  ev_cfg.bind_int("n", sev->add_option("--n", ev.n, "dimension for the identity start"), ev.n);
  ev_cfg.bind_dbl("t-end", sev->add_option("--t-end,--t_end", ev.t_end, "integration horizon"),
                  ev.t_end);
  ev_cfg.bind_dbl("step", sev->add_option("--step", ev.step, "fixed step (0 = automatic)"), ev.step);
  ev_cfg.bind_flag("adaptive", sev->add_flag("--adaptive", ev.adaptive, "step-doubling control"),
                   ev.adaptive);
  ev_cfg.bind_dbl("error-target",
                  sev->add_option("--error-target", ev.error_target, "adaptive local target"),
                  ev.error_target);
  ev_cfg.bind_dbl("eps", sev->add_option("--eps", ev.eps, "regularization (> 0 enables)"), ev.eps);
  ev_cfg.bind_dbl("blowup-trace",
                  sev->add_option("--blowup-trace", ev.blowup_trace, "stop once trace exceeds"),
                  ev.blowup_trace);
  ev_cfg.bind_int("record-stride",
                  sev->add_option("--record-stride", ev.record_stride, "store every k-th state"),
                  ev.record_stride);
  ev_cfg.bind_int("monitor-stride",
                  sev->add_option("--monitor-stride", ev.monitor_stride,
                                  "emit a CSV row every k-th recorded state"),
                  ev.monitor_stride);
  ev_cfg.bind_int("restarts", sev->add_option("--restarts", ev.restarts, "monitor optimizer restarts"),
                  ev.restarts);
  ev_cfg.bind_int("max-iterations",
                  sev->add_option("--max-iterations", ev.max_iterations, "monitor optimizer cap"),
                  ev.max_iterations);
  ev_cfg.bind_u64("seed", sev->add_option("--seed", ev.seed, "monitor optimizer seed"), ev.seed);
  ev_cfg.bind_str("out", sev->add_option("--out", ev.out, "output directory"), ev.out);
  ev_cfg.bind_int("jobs", sev->add_option("--jobs", ev.jobs, "worker threads"), ev.jobs);
  sev->add_option("--config", ev.config, "key=value config file");

  // ---- verify ----
  VerifyArgs ver;
  ConfigTable ver_cfg;
  CLI::App* sver = app.add_subcommand("verify", "seeded identity batteries (exit 0 iff all pass)");
  ver_cfg.bind_int("n", sver->add_option("--n", ver.n, "single dimension (default: 4..8)"), ver.n);
  ver_cfg.bind_int("seeds", sver->add_option("--seeds", ver.seeds, "seeds per dimension"),
                   ver.seeds);
  ver_cfg.bind_flag("inject-bug",
                    sver->add_flag("--inject-bug", ver.inject_bug,
                                   "plant a sign error in the fast quadratic field"),
                    ver.inject_bug);
  ver_cfg.bind_u64("seed", sver->add_option("--seed", ver.seed, "base seed offset"), ver.seed);
  ver_cfg.bind_str("out", sver->add_option("--out", ver.out, "directory for the JSON report"),
                   ver.out);
  ver_cfg.bind_int("jobs", sver->add_option("--jobs", ver.jobs, "worker threads"), ver.jobs);
  sver->add_option("--config", ver.config, "key=value config file");

  // ---- normal-form ----
  NormalFormArgs nfa;
  ConfigTable nf_cfg;
  CLI::App* snf = app.add_subcommand("normal-form", "two-form pair normal form");
  nf_cfg.bind_str("phi", snf->add_option("--phi", nfa.phi_file, "two-form JSON"), nfa.phi_file);
  nf_cfg.bind_str("psi", snf->add_option("--psi", nfa.psi_file, "two-form JSON"), nfa.psi_file);
  nf_cfg.bind_flag("synthesize",
                   snf->add_flag("--synthesize", nfa.synthesize, "build a random valid pair"),
                   nfa.synthesize);
  nf_cfg.bind_u64("seed", snf->add_option("--seed", nfa.seed, "synthesis seed"), nfa.seed);
  nf_cfg.bind_str("out", snf->add_option("--out", nfa.out, "directory for the JSON report"),
                  nfa.out);
  snf->add_option("--config", nfa.config, "key=value config file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (app.got_subcommand(sgen)) {
      gen_cfg.apply(gen.config, "gen");
      return cmd_gen(gen);
    }
    if (app.got_subcommand(schk)) {
      check_cfg.apply(check.config, "check");
      return cmd_check(check);
    }
    if (app.got_subcommand(sev)) {
      ev_cfg.apply(ev.config, "evolve");
      return cmd_evolve(ev);
    }
    if (app.got_subcommand(sver)) {
      ver_cfg.apply(ver.config, "verify");
      return cmd_verify(ver);
    }
    if (app.got_subcommand(snf)) {
      nf_cfg.apply(nfa.config, "normal-form");
      return cmd_normal_form(nfa);
    }
  } catch (const UsageError& e) {
    std::fprintf(stderr, "%s\n", e.what());
    return kUsage;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "%s\n", e.what());
    return kUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "%s\n", e.what());
    return kNumerical;
  }
  return kUsage;
}
