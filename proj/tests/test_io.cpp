// Serialization: JSON encodings of curvature operators, two-forms, frames,
// and condition reports (bit-exact double round trips, canonical entry order,
// named validation errors), the monitor CSV schema, and key=value config
// files.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <random>
#include <string>

#include "curvflow/conditions.hpp"
#include "curvflow/io.hpp"
#include "curvflow/random.hpp"
#include "support.hpp"

using namespace curvflow;
using testsupport::gaussian_matrix;

using Op = CurvatureOperatord;

namespace {

std::string temp_path(const std::string& name) { return "/tmp/curvflow_io_" + name; }

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  REQUIRE(static_cast<bool>(out));
  out << text;
}

std::string read_text(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(static_cast<bool>(in));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Expect fn() to throw a runtime_error whose message contains needle.
template <typename Fn>
void expect_error(Fn&& fn, const std::string& needle) {
  try {
    fn();
    FAIL("expected a rejection mentioning: " << needle);
  } catch (const std::runtime_error& e) {
    CAPTURE(e.what());
    CHECK(std::string(e.what()).find(needle) != std::string::npos);
  }
}

}  // namespace

TEST_CASE("operator json: schema, canonical order, bit-exact file round trip") {
  // The identity in dimension four: six diagonal entries, all exactly one.
  const Op id = Op::Identity(4);
  const json jid = operator_to_json(id);
  CHECK(jid["n"] == 4);
  REQUIRE(jid["entries"].size() == 6);
  // First basis pair (1,2) diagonal; entries carry 1-based indices.
  CHECK(jid["entries"][0] == json::array({1, 2, 1, 2, 1.0}));
  CHECK(jid["entries"][5] == json::array({3, 4, 3, 4, 1.0}));
  // Canonical ordering: row pair nondecreasing, and (i,j) <= (k,l).
  for (const auto& e : jid["entries"]) {
    const int i = e[0], j = e[1], k = e[2], l = e[3];
    CHECK(i < j);
    CHECK(k < l);
    CHECK((i < k || (i == k && j <= l)));
  }

  // Bit-exact round trips through files, across dimensions and samplers.
  std::mt19937_64 rng(0x10aded);
  const std::string path = temp_path("op.json");
  for (int t = 0; t < 24; ++t) {
    const int n = 4 + t % 4;
    const Op r = (t % 2 == 0) ? random_bianchi<double>(n, rng) : random_nonneg<double>(n, rng);
    save_operator(path, r);
    const Op back = load_operator(path);
    REQUIRE(back.n() == n);
    CHECK((back.matrix() - r.matrix()).lpNorm<Eigen::Infinity>() == 0.0);
  }

  // A second save of the loaded value reproduces the file byte for byte.
  const Op r = random_bianchi<double>(5, rng);
  save_operator(path, r);
  const std::string first = read_text(path);
  save_operator(temp_path("op2.json"), load_operator(path));
  CHECK(read_text(temp_path("op2.json")) == first);
}

TEST_CASE("operator json: malformed inputs are rejected with located messages") {
  expect_error([] { operator_from_json(json::array()); }, "expected an object");
  expect_error([] { operator_from_json(json{{"n", 4}}); }, "expected an object");
  expect_error([] { operator_from_json(json{{"n", 4.5}, {"entries", json::array()}}); },
               "must be an integer");
  expect_error([] { operator_from_json(json{{"n", 1}, {"entries", json::array()}}); }, "n >= 2");
  expect_error([] { operator_from_json(json{{"n", 4}, {"entries", 7}}); }, "must be an array");

  auto with_entry = [](json entry) {
    json j;
    j["n"] = 4;
    j["entries"] = json::array({json::array({1, 2, 1, 2, 1.0}), std::move(entry)});
    return j;
  };
  // The position of the offending entry is part of the message.
  expect_error([&] { operator_from_json(with_entry(json::array({1, 2, 3}))); }, "entries[1]");
  expect_error([&] { operator_from_json(with_entry(json::array({1, 2, 3}))); },
               "expected [i, j, k, l, value]");
  expect_error([&] { operator_from_json(with_entry(json::array({1.5, 2, 1, 2, 1.0}))); },
               "indices must be integers");
  expect_error([&] { operator_from_json(with_entry(json::array({1, 2, 1, 2, "x"}))); },
               "value must be a number");
  expect_error([&] { operator_from_json(with_entry(json::array({1, 5, 1, 2, 1.0}))); },
               "out of range 1..4");
  expect_error([&] { operator_from_json(with_entry(json::array({0, 2, 1, 2, 1.0}))); },
               "out of range");
  expect_error([&] { operator_from_json(with_entry(json::array({2, 1, 1, 2, 1.0}))); },
               "need i < j");

  // Conflicting duplicate assignments surface the component constructor's
  // complaint under the operator: prefix.
  json dup;
  dup["n"] = 4;
  dup["entries"] =
      json::array({json::array({1, 2, 1, 2, 1.0}), json::array({1, 2, 1, 2, 2.0})});
  expect_error([&] { operator_from_json(dup); }, "operator:");

  // Loading a missing or unparsable file names the path.
  expect_error([] { load_operator("/tmp/curvflow_io_does_not_exist.json"); }, "cannot open");
  const std::string bad = temp_path("bad.json");
  write_text(bad, "{ not json");
  expect_error([&] { load_operator(bad); }, bad);
}

TEST_CASE("two-form json: round trip and rejections") {
  std::mt19937_64 rng(0x10ade1);
  for (int t = 0; t < 20; ++t) {
    const int n = 4 + t % 3;
    const TwoForm<double> w(n, gaussian_matrix(n, n, rng));
    const TwoForm<double> back = two_form_from_json(two_form_to_json(w));
    REQUIRE(back.n() == n);
    CHECK((back.coeffs() - w.coeffs()).lpNorm<Eigen::Infinity>() == 0.0);
  }

  // Sparse encoding: only the strictly-upper nonzero coefficients appear.
  const Eigen::VectorXd u1 = Eigen::VectorXd::Unit(4, 0);
  const Eigen::VectorXd u3 = Eigen::VectorXd::Unit(4, 2);
  const TwoForm<double> e13 = wedge(u1, u3);
  const json j13 = two_form_to_json(e13);
  CHECK(j13["n"] == 4);
  REQUIRE(j13["entries"].size() == 1);
  CHECK(j13["entries"][0] == json::array({1, 3, 1.0}));

  expect_error([] { two_form_from_json(json::array()); }, "expected an object");
  json bad;
  bad["n"] = 4;
  bad["entries"] = json::array({json::array({3, 1, 1.0})});
  expect_error([&] { two_form_from_json(bad); }, "need 1 <= i < j <= n");
  bad["entries"] = json::array({json::array({1, 2})});
  expect_error([&] { two_form_from_json(bad); }, "expected [i, j, value]");
}

TEST_CASE("condition report json: witness frame and weights round trip") {
  std::mt19937_64 rng(0x10ade2);
  const Op r = random_nonneg<double>(4, rng);
  OptimizerOptions<double> opts;
  opts.restarts = 8;
  opts.max_iterations = 300;

  const auto rep = weighted_isotropic_min(r, opts);
  const json j = report_to_json(rep);
  CHECK(j.contains("value"));
  CHECK(j.contains("witness"));
  CHECK(j.contains("lambda"));

  const auto back = report_from_json(j);
  CHECK(back.value == rep.value);
  CHECK(back.lambda == rep.lambda);
  CHECK(back.mu == rep.mu);
  CHECK(back.has_weights == rep.has_weights);
  CHECK(back.converged == rep.converged);
  CHECK(back.restarts_used == rep.restarts_used);
  CHECK((back.witness.rows() - rep.witness.rows()).lpNorm<Eigen::Infinity>() == 0.0);

  // The stored witness reproduces the reported value when re-evaluated.
  const auto ws = weighted_isotropic_inner(r, back.witness);
  CHECK(ws.value == doctest::Approx(back.value).epsilon(1e-12));

  // Unweighted reports omit the weight fields.
  const auto iso = isotropic_min(r, opts);
  const json ji = report_to_json(iso);
  CHECK(!ji.contains("lambda"));
  CHECK(!report_from_json(ji).has_weights);

  expect_error([] { report_from_json(json{{"value", 1.0}}); }, "expected an object");
  expect_error([] { frame_from_json(json{{"n", 4}, {"k", 2}, {"rows", json::array()}}); },
               "must hold k rows");
}

TEST_CASE("csv schema: header and exact row formatting") {
  CHECK(std::string(csv_header()) ==
        "t,trace,isotropic_min,tilde_isotropic_min,hat_isotropic_min,direction_distance");

  // Values round trip exactly through the %.17g rendering.
  const double vals[6] = {0.1, 12.0, -3.0000000000000004e-01, 1e-300, -0.0, 2.2250738585072014e-308};
  const std::string row = csv_row(vals[0], vals[1], vals[2], vals[3], vals[4], vals[5]);
  std::istringstream ss(row);
  std::string field;
  int idx = 0;
  while (std::getline(ss, field, ',')) {
    REQUIRE(idx < 6);
    CHECK(std::stod(field) == vals[idx]);
    ++idx;
  }
  CHECK(idx == 6);

  // Deterministic: same inputs, same bytes.
  CHECK(csv_row(vals[0], vals[1], vals[2], vals[3], vals[4], vals[5]) == row);
}

TEST_CASE("config files: comments, trimming, and located parse errors") {
  const std::string path = temp_path("cfg.txt");
  write_text(path,
             "# leading comment\n"
             "n = 4\n"
             "\n"
             "mode=nonneg   # trailing comment\n"
             "  seed =  17\n"
             "out = runs/a b\n");
  const auto cfg = parse_config_file(path);
  REQUIRE(cfg.size() == 4);
  CHECK(cfg.at("n") == "4");
  CHECK(cfg.at("mode") == "nonneg");
  CHECK(cfg.at("seed") == "17");
  CHECK(cfg.at("out") == "runs/a b");

  write_text(path, "n = 4\nnot a pair\n");
  expect_error([&] { parse_config_file(path); }, "line 2: expected key=value");
  write_text(path, "n = 4\nn = 5\n");
  expect_error([&] { parse_config_file(path); }, "line 2: duplicate key n");
  write_text(path, " = 5\n");
  expect_error([&] { parse_config_file(path); }, "line 1: empty key");
  expect_error([] { parse_config_file("/tmp/curvflow_io_missing.cfg"); }, "cannot open config");
}
