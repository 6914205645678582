// File formats: curvature operators and two-forms as JSON (1-based indices,
// canonical entry ordering, exact double round-trip), the monitor CSV schema,
// and plain key=value config files.  All serialization is double-precision.

#ifndef CURVFLOW_IO_HPP
#define CURVFLOW_IO_HPP

#include <nlohmann/json.hpp>

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>

#include "curvflow/conditions.hpp"
#include "curvflow/curvature_operator.hpp"
#include "curvflow/frame.hpp"
#include "curvflow/lambda2.hpp"
#include "curvflow/two_form.hpp"

namespace curvflow {

using json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Curvature operators:  {"n": 4, "entries": [[i, j, k, l, value], ...]}
// with 1-based indices, i < j, k < l, (i,j) <= (k,l) lexicographically, and
// only nonzero entries stored.
// ---------------------------------------------------------------------------

inline json operator_to_json(const CurvatureOperator<double>& r) {
  const Lambda2Index idx(r.n());
  json entries = json::array();
  for (int a = 0; a < idx.size(); ++a) {
    const auto [i, j] = idx.pair(a);
    for (int b = a; b < idx.size(); ++b) {
      const auto [k, l] = idx.pair(b);
      const double v = r.matrix()(a, b);
      if (v != 0.0) entries.push_back(json::array({i + 1, j + 1, k + 1, l + 1, v}));
    }
  }
  json j;
  j["n"] = r.n();
  j["entries"] = std::move(entries);
  return j;
}

inline CurvatureOperator<double> operator_from_json(const json& j) {
  if (!j.is_object() || !j.contains("n") || !j.contains("entries"))
    throw std::runtime_error("operator: expected an object with \"n\" and \"entries\"");
  if (!j["n"].is_number_integer())
    throw std::runtime_error("operator: \"n\" must be an integer");
  const int n = j["n"].get<int>();
  if (n < 2) throw std::runtime_error("operator: need n >= 2");
  if (!j["entries"].is_array()) throw std::runtime_error("operator: \"entries\" must be an array");

  std::vector<ComponentAssignment<double>> comps;
  int pos = 0;
  for (const auto& e : j["entries"]) {
    const std::string where = "operator: entries[" + std::to_string(pos) + "]";
    if (!e.is_array() || e.size() != 5)
      throw std::runtime_error(where + ": expected [i, j, k, l, value]");
    for (int t = 0; t < 4; ++t)
      if (!e[t].is_number_integer()) throw std::runtime_error(where + ": indices must be integers");
    if (!e[4].is_number()) throw std::runtime_error(where + ": value must be a number");
    const int i = e[0].get<int>(), jj = e[1].get<int>(), k = e[2].get<int>(), l = e[3].get<int>();
    for (int v : {i, jj, k, l})
      if (v < 1 || v > n) throw std::runtime_error(where + ": index out of range 1.." + std::to_string(n));
    if (i >= jj || k >= l) throw std::runtime_error(where + ": need i < j and k < l");
    comps.push_back({i - 1, jj - 1, k - 1, l - 1, e[4].get<double>()});
    ++pos;
  }
  try {
    return from_components<double>(n, comps);
  } catch (const std::invalid_argument& ex) {
    throw std::runtime_error(std::string("operator: ") + ex.what());
  }
}

// ---------------------------------------------------------------------------
// Two-forms:  {"n": 4, "entries": [[i, j, value], ...]}, 1-based, i < j.
// ---------------------------------------------------------------------------

inline json two_form_to_json(const TwoForm<double>& w) {
  json entries = json::array();
  for (int i = 0; i < w.n(); ++i)
    for (int j = i + 1; j < w.n(); ++j)
      if (w.coeff(i, j) != 0.0) entries.push_back(json::array({i + 1, j + 1, w.coeff(i, j)}));
  json j;
  j["n"] = w.n();
  j["entries"] = std::move(entries);
  return j;
}

inline TwoForm<double> two_form_from_json(const json& j) {
  if (!j.is_object() || !j.contains("n") || !j.contains("entries"))
    throw std::runtime_error("two-form: expected an object with \"n\" and \"entries\"");
  const int n = j["n"].get<int>();
  if (n < 2) throw std::runtime_error("two-form: need n >= 2");
  MatrixX<double> c = MatrixX<double>::Zero(n, n);
  int pos = 0;
  for (const auto& e : j["entries"]) {
    const std::string where = "two-form: entries[" + std::to_string(pos) + "]";
    if (!e.is_array() || e.size() != 3) throw std::runtime_error(where + ": expected [i, j, value]");
    const int i = e[0].get<int>(), jj = e[1].get<int>();
    if (i < 1 || jj < 1 || i > n || jj > n || i >= jj)
      throw std::runtime_error(where + ": need 1 <= i < j <= n");
    c(i - 1, jj - 1) = e[2].get<double>();
    c(jj - 1, i - 1) = -e[2].get<double>();
    ++pos;
  }
  return TwoForm<double>(n, c);
}

// ---------------------------------------------------------------------------
// Condition reports: the minimized value together with its witness frame.
// ---------------------------------------------------------------------------

inline json frame_to_json(const OrthonormalFrame<double>& f) {
  json rows = json::array();
  for (int r = 0; r < f.k(); ++r) {
    json row = json::array();
    for (int c = 0; c < f.n(); ++c) row.push_back(f.rows()(r, c));
    rows.push_back(std::move(row));
  }
  json j;
  j["n"] = f.n();
  j["k"] = f.k();
  j["rows"] = std::move(rows);
  return j;
}

inline OrthonormalFrame<double> frame_from_json(const json& j) {
  if (!j.is_object() || !j.contains("n") || !j.contains("k") || !j.contains("rows"))
    throw std::runtime_error("frame: expected an object with \"n\", \"k\", and \"rows\"");
  const int n = j["n"].get<int>(), k = j["k"].get<int>();
  if (!j["rows"].is_array() || static_cast<int>(j["rows"].size()) != k)
    throw std::runtime_error("frame: \"rows\" must hold k rows");
  MatrixX<double> rows(k, n);
  for (int r = 0; r < k; ++r) {
    const auto& row = j["rows"][r];
    if (!row.is_array() || static_cast<int>(row.size()) != n)
      throw std::runtime_error("frame: rows[" + std::to_string(r) + "] must hold n numbers");
    for (int c = 0; c < n; ++c) rows(r, c) = row[c].get<double>();
  }
  return OrthonormalFrame<double>(n, k, rows);
}

inline json report_to_json(const ConditionReport<double>& rep) {
  json j;
  j["value"] = rep.value;
  j["witness"] = frame_to_json(rep.witness);
  if (rep.has_weights) {
    j["lambda"] = rep.lambda;
    j["mu"] = rep.mu;
  }
  j["gradient_norm"] = rep.gradient_norm;
  j["restarts_used"] = rep.restarts_used;
  j["converged"] = rep.converged;
  return j;
}

inline ConditionReport<double> report_from_json(const json& j) {
  if (!j.is_object() || !j.contains("value") || !j.contains("witness"))
    throw std::runtime_error("report: expected an object with \"value\" and \"witness\"");
  ConditionReport<double> rep;
  rep.value = j["value"].get<double>();
  rep.witness = frame_from_json(j["witness"]);
  rep.has_weights = j.contains("lambda") && j.contains("mu");
  if (rep.has_weights) {
    rep.lambda = j["lambda"].get<double>();
    rep.mu = j["mu"].get<double>();
  }
  // A never-optimized report carries an infinite gradient norm, which JSON
  // renders as null; keep the default in that case.
  if (j.contains("gradient_norm") && j["gradient_norm"].is_number())
    rep.gradient_norm = j["gradient_norm"].get<double>();
  if (j.contains("restarts_used")) rep.restarts_used = j["restarts_used"].get<int>();
  if (j.contains("converged")) rep.converged = j["converged"].get<bool>();
  return rep;
}

// ---------------------------------------------------------------------------
// Files
// ---------------------------------------------------------------------------

inline void save_json(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << j.dump(2) << '\n';
  if (!out) throw std::runtime_error("write failed: " + path);
}

inline json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open: " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& ex) {
    throw std::runtime_error(path + ": " + ex.what());
  }
}

inline void save_operator(const std::string& path, const CurvatureOperator<double>& r) {
  save_json(path, operator_to_json(r));
}

inline CurvatureOperator<double> load_operator(const std::string& path) {
  try {
    return operator_from_json(load_json(path));
  } catch (const std::runtime_error& ex) {
    throw std::runtime_error(path + ": " + ex.what());
  }
}

// ---------------------------------------------------------------------------
// Monitor CSV
// ---------------------------------------------------------------------------

inline const char* csv_header() {
  return "t,trace,isotropic_min,tilde_isotropic_min,hat_isotropic_min,direction_distance";
}

/// One CSV row with %.17g fields (deterministic, exact double round-trip).
inline std::string csv_row(double t, double trace, double iso, double tilde, double hat,
                           double dist) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g", t, trace, iso, tilde, hat,
                dist);
  return buf;
}

// ---------------------------------------------------------------------------
// key=value config files ('#' starts a comment; blank lines ignored)
// ---------------------------------------------------------------------------

inline std::map<std::string, std::string> parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config: " + path);
  std::map<std::string, std::string> out;
  std::string line;
  int lineno = 0;
  auto trim = [](std::string s) {
    const char* ws = " \t\r\n";
    const auto a = s.find_first_not_of(ws);
    if (a == std::string::npos) return std::string();
    const auto b = s.find_last_not_of(ws);
    return s.substr(a, b - a + 1);
  };
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string stripped = trim(line);
    if (stripped.empty()) continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error(path + ": line " + std::to_string(lineno) + ": expected key=value");
    const std::string key = trim(stripped.substr(0, eq));
    const std::string val = trim(stripped.substr(eq + 1));
    if (key.empty())
      throw std::runtime_error(path + ": line " + std::to_string(lineno) + ": empty key");
    if (out.count(key))
      throw std::runtime_error(path + ": line " + std::to_string(lineno) + ": duplicate key " + key);
    out[key] = val;
  }
  return out;
}

}  // namespace curvflow

#endif  // CURVFLOW_IO_HPP
