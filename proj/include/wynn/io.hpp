#pragma once

#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "wynn/adaptive.hpp"
#include "wynn/analysis.hpp"
#include "wynn/design.hpp"
#include "wynn/estimator.hpp"
#include "wynn/protocol.hpp"
#include "wynn/types.hpp"

namespace wynn::io {

using json = nlohmann::json;

// Non-finite numbers are written as null.

inline json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline json vec(const Vector& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(num(v(i)));
  return a;
}

inline json vec(const std::vector<double>& v) {
  json a = json::array();
  for (double d : v) a.push_back(num(d));
  return a;
}

inline json points(const std::vector<Vector>& pts) {
  json a = json::array();
  for (const auto& p : pts) a.push_back(vec(p));
  return a;
}

inline Vector read_vec(const json& j) {
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = j[i].is_null() ? std::nan("") : j[i].get<double>();
  return v;
}

inline std::vector<Vector> read_points(const json& j) {
  std::vector<Vector> out;
  for (const auto& p : j) out.push_back(read_vec(p));
  return out;
}

inline double read_num(const json& j) { return j.is_null() ? std::nan("") : j.get<double>(); }

// ---------------------------------------------------------------------------

inline json to_json(const Design& d) {
  return json{{"support", points(d.support)}, {"weights", vec(d.weights)}};
}

inline Design design_from_json(const json& j) {
  Design d;
  d.support = read_points(j.at("support"));
  d.weights = j.at("weights").get<std::vector<double>>();
  return d;
}

inline json to_json(const OracleResult& r) {
  json j = to_json(r.design);
  j["gap"] = num(r.gap);
  j["logdet"] = num(r.log_det);
  j["iterations"] = r.iterations;
  return j;
}

inline json to_json(const LSFit& f) {
  return json{{"theta_hat", vec(f.theta_hat)},       {"sse", num(f.sse_value)},
              {"sigma2_hat", num(f.sigma2_hat)},     {"converged", f.converged},
              {"grid_minimum", vec(f.grid_minimum)}, {"grid_sse", num(f.grid_sse)},
              {"non_unique", f.non_unique},          {"iterations", f.iterations}};
}

inline LSFit fit_from_json(const json& j) {
  LSFit f;
  f.theta_hat = read_vec(j.at("theta_hat"));
  f.sse_value = read_num(j.at("sse"));
  f.sigma2_hat = read_num(j.at("sigma2_hat"));
  f.converged = j.at("converged").get<bool>();
  f.grid_minimum = read_vec(j.at("grid_minimum"));
  f.grid_sse = read_num(j.at("grid_sse"));
  f.non_unique = j.at("non_unique").get<bool>();
  f.iterations = j.at("iterations").get<int>();
  return f;
}

// ---------------------------------------------------------------------------
// Trajectory
// ---------------------------------------------------------------------------

inline json to_json(const Trajectory& t) {
  json steps = json::array();
  for (const auto& r : t.records)
    steps.push_back(json{{"n", r.n},
                         {"x", vec(r.x_next)},
                         {"y", num(r.y_next)},
                         {"theta", vec(r.theta)},
                         {"logdet", num(r.log_det)},
                         {"max_d", num(r.max_sensitivity)}});
  json cfg = json::parse(t.config_echo.empty() ? "{}" : t.config_echo, nullptr, false);
  if (cfg.is_discarded()) cfg = json::object();
  return json{{"model", t.model_name},
              {"p", t.p},
              {"n_start", t.n_start},
              {"n_max", t.n_max},
              {"seed", t.seed},
              {"config", cfg},
              {"initial",
               {{"points", points(t.initial_points)},
                {"responses", vec(t.initial_responses)},
                {"theta", t.initial_theta.size() ? vec(t.initial_theta) : json(nullptr)}}},
              {"steps", steps},
              {"final_fit", t.final_fit ? to_json(*t.final_fit) : json(nullptr)}};
}

inline Trajectory trajectory_from_json(const json& j) {
  Trajectory t;
  t.model_name = j.at("model").get<std::string>();
  t.p = j.at("p").get<int>();
  t.n_start = j.at("n_start").get<long>();
  t.n_max = j.at("n_max").get<long>();
  t.seed = j.at("seed").get<std::uint64_t>();
  t.config_echo = j.value("config", json::object()).dump();
  const auto& init = j.at("initial");
  t.initial_points = read_points(init.at("points"));
  for (const auto& y : init.at("responses")) t.initial_responses.push_back(read_num(y));
  if (!init.at("theta").is_null()) t.initial_theta = read_vec(init.at("theta"));
  for (const auto& s : j.at("steps")) {
    StepRecord r;
    r.n = s.at("n").get<long>();
    r.x_next = read_vec(s.at("x"));
    r.y_next = read_num(s.at("y"));
    r.theta = read_vec(s.at("theta"));
    r.log_det = read_num(s.at("logdet"));
    r.max_sensitivity = read_num(s.at("max_d"));
    t.records.push_back(std::move(r));
  }
  if (j.contains("final_fit") && !j.at("final_fit").is_null()) t.final_fit = fit_from_json(j.at("final_fit"));
  if (t.p < 1) throw InvalidInput("trajectory: p must be positive");
  if (t.initial_points.size() != t.initial_responses.size())
    throw InvalidInput("trajectory: initial points/responses length mismatch");
  return t;
}

/// Columns: n, x1..xk, y, theta1..thetap, logdet, max_d.
inline std::string trajectory_csv(const Trajectory& t) {
  using protocol::format_double;
  const Eigen::Index k = t.initial_points.empty() ? (t.records.empty() ? 1 : t.records.front().x_next.size())
                                                  : t.initial_points.front().size();
  std::ostringstream os;
  os << "n";
  for (Eigen::Index j = 0; j < k; ++j) os << ",x" << j + 1;
  os << ",y";
  for (int j = 0; j < t.p; ++j) os << ",theta" << j + 1;
  os << ",logdet,max_d\n";
  for (const auto& r : t.records) {
    os << r.n;
    for (Eigen::Index j = 0; j < r.x_next.size(); ++j) os << ',' << format_double(r.x_next(j));
    os << ',' << format_double(r.y_next);
    for (Eigen::Index j = 0; j < r.theta.size(); ++j) os << ',' << format_double(r.theta(j));
    os << ',' << format_double(r.log_det) << ',' << format_double(r.max_sensitivity) << '\n';
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Monte Carlo report
// ---------------------------------------------------------------------------

inline json to_json(const CheckpointStats& s) {
  return json{{"n", s.n},
              {"samples", s.samples},
              {"error_quantiles", vec(s.error_quantiles)},
              {"efficiency_quantiles", vec(s.efficiency_quantiles)},
              {"tests_skipped", s.tests_skipped},
              {"known_sigma",
               {{"ks", vec(s.ks_known)}, {"chi2_ks", num(s.chi2_ks_known)}, {"coverage95", num(s.coverage_known)}}},
              {"plugin_sigma",
               {{"label", "plug-in surrogate: sigma estimated by S_n/n"},
                {"ks", vec(s.ks_plugin)},
                {"chi2_ks", num(s.chi2_ks_plugin)},
                {"coverage95", num(s.coverage_plugin)}}},
              {"optimal_information",
               {{"ks", vec(s.ks_star)}, {"chi2_ks", num(s.chi2_ks_star)}, {"coverage95", num(s.coverage_star)}}}};
}

inline json to_json(const MCReport& r) {
  json stats = json::array();
  for (const auto& s : r.stats) stats.push_back(to_json(s));
  json failures = json::array();
  for (const auto& run : r.runs)
    if (!run.ok) failures.push_back(json{{"replicate", run.index}, {"error", run.error}});
  std::vector<double> cps(r.checkpoints.begin(), r.checkpoints.end());
  return json{{"replicates", r.replicates},
              {"failed", r.failed},
              {"study_failed", r.study_failed},
              {"seed", r.seed},
              {"checkpoints", r.checkpoints},
              {"quantile_levels", vec(r.quantile_levels)},
              {"sigma_known", num(r.sigma_known)},
              {"chi2_95", num(r.chi2_95)},
              {"oracle", to_json(r.oracle)},
              {"checkpoint_stats", stats},
              {"failures", failures}};
}

/// One row per replicate per checkpoint.
inline std::string report_csv(const MCReport& r, int p) {
  using protocol::format_double;
  std::ostringstream os;
  os << "replicate,seed,ok,n,error,sigma2_hat,efficiency";
  for (const char* name : {"theta_hat", "t_known", "t_plugin", "t_star"})
    for (int j = 0; j < p; ++j) os << ',' << name << j + 1;
  os << '\n';
  const auto cells = [&](const Vector& v) {
    for (int j = 0; j < p; ++j) os << ',' << (v.size() == p ? format_double(v(j)) : "");
  };
  for (const auto& run : r.runs) {
    if (!run.ok) {
      os << run.index << ',' << run.seed << ",0,,,,";
      for (int j = 0; j < 4 * p; ++j) os << ',';
      os << '\n';
      continue;
    }
    for (const auto& cp : run.checkpoints) {
      os << run.index << ',' << run.seed << ",1," << cp.n << ',' << (cp.valid ? format_double(cp.error) : "") << ','
         << (cp.valid ? format_double(cp.sigma2_hat) : "") << ',' << (cp.valid ? format_double(cp.efficiency) : "");
      cells(cp.theta_hat);
      cells(cp.t_known);
      cells(cp.t_plugin);
      cells(cp.t_star);
      os << '\n';
    }
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Mass diagnostics
// ---------------------------------------------------------------------------

inline json to_json(const MassDiagnostics& d) {
  json clusters = json::array();
  for (const auto& c : d.clusters) clusters.push_back(json{{"members", points(c.members)}, {"mass", num(c.mass)}});
  json seps = json::array();
  for (const auto& row : d.separations) seps.push_back(vec(row));
  json curve = json::array();
  for (std::size_t i = 0; i < d.n_values.size(); ++i)
    curve.push_back(json{{"n", d.n_values[i]}, {"max_mass", num(d.max_window_mass[i])}});
  return json{{"window_diameter", num(d.window_diameter)},
              {"epsilon", num(d.epsilon)},
              {"bound", num(d.bound)},
              {"n_start", d.n_start},
              {"recorded_n0", d.recorded_n0 >= 0 ? json(d.recorded_n0) : json(nullptr)},
              {"bound_n0", d.bound_n0},
              {"max_window_mass", curve},
              {"cell_diameter", num(d.cell_diameter)},
              {"cluster_n", d.cluster_n},
              {"clusters_ok", d.clusters_ok},
              {"clusters", clusters},
              {"separations", seps},
              {"excluded_mass", num(d.excluded_mass)},
              {"pi0", num(d.pi0)},
              {"message", d.message}};
}

// ---------------------------------------------------------------------------

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  out << content;
  if (!out) throw Error("failed writing '" + path + "'");
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_json(const std::string& path, const json& j) { write_file(path, j.dump(2) + "\n"); }

}  // namespace wynn::io
