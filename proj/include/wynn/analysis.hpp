#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "wynn/adaptive.hpp"
#include "wynn/design.hpp"
#include "wynn/estimator.hpp"
#include "wynn/linalg.hpp"
#include "wynn/model.hpp"
#include "wynn/noise.hpp"
#include "wynn/stats.hpp"
#include "wynn/types.hpp"

namespace wynn {

// ---------------------------------------------------------------------------
// Standardized estimator
// ---------------------------------------------------------------------------

/// T_n = sqrt(n) / sigma * M^{1/2}(xi_n, theta_hat) (theta_hat - theta_bar).
inline Vector normality_stat(const LSFit& fit, const Design& design, const Vector& theta_bar, double sigma, long n,
                             const ModelSpec& model) {
  if (!(sigma > 0.0)) throw InvalidInput("normality_stat: sigma must be positive");
  const Vector diff = fit.theta_hat - theta_bar;
  const Matrix root = SpdFactor(info_matrix(design, fit.theta_hat, model)).sqrt();
  return std::sqrt(static_cast<double>(n)) / sigma * (root * diff);
}

// ---------------------------------------------------------------------------
// Monte Carlo studies
// ---------------------------------------------------------------------------

/// One simulation setting: model and spaces, true parameter, error process
/// and algorithm configuration.
struct Scenario {
  Problem problem;
  Vector theta_true;
  ErrorVariant noise = IIDGaussian{0.1};
  WynnConfig wynn;
  double oracle_tolerance = 1e-4;
  long oracle_max_iterations = 100000;
};

struct CheckpointSample {
  long n = 0;
  bool valid = false;
  Vector theta_hat;
  double error = std::nan("");  // ||theta_hat - theta_bar||
  double sigma2_hat = std::nan("");
  Vector t_known;   // known-sigma standardization (empty if the noise has no limiting variance)
  Vector t_plugin;  // plug-in sigma_hat
  Vector t_star;    // sqrt(n) sigma^{-1} M*^{1/2} (theta_hat - theta_bar)
  double efficiency = std::nan("");  // D-efficiency of xi_n at theta_bar
};

struct ReplicateResult {
  std::size_t index = 0;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  std::vector<CheckpointSample> checkpoints;
  std::optional<Trajectory> trajectory;
};

struct CheckpointStats {
  long n = 0;
  std::size_t samples = 0;
  std::vector<double> error_quantiles;
  std::vector<double> efficiency_quantiles;
  bool tests_skipped = true;  // fewer than two valid samples
  std::vector<double> ks_known, ks_plugin, ks_star;  // per coordinate, vs N(0, 1)
  double chi2_ks_known = std::nan(""), chi2_ks_plugin = std::nan(""), chi2_ks_star = std::nan("");
  double coverage_known = std::nan(""), coverage_plugin = std::nan(""), coverage_star = std::nan("");
};

struct MCReport {
  std::size_t replicates = 0;
  std::size_t failed = 0;
  bool study_failed = false;  // more than 1% of replicates failed
  std::uint64_t seed = 0;
  std::vector<long> checkpoints;
  std::vector<double> quantile_levels{0.05, 0.25, 0.5, 0.75, 0.95};
  double sigma_known = std::nan("");
  double chi2_95 = std::nan("");
  OracleResult oracle;
  std::vector<CheckpointStats> stats;
  std::vector<ReplicateResult> runs;

  const CheckpointStats& at(long n) const {
    for (const auto& s : stats)
      if (s.n == n) return s;
    throw InvalidInput("MCReport: no checkpoint " + std::to_string(n));
  }
};

struct StudyOptions {
  unsigned workers = 0;            // 0: available parallelism
  std::size_t keep_trajectories = 0;  // keep full trajectories of the first k replicates
};

/// Runs one replicate up to the last checkpoint and summarizes it at every
/// checkpoint. Exceptions are caught and reported in the result.
inline ReplicateResult run_replicate(const Scenario& sc, const OracleResult& oracle, const std::vector<long>& checkpoints,
                                     std::size_t index, std::uint64_t seed, bool keep_trajectory) {
  ReplicateResult res;
  res.index = index;
  res.seed = seed;
  try {
    WynnConfig cfg = sc.wynn;
    cfg.n_max = checkpoints.empty() ? cfg.n_max : checkpoints.back();
    AdaptiveWynn alg(sc.problem, cfg);
    alg.trajectory().seed = seed;
    SimulatedSource source(sc.problem.model, sc.theta_true, ErrorProcess(sc.noise), seed);
    alg.initialize(source);
    const ErrorProcess proto(sc.noise);
    const double s2 = proto.limiting_variance();
    const ModelSpec& model = sc.problem.model;
    const Matrix star_root = SpdFactor(info_matrix(oracle.design, sc.theta_true, model)).sqrt();
    for (long n : checkpoints) {
      CheckpointSample cp;
      cp.n = n;
      while (alg.state().n < n) alg.step(source);
      if (n >= alg.trajectory().n_start) {
        const LSFit fit = alg.ls_fit();
        const Design xi = alg.state().design();
        cp.valid = true;
        cp.theta_hat = fit.theta_hat;
        cp.error = (fit.theta_hat - sc.theta_true).norm();
        cp.sigma2_hat = fit.sigma2_hat;
        const double rn = std::sqrt(static_cast<double>(n));
        if (std::isfinite(s2) && s2 > 0.0) {
          cp.t_known = normality_stat(fit, xi, sc.theta_true, std::sqrt(s2), n, model);
          cp.t_star = rn / std::sqrt(s2) * (star_root * (fit.theta_hat - sc.theta_true));
        }
        if (fit.sigma2_hat > 0.0) cp.t_plugin = normality_stat(fit, xi, sc.theta_true, std::sqrt(fit.sigma2_hat), n, model);
        cp.efficiency = d_efficiency(xi, oracle.design, sc.theta_true, model);
      }
      res.checkpoints.push_back(std::move(cp));
    }
    alg.finalize();
    if (keep_trajectory) res.trajectory = alg.trajectory();
    res.ok = true;
  } catch (const std::exception& e) {
    res.ok = false;
    res.error = e.what();
  }
  return res;
}

/// R independent replicates with seeds replicate_seed(seed, r), executed on a
/// worker pool; results are ordered by replicate index.
inline std::vector<ReplicateResult> run_replicates(const Scenario& sc, const OracleResult& oracle, std::size_t R,
                                                   std::vector<long> checkpoints, std::uint64_t seed,
                                                   const StudyOptions& opt = {}) {
  std::sort(checkpoints.begin(), checkpoints.end());
  checkpoints.erase(std::unique(checkpoints.begin(), checkpoints.end()), checkpoints.end());
  std::vector<ReplicateResult> out(R);
  unsigned workers = opt.workers ? opt.workers : std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, std::max<std::size_t>(R, 1)));
  std::atomic<std::size_t> next{0};
  const auto work = [&] {
    for (std::size_t r; (r = next.fetch_add(1)) < R;)
      out[r] = run_replicate(sc, oracle, checkpoints, r, replicate_seed(seed, r), r < opt.keep_trajectories);
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  return out;
}

namespace detail {

inline void fill_normality(CheckpointStats& st, const std::vector<const Vector*>& samples,
                           std::vector<double>& ks, double& chi2_ks, double& coverage, double chi2_95, int p) {
  ks.assign(static_cast<std::size_t>(p), std::nan(""));
  if (samples.size() < 2) return;
  for (int j = 0; j < p; ++j) {
    std::vector<double> col;
    for (const auto* t : samples) col.push_back((*t)(j));
    ks[static_cast<std::size_t>(j)] = stats::ks_distance(col, stats::normal_cdf);
  }
  std::vector<double> sq;
  std::size_t inside = 0;
  for (const auto* t : samples) {
    sq.push_back(t->squaredNorm());
    if (sq.back() <= chi2_95) ++inside;
  }
  chi2_ks = stats::ks_distance(sq, [p](double x) { return stats::chi2_cdf(x, p); });
  coverage = static_cast<double>(inside) / static_cast<double>(samples.size());
  st.tests_skipped = false;
}

}  // namespace detail

/// Reduces replicate results into per-checkpoint statistics.
inline MCReport summarize(const Scenario& sc, OracleResult oracle, std::vector<ReplicateResult> runs,
                          std::vector<long> checkpoints, std::uint64_t seed) {
  std::sort(checkpoints.begin(), checkpoints.end());
  checkpoints.erase(std::unique(checkpoints.begin(), checkpoints.end()), checkpoints.end());
  MCReport rep;
  rep.seed = seed;
  rep.replicates = runs.size();
  rep.checkpoints = checkpoints;
  rep.oracle = std::move(oracle);
  const int p = sc.problem.model.p;
  const double s2 = ErrorProcess(sc.noise).limiting_variance();
  rep.sigma_known = std::isfinite(s2) ? std::sqrt(s2) : std::nan("");
  rep.chi2_95 = stats::chi2_quantile(0.95, p);
  for (const auto& r : runs)
    if (!r.ok) ++rep.failed;
  rep.study_failed = static_cast<double>(rep.failed) > 0.01 * static_cast<double>(rep.replicates);

  for (std::size_t c = 0; c < checkpoints.size(); ++c) {
    CheckpointStats st;
    st.n = checkpoints[c];
    std::vector<double> errors, effs;
    std::vector<const Vector*> tk, tp, ts;
    for (const auto& r : runs) {
      if (!r.ok || c >= r.checkpoints.size() || !r.checkpoints[c].valid) continue;
      const auto& cp = r.checkpoints[c];
      errors.push_back(cp.error);
      effs.push_back(cp.efficiency);
      if (cp.t_known.size() == p) tk.push_back(&cp.t_known);
      if (cp.t_plugin.size() == p) tp.push_back(&cp.t_plugin);
      if (cp.t_star.size() == p) ts.push_back(&cp.t_star);
    }
    st.samples = errors.size();
    for (double q : rep.quantile_levels) {
      st.error_quantiles.push_back(stats::quantile(errors, q));
      st.efficiency_quantiles.push_back(stats::quantile(effs, q));
    }
    detail::fill_normality(st, tk, st.ks_known, st.chi2_ks_known, st.coverage_known, rep.chi2_95, p);
    detail::fill_normality(st, tp, st.ks_plugin, st.chi2_ks_plugin, st.coverage_plugin, rep.chi2_95, p);
    detail::fill_normality(st, ts, st.ks_star, st.chi2_ks_star, st.coverage_star, rep.chi2_95, p);
    st.tests_skipped = st.samples < 2;
    rep.stats.push_back(std::move(st));
  }
  rep.runs = std::move(runs);
  return rep;
}

inline OracleResult scenario_oracle(const Scenario& sc) {
  return solve_locally_d_optimal(sc.problem.model, sc.theta_true, sc.problem.design_space.grid(), sc.oracle_tolerance,
                                 sc.oracle_max_iterations);
}

/// Error quantiles of the least squares estimator at the checkpoints over R
/// replicates.
inline MCReport consistency_study(const Scenario& sc, std::size_t R, std::vector<long> checkpoints, std::uint64_t seed,
                                  const StudyOptions& opt = {}) {
  if (checkpoints.empty()) throw InvalidInput("consistency_study: no checkpoints");
  OracleResult oracle = scenario_oracle(sc);
  auto runs = run_replicates(sc, oracle, R, checkpoints, seed, opt);
  return summarize(sc, std::move(oracle), std::move(runs), std::move(checkpoints), seed);
}

/// Standardized estimators at n_final over R replicates. Requires theta_bar
/// in the interior of the parameter box.
inline MCReport normality_study(const Scenario& sc, std::size_t R, long n_final, std::uint64_t seed,
                                const StudyOptions& opt = {}) {
  if (!sc.problem.parameter_space.interior(sc.theta_true))
    throw InvalidInput("normality_study: true parameter must be interior to the parameter space");
  return consistency_study(sc, R, {n_final}, seed, opt);
}

// ---------------------------------------------------------------------------
// Design mass diagnostics
// ---------------------------------------------------------------------------

namespace detail {

struct WeightedPoints {
  std::vector<Vector> points;
  std::vector<long> counts;
  long total = 0;
};

inline WeightedPoints group_points(const std::vector<Vector>& pts) {
  WeightedPoints w;
  std::map<std::vector<double>, std::size_t> index;
  for (const auto& x : pts) {
    std::vector<double> key(x.data(), x.data() + x.size());
    auto [it, fresh] = index.emplace(std::move(key), w.points.size());
    if (fresh) {
      w.points.push_back(x);
      w.counts.push_back(0);
    }
    ++w.counts[it->second];
    ++w.total;
  }
  return w;
}

inline double max_window_count(const WeightedPoints& w, double d) {
  if (w.points.empty()) return 0.0;
  if (w.points.front().size() == 1) {
    std::vector<std::pair<double, long>> s;
    for (std::size_t i = 0; i < w.points.size(); ++i) s.emplace_back(w.points[i](0), w.counts[i]);
    std::sort(s.begin(), s.end());
    long best = 0, acc = 0;
    std::size_t hi = 0;
    for (std::size_t lo = 0; lo < s.size(); ++lo) {
      if (hi < lo) {
        hi = lo;
        acc = 0;
      }
      while (hi < s.size() && s[hi].first - s[lo].first <= d) acc += s[hi++].second;
      best = std::max(best, acc);
      acc -= s[lo].second;
    }
    return static_cast<double>(best);
  }
  long best = 0;
  for (const auto& c : w.points) {
    long acc = 0;
    for (std::size_t i = 0; i < w.points.size(); ++i)
      if ((w.points[i] - c).norm() <= 0.5 * d) acc += w.counts[i];
    best = std::max(best, acc);
  }
  return static_cast<double>(best);
}

}  // namespace detail

/// Largest xi_n-mass of a set of diameter <= d. In one dimension the windows
/// are the intervals [x_i, x_i + d] anchored at observed points (exact); in
/// higher dimensions balls of radius d/2 centred at observed points.
inline double window_mass(const Trajectory& traj, long n, double d) {
  if (n < 1 || n > traj.observations()) throw InvalidInput("window_mass: n outside trajectory");
  if (!(d > 0.0)) throw InvalidInput("window_mass: d must be positive");
  const auto w = detail::group_points(traj.points(n));
  return detail::max_window_count(w, d) / static_cast<double>(n);
}

struct Cluster {
  std::vector<Vector> members;  // distinct observed points in the set
  double mass = 0.0;
};

struct MassDiagnostics {
  double window_diameter = 0.0;  // d
  double epsilon = 0.1;
  double bound = 0.0;  // 1/p + epsilon
  long n_start = 0;
  std::vector<long> n_values;
  std::vector<double> max_window_mass;
  long recorded_n0 = -1;  // first n after which the bound always holds; -1 if it fails at the end
  long bound_n0 = 0;      // ceil((1/p + eps/2)^{-1}) * max(n_start, ceil(2/eps))
  double cell_diameter = 0.0;  // d0
  long cluster_n = 0;
  bool clusters_ok = false;
  std::vector<Cluster> clusters;
  std::vector<std::vector<double>> separations;  // pairwise set distances
  double excluded_mass = 0.0;
  double pi0 = 0.0;  // smallest cluster mass
  std::string message;
};

/// p separated high-mass sets following the covering construction: cubes of
/// diameter <= cell_diameter cover the observed points; repeatedly take the
/// cube with the largest mass outside the excluded region, then exclude every
/// observed point within cell_diameter of the chosen set.
inline MassDiagnostics extract_clusters(const Trajectory& traj, long n, double cell_diameter) {
  if (n < traj.p || n > traj.observations()) throw InvalidInput("extract_clusters: need p <= n <= observations");
  if (!(cell_diameter > 0.0)) throw InvalidInput("extract_clusters: cell diameter must be positive");
  MassDiagnostics out;
  out.cell_diameter = cell_diameter;
  out.cluster_n = n;
  const auto w = detail::group_points(traj.points(n));
  const auto k = w.points.front().size();
  Vector anchor = w.points.front();
  for (const auto& x : w.points) anchor = anchor.cwiseMin(x);
  const double side = cell_diameter / std::sqrt(static_cast<double>(k));
  std::map<std::vector<long>, std::vector<std::size_t>> cells;
  for (std::size_t i = 0; i < w.points.size(); ++i) {
    std::vector<long> key(static_cast<std::size_t>(k));
    for (Eigen::Index j = 0; j < k; ++j)
      key[static_cast<std::size_t>(j)] = static_cast<long>(std::floor((w.points[i](j) - anchor(j)) / side));
    cells[key].push_back(i);
  }
  std::vector<bool> excluded(w.points.size(), false);
  std::vector<std::vector<std::size_t>> chosen;
  const double total = static_cast<double>(w.total);
  for (int j = 0; j < traj.p; ++j) {
    const std::vector<std::size_t>* best = nullptr;
    long best_mass = 0;
    std::vector<std::size_t> best_members;
    for (const auto& [key, members] : cells) {
      long m = 0;
      std::vector<std::size_t> live;
      for (std::size_t i : members)
        if (!excluded[i]) {
          m += w.counts[i];
          live.push_back(i);
        }
      if (m > best_mass) {
        best_mass = m;
        best = &members;
        best_members = std::move(live);
      }
    }
    if (!best) {
      out.message = "only " + std::to_string(j) + " separated nonempty cells found";
      break;
    }
    Cluster c;
    for (std::size_t i : best_members) c.members.push_back(w.points[i]);
    c.mass = static_cast<double>(best_mass) / total;
    out.clusters.push_back(std::move(c));
    chosen.push_back(best_members);
    for (std::size_t i = 0; i < w.points.size(); ++i) {
      if (excluded[i]) continue;
      for (std::size_t m : best_members)
        if ((w.points[i] - w.points[m]).norm() <= cell_diameter) {
          excluded[i] = true;
          break;
        }
    }
  }
  out.clusters_ok = static_cast<int>(out.clusters.size()) == traj.p;
  double in_clusters = 0.0;
  out.pi0 = out.clusters.empty() ? 0.0 : std::numeric_limits<double>::infinity();
  for (const auto& c : out.clusters) {
    in_clusters += c.mass;
    out.pi0 = std::min(out.pi0, c.mass);
  }
  double excl = 0.0;
  for (std::size_t i = 0; i < w.points.size(); ++i)
    if (excluded[i]) excl += static_cast<double>(w.counts[i]) / total;
  out.excluded_mass = std::max(0.0, excl - in_clusters);
  out.separations.assign(out.clusters.size(), std::vector<double>(out.clusters.size(), 0.0));
  for (std::size_t a = 0; a < out.clusters.size(); ++a)
    for (std::size_t b = 0; b < a; ++b) {
      double d = std::numeric_limits<double>::infinity();
      for (const auto& x : out.clusters[a].members)
        for (const auto& z : out.clusters[b].members) d = std::min(d, (x - z).norm());
      out.separations[a][b] = out.separations[b][a] = d;
    }
  return out;
}

struct GammaKappa {
  double gamma = 0.0;
  double kappa = 0.0;
  bool kappa_positive = false;
};

/// gamma = max ||f_theta(x)|| and kappa = min over (v, theta) of
/// max_x (v' f_theta(x))^2, over the grid, theta sample and unit directions.
inline GammaKappa compute_gamma_kappa(const ModelSpec& model, const std::vector<Vector>& grid,
                                      const std::vector<Vector>& theta_sample, const std::vector<Vector>& directions) {
  if (directions.empty()) throw InvalidInput("compute_gamma_kappa: empty direction sample");
  GammaKappa gk;
  gk.kappa = std::numeric_limits<double>::infinity();
  for (const auto& t : theta_sample) {
    std::vector<Vector> F;
    F.reserve(grid.size());
    for (const auto& x : grid) {
      F.push_back(model.f(x, t));
      gk.gamma = std::max(gk.gamma, F.back().norm());
    }
    for (const auto& v : directions) {
      double best = 0.0;
      for (const auto& f : F) best = std::max(best, std::pow(v.dot(f), 2));
      gk.kappa = std::min(gk.kappa, best);
    }
  }
  gk.kappa_positive = gk.kappa > 1e-12;
  return gk;
}

/// Deterministic unit directions: for p = 2, `count` angles evenly spaced
/// on [0, pi); otherwise the coordinate axes followed by normalized Gaussian
/// draws from a fixed seed.
inline std::vector<Vector> unit_directions(int p, std::size_t count) {
  std::vector<Vector> out;
  if (p == 1) return {Vector::Ones(1)};
  if (p == 2) {
    for (std::size_t i = 0; i < count; ++i) {
      const double a = 3.14159265358979323846 * static_cast<double>(i) / static_cast<double>(count);
      Vector v(2);
      v << std::cos(a), std::sin(a);
      out.push_back(v);
    }
    return out;
  }
  for (int j = 0; j < p && out.size() < count; ++j) out.push_back(Vector::Unit(p, j));
  SeededRng rng(0x5eed);
  while (out.size() < count) {
    Vector v(p);
    for (int j = 0; j < p; ++j) v(j) = rng.normal();
    out.push_back(v.normalized());
  }
  return out;
}

struct WindowCalibration {
  double d = 0.0;
  double eta = 0.0;
  double threshold = 0.0;  // eta * kappa / gamma
  GammaKappa constants;
};

/// Numerical window diameter: the largest grid pair distance below which
/// ||f_theta(x) - f_theta(z)|| <= eta kappa / gamma holds for every sampled
/// theta, with eta = 1 - (1 + p eps / 2)^{-1/2}. When even the closest grid
/// pairs violate the bound, half of the smallest violating distance.
inline WindowCalibration calibrate_window_diameter(const ModelSpec& model, const std::vector<Vector>& grid,
                                                   const std::vector<Vector>& theta_sample, double eps,
                                                   std::size_t direction_count = 180) {
  WindowCalibration cal;
  cal.constants = compute_gamma_kappa(model, grid, theta_sample, unit_directions(model.p, direction_count));
  cal.eta = 1.0 - 1.0 / std::sqrt(1.0 + model.p * eps / 2.0);
  cal.threshold = cal.eta * cal.constants.kappa / cal.constants.gamma;
  double min_violating = std::numeric_limits<double>::infinity();
  std::vector<std::vector<Vector>> F(theta_sample.size());
  for (std::size_t t = 0; t < theta_sample.size(); ++t)
    for (const auto& x : grid) F[t].push_back(model.f(x, theta_sample[t]));
  for (std::size_t i = 0; i < grid.size(); ++i)
    for (std::size_t j = 0; j < i; ++j) {
      const double dist = (grid[i] - grid[j]).norm();
      if (dist >= min_violating) continue;
      for (std::size_t t = 0; t < theta_sample.size(); ++t)
        if ((F[t][i] - F[t][j]).norm() > cal.threshold) {
          min_violating = dist;
          break;
        }
    }
  double best_ok = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i)
    for (std::size_t j = 0; j < i; ++j) {
      const double dist = (grid[i] - grid[j]).norm();
      if (dist < min_violating) best_ok = std::max(best_ok, dist);
    }
  cal.d = best_ok > 0.0 ? best_ok : 0.5 * min_violating;
  if (!std::isfinite(cal.d)) cal.d = 1.0;  // single-point grid
  return cal;
}

/// Maximum window mass for every n from n_start to the end of the trajectory,
/// the recorded n0 for the bound 1/p + eps, and the clusters at the final n.
inline MassDiagnostics diagnose(const Trajectory& traj, double d, double cell_diameter, double eps = 0.1) {
  if (!(d > 0.0)) throw InvalidInput("diagnose: d must be positive");
  const long N = traj.observations();
  const long n0_first = std::max<long>(1, traj.n_start);
  MassDiagnostics out;
  if (N >= traj.p && N >= 1) out = extract_clusters(traj, N, cell_diameter);
  out.window_diameter = d;
  out.epsilon = eps;
  out.bound = 1.0 / traj.p + eps;
  out.n_start = traj.n_start;
  out.bound_n0 = static_cast<long>(std::ceil(1.0 / (1.0 / traj.p + eps / 2.0))) *
                 std::max<long>(traj.n_start, static_cast<long>(std::ceil(2.0 / eps)));
  const auto all = traj.points(N);
  detail::WeightedPoints w;
  std::map<std::vector<double>, std::size_t> index;
  for (long n = 1; n <= N; ++n) {
    const auto& x = all[static_cast<std::size_t>(n - 1)];
    auto [it, fresh] = index.emplace(std::vector<double>(x.data(), x.data() + x.size()), w.points.size());
    if (fresh) {
      w.points.push_back(x);
      w.counts.push_back(0);
    }
    ++w.counts[it->second];
    ++w.total;
    if (n < n0_first) continue;
    out.n_values.push_back(n);
    out.max_window_mass.push_back(detail::max_window_count(w, d) / static_cast<double>(n));
  }
  out.recorded_n0 = -1;
  for (std::size_t i = out.n_values.size(); i-- > 0;) {
    if (out.max_window_mass[i] > out.bound + 1e-12) break;
    out.recorded_n0 = out.n_values[i];
  }
  return out;
}

/// D_n(theta, theta_bar) / n = (1/n) sum_i (mu(x_i, theta) - mu(x_i, theta_bar))^2.
inline double parameter_discrepancy(const Trajectory& traj, long n, const Vector& theta, const Vector& theta_bar,
                                    const ModelSpec& model) {
  if (n < 1 || n > traj.observations()) throw InvalidInput("parameter_discrepancy: n outside trajectory");
  double s = 0.0;
  for (const auto& x : traj.points(n)) {
    const double d = model.mu(x, theta) - model.mu(x, theta_bar);
    s += d * d;
  }
  return s / static_cast<double>(n);
}

}  // namespace wynn
