#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <istream>
#include <limits>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "wynn/design.hpp"
#include "wynn/estimator.hpp"
#include "wynn/linalg.hpp"
#include "wynn/model.hpp"
#include "wynn/noise.hpp"
#include "wynn/protocol.hpp"
#include "wynn/types.hpp"

namespace wynn {

// ---------------------------------------------------------------------------
// Initial design
// ---------------------------------------------------------------------------

struct InitialDesign {
  std::vector<Vector> points;
  std::vector<std::size_t> grid_indices;
  double worst_min_eigenvalue = 0.0;  // over the theta check sample
};

namespace detail {

inline double worst_min_eigenvalue(const std::vector<Matrix>& sums, std::size_t count) {
  double worst = std::numeric_limits<double>::infinity();
  for (const auto& s : sums) worst = std::min(worst, min_eigenvalue(s / static_cast<double>(count)));
  return worst;
}

inline std::size_t binomial_capped(std::size_t n, std::size_t k, std::size_t cap) {
  if (k > n) return 0;
  double acc = 1.0;
  for (std::size_t i = 0; i < k; ++i) {
    acc *= static_cast<double>(n - i) / static_cast<double>(i + 1);
    if (acc > static_cast<double>(cap)) return cap + 1;
  }
  return static_cast<std::size_t>(acc);
}

}  // namespace detail

/// Finite starting design whose averaged information matrix has smallest
/// eigenvalue above `pd_floor` at every theta of the check sample.
///
/// The p-tuple of grid points maximizing |det [f(z_1) ... f(z_p)]| at the box
/// center is taken first (exhaustively when there are at most 2e6 tuples,
/// otherwise by greedy volume growth). Grid points maximizing the worst-case
/// smallest eigenvalue are then appended until the floor is cleared. For p = 1
/// the single point maximizing min_theta f_theta(x)^2 is used instead.
inline InitialDesign build_initial_design(const ModelSpec& model, const ParameterSpace& space,
                                          const std::vector<Vector>& grid, const std::vector<Vector>& theta_sample,
                                          double pd_floor = 1e-8) {
  const int p = model.p;
  if (static_cast<int>(grid.size()) < p) throw InitializationFailure("initial design: grid has fewer than p points");
  if (theta_sample.empty()) throw InvalidInput("initial design: empty theta sample");
  const std::size_t N = grid.size();

  // Regressors for every (theta, grid point).
  std::vector<std::vector<Vector>> F(theta_sample.size(), std::vector<Vector>(N));
  for (std::size_t t = 0; t < theta_sample.size(); ++t)
    for (std::size_t i = 0; i < N; ++i) F[t][i] = model.f(grid[i], theta_sample[t]);

  std::vector<std::size_t> chosen;
  if (p == 1) {
    std::size_t best = 0;
    double best_v = -1.0;
    for (std::size_t i = 0; i < N; ++i) {
      double v = std::numeric_limits<double>::infinity();
      for (std::size_t t = 0; t < theta_sample.size(); ++t) v = std::min(v, F[t][i](0) * F[t][i](0));
      if (v > best_v) {
        best_v = v;
        best = i;
      }
    }
    chosen.push_back(best);
  } else {
    const Vector center = space.center();
    Matrix Fc(static_cast<Eigen::Index>(N), p);
    for (std::size_t i = 0; i < N; ++i) Fc.row(static_cast<Eigen::Index>(i)) = model.f(grid[i], center).transpose();
    const std::size_t cap = 2000000;
    if (detail::binomial_capped(N, static_cast<std::size_t>(p), cap) <= cap) {
      std::vector<std::size_t> idx(static_cast<std::size_t>(p));
      for (int j = 0; j < p; ++j) idx[static_cast<std::size_t>(j)] = static_cast<std::size_t>(j);
      double best = -1.0;
      Matrix sub(p, p);
      while (true) {
        for (int j = 0; j < p; ++j) sub.row(j) = Fc.row(static_cast<Eigen::Index>(idx[static_cast<std::size_t>(j)]));
        const double v = std::abs(sub.determinant());
        if (v > best) {
          best = v;
          chosen = idx;
        }
        int j = p - 1;
        while (j >= 0 && idx[static_cast<std::size_t>(j)] == N - static_cast<std::size_t>(p - j)) --j;
        if (j < 0) break;
        ++idx[static_cast<std::size_t>(j)];
        for (int l = j + 1; l < p; ++l) idx[static_cast<std::size_t>(l)] = idx[static_cast<std::size_t>(l - 1)] + 1;
      }
    } else {
      for (int j = 0; j < p; ++j) {
        double best = -1.0;
        std::size_t best_i = 0;
        for (std::size_t i = 0; i < N; ++i) {
          if (std::find(chosen.begin(), chosen.end(), i) != chosen.end()) continue;
          Matrix rows(static_cast<Eigen::Index>(chosen.size() + 1), p);
          for (std::size_t c = 0; c < chosen.size(); ++c)
            rows.row(static_cast<Eigen::Index>(c)) = Fc.row(static_cast<Eigen::Index>(chosen[c]));
          rows.row(static_cast<Eigen::Index>(chosen.size())) = Fc.row(static_cast<Eigen::Index>(i));
          const double v = (rows * rows.transpose()).determinant();
          if (v > best) {
            best = v;
            best_i = i;
          }
        }
        chosen.push_back(best_i);
      }
    }
  }

  std::vector<Matrix> sums(theta_sample.size(), Matrix::Zero(p, p));
  for (std::size_t t = 0; t < theta_sample.size(); ++t)
    for (std::size_t i : chosen) sums[t] += F[t][i] * F[t][i].transpose();
  double worst = detail::worst_min_eigenvalue(sums, chosen.size());
  const std::size_t limit = 10u * static_cast<std::size_t>(p) * theta_sample.size();
  std::size_t added = 0;
  while (!(worst > pd_floor)) {
    if (added++ >= limit)
      throw InitializationFailure("initial design: smallest eigenvalue " + std::to_string(worst) +
                                  " still below floor after " + std::to_string(limit) +
                                  " additions; the design or parameter grid is too coarse");
    double best = -std::numeric_limits<double>::infinity();
    std::size_t best_i = 0;
    for (std::size_t i = 0; i < N; ++i) {
      double w = std::numeric_limits<double>::infinity();
      for (std::size_t t = 0; t < theta_sample.size(); ++t) {
        const Matrix trial = (sums[t] + F[t][i] * F[t][i].transpose()) / static_cast<double>(chosen.size() + 1);
        w = std::min(w, min_eigenvalue(trial));
      }
      if (w > best) {
        best = w;
        best_i = i;
      }
    }
    chosen.push_back(best_i);
    for (std::size_t t = 0; t < theta_sample.size(); ++t) sums[t] += F[t][best_i] * F[t][best_i].transpose();
    worst = best;
  }

  InitialDesign out;
  out.grid_indices = chosen;
  for (std::size_t i : chosen) out.points.push_back(grid[i]);
  out.worst_min_eigenvalue = worst;
  return out;
}

// ---------------------------------------------------------------------------
// Response sources
// ---------------------------------------------------------------------------

/// Supplies the observation y_n at design point x (n is 1-based).
class ResponseSource {
 public:
  virtual ~ResponseSource() = default;
  virtual double acquire(const Vector& x, long n) = 0;
};

/// y = mu(x, theta_true) + e with e drawn from an error process.
class SimulatedSource final : public ResponseSource {
 public:
  SimulatedSource(ModelSpec model, Vector theta_true, ErrorProcess noise, std::uint64_t seed)
      : model_(std::move(model)), theta_(std::move(theta_true)), noise_(std::move(noise)), rng_(seed) {}

  double acquire(const Vector& x, long) override { return model_.mu(x, theta_) + noise_.next(rng_); }

  const ErrorProcess& noise() const { return noise_; }

 private:
  ModelSpec model_;
  Vector theta_;
  ErrorProcess noise_;
  SeededRng rng_;
};

/// Responses read from OBSERVE lines of a stream.
class ReplaySource final : public ResponseSource {
 public:
  explicit ReplaySource(std::istream& in) : in_(in) {}

  double acquire(const Vector&, long n) override {
    std::string line;
    while (std::getline(in_, line)) {
      ++line_no_;
      const auto cmd = protocol::parse_line(line);
      if (std::holds_alternative<protocol::Skip>(cmd)) continue;
      if (const auto* obs = std::get_if<protocol::Observe>(&cmd)) return obs->value;
      if (std::holds_alternative<protocol::Quit>(cmd))
        throw AcquisitionError("replay: QUIT before observation " + std::to_string(n));
      throw AcquisitionError("replay line " + std::to_string(line_no_) + ": " +
                             std::get<protocol::Malformed>(cmd).reason);
    }
    throw AcquisitionError("replay: source exhausted before observation " + std::to_string(n));
  }

 private:
  std::istream& in_;
  long line_no_ = 0;
};

/// The session ended (QUIT or end of input) before the run completed.
class SessionEnded : public Error {
 public:
  explicit SessionEnded(bool by_quit) : Error(by_quit ? "session ended by QUIT" : "session input ended"), quit_(by_quit) {}
  bool by_quit() const { return quit_; }

 private:
  bool quit_;
};

/// Human-in-the-loop source: prints SUGGEST, reads OBSERVE/QUIT, answers
/// malformed lines with ERR and re-prompts.
class InteractiveSource final : public ResponseSource {
 public:
  InteractiveSource(std::istream& in, std::ostream& out) : in_(in), out_(out) {}

  double acquire(const Vector& x, long n) override {
    std::string line;
    out_ << protocol::suggest_line(n, x) << '\n' << std::flush;
    while (std::getline(in_, line)) {
      const auto cmd = protocol::parse_line(line);
      if (std::holds_alternative<protocol::Skip>(cmd)) continue;
      if (const auto* obs = std::get_if<protocol::Observe>(&cmd)) return obs->value;
      if (std::holds_alternative<protocol::Quit>(cmd)) throw SessionEnded(true);
      out_ << "ERR " << std::get<protocol::Malformed>(cmd).reason << '\n'
           << protocol::suggest_line(n, x) << '\n'
           << std::flush;
    }
    throw SessionEnded(false);
  }

 private:
  std::istream& in_;
  std::ostream& out_;
};

// ---------------------------------------------------------------------------
// Algorithm
// ---------------------------------------------------------------------------

enum class EstimatorKind { LeastSquares, GridOnly };

struct WynnConfig {
  long n_max = 100;
  double pd_floor = 1e-8;
  bool polish = false;  // golden-section refinement of the argmax (box spaces)
  EstimatorKind estimator = EstimatorKind::LeastSquares;
  int refresh_every = 1;  // k > 1 refits only every k-th step
  int theta_check_points_per_axis = 5;
  FitSettings fit;
};

/// Adaptive estimator used inside the loop: data and previous estimate in,
/// new estimate in the parameter box out.
using EstimatorFn = std::function<Vector(const GroupedData&, const std::optional<Vector>&)>;

struct StepRecord {
  long n = 0;         // stage n: data x_1..x_n was available
  Vector x_next;      // x_{n+1}
  Vector theta;       // theta_n
  double log_det = 0.0;          // log det M(xi_n, theta_n)
  double max_sensitivity = 0.0;  // d(x_{n+1})
  double y_next = 0.0;           // y_{n+1}
};

struct Trajectory {
  std::string model_name;
  int p = 0;
  long n_start = 0;
  long n_max = 0;
  std::uint64_t seed = 0;
  std::string config_echo = "{}";  // JSON text of the generating configuration
  std::vector<Vector> initial_points;
  std::vector<double> initial_responses;
  Vector initial_theta;  // empty when initialization did not complete
  std::vector<StepRecord> records;
  std::optional<LSFit> final_fit;

  long observations() const { return static_cast<long>(initial_responses.size() + records.size()); }

  /// x_1, ..., x_n for the first n observations.
  std::vector<Vector> points(long n) const {
    std::vector<Vector> out;
    for (const auto& x : initial_points) {
      if (static_cast<long>(out.size()) >= n) return out;
      out.push_back(x);
    }
    for (const auto& r : records) {
      if (static_cast<long>(out.size()) >= n) break;
      out.push_back(r.x_next);
    }
    return out;
  }

  std::vector<double> responses(long n) const {
    std::vector<double> out;
    for (double y : initial_responses) {
      if (static_cast<long>(out.size()) >= n) return out;
      out.push_back(y);
    }
    for (const auto& r : records) {
      if (static_cast<long>(out.size()) >= n) break;
      out.push_back(r.y_next);
    }
    return out;
  }
};

/// Snapshot of the running algorithm at stage n.
struct WynnState {
  long n = 0;
  std::vector<Vector> points;
  std::vector<double> responses;
  Vector theta;
  GroupedData data;
  Matrix info;  // M(xi_n, theta_n)

  /// Empirical design xi_n: distinct points with multiplicity / n.
  Design design() const {
    Design d;
    d.support = data.points();
    for (long c : data.counts()) d.weights.push_back(static_cast<double>(c) / static_cast<double>(n));
    return d;
  }
};

/// M(xi_n, theta) = (1/n) sum_g c_g f_theta(x_g) f_theta(x_g)'.
inline Matrix empirical_info(const GroupedData& data, const Vector& theta, const ModelSpec& model) {
  Matrix m = Matrix::Zero(model.p, model.p);
  for (std::size_t g = 0; g < data.groups(); ++g) {
    const Vector f = model.f(data.points()[g], theta);
    m.selfadjointView<Eigen::Lower>().rankUpdate(f, static_cast<double>(data.counts()[g]));
  }
  m = m.selfadjointView<Eigen::Lower>();
  return m / static_cast<double>(data.total());
}

struct ArgmaxResult {
  Vector x;
  double value = 0.0;
  std::size_t grid_index = 0;  // index of the best grid point before any polish
};

/// Sensitivity argmax over the scan grid; a later grid point replaces the
/// incumbent only if it is larger by more than 1e-12 relative, so exact and
/// rounding-level ties go to the lowest index.
inline ArgmaxResult sensitivity_argmax(const std::vector<Vector>& grid, const SpdFactor& fac, const Vector& theta,
                                       const ModelSpec& model) {
  ArgmaxResult best;
  best.value = -1.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double d = fac.inv_quad(model.f(grid[i], theta));
    if (d > best.value + 1e-12 * std::abs(best.value)) {
      best.value = d;
      best.grid_index = i;
    }
  }
  best.x = grid[best.grid_index];
  return best;
}

namespace detail {

/// Golden-section maximization of d along each axis within one grid spacing
/// of the incumbent.
inline void polish_argmax(ArgmaxResult& best, const BoxRegion& box, const SpdFactor& fac, const Vector& theta,
                          const ModelSpec& model) {
  const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
  for (Eigen::Index j = 0; j < box.lower.size(); ++j) {
    const double h = (box.upper(j) - box.lower(j)) / (box.resolution[static_cast<std::size_t>(j)] - 1.0);
    double a = std::max(box.lower(j), best.x(j) - h);
    double b = std::min(box.upper(j), best.x(j) + h);
    Vector probe = best.x;
    const auto value_at = [&](double v) {
      probe(j) = v;
      return fac.inv_quad(model.f(probe, theta));
    };
    double c = b - phi * (b - a), d = a + phi * (b - a);
    double fc = value_at(c), fd = value_at(d);
    for (int it = 0; it < 60 && b - a > 1e-12; ++it) {
      if (fc > fd) {
        b = d;
        d = c;
        fd = fc;
        c = b - phi * (b - a);
        fc = value_at(c);
      } else {
        a = c;
        c = d;
        fc = fd;
        d = a + phi * (b - a);
        fd = value_at(d);
      }
    }
    const double cand = 0.5 * (a + b);
    const double fv = value_at(cand);
    if (fv > best.value) {
      best.value = fv;
      best.x(j) = cand;
    }
  }
}

}  // namespace detail

/// The adaptive Wynn algorithm as an explicit state machine:
/// initialize() takes the starting design and fits, each step() picks
/// x_{n+1} = argmax_x f_{theta_n}(x)' M^{-1}(xi_n, theta_n) f_{theta_n}(x),
/// observes y_{n+1}, refits and recomputes M at the new estimate.
class AdaptiveWynn {
 public:
  AdaptiveWynn(Problem problem, WynnConfig config, EstimatorFn estimator = {})
      : problem_(std::move(problem)), config_(config),
        fitter_(problem_.model, problem_.parameter_space, config_.fit), grid_(problem_.design_space.grid()),
        state_{0, {}, {}, Vector(), GroupedData(problem_.design_space.merge_tolerance()), Matrix()} {
    if (config_.refresh_every < 1) throw InvalidInput("wynn: refresh_every must be >= 1");
    if (problem_.parameter_space.dim() != problem_.model.p)
      throw InvalidInput("wynn: parameter space dimension differs from model p");
    if (estimator) {
      estimator_ = std::move(estimator);
    } else if (config_.estimator == EstimatorKind::GridOnly) {
      estimator_ = [this](const GroupedData& d, const std::optional<Vector>&) {
        return fitter_.grid_phase(d).theta_hat;
      };
    } else {
      estimator_ = [this](const GroupedData& d, const std::optional<Vector>& prev) {
        last_ls_ = fitter_.fit(d, prev);
        last_ls_n_ = static_cast<long>(d.total());
        return last_ls_->theta_hat;
      };
    }
    traj_.model_name = problem_.model.name;
    traj_.p = problem_.model.p;
    traj_.n_max = config_.n_max;
  }

  // The estimator closures capture this.
  AdaptiveWynn(const AdaptiveWynn&) = delete;
  AdaptiveWynn& operator=(const AdaptiveWynn&) = delete;

  /// Called after every estimator refresh (initial fit included).
  void on_estimate(std::function<void(const WynnState&)> cb) { observer_ = std::move(cb); }

  const Problem& problem() const { return problem_; }
  const WynnConfig& config() const { return config_; }
  const WynnState& state() const { return state_; }
  const std::vector<Vector>& grid() const { return grid_; }
  const LeastSquaresFitter& fitter() const { return fitter_; }
  const Trajectory& trajectory() const { return traj_; }
  Trajectory& trajectory() { return traj_; }
  bool initialized() const { return initialized_; }
  bool finished() const { return initialized_ && state_.n >= config_.n_max; }

  const InitialDesign& initial_design() {
    if (!initial_) {
      const auto sample = problem_.parameter_space.grid(config_.theta_check_points_per_axis);
      initial_ = build_initial_design(problem_.model, problem_.parameter_space, grid_, sample, config_.pd_floor);
    }
    return *initial_;
  }

  void initialize(ResponseSource& source) {
    if (initialized_) throw InvalidInput("wynn: already initialized");
    const auto& init = initial_design();
    traj_.n_start = static_cast<long>(init.points.size());
    if (config_.n_max < traj_.n_start)
      throw InvalidInput("wynn: n_max (" + std::to_string(config_.n_max) + ") is below n_start (" +
                         std::to_string(traj_.n_start) + ")");
    for (std::size_t i = traj_.initial_responses.size(); i < init.points.size(); ++i) {
      const double y = source.acquire(init.points[i], static_cast<long>(i) + 1);
      if (traj_.initial_points.size() <= i) traj_.initial_points.push_back(init.points[i]);
      traj_.initial_responses.push_back(y);
      append(init.points[i], y);
    }
    state_.theta = estimator_(state_.data, std::nullopt);
    refresh_info();
    traj_.initial_theta = state_.theta;
    initialized_ = true;
    if (observer_) observer_(state_);
  }

  /// One iteration at stage n -> n+1.
  void step(ResponseSource& source) {
    if (!initialized_) throw InvalidInput("wynn: step before initialize");
    const SpdFactor fac(state_.info, config_.pd_floor);
    ArgmaxResult best = sensitivity_argmax(grid_, fac, state_.theta, problem_.model);
    if (config_.polish && problem_.design_space.is_box())
      detail::polish_argmax(best, problem_.design_space.as_box(), fac, state_.theta, problem_.model);

    StepRecord rec;
    rec.n = state_.n;
    rec.x_next = best.x;
    rec.theta = state_.theta;
    rec.log_det = fac.log_det();
    rec.max_sensitivity = best.value;
    rec.y_next = source.acquire(best.x, state_.n + 1);

    append(best.x, rec.y_next);
    if (state_.n % config_.refresh_every == 0) {
      state_.theta = estimator_(state_.data, state_.theta);
      refresh_info();
      traj_.records.push_back(std::move(rec));
      if (observer_) observer_(state_);
    } else {
      refresh_info();
      traj_.records.push_back(std::move(rec));
    }
  }

  /// Least squares fit of the current data (reuses the loop's fit when the
  /// estimator is least squares and it is current).
  LSFit ls_fit() const {
    if (last_ls_ && last_ls_n_ == state_.n) return *last_ls_;
    return fitter_.fit(state_.data, state_.theta);
  }

  /// Runs initialization (if needed) and steps up to n_max, then attaches the
  /// final least squares fit.
  Trajectory& run(ResponseSource& source) {
    if (!initialized_) initialize(source);
    while (state_.n < config_.n_max) step(source);
    finalize();
    return traj_;
  }

  void finalize() {
    if (initialized_) traj_.final_fit = ls_fit();
  }

 private:
  void append(const Vector& x, double y) {
    state_.points.push_back(x);
    state_.responses.push_back(y);
    state_.data.add(x, y);
    state_.n = static_cast<long>(state_.points.size());
  }

  void refresh_info() { state_.info = empirical_info(state_.data, state_.theta, problem_.model); }

  Problem problem_;
  WynnConfig config_;
  LeastSquaresFitter fitter_;
  std::vector<Vector> grid_;
  EstimatorFn estimator_;
  std::function<void(const WynnState&)> observer_;
  std::optional<InitialDesign> initial_;
  std::optional<LSFit> last_ls_;
  long last_ls_n_ = -1;
  WynnState state_;
  Trajectory traj_;
  bool initialized_ = false;
};

/// Convenience: one complete adaptive run.
inline Trajectory run(const WynnConfig& config, const Problem& problem, ResponseSource& source, std::uint64_t seed,
                      const EstimatorFn& estimator = {}) {
  AdaptiveWynn alg(problem, config, estimator);
  alg.trajectory().seed = seed;
  return alg.run(source);
}

}  // namespace wynn
