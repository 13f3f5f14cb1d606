#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <vector>

#include <Eigen/QR>

#include "wynn/model.hpp"
#include "wynn/types.hpp"

namespace wynn {

/// Observed design points and responses x_1, y_1, ..., x_n, y_n.
struct DataBatch {
  std::vector<Vector> points;
  std::vector<double> responses;

  std::size_t size() const { return points.size(); }
  void validate() const {
    if (points.empty()) throw InvalidInput("data batch: need at least one observation");
    if (points.size() != responses.size()) throw InvalidInput("data batch: points/responses length mismatch");
  }
};

/// Observations grouped by distinct design point. Keeps count, running mean
/// and within-group sum of squares per point, so the residual sum of squares
/// at any theta is sum_g [ W_g + n_g (ybar_g - mu(x_g, theta))^2 ].
class GroupedData {
 public:
  explicit GroupedData(double merge_tol = 0.0) : merge_tol_(merge_tol) {}

  static GroupedData from(const DataBatch& data, double merge_tol = 0.0) {
    data.validate();
    GroupedData g(merge_tol);
    for (std::size_t i = 0; i < data.size(); ++i) g.add(data.points[i], data.responses[i]);
    return g;
  }

  /// Returns the group index the observation was filed under.
  std::size_t add(const Vector& x, double y) {
    std::size_t g = find(x);
    if (g == points_.size()) {
      points_.push_back(x);
      counts_.push_back(0);
      means_.push_back(0.0);
      within_.push_back(0.0);
    }
    const double c = static_cast<double>(++counts_[g]);
    const double delta = y - means_[g];
    means_[g] += delta / c;
    within_[g] += delta * (y - means_[g]);
    ++total_;
    return g;
  }

  std::size_t find(const Vector& x) const {
    for (std::size_t g = 0; g < points_.size(); ++g)
      if (merge_tol_ == 0.0 ? points_[g] == x : (points_[g] - x).norm() <= merge_tol_) return g;
    return points_.size();
  }

  std::size_t groups() const { return points_.size(); }
  std::size_t total() const { return total_; }
  const std::vector<Vector>& points() const { return points_; }
  const std::vector<long>& counts() const { return counts_; }
  const std::vector<double>& means() const { return means_; }
  double pure_error() const {
    double s = 0.0;
    for (double w : within_) s += w;
    return s;
  }

  double sse(const Vector& theta, const ModelSpec& model) const {
    double s = pure_error();
    for (std::size_t g = 0; g < points_.size(); ++g) {
      const double r = means_[g] - model.mu(points_[g], theta);
      s += static_cast<double>(counts_[g]) * r * r;
    }
    return s;
  }

 private:
  double merge_tol_;
  std::vector<Vector> points_;
  std::vector<long> counts_;
  std::vector<double> means_;
  std::vector<double> within_;
  std::size_t total_ = 0;
};

/// S_n(theta) = sum_i (y_i - mu(x_i, theta))^2.
inline double sse(const DataBatch& data, const Vector& theta, const ModelSpec& model) {
  double s = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double r = data.responses[i] - model.mu(data.points[i], theta);
    s += r * r;
  }
  return s;
}

namespace detail {

/// grad_theta mu(x, theta): the regressor when it is the gradient, otherwise
/// finite differences (central inside the box, one-sided at active bounds).
inline Vector mean_gradient(const ModelSpec& model, const Vector& x, const Vector& theta,
                            const ParameterSpace* space = nullptr) {
  if (model.gradient_is_mu_gradient) return model.f(x, theta);
  Vector g(model.p);
  for (int j = 0; j < model.p; ++j) {
    const double h = 1e-6 * std::max(1.0, std::abs(theta(j)));
    Vector tp = theta, tm = theta;
    double span = 2.0 * h;
    if (space && theta(j) + h > space->upper()(j)) {
      tp(j) = theta(j);
      span = h;
    } else {
      tp(j) += h;
    }
    if (space && theta(j) - h < space->lower()(j)) {
      tm(j) = theta(j);
      span = h;
    } else {
      tm(j) -= h;
    }
    g(j) = (model.mu(x, tp) - model.mu(x, tm)) / span;
  }
  return g;
}

}  // namespace detail

struct SseGradient {
  Vector gradient;
  bool on_boundary = false;  // theta touches the box; result is not a free gradient
};

/// grad S_n(theta) = -2 sum_i (y_i - mu(x_i, theta)) grad mu(x_i, theta).
inline SseGradient sse_gradient(const DataBatch& data, const Vector& theta, const ModelSpec& model,
                                const ParameterSpace& space) {
  SseGradient out;
  out.on_boundary = !space.interior(theta);
  out.gradient = Vector::Zero(model.p);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double r = data.responses[i] - model.mu(data.points[i], theta);
    out.gradient -= 2.0 * r * detail::mean_gradient(model, data.points[i], theta, &space);
  }
  return out;
}

inline Vector sse_gradient(const DataBatch& data, const Vector& theta, const ModelSpec& model) {
  Vector g = Vector::Zero(model.p);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double r = data.responses[i] - model.mu(data.points[i], theta);
    g -= 2.0 * r * detail::mean_gradient(model, data.points[i], theta);
  }
  return g;
}

struct FitSettings {
  int grid_points_per_axis = 15;
  int max_iterations = 200;
  double step_tolerance = 1e-10;
};

struct LSFit {
  Vector theta_hat;
  double sse_value = 0.0;
  double sigma2_hat = 0.0;  // S_n(theta_hat) / n
  bool converged = false;
  Vector grid_minimum;
  double grid_sse = 0.0;
  bool non_unique = false;  // several coarse-grid points tie for the minimum
  int iterations = 0;
};

/// Least squares over the parameter box: full-factorial grid scan for the
/// global minimizer, then box-projected damped Gauss-Newton descent from the
/// grid winner (and optionally from a warm start). The grid is built once.
class LeastSquaresFitter {
 public:
  LeastSquaresFitter(ModelSpec model, ParameterSpace space, FitSettings settings = {})
      : model_(std::move(model)), space_(std::move(space)), settings_(settings),
        grid_(space_.grid(settings_.grid_points_per_axis)) {}

  const ModelSpec& model() const { return model_; }
  const ParameterSpace& space() const { return space_; }
  const FitSettings& settings() const { return settings_; }
  const std::vector<Vector>& grid() const { return grid_; }

  LSFit fit(const GroupedData& data, const std::optional<Vector>& warm_start = std::nullopt) const {
    if (data.total() == 0) throw InvalidInput("fit_ls: no observations");
    LSFit out = grid_phase(data);
    Descent best = descend(data, out.grid_minimum, out.grid_sse);
    if (warm_start && warm_start->size() == model_.p && warm_start->allFinite()) {
      const Vector start = space_.clamp(*warm_start);
      const double s0 = data.sse(start, model_);
      if (std::isfinite(s0)) {
        Descent alt = descend(data, start, s0);
        if (alt.sse < best.sse) best = std::move(alt);
      }
    }
    out.theta_hat = best.theta;
    out.sse_value = best.sse;
    out.sigma2_hat = best.sse / static_cast<double>(data.total());
    out.converged = best.converged;
    out.iterations = best.iterations;
    return out;
  }

  LSFit fit(const DataBatch& data, const std::optional<Vector>& warm_start = std::nullopt) const {
    return fit(GroupedData::from(data), warm_start);
  }

  /// Coarse-grid minimizer only (no local refinement).
  LSFit grid_phase(const GroupedData& data) const {
    std::vector<double> values(grid_.size());
    std::size_t best = grid_.size();
    for (std::size_t i = 0; i < grid_.size(); ++i) {
      values[i] = data.sse(grid_[i], model_);
      if (std::isfinite(values[i]) && (best == grid_.size() || values[i] < values[best])) best = i;
    }
    if (best == grid_.size()) throw FitFailure("fit_ls: sum of squares is non-finite on the whole parameter grid");
    LSFit out;
    out.grid_minimum = grid_[best];
    out.grid_sse = values[best];
    const double tie = 1e-12 * std::max(1.0, std::abs(values[best]));
    int ties = 0;
    for (double v : values)
      if (std::isfinite(v) && v - values[best] <= tie) ++ties;
    out.non_unique = ties > 1;
    out.theta_hat = out.grid_minimum;
    out.sse_value = out.grid_sse;
    out.sigma2_hat = out.grid_sse / static_cast<double>(data.total());
    out.converged = true;
    return out;
  }

 private:
  struct Descent {
    Vector theta;
    double sse;
    bool converged;
    int iterations;
  };

  Descent descend(const GroupedData& data, Vector theta, double s) const {
    const auto k = static_cast<Eigen::Index>(data.groups());
    const int p = model_.p;
    Matrix J(k, p);
    Vector r(k);
    for (int it = 0; it < settings_.max_iterations; ++it) {
      for (Eigen::Index g = 0; g < k; ++g) {
        const auto gi = static_cast<std::size_t>(g);
        const double w = std::sqrt(static_cast<double>(data.counts()[gi]));
        r(g) = w * (data.means()[gi] - model_.mu(data.points()[gi], theta));
        J.row(g) = w * detail::mean_gradient(model_, data.points()[gi], theta, &space_).transpose();
      }
      if (!J.allFinite() || !r.allFinite()) return {theta, s, false, it};
      const Vector grad = -2.0 * J.transpose() * r;
      // Bounds whose gradient pushes outward stay fixed for this iteration.
      std::vector<int> free;
      for (int j = 0; j < p; ++j) {
        const bool at_lower = theta(j) <= space_.lower()(j) && grad(j) > 0.0;
        const bool at_upper = theta(j) >= space_.upper()(j) && grad(j) < 0.0;
        if (!at_lower && !at_upper) free.push_back(j);
      }
      if (free.empty()) return {theta, s, true, it};
      Matrix Jf(k, static_cast<Eigen::Index>(free.size()));
      for (std::size_t c = 0; c < free.size(); ++c) Jf.col(static_cast<Eigen::Index>(c)) = J.col(free[c]);
      const Vector step_free = Jf.completeOrthogonalDecomposition().solve(r);
      Vector step = Vector::Zero(p);
      for (std::size_t c = 0; c < free.size(); ++c) step(free[c]) = step_free(static_cast<Eigen::Index>(c));
      if (!step.allFinite() || step.norm() == 0.0) return {theta, s, true, it};

      double alpha = 1.0;
      bool accepted = false;
      Vector next;
      double s_next = s;
      for (int halving = 0; halving < 40; ++halving, alpha *= 0.5) {
        next = space_.clamp(theta + alpha * step);
        s_next = data.sse(next, model_);
        if (std::isfinite(s_next) && s_next < s) {
          accepted = true;
          break;
        }
      }
      if (!accepted) return {theta, s, true, it + 1};
      const double moved = (next - theta).norm();
      theta = std::move(next);
      s = s_next;
      if (moved < settings_.step_tolerance) return {theta, s, true, it + 1};
    }
    return {theta, s, false, settings_.max_iterations};
  }

  ModelSpec model_;
  ParameterSpace space_;
  FitSettings settings_;
  std::vector<Vector> grid_;
};

inline LSFit fit_ls(const DataBatch& data, const ModelSpec& model, const ParameterSpace& space,
                    const FitSettings& settings = {}) {
  data.validate();
  return LeastSquaresFitter(model, space, settings).fit(data);
}

}  // namespace wynn
