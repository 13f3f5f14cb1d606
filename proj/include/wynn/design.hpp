#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "wynn/linalg.hpp"
#include "wynn/model.hpp"
#include "wynn/types.hpp"

namespace wynn {

/// Finitely supported probability measure on the design space.
struct Design {
  std::vector<Vector> support;
  std::vector<double> weights;

  std::size_t size() const { return support.size(); }

  /// Throws InvalidInput unless the support is nonempty and distinct and the
  /// weights are positive and sum to one within 1e-12.
  void validate() const {
    if (support.empty()) throw InvalidInput("design: empty support");
    if (support.size() != weights.size()) throw InvalidInput("design: support/weights length mismatch");
    double total = 0.0;
    for (std::size_t i = 0; i < support.size(); ++i) {
      if (!(weights[i] > 0.0)) throw InvalidInput("design: weights must be positive");
      total += weights[i];
      for (std::size_t j = 0; j < i; ++j)
        if (support[i] == support[j]) throw InvalidInput("design: duplicate support point");
    }
    if (std::abs(total - 1.0) > 1e-12) throw InvalidInput("design: weights do not sum to 1");
  }

  static Design uniform(std::vector<Vector> points) {
    Design d;
    const double w = 1.0 / static_cast<double>(points.size());
    d.weights.assign(points.size(), w);
    d.support = std::move(points);
    return d;
  }
};

/// M(xi, theta) = sum_x xi(x) f_theta(x) f_theta(x)'.
inline Matrix info_matrix(const Design& design, const Vector& theta, const ModelSpec& model) {
  Matrix m = Matrix::Zero(model.p, model.p);
  for (std::size_t i = 0; i < design.size(); ++i) {
    const Vector g = model.f(design.support[i], theta);
    m.selfadjointView<Eigen::Lower>().rankUpdate(g, design.weights[i]);
  }
  return m.selfadjointView<Eigen::Lower>();
}

/// xi_{n+1} = n/(n+1) xi_n + 1/(n+1) delta_x. When the weights of `design`
/// are multiplicities over n (the empirical case) the result is again exactly
/// multiplicity/(n+1); otherwise the convex combination is applied directly.
inline Design add_point(const Design& design, const Vector& x, long n, double merge_tol = 1e-12) {
  if (n <= 0) throw InvalidInput("add_point: n must be positive");
  const double nd = static_cast<double>(n);
  bool empirical = true;
  std::vector<long> counts(design.size());
  for (std::size_t i = 0; i < design.size(); ++i) {
    const double c = design.weights[i] * nd;
    counts[i] = std::lround(c);
    if (counts[i] <= 0 || std::abs(c - static_cast<double>(counts[i])) > 1e-9 * nd) empirical = false;
  }
  std::size_t hit = design.size();
  for (std::size_t i = 0; i < design.size(); ++i)
    if ((design.support[i] - x).norm() <= merge_tol) {
      hit = i;
      break;
    }
  Design out = design;
  if (hit == design.size()) {
    out.support.push_back(x);
    out.weights.push_back(0.0);
    counts.push_back(0);
  }
  const std::size_t target = hit == design.size() ? out.size() - 1 : hit;
  counts[target] += 1;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (empirical)
      out.weights[i] = static_cast<double>(counts[i]) / (nd + 1.0);
    else
      out.weights[i] = out.weights[i] * nd / (nd + 1.0) + (i == target ? 1.0 / (nd + 1.0) : 0.0);
  }
  return out;
}

/// n/(n+1) M + 1/(n+1) f f'. Valid only while theta is held fixed.
inline Matrix rank_one_update(const Matrix& m, const Vector& f, long n) {
  if (n <= 0) throw InvalidInput("rank_one_update: n must be positive");
  const double nd = static_cast<double>(n);
  return (nd / (nd + 1.0)) * m + (1.0 / (nd + 1.0)) * (f * f.transpose());
}

/// d(x) = f_theta(x)' M^{-1} f_theta(x).
inline double sensitivity(const Vector& x, const Matrix& m, const Vector& theta, const ModelSpec& model) {
  const SpdFactor fac(m);
  return fac.inv_quad(model.f(x, theta));
}

inline double log_det(const Matrix& m) { return SpdFactor(m).log_det(); }

struct OracleResult {
  Design design;
  double gap = 0.0;  // max_grid d(x) - p for the returned design
  double log_det = 0.0;
  long iterations = 0;
};

/// Locally D-optimal design on a finite grid by the multiplicative weight
/// iteration w(x) <- w(x) d(x) / p, stopped once max_x d(x) - p <= tol * p.
/// Weights below 1e-8 are pruned from the result. A non-positive tolerance
/// can never be certified and ends in ConvergenceError.
inline OracleResult solve_locally_d_optimal(const ModelSpec& model, const Vector& theta, const std::vector<Vector>& grid,
                                            double tol, long max_iterations = 100000) {
  if (grid.empty()) throw InvalidInput("oracle: empty grid");
  const auto n = static_cast<Eigen::Index>(grid.size());
  const int p = model.p;
  Matrix F(n, p);
  for (Eigen::Index i = 0; i < n; ++i) F.row(i) = model.f(grid[static_cast<std::size_t>(i)], theta).transpose();
  if (!F.allFinite()) throw InvalidInput("oracle: regressor not finite on grid");

  OracleResult res;
  if (p == 1) {
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < n; ++i)
      if (F(i, 0) * F(i, 0) > F(best, 0) * F(best, 0)) best = i;
    if (!(F(best, 0) * F(best, 0) > kPdFloor)) throw SingularMatrix("oracle: regressor vanishes on the grid", 0.0);
    res.design.support = {grid[static_cast<std::size_t>(best)]};
    res.design.weights = {1.0};
    res.gap = 0.0;
    res.log_det = std::log(F(best, 0) * F(best, 0));
    return res;
  }

  Vector w = Vector::Constant(n, 1.0 / static_cast<double>(n));
  Vector d(n);
  const auto evaluate = [&](const Vector& weights) {
    const Matrix m = F.transpose() * weights.asDiagonal() * F;
    const SpdFactor fac(m);
    for (Eigen::Index i = 0; i < n; ++i) d(i) = fac.inv_quad(F.row(i).transpose());
    return fac.log_det();
  };
  double gap = std::numeric_limits<double>::infinity();
  long it = 0;
  for (;; ++it) {
    evaluate(w);
    gap = d.maxCoeff() - p;
    if (tol > 0.0 && gap <= tol * p) break;
    if (it >= max_iterations) throw ConvergenceError("oracle: multiplicative iteration did not converge", gap);
    w = w.cwiseProduct(d) / static_cast<double>(p);
    w /= w.sum();
  }

  Vector pruned = w;
  for (Eigen::Index i = 0; i < n; ++i)
    if (pruned(i) < 1e-8) pruned(i) = 0.0;
  pruned /= pruned.sum();
  res.log_det = evaluate(pruned);
  res.gap = d.maxCoeff() - p;
  res.iterations = it;
  for (Eigen::Index i = 0; i < n; ++i)
    if (pruned(i) > 0.0) {
      res.design.support.push_back(grid[static_cast<std::size_t>(i)]);
      res.design.weights.push_back(pruned(i));
    }
  return res;
}

/// (det M(xi) / det M(reference))^(1/p) at theta.
inline double d_efficiency(const Design& design, const Design& reference, const Vector& theta, const ModelSpec& model) {
  const double a = log_det(info_matrix(design, theta, model));
  const double b = log_det(info_matrix(reference, theta, model));
  return std::exp((a - b) / model.p);
}

}  // namespace wynn
