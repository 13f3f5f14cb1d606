#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "wynn/types.hpp"

namespace wynn::stats {

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

/// Regularized lower incomplete gamma P(a, x): series for x < a + 1,
/// Lentz continued fraction for the complement otherwise.
inline double gamma_p(double a, double x) {
  if (!(a > 0.0)) throw InvalidInput("gamma_p: shape must be positive");
  if (x <= 0.0) return 0.0;
  if (std::isinf(x)) return 1.0;
  const double log_prefix = a * std::log(x) - x - std::lgamma(a);
  if (x < a + 1.0) {
    double term = 1.0 / a, sum = term;
    for (int n = 1; n < 1000; ++n) {
      term *= x / (a + n);
      sum += term;
      if (std::abs(term) < std::abs(sum) * 1e-16) break;
    }
    return std::min(1.0, sum * std::exp(log_prefix));
  }
  const double tiny = 1e-300;
  double b = x + 1.0 - a, c = 1.0 / tiny, d = 1.0 / b, h = d;
  for (int i = 1; i < 1000; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < 1e-16) break;
  }
  return std::max(0.0, 1.0 - std::exp(log_prefix) * h);
}

inline double chi2_cdf(double x, int dof) { return gamma_p(0.5 * dof, 0.5 * x); }

/// Inverts chi2_cdf by bisection.
inline double chi2_quantile(double prob, int dof) {
  if (!(prob > 0.0 && prob < 1.0)) throw InvalidInput("chi2_quantile: probability must be in (0, 1)");
  double lo = 0.0, hi = std::max(1.0, 2.0 * dof);
  while (chi2_cdf(hi, dof) < prob) hi *= 2.0;
  for (int it = 0; it < 200 && hi - lo > 1e-14 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (chi2_cdf(mid, dof) < prob ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

/// One-sample Kolmogorov-Smirnov distance sup_x |F_n(x) - F(x)|.
inline double ks_distance(std::vector<double> sample, const std::function<double(double)>& cdf) {
  if (sample.empty()) return std::nan("");
  std::sort(sample.begin(), sample.end());
  const double n = static_cast<double>(sample.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double F = cdf(sample[i]);
    d = std::max({d, (static_cast<double>(i) + 1.0) / n - F, F - static_cast<double>(i) / n});
  }
  return d;
}

/// Linear-interpolation quantile (R type 7).
inline double quantile(std::vector<double> values, double prob) {
  if (values.empty()) return std::nan("");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * prob;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(values.size() - 1, lo + 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

inline double median(std::vector<double> values) { return quantile(std::move(values), 0.5); }

}  // namespace wynn::stats
