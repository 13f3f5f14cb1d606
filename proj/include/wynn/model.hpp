#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/SVD>

#include "wynn/types.hpp"

namespace wynn {

// ---------------------------------------------------------------------------
// Design and parameter spaces
// ---------------------------------------------------------------------------

/// Axis-aligned box scanned on a full-factorial grid.
struct BoxRegion {
  Vector lower;
  Vector upper;
  std::vector<int> resolution;  // grid points per axis, each >= 2
};

/// Explicit list of pairwise distinct candidate points.
struct FiniteRegion {
  std::vector<Vector> points;
};

/// Compact experimental region, either a finite set or a gridded box.
class DesignSpace {
 public:
  static DesignSpace box(Vector lower, Vector upper, std::vector<int> resolution) {
    if (lower.size() == 0 || lower.size() != upper.size())
      throw InvalidInput("design box: lower/upper must be nonempty and of equal length");
    if (resolution.size() == 1 && lower.size() > 1) resolution.assign(static_cast<std::size_t>(lower.size()), resolution[0]);
    if (static_cast<Eigen::Index>(resolution.size()) != lower.size())
      throw InvalidInput("design box: one grid resolution per axis required");
    for (Eigen::Index j = 0; j < lower.size(); ++j) {
      if (!std::isfinite(lower(j)) || !std::isfinite(upper(j)) || !(lower(j) < upper(j)))
        throw InvalidInput("design box: need finite lower[j] < upper[j]");
      if (resolution[static_cast<std::size_t>(j)] < 2) throw InvalidInput("design box: grid resolution must be >= 2");
    }
    DesignSpace s;
    s.region_ = BoxRegion{std::move(lower), std::move(upper), std::move(resolution)};
    return s;
  }

  static DesignSpace interval(double lower, double upper, int resolution) {
    return box(Vector::Constant(1, lower), Vector::Constant(1, upper), {resolution});
  }

  static DesignSpace finite(std::vector<Vector> points) {
    if (points.empty()) throw InvalidInput("finite design space must be nonempty");
    const Eigen::Index k = points.front().size();
    if (k == 0) throw InvalidInput("finite design space: points must have dimension >= 1");
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (points[i].size() != k) throw InvalidInput("finite design space: inconsistent point dimensions");
      if (!points[i].allFinite()) throw InvalidInput("finite design space: non-finite coordinate");
      for (std::size_t j = 0; j < i; ++j)
        if ((points[i] - points[j]).norm() == 0.0) throw InvalidInput("finite design space: duplicate point");
    }
    DesignSpace s;
    s.region_ = FiniteRegion{std::move(points)};
    return s;
  }

  bool is_box() const { return std::holds_alternative<BoxRegion>(region_); }
  const BoxRegion& as_box() const { return std::get<BoxRegion>(region_); }
  const FiniteRegion& as_finite() const { return std::get<FiniteRegion>(region_); }

  Eigen::Index dim() const {
    return is_box() ? as_box().lower.size() : as_finite().points.front().size();
  }

  /// Candidate points scanned by argmax and grid constructions. Box grids are
  /// enumerated with the first axis varying slowest.
  std::vector<Vector> grid() const {
    if (!is_box()) return as_finite().points;
    const auto& b = as_box();
    const auto k = static_cast<std::size_t>(b.lower.size());
    std::size_t total = 1;
    for (int r : b.resolution) total *= static_cast<std::size_t>(r);
    std::vector<Vector> out;
    out.reserve(total);
    std::vector<int> idx(k, 0);
    for (std::size_t n = 0; n < total; ++n) {
      Vector x(static_cast<Eigen::Index>(k));
      for (std::size_t j = 0; j < k; ++j) {
        const auto jj = static_cast<Eigen::Index>(j);
        const int r = b.resolution[j];
        // endpoints are reproduced exactly
        x(jj) = idx[j] == r - 1 ? b.upper(jj)
                                : b.lower(jj) + (b.upper(jj) - b.lower(jj)) * idx[j] / static_cast<double>(r - 1);
      }
      out.push_back(std::move(x));
      for (std::size_t j = k; j-- > 0;) {
        if (++idx[j] < b.resolution[j]) break;
        idx[j] = 0;
      }
    }
    return out;
  }

  bool contains(const Vector& x, double tol = 1e-12) const {
    if (x.size() != dim() || !x.allFinite()) return false;
    if (is_box()) {
      const auto& b = as_box();
      return ((x - b.lower).array() >= -tol).all() && ((b.upper - x).array() >= -tol).all();
    }
    for (const auto& p : as_finite().points)
      if ((p - x).norm() <= tol) return true;
    return false;
  }

  /// Support points closer than this are merged into one design point.
  double merge_tolerance() const { return is_box() ? 1e-12 : 0.0; }

  double diameter() const {
    if (is_box()) return (as_box().upper - as_box().lower).norm();
    double d = 0.0;
    const auto& pts = as_finite().points;
    for (std::size_t i = 0; i < pts.size(); ++i)
      for (std::size_t j = 0; j < i; ++j) d = std::max(d, (pts[i] - pts[j]).norm());
    return d;
  }

  const std::variant<BoxRegion, FiniteRegion>& region() const { return region_; }

 private:
  std::variant<BoxRegion, FiniteRegion> region_;
};

/// Compact box of parameter values.
class ParameterSpace {
 public:
  ParameterSpace() = default;
  ParameterSpace(Vector lower, Vector upper) : lower_(std::move(lower)), upper_(std::move(upper)) {
    if (lower_.size() == 0 || lower_.size() != upper_.size())
      throw InvalidInput("parameter box: lower/upper must be nonempty and of equal length");
    for (Eigen::Index j = 0; j < lower_.size(); ++j)
      if (!std::isfinite(lower_(j)) || !std::isfinite(upper_(j)) || lower_(j) > upper_(j))
        throw InvalidInput("parameter box: need finite lower[j] <= upper[j]");
  }

  Eigen::Index dim() const { return lower_.size(); }
  const Vector& lower() const { return lower_; }
  const Vector& upper() const { return upper_; }
  Vector center() const { return 0.5 * (lower_ + upper_); }

  bool contains(const Vector& t, double tol = 0.0) const {
    return t.size() == dim() && t.allFinite() && ((t - lower_).array() >= -tol).all() &&
           ((upper_ - t).array() >= -tol).all();
  }
  bool interior(const Vector& t) const {
    return t.size() == dim() && ((t - lower_).array() > 0).all() && ((upper_ - t).array() > 0).all();
  }
  Vector clamp(const Vector& t) const { return t.cwiseMax(lower_).cwiseMin(upper_); }

  /// Full-factorial grid, `per_axis` points along each axis (first axis
  /// slowest); degenerate axes contribute a single value.
  std::vector<Vector> grid(int per_axis) const {
    if (per_axis < 1) throw InvalidInput("parameter grid: need at least one point per axis");
    const auto p = static_cast<std::size_t>(dim());
    std::vector<int> counts(p);
    std::size_t total = 1;
    for (std::size_t j = 0; j < p; ++j) {
      const auto jj = static_cast<Eigen::Index>(j);
      counts[j] = (lower_(jj) == upper_(jj) || per_axis == 1) ? 1 : per_axis;
      total *= static_cast<std::size_t>(counts[j]);
    }
    std::vector<Vector> out;
    out.reserve(total);
    std::vector<int> idx(p, 0);
    for (std::size_t n = 0; n < total; ++n) {
      Vector t(dim());
      for (std::size_t j = 0; j < p; ++j) {
        const auto jj = static_cast<Eigen::Index>(j);
        if (counts[j] == 1)
          t(jj) = per_axis == 1 ? 0.5 * (lower_(jj) + upper_(jj)) : lower_(jj);
        else
          t(jj) = idx[j] == counts[j] - 1 ? upper_(jj)
                                          : lower_(jj) + (upper_(jj) - lower_(jj)) * idx[j] / (counts[j] - 1.0);
      }
      out.push_back(std::move(t));
      for (std::size_t j = p; j-- > 0;) {
        if (++idx[j] < counts[j]) break;
        idx[j] = 0;
      }
    }
    return out;
  }

 private:
  Vector lower_;
  Vector upper_;
};

// ---------------------------------------------------------------------------
// Models
// ---------------------------------------------------------------------------

using MeanFunction = std::function<double(const Vector& x, const Vector& theta)>;
using RegressorFunction = std::function<Vector(const Vector& x, const Vector& theta)>;
using HessianFunction = std::function<Matrix(const Vector& x, const Vector& theta)>;

/// Nonlinear regression model: mean response mu(x, theta) and the regressor
/// family f_theta(x) whose outer products are the elementary information
/// matrices.
struct ModelSpec {
  std::string name;
  int p = 0;
  MeanFunction mu;
  RegressorFunction f;
  HessianFunction hessian;  // may be empty
  bool gradient_is_mu_gradient = true;
};

namespace detail {
inline void check_args(const ModelSpec& m, const Vector& x, const Vector& theta) {
  if (theta.size() != m.p) throw InvalidInput(m.name + ": parameter has dimension " + std::to_string(theta.size()) +
                                              ", expected " + std::to_string(m.p));
  if (x.size() == 0) throw InvalidInput(m.name + ": empty design point");
  if (!x.allFinite() || !theta.allFinite()) throw InvalidInput(m.name + ": non-finite argument");
}
}  // namespace detail

inline double eval_mu(const ModelSpec& m, const Vector& x, const Vector& theta) {
  detail::check_args(m, x, theta);
  const double v = m.mu(x, theta);
  if (!std::isfinite(v)) throw InvalidInput(m.name + ": mean response is not finite at this (x, theta)");
  return v;
}

inline double eval_mu(const ModelSpec& m, const DesignSpace& xs, const ParameterSpace& ts, const Vector& x,
                      const Vector& theta) {
  if (!xs.contains(x)) throw InvalidInput(m.name + ": design point outside the design space");
  if (!ts.contains(theta)) throw InvalidInput(m.name + ": parameter outside the parameter space");
  return eval_mu(m, x, theta);
}

inline Vector eval_f(const ModelSpec& m, const Vector& x, const Vector& theta) {
  detail::check_args(m, x, theta);
  Vector v = m.f(x, theta);
  if (v.size() != m.p) throw InvalidInput(m.name + ": regressor has wrong length");
  if (!v.allFinite()) throw InvalidInput(m.name + ": regressor is not finite at this (x, theta)");
  return v;
}

inline Vector eval_f(const ModelSpec& m, const DesignSpace& xs, const ParameterSpace& ts, const Vector& x,
                     const Vector& theta) {
  if (!xs.contains(x)) throw InvalidInput(m.name + ": design point outside the design space");
  if (!ts.contains(theta)) throw InvalidInput(m.name + ": parameter outside the parameter space");
  return eval_f(m, x, theta);
}

/// theta1 * x / (theta2 + x)
inline ModelSpec michaelis_menten() {
  ModelSpec m;
  m.name = "michaelis_menten";
  m.p = 2;
  m.mu = [](const Vector& x, const Vector& t) { return t(0) * x(0) / (t(1) + x(0)); };
  m.f = [](const Vector& x, const Vector& t) {
    const double den = t(1) + x(0);
    Vector g(2);
    g << x(0) / den, -t(0) * x(0) / (den * den);
    return g;
  };
  m.hessian = [](const Vector& x, const Vector& t) {
    const double den = t(1) + x(0);
    Matrix h(2, 2);
    h << 0.0, -x(0) / (den * den), -x(0) / (den * den), 2.0 * t(0) * x(0) / (den * den * den);
    return h;
  };
  return m;
}

/// theta1 * exp(-theta2 * x)
inline ModelSpec exponential_decay() {
  ModelSpec m;
  m.name = "exponential_decay";
  m.p = 2;
  m.mu = [](const Vector& x, const Vector& t) { return t(0) * std::exp(-t(1) * x(0)); };
  m.f = [](const Vector& x, const Vector& t) {
    const double e = std::exp(-t(1) * x(0));
    Vector g(2);
    g << e, -t(0) * x(0) * e;
    return g;
  };
  m.hessian = [](const Vector& x, const Vector& t) {
    const double e = std::exp(-t(1) * x(0));
    Matrix h(2, 2);
    h << 0.0, -x(0) * e, -x(0) * e, t(0) * x(0) * x(0) * e;
    return h;
  };
  return m;
}

/// theta1 + theta2 x + ... + theta_p x^(p-1)
inline ModelSpec polynomial(int p) {
  if (p < 1) throw InvalidInput("polynomial: p must be >= 1");
  ModelSpec m;
  m.name = "polynomial";
  m.p = p;
  m.f = [p](const Vector& x, const Vector&) {
    Vector g(p);
    double v = 1.0;
    for (int j = 0; j < p; ++j, v *= x(0)) g(j) = v;
    return g;
  };
  m.mu = [p](const Vector& x, const Vector& t) {
    double acc = 0.0;
    for (int j = p; j-- > 0;) acc = acc * x(0) + t(j);
    return acc;
  };
  m.hessian = [p](const Vector&, const Vector&) { return Matrix::Zero(p, p).eval(); };
  return m;
}

/// exp(-theta x), the p = 1 member of the catalog.
inline ModelSpec one_parameter_exponential() {
  ModelSpec m;
  m.name = "one_parameter_exponential";
  m.p = 1;
  m.mu = [](const Vector& x, const Vector& t) { return std::exp(-t(0) * x(0)); };
  m.f = [](const Vector& x, const Vector& t) { return Vector::Constant(1, -x(0) * std::exp(-t(0) * x(0))); };
  m.hessian = [](const Vector& x, const Vector& t) {
    return Matrix::Constant(1, 1, x(0) * x(0) * std::exp(-t(0) * x(0)));
  };
  return m;
}

/// A model together with the spaces it is posed on.
struct Problem {
  ModelSpec model;
  DesignSpace design_space;
  ParameterSpace parameter_space;
};

inline const std::vector<std::string>& builtin_model_names() {
  static const std::vector<std::string> names{"michaelis_menten", "exponential_decay", "polynomial",
                                              "one_parameter_exponential"};
  return names;
}

/// Builds a catalog model by name. `p` is used only by "polynomial" (degree p-1).
inline ModelSpec make_model(const std::string& name, int p = 2) {
  if (name == "michaelis_menten") return michaelis_menten();
  if (name == "exponential_decay") return exponential_decay();
  if (name == "polynomial") return polynomial(p);
  if (name == "one_parameter_exponential") return one_parameter_exponential();
  throw InvalidInput("unknown model '" + name + "'");
}

/// Documented default spaces of the catalog models. On these spaces each
/// model satisfies saturated identifiability analytically.
inline Problem default_problem(const std::string& name, int p = 2, int resolution = 201) {
  ModelSpec m = make_model(name, p);
  const auto vec = [](std::initializer_list<double> v) {
    Vector out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double d : v) out(i++) = d;
    return out;
  };
  if (name == "michaelis_menten")
    return {m, DesignSpace::interval(0.1, 3.0, resolution), ParameterSpace(vec({0.2, 0.2}), vec({3.0, 3.0}))};
  if (name == "exponential_decay")
    return {m, DesignSpace::interval(0.0, 3.0, resolution), ParameterSpace(vec({0.5, 0.2}), vec({3.0, 3.0}))};
  if (name == "polynomial")
    return {m, DesignSpace::interval(-1.0, 1.0, resolution),
            ParameterSpace(Vector::Constant(m.p, -5.0), Vector::Constant(m.p, 5.0))};
  return {m, DesignSpace::interval(0.1, 1.0, resolution), ParameterSpace(vec({0.2}), vec({1.0}))};
}

// ---------------------------------------------------------------------------
// Numeric checks of the structural conditions
// ---------------------------------------------------------------------------

/// True when mu and f are finite on every (grid point, theta) combination.
inline bool check_finite(const ModelSpec& m, const std::vector<Vector>& grid, const std::vector<Vector>& thetas) {
  for (const auto& t : thetas)
    for (const auto& x : grid) {
      if (!std::isfinite(m.mu(x, t))) return false;
      const Vector g = m.f(x, t);
      if (g.size() != m.p || !g.allFinite()) return false;
    }
  return true;
}

struct SpanReport {
  std::vector<double> min_singular_values;  // one per theta
  double floor = 1e-8;
  bool pass = false;
  double worst() const {
    return min_singular_values.empty() ? 0.0
                                       : *std::min_element(min_singular_values.begin(), min_singular_values.end());
  }
};

/// Smallest singular value of the stacked rows f_theta(x)', x in grid, for
/// every theta of the sample.
inline SpanReport check_span(const ModelSpec& m, const std::vector<Vector>& theta_sample,
                             const std::vector<Vector>& grid, double floor = 1e-8) {
  SpanReport r;
  r.floor = floor;
  r.pass = !theta_sample.empty() && static_cast<int>(grid.size()) >= m.p;
  for (const auto& t : theta_sample) {
    double smin = 0.0;
    if (static_cast<int>(grid.size()) >= m.p) {
      Matrix F(static_cast<Eigen::Index>(grid.size()), m.p);
      for (std::size_t i = 0; i < grid.size(); ++i) F.row(static_cast<Eigen::Index>(i)) = m.f(grid[i], t).transpose();
      Eigen::JacobiSVD<Matrix> svd(F);
      smin = svd.singularValues()(m.p - 1);
      if (!std::isfinite(smin)) smin = 0.0;
    }
    r.min_singular_values.push_back(smin);
    if (!(smin > floor)) r.pass = false;
  }
  return r;
}

struct SiReport {
  double min_discrepancy = std::numeric_limits<double>::infinity();
  std::size_t worst_pair = 0;
  std::size_t worst_tuple = 0;
  double floor = 1e-12;
  bool pass = false;
};

/// Sampled falsification check of saturated identifiability: the minimum over
/// all (pair, tuple) combinations of sum_j (mu(z_j, t) - mu(z_j, t'))^2. A
/// positive minimum never proves the condition.
inline SiReport check_si_numeric(const ModelSpec& m, const std::vector<std::pair<Vector, Vector>>& theta_pairs,
                                 const std::vector<std::vector<Vector>>& point_tuples, double floor = 1e-12) {
  SiReport r;
  r.floor = floor;
  for (std::size_t a = 0; a < theta_pairs.size(); ++a) {
    const auto& [t1, t2] = theta_pairs[a];
    for (std::size_t b = 0; b < point_tuples.size(); ++b) {
      double s = 0.0;
      for (const auto& z : point_tuples[b]) {
        const double d = m.mu(z, t1) - m.mu(z, t2);
        s += d * d;
      }
      if (s < r.min_discrepancy) {
        r.min_discrepancy = s;
        r.worst_pair = a;
        r.worst_tuple = b;
      }
    }
  }
  r.pass = !theta_pairs.empty() && !point_tuples.empty() && r.min_discrepancy > floor;
  return r;
}

/// Random inputs for check_si_numeric: parameter pairs at least `separation`
/// apart, and p-tuples of distinct grid points.
inline std::pair<std::vector<std::pair<Vector, Vector>>, std::vector<std::vector<Vector>>> sample_si_inputs(
    const ModelSpec& m, const std::vector<Vector>& grid, const ParameterSpace& ts, std::size_t count,
    double separation, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const auto draw = [&] {
    Vector t(ts.dim());
    for (Eigen::Index j = 0; j < t.size(); ++j) t(j) = ts.lower()(j) + u(rng) * (ts.upper()(j) - ts.lower()(j));
    return t;
  };
  std::vector<std::pair<Vector, Vector>> pairs;
  for (std::size_t attempts = 0; pairs.size() < count && attempts < 100 * count; ++attempts) {
    Vector a = draw(), b = draw();
    if ((a - b).norm() >= separation) pairs.emplace_back(std::move(a), std::move(b));
  }
  std::vector<std::vector<Vector>> tuples;
  if (static_cast<int>(grid.size()) >= m.p) {
    std::uniform_int_distribution<std::size_t> pick(0, grid.size() - 1);
    while (tuples.size() < count) {
      std::vector<std::size_t> idx;
      while (static_cast<int>(idx.size()) < m.p) {
        const std::size_t i = pick(rng);
        if (std::find(idx.begin(), idx.end(), i) == idx.end()) idx.push_back(i);
      }
      std::vector<Vector> tuple;
      for (std::size_t i : idx) tuple.push_back(grid[i]);
      tuples.push_back(std::move(tuple));
    }
  }
  return {std::move(pairs), std::move(tuples)};
}

/// Largest componentwise discrepancy between f and central differences of mu,
/// scaled by max(1, |f_j|). Step h_j = 1e-6 * max(1, |theta_j|).
inline double gradient_mismatch(const ModelSpec& m, const Vector& x, const Vector& theta) {
  const Vector g = m.f(x, theta);
  double worst = 0.0;
  for (int j = 0; j < m.p; ++j) {
    const double h = 1e-6 * std::max(1.0, std::abs(theta(j)));
    Vector tp = theta, tm = theta;
    tp(j) += h;
    tm(j) -= h;
    const double fd = (m.mu(x, tp) - m.mu(x, tm)) / (2.0 * h);
    worst = std::max(worst, std::abs(fd - g(j)) / std::max(1.0, std::abs(g(j))));
  }
  return worst;
}

/// Checks f = grad mu over a grid x theta-sample, skipping boundary thetas.
inline bool check_gradient(const ModelSpec& m, const ParameterSpace& ts, const std::vector<Vector>& grid,
                           const std::vector<Vector>& theta_sample, double tol = 1e-5) {
  if (!m.gradient_is_mu_gradient) return true;
  for (const auto& t : theta_sample) {
    if (!ts.interior(t)) continue;
    for (const auto& x : grid)
      if (gradient_mismatch(m, x, t) > tol) return false;
  }
  return true;
}

}  // namespace wynn
