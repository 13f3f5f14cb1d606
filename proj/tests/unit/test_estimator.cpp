#include "catch_amalgamated.hpp"

#include <cmath>

#include "support.hpp"
#include "wynn/estimator.hpp"

using namespace wynn;
using testing_support::pt;
using testing_support::pts;
using testing_support::vec;
using Catch::Matchers::WithinAbs;

namespace {

DataBatch noiseless(const ModelSpec& m, const std::vector<Vector>& xs, const Vector& theta) {
  DataBatch b;
  for (const auto& x : xs) {
    b.points.push_back(x);
    b.responses.push_back(m.mu(x, theta));
  }
  return b;
}

DataBatch random_batch(const ModelSpec& m, const Problem& pr, const Vector& theta, std::size_t n, double sigma,
                       std::mt19937_64& rng) {
  const auto grid = pr.design_space.grid();
  std::uniform_int_distribution<std::size_t> pick(0, grid.size() - 1);
  std::normal_distribution<double> e(0.0, sigma);
  DataBatch b;
  for (std::size_t i = 0; i < n; ++i) {
    b.points.push_back(grid[pick(rng)]);
    b.responses.push_back(m.mu(b.points.back(), theta) + e(rng));
  }
  return b;
}

Vector random_interior(const ParameterSpace& s, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.05, 0.95);
  Vector t(s.dim());
  for (Eigen::Index j = 0; j < t.size(); ++j) t(j) = s.lower()(j) + u(rng) * (s.upper()(j) - s.lower()(j));
  return t;
}

}  // namespace

TEST_CASE("sum of squares examples", "[estimator]") {
  const ModelSpec mm = michaelis_menten();
  const DataBatch b = noiseless(mm, pts({0.1, 0.5, 1, 2, 3}), vec({1, 1}));
  CHECK(sse(b, vec({1, 1}), mm) == 0.0);

  ModelSpec zero;
  zero.name = "zero";
  zero.p = 1;
  zero.mu = [](const Vector&, const Vector&) { return 0.0; };
  zero.f = [](const Vector&, const Vector&) { return Vector::Zero(1).eval(); };
  CHECK(sse(DataBatch{pts({0.3}), {1.0}}, vec({0}), zero) == 1.0);
}

TEST_CASE("sum of squares against extended precision; grouped form agrees", "[estimator]") {
  const Problem pr = default_problem("michaelis_menten", 2, 21);
  std::mt19937_64 rng(10);
  for (int rep = 0; rep < 50; ++rep) {
    const DataBatch b = random_batch(pr.model, pr, vec({1, 1}), 300, 0.1, rng);
    const Vector t = random_interior(pr.parameter_space, rng);
    long double o = 0.0L;
    for (std::size_t i = 0; i < b.size(); ++i) {
      const long double x = b.points[i](0);
      const long double r = b.responses[i] - t(0) * x / (t(1) + x);
      o += r * r;
    }
    const double s = sse(b, t, pr.model);
    CHECK(std::abs(static_cast<long double>(s) - o) <= 1e-12L * std::max(1.0L, o));
    const GroupedData g = GroupedData::from(b);
    CHECK(g.groups() <= 21);
    CHECK(g.total() == 300);
    CHECK(std::abs(static_cast<long double>(g.sse(t, pr.model)) - o) <= 1e-10L * std::max(1.0L, o));
  }
}

TEST_CASE("gradient examples", "[estimator]") {
  const ModelSpec mm = michaelis_menten();
  const DataBatch b = noiseless(mm, pts({0.1, 1, 3}), vec({1, 1}));
  CHECK(sse_gradient(b, vec({1, 1}), mm).cwiseAbs().maxCoeff() == 0.0);

  const Vector g = sse_gradient(DataBatch{pts({1.0}), {0.0}}, vec({1, 0}), polynomial(2));
  CHECK(g == vec({2, 2}));
}

TEST_CASE("gradient matches central differences of the sum of squares", "[estimator]") {
  std::mt19937_64 rng(11);
  for (const auto& name : builtin_model_names()) {
    INFO(name);
    const Problem pr = default_problem(name, 3, 31);
    for (int rep = 0; rep < 100; ++rep) {
      const Vector truth = random_interior(pr.parameter_space, rng);
      const DataBatch b = random_batch(pr.model, pr, truth, 20, 0.2, rng);
      const Vector t = random_interior(pr.parameter_space, rng);
      const SseGradient g = sse_gradient(b, t, pr.model, pr.parameter_space);
      CHECK_FALSE(g.on_boundary);
      double scale = 0.0;
      Vector fd(pr.model.p);
      for (int j = 0; j < pr.model.p; ++j) {
        const double h = 1e-5 * std::max(1.0, std::abs(t(j)));
        Vector tp = t, tm = t;
        tp(j) += h;
        tm(j) -= h;
        fd(j) = (sse(b, tp, pr.model) - sse(b, tm, pr.model)) / (2 * h);
        scale = std::max(scale, std::abs(fd(j)));
      }
      CHECK((g.gradient - fd).cwiseAbs().maxCoeff() <= 1e-5 * std::max(1.0, scale));
    }
  }
}

TEST_CASE("gradient flags boundary parameters", "[estimator]") {
  const Problem pr = default_problem("michaelis_menten");
  const DataBatch b = noiseless(pr.model, pts({0.5, 2}), vec({1, 1}));
  CHECK(sse_gradient(b, vec({0.2, 1}), pr.model, pr.parameter_space).on_boundary);
  CHECK_FALSE(sse_gradient(b, vec({0.5, 1}), pr.model, pr.parameter_space).on_boundary);
}

TEST_CASE("noiseless recovery with ten distinct points", "[estimator]") {
  for (const auto& name : builtin_model_names()) {
    INFO(name);
    const Problem pr = default_problem(name, 3);
    const auto grid = pr.design_space.grid();
    std::vector<Vector> xs;
    for (std::size_t i = 0; i < 10; ++i) xs.push_back(grid[i * (grid.size() - 1) / 9]);
    const Vector truth = pr.parameter_space.center() + 0.1 * (pr.parameter_space.upper() - pr.parameter_space.center());
    const LSFit fit = fit_ls(noiseless(pr.model, xs, truth), pr.model, pr.parameter_space);
    CHECK((fit.theta_hat - truth).norm() <= 1e-6);
    CHECK(fit.sse_value <= fit.grid_sse);
    CHECK(fit.converged);
  }
}

TEST_CASE("a single observation is flagged non-unique", "[estimator]") {
  const Problem pr = default_problem("michaelis_menten");
  const DataBatch b{pts({1.0}), {0.5}};
  const LSFit fit = fit_ls(b, pr.model, pr.parameter_space);
  CHECK(fit.non_unique);
  CHECK(pr.parameter_space.contains(fit.theta_hat));
  // exhaustive scan of the same 15 x 15 grid
  double grid_min = std::numeric_limits<double>::infinity();
  for (const auto& t : pr.parameter_space.grid(15)) grid_min = std::min(grid_min, sse(b, t, pr.model));
  CHECK(fit.sse_value <= grid_min);
  CHECK(fit.sse_value <= 1e-16);
}

TEST_CASE("boundary truth is recovered on the boundary", "[estimator]") {
  const Problem pr = default_problem("michaelis_menten");
  const Vector truth = vec({3.0, 0.2});  // corner of the box
  const DataBatch b = noiseless(pr.model, pts({0.1, 0.3, 0.8, 1.5, 3.0}), truth);
  const LSFit fit = fit_ls(b, pr.model, pr.parameter_space);
  CHECK((fit.theta_hat - truth).norm() <= 1e-8);
  CHECK(fit.theta_hat(0) <= 3.0);
  CHECK(fit.theta_hat(1) >= 0.2);

  // truth just outside in theta_2: projection keeps the estimate on the bound
  const DataBatch out = noiseless(pr.model, pts({0.1, 0.3, 0.8, 1.5, 3.0}), vec({1.0, 0.1}));
  const LSFit f2 = fit_ls(out, pr.model, pr.parameter_space);
  CHECK(f2.theta_hat(1) == 0.2);
  double dense = std::numeric_limits<double>::infinity();
  for (const auto& t : pr.parameter_space.grid(301)) dense = std::min(dense, sse(out, t, pr.model));
  CHECK(f2.sse_value <= dense + 1e-12);
}

TEST_CASE("fit never does worse than the coarse grid", "[estimator]") {
  const Problem pr = default_problem("exponential_decay");
  std::mt19937_64 rng(12);
  for (int rep = 0; rep < 30; ++rep) {
    const DataBatch b = random_batch(pr.model, pr, random_interior(pr.parameter_space, rng), 15, 0.3, rng);
    const LSFit fit = fit_ls(b, pr.model, pr.parameter_space);
    CHECK(fit.sse_value <= fit.grid_sse);
    CHECK(fit.sse_value >= 0.0);
    CHECK(fit.sigma2_hat == fit.sse_value / 15.0);
    CHECK(pr.parameter_space.contains(fit.theta_hat));
  }
}

TEST_CASE("local phase is monotone", "[estimator]") {
  const Problem pr = default_problem("michaelis_menten");
  std::mt19937_64 rng(13);
  for (int rep = 0; rep < 10; ++rep) {
    const DataBatch b = random_batch(pr.model, pr, vec({1, 1}), 40, 0.1, rng);
    double prev = std::numeric_limits<double>::infinity();
    for (int k = 0; k <= 12; ++k) {
      FitSettings s;
      s.max_iterations = k;
      const LSFit fit = fit_ls(b, pr.model, pr.parameter_space, s);
      CHECK(fit.sse_value <= prev);
      prev = fit.sse_value;
    }
  }
}

TEST_CASE("response shift moves only the intercept of a polynomial", "[estimator]") {
  const Problem pr = default_problem("polynomial", 3);
  std::mt19937_64 rng(14);
  for (int rep = 0; rep < 10; ++rep) {
    DataBatch b = random_batch(pr.model, pr, vec({0.5, -1, 2}), 30, 0.2, rng);
    const LSFit a = fit_ls(b, pr.model, pr.parameter_space);
    for (double& y : b.responses) y += 0.75;
    const LSFit c = fit_ls(b, pr.model, pr.parameter_space);
    CHECK_THAT(c.theta_hat(0) - a.theta_hat(0), WithinAbs(0.75, 1e-8));
    CHECK_THAT(c.theta_hat(1), WithinAbs(a.theta_hat(1), 1e-8));
    CHECK_THAT(c.theta_hat(2), WithinAbs(a.theta_hat(2), 1e-8));
  }
}

TEST_CASE("non-finite objective everywhere is a fit failure", "[estimator]") {
  ModelSpec bad;
  bad.name = "bad";
  bad.p = 1;
  bad.mu = [](const Vector&, const Vector&) { return std::nan(""); };
  bad.f = [](const Vector&, const Vector&) { return Vector::Zero(1).eval(); };
  CHECK_THROWS_AS(fit_ls(DataBatch{pts({0.1}), {1.0}}, bad, ParameterSpace(vec({0}), vec({1}))), FitFailure);
  CHECK_THROWS_AS(fit_ls(DataBatch{}, michaelis_menten(), default_problem("michaelis_menten").parameter_space),
                  InvalidInput);
}

TEST_CASE("warm start can only improve the fit", "[estimator]") {
  const Problem pr = default_problem("michaelis_menten");
  std::mt19937_64 rng(15);
  const LeastSquaresFitter fitter(pr.model, pr.parameter_space);
  for (int rep = 0; rep < 10; ++rep) {
    const DataBatch b = random_batch(pr.model, pr, vec({1, 1}), 25, 0.1, rng);
    const LSFit cold = fitter.fit(b);
    const LSFit warm = fitter.fit(b, random_interior(pr.parameter_space, rng));
    CHECK(warm.sse_value <= cold.sse_value);
  }
}
