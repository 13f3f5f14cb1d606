#include "catch_amalgamated.hpp"

#include <cmath>

#include "support.hpp"
#include "wynn/model.hpp"

using namespace wynn;
using testing_support::pt;
using testing_support::pts;
using testing_support::vec;
using Catch::Matchers::WithinAbs;

TEST_CASE("mean responses of the catalog models", "[model]") {
  CHECK_THAT(eval_mu(michaelis_menten(), pt(1.0), vec({1, 1})), WithinAbs(0.5, 1e-15));
  CHECK_THAT(eval_mu(exponential_decay(), pt(0.0), vec({2, 3})), WithinAbs(2.0, 1e-15));
  CHECK_THAT(eval_mu(polynomial(2), pt(0.5), vec({1, 2})), WithinAbs(2.0, 1e-15));
  CHECK_THAT(eval_mu(one_parameter_exponential(), pt(1.0), vec({0.5})), WithinAbs(std::exp(-0.5), 1e-15));
}

TEST_CASE("regressors of the catalog models", "[model]") {
  const Vector g = eval_f(michaelis_menten(), pt(1.0), vec({1, 1}));
  CHECK_THAT(g(0), WithinAbs(0.5, 1e-15));
  CHECK_THAT(g(1), WithinAbs(-0.25, 1e-15));
  const Vector h = eval_f(polynomial(2), pt(0.7), vec({3, -1}));
  CHECK(h(0) == 1.0);
  CHECK(h(1) == 0.7);
}

TEST_CASE("domain violations are rejected", "[model]") {
  const Problem pr = default_problem("michaelis_menten");
  CHECK_THROWS_AS(eval_mu(pr.model, pr.design_space, pr.parameter_space, pt(5.0), vec({1, 1})), InvalidInput);
  CHECK_THROWS_AS(eval_f(pr.model, pr.design_space, pr.parameter_space, pt(1.0), vec({0.0, 1})), InvalidInput);
  CHECK_THROWS_AS(eval_mu(pr.model, pt(1.0), vec({1, 1, 1})), InvalidInput);
  CHECK_THROWS_AS(eval_mu(pr.model, pt(std::nan("")), vec({1, 1})), InvalidInput);
  CHECK_NOTHROW(eval_mu(pr.model, pr.design_space, pr.parameter_space, pt(3.0), vec({3, 3})));
}

TEST_CASE("regressor is the mean gradient for every built-in model", "[model]") {
  for (const auto& name : builtin_model_names()) {
    INFO(name);
    const Problem pr = default_problem(name, 3, 41);
    const auto thetas = pr.parameter_space.grid(5);
    CHECK(check_gradient(pr.model, pr.parameter_space, pr.design_space.grid(), thetas));
    double worst = 0.0;
    for (const auto& t : thetas) {
      if (!pr.parameter_space.interior(t)) continue;
      for (const auto& x : pr.design_space.grid()) worst = std::max(worst, gradient_mismatch(pr.model, x, t));
    }
    CHECK(worst <= 1e-5);
  }
}

TEST_CASE("span check", "[model]") {
  SECTION("line on three points passes") {
    const auto r = check_span(polynomial(2), {vec({0, 0})}, pts({-1, 0, 1}));
    CHECK(r.pass);
    CHECK(r.worst() > 0.0);
  }
  SECTION("constant regressor fails") {
    ModelSpec m;
    m.name = "constant";
    m.p = 2;
    m.mu = [](const Vector&, const Vector& t) { return t(0); };
    m.f = [](const Vector&, const Vector&) { return vec({1, 0}); };
    const auto r = check_span(m, {vec({0, 0})}, pts({-1, 0, 1}));
    CHECK_FALSE(r.pass);
    CHECK(r.worst() < 1e-12);
  }
  SECTION("Michaelis-Menten, singular values agree with the Gram eigenvalues") {
    const auto grid = DesignSpace::interval(0.1, 3.0, 30).grid();
    const auto thetas = ParameterSpace(vec({0.2, 0.2}), vec({3, 3})).grid(5);
    REQUIRE(thetas.size() == 25);
    const auto r = check_span(michaelis_menten(), thetas, grid);
    CHECK(r.pass);
    for (std::size_t k = 0; k < thetas.size(); ++k) {
      Matrix gram = Matrix::Zero(2, 2);
      for (const auto& x : grid) {
        const Vector f = michaelis_menten().f(x, thetas[k]);
        gram += f * f.transpose();
      }
      const double oracle = std::sqrt(Eigen::SelfAdjointEigenSolver<Matrix>(gram).eigenvalues()(0));
      CHECK_THAT(r.min_singular_values[k], WithinAbs(oracle, 1e-9 * std::max(1.0, oracle)));
    }
  }
}

TEST_CASE("sampled identifiability check", "[model]") {
  SECTION("line through two distinct points") {
    const auto [pairs, tuples] = sample_si_inputs(polynomial(2), DesignSpace::interval(-1, 1, 21).grid(),
                                                  ParameterSpace(vec({-5, -5}), vec({5, 5})), 200, 0.1, 3);
    CHECK(check_si_numeric(polynomial(2), pairs, tuples).pass);
  }
  SECTION("Michaelis-Menten, 500 pairs and tuples; minimum equals a rescan") {
    const Problem pr = default_problem("michaelis_menten");
    const auto [pairs, tuples] =
        sample_si_inputs(pr.model, pr.design_space.grid(), pr.parameter_space, 500, 0.05, 11);
    REQUIRE(pairs.size() == 500);
    REQUIRE(tuples.size() == 500);
    const auto r = check_si_numeric(pr.model, pairs, tuples);
    CHECK(r.pass);
    double s = 0.0;
    for (const auto& z : tuples[r.worst_tuple]) {
      const double d = pr.model.mu(z, pairs[r.worst_pair].first) - pr.model.mu(z, pairs[r.worst_pair].second);
      s += d * d;
    }
    CHECK(s == r.min_discrepancy);
  }
  SECTION("sign-symmetric model fails") {
    ModelSpec m;
    m.name = "square";
    m.p = 1;
    m.mu = [](const Vector& x, const Vector& t) { return t(0) * t(0) * x(0); };
    m.f = [](const Vector& x, const Vector& t) { return Vector::Constant(1, 2.0 * t(0) * x(0)); };
    const auto r = check_si_numeric(m, {{vec({1}), vec({-1})}}, {pts({0.5})});
    CHECK_FALSE(r.pass);
    CHECK(r.min_discrepancy == 0.0);
  }
}

TEST_CASE("built-in models pass the checks on their default spaces", "[model]") {
  for (const auto& name : builtin_model_names()) {
    INFO(name);
    const Problem pr = default_problem(name, 3);
    const auto grid = pr.design_space.grid();
    const auto thetas = pr.parameter_space.grid(5);
    CHECK(check_finite(pr.model, grid, thetas));
    CHECK(check_span(pr.model, thetas, grid).pass);
    const auto [pairs, tuples] = sample_si_inputs(pr.model, grid, pr.parameter_space, 200, 0.05, 5);
    CHECK(check_si_numeric(pr.model, pairs, tuples).pass);
  }
}

TEST_CASE("evaluators are pure", "[model]") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.2, 3.0);
  for (const auto& name : builtin_model_names()) {
    const ModelSpec a = make_model(name), b = make_model(name);
    for (int i = 0; i < 50; ++i) {
      const Vector x = pt(u(rng));
      Vector t(a.p);
      for (int j = 0; j < a.p; ++j) t(j) = u(rng);
      CHECK(a.mu(x, t) == b.mu(x, t));
      CHECK(a.mu(x, t) == a.mu(x, t));
      CHECK(a.f(x, t) == b.f(x, t));
    }
  }
}

TEST_CASE("design space invariants", "[model]") {
  CHECK_THROWS_AS(DesignSpace::interval(1.0, 1.0, 5), InvalidInput);
  CHECK_THROWS_AS(DesignSpace::interval(0.0, 1.0, 1), InvalidInput);
  CHECK_THROWS_AS(DesignSpace::finite({}), InvalidInput);
  CHECK_THROWS_AS(DesignSpace::finite(pts({0.1, 0.2, 0.1})), InvalidInput);
  CHECK_THROWS_AS(ParameterSpace(vec({1, 0}), vec({0, 1})), InvalidInput);

  const auto grid = DesignSpace::interval(0.1, 3.0, 201).grid();
  REQUIRE(grid.size() == 201);
  CHECK(grid.front()(0) == 0.1);
  CHECK(grid.back()(0) == 3.0);
  for (std::size_t i = 1; i < grid.size(); ++i) CHECK(grid[i](0) > grid[i - 1](0));

  const auto box = DesignSpace::box(vec({0, 0}), vec({1, 2}), {3, 2}).grid();
  REQUIRE(box.size() == 6);
  CHECK(box[1] == vec({0, 2}));  // last axis fastest
  CHECK(box[2] == vec({0.5, 0}));

  const auto f = DesignSpace::finite(pts({0.3, -0.2}));
  CHECK(f.contains(pt(0.3)));
  CHECK_FALSE(f.contains(pt(0.31)));
  CHECK(f.merge_tolerance() == 0.0);
  CHECK(f.diameter() == Catch::Approx(0.5));
}

TEST_CASE("parameter grid and clamping", "[model]") {
  const ParameterSpace s(vec({0, 1}), vec({2, 1}));
  const auto g = s.grid(3);
  REQUIRE(g.size() == 3);  // degenerate second axis
  CHECK(g[2] == vec({2, 1}));
  CHECK(s.clamp(vec({-1, 5})) == vec({0, 1}));
  CHECK_FALSE(s.interior(vec({1, 1})));
  CHECK(s.contains(vec({1, 1})));
}
