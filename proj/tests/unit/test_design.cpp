#include "catch_amalgamated.hpp"

#include <cmath>
#include <map>
#include <numeric>

#include "support.hpp"
#include "wynn/design.hpp"

using namespace wynn;
using testing_support::pt;
using testing_support::pts;
using testing_support::random_pd;
using testing_support::vec;
using Catch::Matchers::WithinAbs;

namespace {

Design random_design(const std::vector<Vector>& grid, std::size_t k, std::mt19937_64& rng) {
  std::vector<std::size_t> idx(grid.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::shuffle(idx.begin(), idx.end(), rng);
  std::uniform_real_distribution<double> u(0.1, 1.0);
  Design d;
  double total = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    d.support.push_back(grid[idx[i]]);
    d.weights.push_back(u(rng));
    total += d.weights.back();
  }
  for (double& w : d.weights) w /= total;
  return d;
}

}  // namespace

TEST_CASE("information matrix examples", "[design]") {
  const ModelSpec line = polynomial(2);
  const Matrix m1 = info_matrix(Design::uniform(pts({2.0})), vec({0, 0}), line);  // f = (1, 2)
  CHECK(m1 == (Matrix(2, 2) << 1, 2, 2, 4).finished());
  const Matrix m2 = info_matrix(Design::uniform(pts({1.0, -1.0})), vec({0, 0}), line);
  CHECK(m2.isApprox(Matrix::Identity(2, 2), 1e-15));
}

TEST_CASE("information matrix against extended-precision summation", "[design]") {
  const ModelSpec mm = michaelis_menten();
  std::mt19937_64 rng(2);
  const auto grid = DesignSpace::interval(0.1, 3.0, 201).grid();
  for (int rep = 0; rep < 20; ++rep) {
    const Design d = random_design(grid, 5, rng);
    const Matrix m = info_matrix(d, vec({1, 1}), mm);
    long double o[2][2] = {{0, 0}, {0, 0}};
    for (std::size_t i = 0; i < d.size(); ++i) {
      const long double x = d.support[i](0);
      const long double g[2] = {x / (1.0L + x), -x / ((1.0L + x) * (1.0L + x))};
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) o[a][b] += static_cast<long double>(d.weights[i]) * g[a] * g[b];
    }
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b) CHECK(std::abs(static_cast<long double>(m(a, b)) - o[a][b]) <= 1e-14L);
    CHECK(m == m.transpose());
    CHECK(min_eigenvalue(m) >= -1e-10);
  }
}

TEST_CASE("information matrix is linear in the weights", "[design]") {
  const ModelSpec mm = michaelis_menten();
  const Vector t = vec({1.3, 0.7});
  std::mt19937_64 rng(3);
  const auto grid = DesignSpace::interval(0.1, 3.0, 51).grid();
  for (int rep = 0; rep < 20; ++rep) {
    const Design a = random_design(grid, 4, rng), b = random_design(grid, 3, rng);
    const double alpha = 0.3;
    Design mix;
    for (std::size_t i = 0; i < a.size(); ++i) {
      mix.support.push_back(a.support[i]);
      mix.weights.push_back(alpha * a.weights[i]);
    }
    for (std::size_t i = 0; i < b.size(); ++i) {
      mix.support.push_back(b.support[i]);
      mix.weights.push_back((1 - alpha) * b.weights[i]);
    }
    const Matrix lhs = info_matrix(mix, t, mm);
    const Matrix rhs = alpha * info_matrix(a, t, mm) + (1 - alpha) * info_matrix(b, t, mm);
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("adding points to an empirical design", "[design]") {
  Design xi = Design::uniform(pts({0.2}));
  xi = add_point(xi, pt(0.5), 1);
  REQUIRE(xi.size() == 2);
  CHECK(xi.weights == std::vector<double>{0.5, 0.5});
  xi = add_point(xi, pt(0.2), 2);
  REQUIRE(xi.size() == 2);
  CHECK_THAT(xi.weights[0], WithinAbs(2.0 / 3.0, 1e-16));
  CHECK_THAT(xi.weights[1], WithinAbs(1.0 / 3.0, 1e-16));
  CHECK_THROWS_AS(add_point(xi, pt(0.1), 0), InvalidInput);
  CHECK_THROWS_AS(add_point(xi, pt(0.1), -3), InvalidInput);
}

TEST_CASE("sequential adds keep weights equal to multiplicity over n", "[design]") {
  std::mt19937_64 rng(4);
  const auto grid = DesignSpace::interval(0.0, 1.0, 11).grid();
  std::uniform_int_distribution<std::size_t> pick(0, grid.size() - 1);
  std::vector<std::size_t> raw{pick(rng)};
  Design xi = Design::uniform({grid[raw[0]]});
  for (long n = 1; n < 1000; ++n) {
    raw.push_back(pick(rng));
    xi = add_point(xi, grid[raw.back()], n);
  }
  std::map<double, long> count;
  for (std::size_t i : raw) ++count[grid[i](0)];
  REQUIRE(xi.size() == count.size());
  for (std::size_t i = 0; i < xi.size(); ++i)
    CHECK(xi.weights[i] == static_cast<double>(count[xi.support[i](0)]) / 1000.0);
  CHECK_NOTHROW(xi.validate());
}

TEST_CASE("rank-one update examples", "[design]") {
  CHECK(rank_one_update(Matrix::Identity(2, 2), vec({0, 0}), 1) == 0.5 * Matrix::Identity(2, 2));
  const Vector f = vec({1, 1});
  for (long n : {1L, 5L, 99L}) {
    const Matrix r = rank_one_update(Matrix::Zero(2, 2), f, n);
    CHECK((r - f * f.transpose() / static_cast<double>(n + 1)).cwiseAbs().maxCoeff() <= 1e-16);
  }
  CHECK_THROWS_AS(rank_one_update(Matrix::Identity(2, 2), f, 0), InvalidInput);
}

TEST_CASE("iterated rank-one updates match recomputation over 200 steps", "[design]") {
  const ModelSpec mm = michaelis_menten();
  const Vector t = vec({1, 1});
  const auto grid = DesignSpace::interval(0.1, 3.0, 201).grid();
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<std::size_t> pick(0, grid.size() - 1);
  Design xi = Design::uniform({grid[pick(rng)]});
  Matrix m = info_matrix(xi, t, mm);
  for (long n = 1; n <= 200; ++n) {
    const Vector& x = grid[pick(rng)];
    m = rank_one_update(m, mm.f(x, t), n);
    xi = add_point(xi, x, n);
  }
  CHECK((m - info_matrix(xi, t, mm)).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("sensitivity examples", "[design]") {
  const ModelSpec line = polynomial(2);
  CHECK_THAT(sensitivity(pt(1.0), Matrix::Identity(2, 2), vec({0, 0}), line), WithinAbs(2.0, 1e-15));
  const Matrix m_opt = info_matrix(Design::uniform(pts({-1, 1})), vec({0, 0}), line);
  CHECK_THAT(sensitivity(pt(1.0), m_opt, vec({0, 0}), line), WithinAbs(2.0, 1e-14));
  const Matrix m3 = info_matrix(Design::uniform(pts({-1, 0, 1})), vec({0, 0}), line);
  // explicit inverse of diag(1, 2/3)
  for (const auto& x : DesignSpace::interval(-1, 1, 21).grid())
    CHECK_THAT(sensitivity(x, m3, vec({0, 0}), line), WithinAbs(1.0 + 1.5 * x(0) * x(0), 1e-13));
  CHECK_THAT(sensitivity(pt(1.0), m3, vec({0, 0}), line), WithinAbs(2.5, 1e-13));
}

TEST_CASE("singular matrices are reported with their smallest eigenvalue", "[design]") {
  const Matrix m = info_matrix(Design::uniform(pts({0.5})), vec({0, 0}), polynomial(2));
  try {
    sensitivity(pt(1.0), m, vec({0, 0}), polynomial(2));
    FAIL("expected SingularMatrix");
  } catch (const SingularMatrix& e) {
    CHECK(std::abs(e.min_eigenvalue()) < 1e-12);
  }
  CHECK_THROWS_AS(log_det(Matrix::Zero(2, 2)), SingularMatrix);
}

TEST_CASE("log determinant", "[design]") {
  CHECK(log_det(Matrix::Identity(2, 2)) == 0.0);
  CHECK_THAT(log_det(Vector(vec({2, 8})).asDiagonal().toDenseMatrix()), WithinAbs(std::log(16.0), 1e-15));
  std::mt19937_64 rng(6);
  for (int rep = 0; rep < 50; ++rep) {
    const Matrix m = random_pd(4, rng);
    const Eigen::LLT<Matrix> llt(m);
    const double oracle = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
    CHECK_THAT(log_det(m), WithinAbs(oracle, 1e-10));
  }
}

TEST_CASE("PD square root reproduces the matrix", "[design]") {
  std::mt19937_64 rng(7);
  for (int p : {1, 2, 3, 5}) {
    for (int rep = 0; rep < 20; ++rep) {
      const Matrix m = random_pd(p, rng);
      const Matrix r = SpdFactor(m).sqrt();
      CHECK((r * r - m).cwiseAbs().maxCoeff() <= 1e-10);
      CHECK((r - r.transpose()).cwiseAbs().maxCoeff() <= 1e-12);
      CHECK(min_eigenvalue(r) > 0.0);
      CHECK((psd_sqrt(m) - r).cwiseAbs().maxCoeff() <= 1e-10);
    }
  }
}

TEST_CASE("average sensitivity over a PD design equals p", "[design]") {
  std::mt19937_64 rng(8);
  for (int p : {1, 2, 3, 4}) {
    const ModelSpec m = polynomial(p);
    const auto grid = DesignSpace::interval(-1, 1, 41).grid();
    const Vector t = Vector::Zero(p);
    for (int rep = 0; rep < 25; ++rep) {
      const Design d = random_design(grid, static_cast<std::size_t>(p + 3), rng);
      const Matrix M = info_matrix(d, t, m);
      double s = 0.0;
      for (std::size_t i = 0; i < d.size(); ++i) s += d.weights[i] * sensitivity(d.support[i], M, t, m);
      CHECK_THAT(s, WithinAbs(static_cast<double>(p), 1e-8));
    }
  }
  const ModelSpec mm = michaelis_menten();
  const auto grid = DesignSpace::interval(0.1, 3.0, 201).grid();
  for (int rep = 0; rep < 25; ++rep) {
    const Design d = random_design(grid, 4, rng);
    const Matrix M = info_matrix(d, vec({1, 1}), mm);
    double s = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) s += d.weights[i] * sensitivity(d.support[i], M, vec({1, 1}), mm);
    CHECK_THAT(s, WithinAbs(2.0, 1e-8));
  }
}

TEST_CASE("oracle for the straight line agrees with a brute-force two-point scan", "[design]") {
  const ModelSpec line = polynomial(2);
  const auto grid = DesignSpace::interval(-1, 1, 201).grid();
  const OracleResult r = solve_locally_d_optimal(line, vec({0, 0}), grid, 1e-4);
  double w_lo = 0.0, w_hi = 0.0, rest = 0.0;
  for (std::size_t i = 0; i < r.design.size(); ++i) {
    const double x = r.design.support[i](0);
    // the gap rule leaves a little weight on grid neighbours of the ends
    (x <= -0.9 ? w_lo : x >= 0.9 ? w_hi : rest) += r.design.weights[i];
  }
  CHECK_THAT(w_lo, WithinAbs(0.5, 1e-3));
  CHECK_THAT(w_hi, WithinAbs(0.5, 1e-3));
  CHECK(rest <= 1e-3);
  CHECK(r.gap <= 1e-3);

  // Best equal-weight two-point design over all grid pairs.
  double best = -std::numeric_limits<double>::infinity();
  std::pair<double, double> arg;
  for (std::size_t i = 0; i < grid.size(); ++i)
    for (std::size_t j = i + 1; j < grid.size(); ++j) {
      const double a = grid[i](0), b = grid[j](0);
      const double det = 0.25 * (b - a) * (b - a);  // det of M for weights 1/2 on {a, b}
      if (det > best) {
        best = det;
        arg = {a, b};
      }
    }
  CHECK(arg.first == -1.0);
  CHECK(arg.second == 1.0);
  CHECK_THAT(r.log_det, WithinAbs(std::log(best), 1e-3));
  const Matrix mstar = info_matrix(r.design, vec({0, 0}), line);
  CHECK((mstar - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff() <= 1e-3);
}

TEST_CASE("oracle certificate holds on the grid", "[design]") {
  const ModelSpec mm = michaelis_menten();
  const auto grid = DesignSpace::interval(0.1, 3.0, 201).grid();
  const OracleResult r = solve_locally_d_optimal(mm, vec({1, 1}), grid, 1e-4);
  CHECK(r.gap <= 1e-4 * 2);
  const Matrix M = info_matrix(r.design, vec({1, 1}), mm);
  double dmax = 0.0;
  for (const auto& x : grid) dmax = std::max(dmax, sensitivity(x, M, vec({1, 1}), mm));
  CHECK(dmax <= 2.0 * (1.0 + 1e-4) + 1e-9);
  CHECK_NOTHROW(r.design.validate());
  // Two clusters: half the mass at the right end, half near x = 0.6.
  double right = 0.0, inner = 0.0;
  for (std::size_t i = 0; i < r.design.size(); ++i) {
    const double x = r.design.support[i](0);
    if (x == 3.0) right += r.design.weights[i];
    else if (x > 0.5 && x < 0.7) inner += r.design.weights[i];
  }
  CHECK_THAT(right, WithinAbs(0.5, 1e-3));
  CHECK_THAT(inner, WithinAbs(0.5, 1e-3));
  for (double w : r.design.weights) CHECK(w >= 1e-8);
}

TEST_CASE("oracle for a one-parameter model is a single point", "[design]") {
  const ModelSpec m = one_parameter_exponential();
  const auto grid = DesignSpace::interval(0.1, 1.0, 91).grid();
  const OracleResult r = solve_locally_d_optimal(m, vec({0.5}), grid, 1e-4);
  REQUIRE(r.design.size() == 1);
  CHECK(r.gap == 0.0);
  double best = 0.0, arg = 0.0;
  for (const auto& x : grid) {
    const double f = m.f(x, vec({0.5}))(0);
    if (f * f > best) {
      best = f * f;
      arg = x(0);
    }
  }
  CHECK(r.design.support[0](0) == arg);
}

TEST_CASE("an unattainable oracle tolerance ends in a convergence error", "[design]") {
  try {
    solve_locally_d_optimal(michaelis_menten(), vec({1, 1}), DesignSpace::interval(0.1, 3.0, 51).grid(), 0.0, 500);
    FAIL("expected ConvergenceError");
  } catch (const ConvergenceError& e) {
    CHECK(e.gap() > 0.0);
    CHECK(std::isfinite(e.gap()));
  }
}

TEST_CASE("D-efficiency", "[design]") {
  const ModelSpec line = polynomial(2);
  const Design opt = Design::uniform(pts({-1, 1}));
  CHECK_THAT(d_efficiency(opt, opt, vec({0, 0}), line), WithinAbs(1.0, 1e-15));
  CHECK(d_efficiency(Design::uniform(pts({-1, 0.99})), opt, vec({0, 0}), line) < 1.0);

  const auto grid = DesignSpace::interval(-1, 1, 41).grid();
  const OracleResult r = solve_locally_d_optimal(line, vec({0, 0}), grid, 1e-6);
  std::mt19937_64 rng(9);
  for (int rep = 0; rep < 50; ++rep) {
    const Design d = random_design(grid, 3, rng);
    const double e = d_efficiency(d, r.design, vec({0, 0}), line);
    CHECK(e > 0.0);
    CHECK(e <= 1.0 + 1e-9);
  }
}

TEST_CASE("design validation", "[design]") {
  Design d{pts({0.1, 0.2}), {0.5, 0.6}};
  CHECK_THROWS_AS(d.validate(), InvalidInput);
  d.weights = {0.5, 0.5};
  CHECK_NOTHROW(d.validate());
  d.support = pts({0.1, 0.1});
  CHECK_THROWS_AS(d.validate(), InvalidInput);
  CHECK_THROWS_AS(Design{}.validate(), InvalidInput);
}
