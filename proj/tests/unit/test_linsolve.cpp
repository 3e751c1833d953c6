#include <doctest.h>

#include <cmath>
#include <random>

#include "../support/oracles.hpp"
#include "sipcq/linsolve.hpp"

using namespace sipcq;

namespace {

// min c'x s.t. A x <= b as an LpProblem with slack columns and free x.
LpSolution solve_inequality_form(const Vec& c, const std::vector<Vec>& a, const Vec& b) {
  const int n = static_cast<int>(c.size());
  const int m = static_cast<int>(a.size());
  LpProblem lp;
  lp.objective = c;
  lp.objective.resize(n + m, 0.0);
  lp.a = Matrix(m, n + m);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) lp.a(i, j) = a[i][j];
    lp.a(i, n + i) = 1.0;
  }
  lp.b = b;
  lp.lower.assign(n + m, 0.0);
  for (int j = 0; j < n; ++j) lp.lower[j] = -kInf;
  return simplex_solve(lp);
}

}  // namespace

TEST_CASE("rank and nullspace") {
  const Matrix m = Matrix::from_rows({{1, 2, 3}, {2, 4, 6}, {0, 1, 1}}, 3);
  const auto r = rank_nullspace(m);
  CHECK(r.rank == 2);
  REQUIRE(r.basis.size() == 1);
  const Vec v = r.basis[0];
  CHECK(norm2(v) == doctest::Approx(1.0));
  for (int i = 0; i < 3; ++i) CHECK(std::fabs(dot(m.row(i), v)) < 1e-12);
  CHECK(independent_subset({{1, 0}, {2, 0}, {0, 1}, {1, 1}}) == std::vector<int>{0, 2});
}

TEST_CASE("dense solve") {
  const Matrix a = Matrix::from_rows({{2, 1}, {1, 3}}, 2);
  const auto x = solve_dense(a, {3, 5});
  REQUIRE(x);
  CHECK((*x)[0] == doctest::Approx(0.8));
  CHECK((*x)[1] == doctest::Approx(1.4));
  CHECK_FALSE(solve_dense(Matrix::from_rows({{1, 2}, {2, 4}}, 2), {1, 2}));
}

TEST_CASE("simplex on small textbook problems") {
  // max x + y s.t. x + 2y <= 4, 3x + y <= 6  -> (1.6, 1.2)
  auto s = solve_inequality_form({-1, -1}, {{1, 2}, {3, 1}, {-1, 0}, {0, -1}}, {4, 6, 0, 0});
  REQUIRE(s.status == LpStatus::Optimal);
  CHECK(s.objective == doctest::Approx(-2.8));
  CHECK(s.x[0] == doctest::Approx(1.6));
  // Infeasible.
  s = solve_inequality_form({1, 0}, {{1, 0}, {-1, 0}}, {-1, -1});
  CHECK(s.status == LpStatus::Infeasible);
  // Unbounded.
  s = solve_inequality_form({-1, 0}, {{0, 1}}, {1});
  CHECK(s.status == LpStatus::Unbounded);
  // Bounds and a degenerate vertex.
  LpProblem lp;
  lp.objective = {1, 1};
  lp.a = Matrix::from_rows({{1, 1}}, 2);
  lp.b = {0};
  lp.lower = {-1, -kInf};
  lp.upper = {2, 1};
  const auto r = simplex_solve(lp);
  REQUIRE(r.status == LpStatus::Optimal);
  CHECK(r.objective == doctest::Approx(0.0));
  CHECK(r.x[0] + r.x[1] == doctest::Approx(0.0));
  CHECK(r.x[0] >= -1 - 1e-12);
  CHECK(r.x[1] <= 1 + 1e-12);
}

TEST_CASE("simplex agrees with vertex enumeration") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1, 1);
  int optimal = 0;
  for (int k = 0; k < 30; ++k) {
    const int n = 2 + k % 2;
    const int m = 3 + k % 3;
    std::vector<Vec> a;
    Vec b;
    for (int i = 0; i < m; ++i) {
      Vec row(n);
      for (auto& v : row) v = u(rng);
      a.push_back(row);
      b.push_back(u(rng));
    }
    for (int j = 0; j < n; ++j) {
      Vec e(n, 0.0);
      e[j] = 1;
      a.push_back(e);
      b.push_back(5);
      e[j] = -1;
      a.push_back(e);
      b.push_back(5);
    }
    Vec c(n);
    for (auto& v : c) v = u(rng);
    const auto ref = oracle::vertex_enumeration(c, a, b);
    const auto s = solve_inequality_form(c, a, b);
    if (!ref.feasible) {
      CHECK(s.status == LpStatus::Infeasible);
      continue;
    }
    REQUIRE(s.status == LpStatus::Optimal);
    CHECK(std::fabs(s.objective - ref.objective) <= 1e-8);
    ++optimal;
  }
  CHECK(optimal > 10);
}

TEST_CASE("stationarity feasibility certificates and separators") {
  // 0 in co{(0,1)} + cone{(1,0)}: no; separator a with <a,(0,1)> < 0.
  auto r = stationarity_feasibility({{0, 1}}, {{1, 0}}, {}, 2, 1e-9);
  REQUIRE(r.status == FeasibilityStatus::Separated);
  CHECK(dot(r.separator, {0, 1}) < 0);
  CHECK(dot(r.separator, {1, 0}) <= 1e-12);
  // Adding (0,-1) makes it a member.
  r = stationarity_feasibility({{0, 1}}, {{1, 0}, {0, -1}}, {}, 2, 1e-9);
  REQUIRE(r.status == FeasibilityStatus::Member);
  CHECK(r.certificate.lambda[1] == doctest::Approx(1.0));
  CHECK(r.certificate.lambda[0] == doctest::Approx(0.0));
  // Lineality.
  r = stationarity_feasibility({{1, 1}}, {}, {{1, 1}}, 2, 1e-9);
  REQUIRE(r.status == FeasibilityStatus::Member);
  CHECK(r.certificate.y[0] == doctest::Approx(-1.0));
}

TEST_CASE("cone membership residuals are independently small") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int k = 0; k < 40; ++k) {
    const int d = 2 + k % 3;
    std::vector<Vec> g(3 + k % 5, Vec(d));
    for (auto& v : g)
      for (auto& x : v) x = u(rng);
    Vec v(d, 0.0);
    for (auto& gi : g) {
      const double w = std::max(0.0, u(rng));
      for (int i = 0; i < d; ++i) v[i] += w * gi[i];
    }
    const auto r = cone_feasibility(g, {}, v, 1e-9);
    REQUIRE(r.status == FeasibilityStatus::Member);
    Vec res = v;
    for (std::size_t j = 0; j < g.size(); ++j) {
      CHECK(r.certificate.lambda[j] >= 0);
      for (int i = 0; i < d; ++i) res[i] -= r.certificate.lambda[j] * g[j][i];
    }
    CHECK(norm_inf(res) <= 1e-8);
  }
}

TEST_CASE("max margin direction") {
  auto m = max_margin_direction({{1, 0}, {0, 1}}, {}, 2);
  CHECK(m.margin == doctest::Approx(1.0));
  CHECK(m.direction[0] == doctest::Approx(-1.0));
  m = max_margin_direction({{1, 0}, {-1, 0}}, {}, 2);
  CHECK(m.margin <= 1e-12);
  m = max_margin_direction({}, {}, 2);
  CHECK(std::isinf(m.margin));
  // Lineality forces x2 = 0.
  m = max_margin_direction({{1, 1}}, {{0, 1}}, 2);
  CHECK(m.margin == doctest::Approx(1.0));
  CHECK(std::fabs(m.direction[1]) < 1e-12);
}
