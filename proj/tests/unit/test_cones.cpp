#include <doctest.h>

#include <cmath>
#include <random>

#include "../support/oracles.hpp"
#include "sipcq/cones.hpp"
#include "sipcq/instance_io.hpp"

using namespace sipcq;

namespace {

Vec combine(const std::vector<Vec>& g, const Vec& lambda) {
  Vec v(g.front().size(), 0.0);
  for (std::size_t j = 0; j < g.size(); ++j)
    for (std::size_t i = 0; i < v.size(); ++i) v[i] += lambda[j] * g[j][i];
  return v;
}

}  // namespace

TEST_CASE("Caratheodory reduction keeps at most d+1 generators") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int k = 0; k < 30; ++k) {
    const int d = 2 + k % 3;
    std::vector<Vec> g(8 + k % 6, Vec(d));
    for (auto& v : g)
      for (auto& x : v) x = u(rng);
    FeasibilityCertificate cert;
    cert.lambda.resize(g.size());
    for (auto& l : cert.lambda) l = std::fabs(u(rng));
    const Vec v = combine(g, cert.lambda);
    const auto red = caratheodory_reduce(cert, g, {}, v);
    int support = 0;
    for (double l : red.lambda) {
      CHECK(l >= 0.0);
      if (l > 0.0) ++support;
    }
    CHECK(support <= d + 1);
    const Vec w = combine(g, red.lambda);
    for (int i = 0; i < d; ++i) CHECK(std::fabs(w[i] - v[i]) <= 1e-8);
  }
}

TEST_CASE("membership with and without rays") {
  GeneratedCone c;
  c.dimension = 2;
  c.generators = {{"a", {1, 0}}};
  c.rays = {LimitRay{"r", {0, -1}, RayOrigin::Declared, false, 0.0}};
  CHECK(membership(c, {1, -1}, 1e-9, true).status == FeasibilityStatus::Member);
  CHECK(membership(c, {1, -1}, 1e-9, false).status == FeasibilityStatus::Separated);
  c.lineality = {{0, 1}};
  CHECK(membership(c, {1, 5}, 1e-9, false).status == FeasibilityStatus::Member);
}

TEST_CASE("accumulation rays recover the limit direction") {
  std::vector<TailTerm> tail;
  for (int k = 0; k < kTailTerms; ++k) {
    const double h = 1.0 / (1000.0 * (k + 1));
    tail.push_back({h, {h, -1.0 - h}});
  }
  const auto est = accumulation_rays(tail, {}, "g(n->inf)");
  REQUIRE(est.rays.size() == 1);
  CHECK(est.rays[0].direction[0] == doctest::Approx(0.0).epsilon(1e-6));
  CHECK(est.rays[0].direction[1] == doctest::Approx(-1.0));
  CHECK(est.rays[0].origin == RayOrigin::Extrapolated);

  const auto hinted = accumulation_rays(tail, {{0, -3}}, "g");
  REQUIRE(hinted.rays.size() == 1);
  CHECK(hinted.rays[0].origin == RayOrigin::Declared);
  CHECK(hinted.rays[0].direction[1] == doctest::Approx(-1.0));
}

TEST_CASE("closedness diagnostic") {
  // cone{(1, -k)} over k = 1..N tends to the ray (0,-1), never attained.
  std::vector<Vec> g;
  for (int k = 1; k <= 50; ++k) g.push_back({1.0, -static_cast<double>(k)});
  std::vector<LimitRay> rays{LimitRay{"lim", {0, -1}, RayOrigin::Extrapolated, false, 0.0}};
  auto v = closedness_diagnostic(g, rays, false);
  REQUIRE(v.status == Closedness::NotClosed);
  REQUIRE(v.witness);
  CHECK(std::fabs(dot(v.witness->functional, {0, -1})) <= 1e-9);
  for (const auto& x : g) CHECK(dot(v.witness->functional, x) < 0.0);

  // Once the ray is attained the witness disappears.
  mark_attained(rays, {{0, -2}});
  CHECK(rays[0].attained);
  g.push_back({0, -2});
  v = closedness_diagnostic(g, rays, false);
  CHECK(v.status != Closedness::NotClosed);

  CHECK(closedness_diagnostic({{1, 0}, {0, 1}}, {}, true).status == Closedness::Closed);
  CHECK(closedness_diagnostic({{1, 0}, {0, 1}}, {}, false).status == Closedness::Closed);
}

TEST_CASE("augmented generators are (grad, <grad,x> - g)") {
  const SipInstance inst = load_instance(oracle::data_file("ex3_7.sip"));
  const double x[2] = {-1.0, 0.0};
  const auto aug = augmented_generators(inst, x);
  REQUIRE(!aug.empty());
  for (const auto& a : aug) {
    REQUIRE(a.v.size() == 3);
    // For g(n): grad = (x1^2/n, -1), value = x1^3/(3n) - x2.
    if (a.label == "g1") {
      CHECK(a.v[0] == 1.0);
      CHECK(a.v[2] == doctest::Approx(-1.0 - 0.0));
    }
  }
  const auto& e = aug[1];
  const double nval = 2.0;  // first family member
  CHECK(e.v[0] == doctest::Approx(1.0 / nval));
  CHECK(e.v[1] == doctest::Approx(-1.0));
  CHECK(e.v[2] == doctest::Approx(-1.0 / nval - (-1.0 / (3 * nval))));
}
