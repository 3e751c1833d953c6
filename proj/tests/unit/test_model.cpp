#include <doctest.h>

#include <cmath>

#include "../support/oracles.hpp"
#include "sipcq/instance_io.hpp"
#include "sipcq/model.hpp"

using namespace sipcq;

TEST_CASE("labels and feasibility") {
  const SipInstance inst = load_instance(oracle::data_file("ex3_7.sip"));
  CHECK(label_text(inst, IndexLabel{0, 0.0, false, 0}) == "g1");
  CHECK(label_text(inst, IndexLabel{1, 5.0, false, 0}) == "g(n=5)");
  CHECK(label_text(inst, IndexLabel{1, 0.0, true, 1}) == "g(n->inf)");

  const double bad[2] = {0.0, 0.0};
  const auto f = feasibility_check(inst, bad);
  CHECK_FALSE(f.feasible);
  CHECK(f.max_violation == doctest::Approx(1.0));
  REQUIRE(f.worst);
  CHECK(f.worst->constraint == 0);

  const double good[2] = {-1.0, 0.0};
  CHECK(feasibility_check(inst, good).feasible);
}

TEST_CASE("eps-active counts match a closed form") {
  const SipInstance inst = load_instance(oracle::data_file("ex3_7.sip"));
  const double x[2] = {-1.0, 0.0};
  const auto pts = family_points(inst, 1, x, inst.max_level());
  REQUIRE(!pts.empty());
  CHECK(pts.front() == 2.0);
  for (double eps : {1e-1, 1e-2, 1e-3, 1e-4}) {
    // g(n) = -1/(3n) at this point; g1 = 0 is always active.
    int expected = 1;
    for (double n : pts)
      if (1.0 / (3.0 * n) <= eps + kActivityTol) ++expected;
    const auto r = active_set(inst, x, eps);
    CHECK(static_cast<int>(r.eps_active.size()) == expected);
    CHECK(r.active.size() == 1);
  }
}

TEST_CASE("interval family: T_eps lies in (0, eps] and the limit is detected") {
  const SipInstance inst = load_instance(oracle::data_file("ex3_5.sip"));
  const double x[2] = {-1.0, 0.0};
  for (double eps : {1e-1, 1e-2, 1e-3}) {
    const auto r = active_set(inst, x, eps);
    for (int pos : r.eps_active) {
      const auto& e = r.evaluated[pos];
      if (e.label.constraint != 1) continue;
      CHECK(e.label.t > 0.0);
      CHECK(e.label.t <= eps + 1e-12);
    }
  }
  const auto lim = limit_value_gradient(inst, IndexLabel{1, 0.0, true, -1}, x);
  REQUIRE(lim);
  CHECK(std::fabs(lim->value) < 1e-9);
  CHECK(lim->gradient[0] == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(lim->gradient[1] == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("countable limit of the gradient") {
  const SipInstance inst = load_instance(oracle::data_file("ex3_7.sip"));
  const double x[2] = {-1.0, 0.0};
  const auto lim = limit_value_gradient(inst, IndexLabel{1, 0.0, true, 1}, x);
  REQUIRE(lim);
  CHECK(std::fabs(lim->value) < 1e-6);
  CHECK(std::fabs(lim->gradient[0]) < 1e-6);
  CHECK(lim->gradient[1] == doctest::Approx(-1.0));
}

TEST_CASE("interval grids nest across levels") {
  const SipInstance inst = load_instance(oracle::data_file("ex3_5.sip"));
  const double x[2] = {-1.0, 0.0};
  const auto coarse = family_points(inst, 1, x, 1);
  const auto fine = family_points(inst, 1, x, 3);
  CHECK(fine.size() > coarse.size());
  for (double t : coarse) CHECK(std::binary_search(fine.begin(), fine.end(), t));
  for (double t : fine) {
    CHECK(t > 0.0);
    CHECK(t <= 1.0);
  }
}

TEST_CASE("moduli vanish for affine data") {
  const SipInstance inst = parse_instance(
      "[problem]\nvars = x1 x2\nminimize = x1\n[index t]\nkind = interval\nlower = 0\nupper = 1\n"
      "[constraints]\ng(t) = t*x1 - (1-t)*x2\n");
  const double x[2] = {0.0, 0.0};
  const auto m = estimate_moduli(inst, x, {1e-3, 1e-2}, 100);
  for (double r : m.r) CHECK(r < 1e-9);
  // A curved family has a positive modulus that grows with eta.
  const SipInstance q = load_instance(oracle::data_file("ex3_7.sip"));
  const double y[2] = {-1.0, 0.0};
  const auto mq = estimate_moduli(q, y, {1e-3, 1e-1}, 200);
  CHECK(mq.r[1] > mq.r[0]);
}

TEST_CASE("validation rejects malformed instances") {
  SipInstance inst = load_instance(oracle::data_file("ex3_7.sip"));
  inst.box.pop_back();
  CHECK_THROWS_AS(inst.validate(), std::invalid_argument);
  SipInstance b = load_instance(oracle::data_file("ex3_7.sip"));
  std::get<CountableIndex>(b.index_sets[0].kind).truncation = 1;
  CHECK_THROWS_AS(b.validate(), std::invalid_argument);
}
