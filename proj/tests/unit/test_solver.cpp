#include <doctest.h>

#include <cmath>

#include "../support/oracles.hpp"
#include "sipcq/instance_io.hpp"
#include "sipcq/solver.hpp"

using namespace sipcq;

namespace {

// Brute-force grid minimum of f over {x in [-2,2]^2 : feasible(x)}.
template <class F, class G>
double grid_min(F f, G feasible, int n = 2001) {
  double best = kInf;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double x = -2.0 + 4.0 * i / (n - 1);
      const double y = -2.0 + 4.0 * j / (n - 1);
      if (feasible(x, y)) best = std::min(best, f(x, y));
    }
  return best;
}

}  // namespace

TEST_CASE("convex toy reaches the projection of the origin") {
  const SipInstance inst = load_instance(oracle::data_file("convex_toy.sip"));
  const auto r = solve(inst, SolverConfig::from_instance(inst));
  REQUIRE(r.trace.status == SolverStatus::Converged);
  CHECK(r.x[0] == doctest::Approx(-0.5).epsilon(1e-6));
  CHECK(r.x[1] == doctest::Approx(-0.5).epsilon(1e-6));
  const double ref = grid_min([](double x, double y) { return x * x + y * y; },
                              [](double x, double y) { return x + y + 1 <= 1e-12; });
  CHECK(std::fabs(cost_value(inst, r.x) - ref) <= 1e-4);
}

TEST_CASE("disk: semi-infinite convex problem against a grid oracle") {
  const SipInstance inst = load_instance(oracle::data_file("disk.sip"));
  const auto r = solve(inst, SolverConfig::from_instance(inst));
  REQUIRE(r.trace.status == SolverStatus::Converged);
  // Feasible for the analytic description of the family.
  CHECK(std::hypot(r.x[0], r.x[1]) <= 1.0 + 1e-6);
  const double ref = grid_min([](double x, double y) { return x + y; },
                              [](double x, double y) { return x * x + y * y <= 1.0; });
  CHECK(cost_value(inst, r.x) <= ref + 1e-4);
  CHECK(cost_value(inst, r.x) >= -std::sqrt(2.0) - 1e-6);
}

TEST_CASE("countable system converges to the known minimizer") {
  const SipInstance inst = load_instance(oracle::data_file("ex3_7.sip"));
  const auto r = solve(inst, SolverConfig::from_instance(inst));
  REQUIRE(r.trace.status == SolverStatus::Converged);
  CHECK(std::fabs(r.x[0] + 1.0) <= 1e-6);
  CHECK(std::fabs(r.x[1]) <= 1e-6);
  CHECK(feasibility_check(inst, r.x).feasible);
}

TEST_CASE("runs are deterministic") {
  const SipInstance inst = load_instance(oracle::data_file("disk.sip"));
  const auto cfg = SolverConfig::from_instance(inst);
  const auto a = solve(inst, cfg);
  const auto b = solve(inst, cfg);
  REQUIRE(a.trace.iterations.size() == b.trace.iterations.size());
  CHECK(a.x == b.x);
  for (std::size_t k = 0; k < a.trace.iterations.size(); ++k) {
    CHECK(a.trace.iterations[k].working_set == b.trace.iterations[k].working_set);
    CHECK(a.trace.iterations[k].x == b.trace.iterations[k].x);
  }
}

TEST_CASE("iteration limit and config validation") {
  const SipInstance inst = load_instance(oracle::data_file("disk.sip"));
  SolverConfig cfg = SolverConfig::from_instance(inst);
  cfg.max_outer = 1;
  CHECK(solve(inst, cfg).trace.status == SolverStatus::IterationLimit);
  cfg.max_outer = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  SipInstance bad = inst;
  bad.solver_options["tol"] = "abc";
  CHECK_THROWS_AS(SolverConfig::from_instance(bad), std::invalid_argument);
}

TEST_CASE("most violated index") {
  const SipInstance inst = load_instance(oracle::data_file("disk.sip"));
  const auto v = most_violated_index(inst, {2.0, 0.0});
  CHECK(v.violation == doctest::Approx(1.0).epsilon(1e-6));
  // Refinement locates t near 0 or 2*pi.
  CHECK(std::min(v.label.t, 2 * std::numbers::pi - v.label.t) < 1e-2);
}
