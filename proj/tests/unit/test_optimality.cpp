#include <doctest.h>

#include <cmath>
#include <numbers>

#include "../support/oracles.hpp"
#include "sipcq/instance_io.hpp"
#include "sipcq/optimality.hpp"

using namespace sipcq;

namespace {

struct Fixture {
  SipInstance inst;
  PointAnalysis pa;
  CqReport cq;
  Fixture(const char* file, Vec x) : inst(load_instance(oracle::data_file(file))) {
    pa = analyze_point(inst, x);
    cq = cq_summary(inst, pa);
  }
};

bool in_cone(const GeneratedCone& c, const Vec& v) {
  return membership(c, v, 1e-6, true).status == FeasibilityStatus::Member;
}

}  // namespace

TEST_CASE("KKT fails but perturbed stationarity holds on the countable system") {
  Fixture f("ex3_7.sip", {-1, 0});
  const auto kkt = verify_kkt(f.inst, f.pa);
  REQUIRE(kkt.outcome == Outcome::Refuted);
  const double s_norm = norm2(kkt.separator);
  CHECK(kkt.separator[0] / s_norm == doctest::Approx(0.0));
  CHECK(kkt.separator[1] / s_norm == doctest::Approx(1.0));
  // Independent check of the separator: <s, grad f> > 0 and <s, grad g1> >= 0.
  CHECK(dot(kkt.separator, {0.0, 1.0}) > 0.0);
  CHECK(dot(kkt.separator, {1.0, 0.0}) >= 0.0);

  const auto pert = verify_perturbed_stationarity(f.inst, f.pa);
  REQUIRE(pert.outcome == Outcome::CertificateFound);
  REQUIRE(pert.certificate);
  CHECK(pert.certificate->residual <= 1e-8);
  bool ray = false;
  for (const auto& s : pert.certificate->support) ray = ray || s.find("[ray]") != std::string::npos;
  CHECK(ray);
}

TEST_CASE("perturbed and unperturbed cones on the countable system") {
  Fixture f("ex3_7.sip", {-1, 0});
  const auto pert = normal_cone(f.inst, f.pa, f.cq, ConeVariant::Perturbed);
  const auto unpert = normal_cone(f.inst, f.pa, f.cq, ConeVariant::Unperturbed);
  CHECK(pert.valid);
  for (int k = 0; k < 16; ++k) {
    const double a = k * std::numbers::pi / 8;
    const Vec v{std::cos(a), std::sin(a)};
    const bool quadrant = v[0] >= -1e-12 && v[1] <= 1e-12;
    const bool axis = std::fabs(v[1]) <= 1e-12 && v[0] > 0;
    CHECK_MESSAGE(in_cone(pert.stabilized, v) == quadrant, k);
    CHECK_MESSAGE(in_cone(unpert.stabilized, v) == axis, k);
  }
}

TEST_CASE("interval system: perturbed cone flagged and (0,-1) refused") {
  Fixture f("ex3_5.sip", {-1, 0});
  const auto pert = normal_cone(f.inst, f.pa, f.cq, ConeVariant::Perturbed);
  CHECK_FALSE(pert.valid);
  CHECK_FALSE(pert.warnings.empty());
  CHECK_FALSE(in_cone(pert.stabilized, {0, -1}));
  const auto probe = empirical_normal_cone_probe(f.inst, {-1, 0}, {0, -1}, 2000, 1e-3);
  REQUIRE(probe.conclusive);
  CHECK(probe.quotient <= 1e-3);
}

TEST_CASE("probe quotients agree with membership") {
  Fixture f("ex3_7.sip", {-1, 0});
  const NormalConeProbe probe(f.inst, {-1, 0}, 2000, 1e-3);
  CHECK(probe.feasible_count() >= 10);
  // In the cone: quotient near zero or below.
  CHECK(probe.quotient({1, 0}).quotient <= 1e-3);
  CHECK(probe.quotient({1, -1}).quotient <= 1e-3);
  // Outside: some feasible point moves along v.
  CHECK(probe.quotient({0, 1}).quotient > 0.1);
  CHECK(probe.quotient({-1, 0}).quotient > 0.1);
}

TEST_CASE("convex toy: KKT certificate and global optimality") {
  Fixture f("convex_toy.sip", {-0.5, -0.5});
  const auto kkt = verify_kkt(f.inst, f.pa);
  REQUIRE(kkt.outcome == Outcome::CertificateFound);
  REQUIRE(kkt.certificate->lambda.size() == 1);
  CHECK(kkt.certificate->lambda[0] == doctest::Approx(1.0).epsilon(1e-6));
  const auto glob = convex_global_check(f.inst, f.pa, f.cq);
  CHECK(glob.outcome == Outcome::CertificateFound);
  CHECK(glob.global);
}

TEST_CASE("infeasible points are rejected") {
  const SipInstance inst = load_instance(oracle::data_file("ex3_7.sip"));
  const PointAnalysis pa = analyze_point(inst, Vec{0, 0});
  CHECK_THROWS_AS(verify_kkt(inst, pa), std::invalid_argument);
}

TEST_CASE("linear specialization on an affine family") {
  const SipInstance inst = load_instance(oracle::data_file("disk.sip"));
  const Vec x{-std::sqrt(0.5), -std::sqrt(0.5)};
  const PointAnalysis pa = analyze_point(inst, x);
  const CqReport cq = cq_summary(inst, pa);
  const auto rep = linear_specialization(inst, pa, cq);
  CHECK(in_cone(rep.stabilized, {-1, -1}));
  CHECK_FALSE(in_cone(rep.stabilized, {1, 0}));
  const SipInstance curved = load_instance(oracle::data_file("ex3_7.sip"));
  const PointAnalysis pc = analyze_point(curved, Vec{-1, 0});
  CHECK_THROWS_AS(linear_specialization(curved, pc, cq_summary(curved, pc)), std::invalid_argument);
}
