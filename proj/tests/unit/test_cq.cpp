#include <doctest.h>

#include <cmath>

#include "../support/oracles.hpp"
#include "sipcq/cq.hpp"
#include "sipcq/instance_io.hpp"

using namespace sipcq;

TEST_CASE("countable system: EMFCQ and PMFCQ hold, the cone is not closed") {
  const SipInstance inst = load_instance(oracle::data_file("ex3_7.sip"));
  const CqReport r = cq_summary(inst, Vec{-1.0, 0.0});
  CHECK(r.emfcq.verdict == Verdict::Holds);
  CHECK(r.pmfcq.verdict == Verdict::Holds);
  CHECK(r.nfmcq.verdict == Verdict::Fails);
  CHECK(r.nfmcq.closedness.status == Closedness::NotClosed);
  REQUIRE(r.nfmcq.closedness.witness);
  // The witness direction d satisfies <grad g, d> < 0 on the active set.
  CHECK(dot(r.emfcq.witness, {1.0, 0.0}) < 0.0);
  CHECK(r.ssc.verdict == Verdict::Unknown);  // not declared convex
}

TEST_CASE("interval system: PMFCQ margin shrinks with the smallest index") {
  const SipInstance inst = load_instance(oracle::data_file("ex3_5.sip"));
  const CqReport r = cq_summary(inst, Vec{-1.0, 0.0});
  CHECK(r.emfcq.verdict == Verdict::Holds);
  CHECK(r.pmfcq.verdict == Verdict::Fails);
  CHECK(r.nfmcq.verdict == Verdict::Holds);
  int levels = 0;
  for (const auto& s : r.pmfcq.trace) {
    if (s.smallest_t <= 0.0) continue;
    ++levels;
    // The oracle: at x = (-1,0), the eps-active gradients are (t, 0) and
    // (1, 0), so the best normalized margin equals the smallest t.
    CHECK(s.margin == doctest::Approx(s.smallest_t).epsilon(1e-6));
  }
  CHECK(levels >= 3);
}

TEST_CASE("convex interval system with a Slater point") {
  const SipInstance inst = load_instance(oracle::data_file("ex4_11.sip"));
  const CqReport r = cq_summary(inst, Vec{0.0, 0.0}, CqOptions{}, Vec{0.0, 1.0});
  CHECK(r.pmfcq.verdict == Verdict::Holds);
  CHECK(r.nfmcq.verdict == Verdict::Holds);
  CHECK(r.ssc.verdict == Verdict::Holds);
  CHECK(r.ssc.sup_value == doctest::Approx(-1.0));
  // A bad candidate is rejected and the search is not used instead.
  const auto bad = check_ssc(inst, Vec{0.0, -1.0}, nullptr, Vec{0.0, 0.0});
  CHECK(bad.verdict == Verdict::Unknown);
  CHECK(bad.sup_value >= 0.0);
}

TEST_CASE("SSC and PMFCQ agree on random convex families") {
  int holds = 0, fails = 0;
  for (std::uint64_t seed = 1; seed <= 25; ++seed) {
    const auto fam = oracle::random_convex_family(seed);
    const SipInstance inst = parse_instance(fam.text);
    const Vec x(fam.n, 0.0);
    REQUIRE(feasibility_check(inst, x).feasible);
    const PointAnalysis pa = analyze_point(inst, x);
    const PmfcqResult p = check_pmfcq(inst, pa);
    const SscResult s = check_ssc(inst, std::nullopt, nullptr, x);
    const bool ssc_holds = s.verdict == Verdict::Holds;
    CHECK_MESSAGE(p.verdict != Verdict::Unknown, fam.text);
    CHECK_MESSAGE((p.verdict == Verdict::Holds) == ssc_holds, fam.text);
    (p.verdict == Verdict::Holds ? holds : fails)++;
  }
  CHECK(holds > 0);
  CHECK(fails > 0);
}

TEST_CASE("finite MFCQ systems have a closed cone") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const SipInstance inst = parse_instance(oracle::random_finite_mfcq(seed));
    const CqReport r = cq_summary(inst, Vec{0.0, 0.0});
    CHECK(r.emfcq.verdict == Verdict::Holds);
    CHECK(r.nfmcq.verdict == Verdict::Holds);
  }
}

TEST_CASE("PMFCQ implies EMFCQ on the bundled instances") {
  for (const auto& [file, x] : std::vector<std::pair<const char*, Vec>>{
           {"ex3_7.sip", {-1, 0}}, {"ex3_5.sip", {-1, 0}}, {"ex4_11.sip", {0, 0}}, {"convex_toy.sip", {-0.5, -0.5}}}) {
    const SipInstance inst = load_instance(oracle::data_file(file));
    const CqReport r = cq_summary(inst, x);
    if (r.pmfcq.verdict == Verdict::Holds) CHECK_MESSAGE(r.emfcq.verdict == Verdict::Holds, file);
  }
}
