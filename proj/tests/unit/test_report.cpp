#include <doctest.h>

#include "../support/oracles.hpp"
#include "sipcq/instance_io.hpp"
#include "sipcq/report.hpp"

using namespace sipcq;

namespace {

ReportDocument build(const char* file, const Vec& x) {
  const SipInstance inst = load_instance(oracle::data_file(file));
  ReportDocument doc;
  doc.instance_digest = "0123456789abcdef";
  doc.instance_path = file;
  doc.point = x;
  doc.feasibility = feasibility_check(inst, x);
  const PointAnalysis pa = analyze_point(inst, x);
  doc.cq = cq_summary(inst, pa);
  for (auto v : {ConeVariant::Perturbed, ConeVariant::Unperturbed}) {
    ConeSummary s = summarize(normal_cone(inst, pa, doc.cq, v));
    s.probes.push_back(ProbeEntry{{1, 0}, true, ProbeResult{true, -0.5, 40, 100}});
    doc.cones.push_back(std::move(s));
  }
  doc.stationarity.push_back(verify_kkt(inst, pa));
  doc.stationarity.push_back(verify_perturbed_stationarity(inst, pa));
  doc.parameters = {{"command", "analyze"}};
  return doc;
}

}  // namespace

TEST_CASE("JSON round trip is lossless") {
  for (const auto& [file, x] :
       std::vector<std::pair<const char*, Vec>>{{"ex3_7.sip", {-1, 0}}, {"ex3_5.sip", {-1, 0}}}) {
    ReportDocument doc = build(file, x);
    doc.generated_at = "2026-01-01T00:00:00Z";
    SolverTrace trace;
    trace.status = SolverStatus::Converged;
    trace.iterations.push_back(SolverIteration{{"g1"}, {-1, 0}, 0.0, 1.0, true});
    doc.solver = trace;
    const nlohmann::json j = to_json(doc);
    CHECK(j.at("schema") == kReportSchema);
    CHECK(to_json(report_from_json(j)) == j);
    // And through text.
    CHECK(to_json(report_from_json(nlohmann::json::parse(j.dump()))) == j);
  }
}

TEST_CASE("non-finite values survive serialization") {
  ReportDocument doc = build("ex3_7.sip", {-1, 0});
  doc.cq.emfcq.margin = kInf;
  const nlohmann::json j = to_json(doc);
  CHECK(j.dump().find("\"inf\"") != std::string::npos);
  CHECK(std::isinf(report_from_json(j).cq.emfcq.margin));
}

TEST_CASE("text rendering names the verdicts") {
  const std::string text = render_text(build("ex3_7.sip", {-1, 0}));
  CHECK(text.find("EMFCQ") != std::string::npos);
  CHECK(text.find("PMFCQ") != std::string::npos);
  CHECK(text.find("NFMCQ") != std::string::npos);
  CHECK(text.find("refuted") != std::string::npos);
}
