#pragma once

// Report document, JSON serialization and the text rendering.

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "sipcq/cq.hpp"
#include "sipcq/optimality.hpp"
#include "sipcq/solver.hpp"

namespace sipcq {

inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr const char* kReportSchema = "sipcq-report/1";

struct ProbeEntry {
  Vec direction;
  bool in_cone = false;
  ProbeResult probe;
};

struct ConeSummary {
  ConeVariant variant = ConeVariant::Perturbed;
  bool valid = false;
  bool regular = false;
  bool limiting_identical = false;
  std::vector<std::string> warnings;
  std::vector<double> eps;
  std::vector<int> generator_counts;  // per eps
  std::vector<int> ray_counts;        // per eps
  GeneratedCone stabilized;           // generator list truncated to `max_listed`
  int stabilized_generators = 0;
  std::vector<ProbeEntry> probes;
};

ConeSummary summarize(const NormalConeRep& rep, int max_listed = 32);

struct ReportDocument {
  std::string tool_version = kToolVersion;
  std::string instance_digest;
  std::string instance_path;
  Vec point;
  FeasibilityReport feasibility;
  CqReport cq;
  std::vector<ConeSummary> cones;
  std::vector<StationarityReport> stationarity;
  std::optional<SolverTrace> solver;
  nlohmann::json parameters = nlohmann::json::object();
  std::optional<std::string> generated_at;
};

nlohmann::json to_json(const ReportDocument& doc);
ReportDocument report_from_json(const nlohmann::json& j);

std::string render_text(const ReportDocument& doc);

}  // namespace sipcq
