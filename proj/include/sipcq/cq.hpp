#pragma once

// Constraint-qualification checks: EMFCQ, PMFCQ, NFMCQ and the strong
// Slater condition, plus a summary that enforces their implications.

#include <optional>
#include <string>
#include <vector>

#include "sipcq/cones.hpp"
#include "sipcq/model.hpp"

namespace sipcq {

enum class Verdict { Holds, Fails, Unknown };

const char* to_string(Verdict v);

struct CqOptions {
  Vec eps_schedule = {1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8};
  double margin_tol = 1e-6;
  std::uint64_t seed = 12345;
};

struct EmfcqResult {
  Verdict verdict = Verdict::Unknown;
  int rank = 0;
  int m = 0;
  Vec witness;
  double margin = 0.0;
  int active_count = 0;
};

struct MarginSample {
  double eps = 0.0;
  int level = 0;
  int generators = 0;
  double margin = 0.0;
  double smallest_t = 0.0;  // smallest interval index in T_eps, 0 when none
  Vec witness;
};

struct PmfcqResult {
  Verdict verdict = Verdict::Unknown;
  std::vector<MarginSample> trace;
  std::optional<double> stabilized_eps;
  Vec witness;
  double margin = 0.0;
};

struct NfmcqResult {
  Verdict verdict = Verdict::Unknown;
  ClosednessVerdict closedness;
  bool inequality_part_only = false;
  int generators = 0;
  std::vector<LimitRay> rays;
};

struct SscResult {
  Verdict verdict = Verdict::Unknown;
  std::optional<Vec> slater_point;
  double sup_value = 0.0;
  double equality_residual = 0.0;
  std::string reason;
};

struct CqReport {
  EmfcqResult emfcq;
  PmfcqResult pmfcq;
  NfmcqResult nfmcq;
  SscResult ssc;
  std::vector<std::string> diagnostics;
};

/// Shared per-point data: evaluations at every refinement level.
struct PointAnalysis {
  Vec point;
  std::vector<PointEvaluation> levels;  // index = level
  std::vector<Vec> jacobian;

  const PointEvaluation& finest() const { return levels.back(); }
};

PointAnalysis analyze_point(const SipInstance& inst, std::span<const double> x);

/// max_margin_direction restricted to the kernel of the equality Jacobian.
EmfcqResult check_emfcq(const SipInstance& inst, const PointAnalysis& pa, const CqOptions& opt = {});
PmfcqResult check_pmfcq(const SipInstance& inst, const PointAnalysis& pa, const CqOptions& opt = {});
NfmcqResult check_nfmcq(const SipInstance& inst, const PointAnalysis& pa, const CqOptions& opt = {});
/// `pmfcq` feeds the search start and the convex equivalence.
SscResult check_ssc(const SipInstance& inst, const std::optional<Vec>& candidate, const PmfcqResult* pmfcq,
                     const Vec& point, const CqOptions& opt = {});

/// sup over materialized indices and closure limits of g_t(x).
double constraint_sup(const SipInstance& inst, std::span<const double> x);

CqReport cq_summary(const SipInstance& inst, std::span<const double> x, const CqOptions& opt = {},
                    const std::optional<Vec>& slater_candidate = std::nullopt);
CqReport cq_summary(const SipInstance& inst, const PointAnalysis& pa, const CqOptions& opt = {},
                    const std::optional<Vec>& slater_candidate = std::nullopt);

}  // namespace sipcq
