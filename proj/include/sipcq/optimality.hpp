#pragma once

// Normal-cone representations of the feasible set and KKT-type
// stationarity checks with multiplier certificates.

#include <optional>
#include <string>
#include <vector>

#include "sipcq/cones.hpp"
#include "sipcq/cq.hpp"
#include "sipcq/model.hpp"

namespace sipcq {

enum class ConeVariant { Perturbed, Unperturbed, Normalized };

const char* to_string(ConeVariant v);

struct EpsCone {
  double eps = 0.0;
  GeneratedCone cone;
};

struct NormalConeRep {
  Vec point;
  ConeVariant variant = ConeVariant::Perturbed;
  std::vector<EpsCone> cones;  // schedule order (decreasing eps)
  GeneratedCone stabilized;
  bool regular = false;
  std::optional<GeneratedCone> limiting;  // identical to `stabilized` when regular
  bool valid = false;
  std::vector<std::string> warnings;
};

struct OptimalityOptions {
  CqOptions cq;
  double tol = 1e-9;
  double membership_tol = 1e-6;
};

NormalConeRep normal_cone(const SipInstance& inst, const PointAnalysis& pa, const CqReport& cq,
                          ConeVariant variant, const OptimalityOptions& opt = {});

struct ProbeResult {
  bool conclusive = false;
  double quotient = 0.0;
  int feasible_samples = 0;
  int samples = 0;
};

/// Feasible points near a base point, drawn once and reused for every
/// probe direction. Feasibility is exact (tolerance 0) including closure
/// limits.
class NormalConeProbe {
 public:
  NormalConeProbe(const SipInstance& inst, const Vec& point, int samples, double radius,
                  std::uint64_t seed = 2024);
  /// max <v, x - point> / |x - point| over the feasible samples.
  ProbeResult quotient(const Vec& v) const;
  int feasible_count() const { return static_cast<int>(offsets_.size()); }

 private:
  std::vector<Vec> offsets_;  // unit directions of x - point
  int samples_ = 0;
};

ProbeResult empirical_normal_cone_probe(const SipInstance& inst, const Vec& point, const Vec& v, int samples,
                                        double radius, std::uint64_t seed = 2024);

enum class Condition { UnperturbedKKT, PerturbedStationarity, ConvexGlobal };
enum class Outcome { CertificateFound, Refuted, Inconclusive };

const char* to_string(Condition c);
const char* to_string(Outcome o);

struct KktCertificate {
  std::vector<std::string> support;
  std::vector<IndexLabel> support_labels;
  Vec lambda;
  Vec y;
  Vec cost_weights;  // over cost pieces (ConvexMax); {1} for a smooth cost
  double residual = 0.0;
};

struct EpsStationarity {
  double eps = 0.0;
  FeasibilityStatus status = FeasibilityStatus::Failed;
  double distance = 0.0;
};

struct StationarityReport {
  Condition condition = Condition::UnperturbedKKT;
  Outcome outcome = Outcome::Inconclusive;
  std::optional<KktCertificate> certificate;
  /// Direction s with <s, df> > 0, <s, dg> >= 0, <s, dh> = 0.
  Vec separator;
  std::vector<EpsStationarity> trace;
  bool global = false;
  bool lp_failure = false;  // an LP hit its iteration limit
  std::string note;
};

StationarityReport verify_kkt(const SipInstance& inst, const PointAnalysis& pa, const OptimalityOptions& opt = {});
StationarityReport verify_perturbed_stationarity(const SipInstance& inst, const PointAnalysis& pa,
                                                 const OptimalityOptions& opt = {});
StationarityReport convex_global_check(const SipInstance& inst, const PointAnalysis& pa, const CqReport& cq,
                                       const OptimalityOptions& opt = {});

/// Affine systems only; throws std::invalid_argument otherwise.
NormalConeRep linear_specialization(const SipInstance& inst, const PointAnalysis& pa, const CqReport& cq,
                                    const OptimalityOptions& opt = {});

}  // namespace sipcq
