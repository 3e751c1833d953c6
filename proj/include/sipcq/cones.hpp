#pragma once

// Finitely generated cones with lineality and limit rays.

#include <optional>
#include <string>
#include <vector>

#include "sipcq/linsolve.hpp"
#include "sipcq/model.hpp"

namespace sipcq {

struct LabeledVector {
  std::string label;
  Vec v;
};

enum class RayOrigin { Declared, Extrapolated };

struct LimitRay {
  std::string label;
  Vec direction;  // unit Euclidean norm
  RayOrigin origin = RayOrigin::Extrapolated;
  bool attained = false;
  double residual = 0.0;  // extrapolation residual
};

enum class Closedness { Closed, NotClosed, Unknown };

const char* to_string(Closedness c);
const char* to_string(RayOrigin o);

struct GeneratedCone {
  int dimension = 0;
  std::vector<LabeledVector> generators;
  std::vector<Vec> lineality;
  std::vector<LimitRay> rays;
  Closedness closedness = Closedness::Unknown;

  /// Generator vectors, followed by ray directions when `with_rays`.
  std::vector<Vec> generator_vectors(bool with_rays) const;
};

/// v in cone(generators [+ rays]) + span(lineality).
FeasibilityResult membership(const GeneratedCone& c, const Vec& v, double tol, bool use_rays);

/// Support reduction to at most d + 1 generators (d = dimension) by
/// null-vector elimination; lambda indexes `generators`.
FeasibilityCertificate caratheodory_reduce(const FeasibilityCertificate& cert, const std::vector<Vec>& generators,
                                           const std::vector<Vec>& lineality, const Vec& v);

struct TailTerm {
  double h = 0.0;  // distance to the limit (1/n, or |t - endpoint|)
  Vec v;
};

struct RayEstimate {
  std::vector<LimitRay> rays;
  bool inconclusive = false;
};

inline constexpr double kAngleTol = 1e-3;
inline constexpr int kTailTerms = 16;

/// Limit directions of a generator sequence as h -> 0. Declared hints pass
/// through unchanged; otherwise the normalized tail is clustered by angle
/// and each cluster extrapolated linearly in h.
RayEstimate accumulation_rays(const std::vector<TailTerm>& tail, const std::vector<Vec>& hints,
                              const std::string& label);

/// Marks rays attained by a unit generator.
void mark_attained(std::vector<LimitRay>& rays, const std::vector<Vec>& generators);

/// (grad g_t(x), <grad g_t(x), x> - g_t(x)) for every materialized index.
std::vector<LabeledVector> augmented_generators(const SipInstance& inst, const PointEvaluation& ev);
std::vector<LabeledVector> augmented_generators(const SipInstance& inst, std::span<const double> x);

struct ClosednessWitness {
  std::string ray_label;
  Vec ray;
  Vec functional;  // <a, ray> = 0 and <a, g> < 0 for generators not parallel to the ray
  double margin = 0.0;
};

struct ClosednessVerdict {
  Closedness status = Closedness::Unknown;
  std::optional<ClosednessWitness> witness;
  std::string reason;
  double norm_ratio = 0.0;
  double min_norm = 0.0;
  bool band_ok = false;
  double margin = 0.0;
};

/// Tri-state closedness of cone(generators). `exhaustive` means the
/// generators are the complete (finite) generating set.
ClosednessVerdict closedness_diagnostic(const std::vector<Vec>& generators, const std::vector<LimitRay>& rays,
                                        bool exhaustive, double tol = 1e-6);

/// Generator tails of every family with an open end, keyed by the limit
/// label, for ray estimation. `augmented` selects augmented vectors.
struct FamilyTail {
  IndexLabel limit;
  std::string label;
  std::vector<TailTerm> terms;
  std::vector<Vec> hints;
};

std::vector<FamilyTail> family_tails(const SipInstance& inst, const PointEvaluation& ev, bool augmented);

}  // namespace sipcq
