#pragma once

// Semi-infinite instance data model, index materialization, feasibility,
// active sets and uniform-differentiability moduli.

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "sipcq/expr.hpp"
#include "sipcq/linsolve.hpp"

namespace sipcq {

struct FiniteIndex {
  std::vector<double> values;
};

struct IntervalIndex {
  double lower = 0.0;
  double upper = 1.0;
  bool include_lower = true;
  bool include_upper = true;
  int resolution = 257;
  int refinement = 4;
};

struct CountableIndex {
  long long start = 1;
  long long truncation = 10000;
  std::vector<Vec> limit_rays;  // declared limits of the gradient direction
};

struct IndexSetDescriptor {
  std::string name;
  std::variant<FiniteIndex, IntervalIndex, CountableIndex> kind;

  bool is_finite() const { return std::holds_alternative<FiniteIndex>(kind); }
};

/// g(x) <= 0, or a family g_t(x) <= 0 over index set `index_set`.
struct Constraint {
  std::string name;
  Expr body;
  int index_set = -1;  // -1 for a fixed constraint
};

struct EqualityBlock {
  std::vector<std::string> names;
  std::vector<Expr> components;
  bool affine = false;
};

struct Cost {
  enum class Kind { Smooth, ConvexMax };
  Kind kind = Kind::Smooth;
  std::vector<Expr> pieces;  // one piece when Smooth
};

struct SipInstance {
  int n = 0;
  std::vector<std::string> variables;
  Cost cost;
  std::vector<Constraint> constraints;
  std::vector<IndexSetDescriptor> index_sets;
  EqualityBlock equalities;
  bool convex = false;
  std::vector<std::pair<double, double>> box;  // solver multistart box
  std::map<std::string, std::string> solver_options;

  SymbolTable symbols() const;
  /// Throws std::invalid_argument when an invariant is violated.
  void validate() const;
  /// Finest refinement level across descriptors.
  int max_level() const;
  bool all_finite() const;
};

/// Identifies a materialized constraint. For families `t` is the index
/// value; a `limit` label stands for the closure limit of a family at an
/// excluded interval endpoint (end = -1 lower, +1 upper) or as n -> inf.
struct IndexLabel {
  int constraint = 0;
  double t = 0.0;
  bool limit = false;
  int end = 0;

  friend bool operator==(const IndexLabel&, const IndexLabel&) = default;
};

bool operator<(const IndexLabel& a, const IndexLabel& b);

std::string label_text(const SipInstance& inst, const IndexLabel& label);

/// Activity tolerance for T(x).
inline constexpr double kActivityTol = 1e-12;
/// Default feasibility tolerance.
inline constexpr double kFeasibilityTol = 1e-9;

struct Materialization {
  std::vector<IndexLabel> indices;  // sorted
  std::vector<IndexLabel> limits;   // closure-limit labels
};

/// Index points at refinement `level`. Interval grids are refined around
/// local maximizers of g_t(x); grids at a higher level contain those of
/// every lower level.
Materialization materialize(const SipInstance& inst, std::span<const double> x, int level);

/// Materialized index values of one family, ascending (used for tails).
std::vector<double> family_points(const SipInstance& inst, int constraint, std::span<const double> x, int level);

double constraint_value(const SipInstance& inst, const IndexLabel& label, std::span<const double> x);
ValueAndGradient constraint_value_gradient(const SipInstance& inst, const IndexLabel& label,
                                           std::span<const double> x);

/// Closure limit by linear extrapolation over the deepest tail points.
/// Empty when the two extrapolations disagree (no limit detected).
std::optional<ValueAndGradient> limit_value_gradient(const SipInstance& inst, const IndexLabel& label,
                                                     std::span<const double> x);

double cost_value(const SipInstance& inst, std::span<const double> x);
std::vector<ValueAndGradient> cost_pieces(const SipInstance& inst, std::span<const double> x);

Vec equality_values(const SipInstance& inst, std::span<const double> x);
/// Rows of the equality Jacobian.
std::vector<Vec> equality_jacobian(const SipInstance& inst, std::span<const double> x);

struct EvaluatedIndex {
  IndexLabel label;
  double value = 0.0;
  Vec gradient;
};

/// All constraint values and gradients at a point for one level.
struct PointEvaluation {
  Vec point;
  int level = 0;
  std::vector<EvaluatedIndex> indices;
  std::vector<EvaluatedIndex> limits;  // only limits that were detected
};

PointEvaluation evaluate_all(const SipInstance& inst, std::span<const double> x, int level);

struct FeasibilityReport {
  double max_violation = 0.0;
  double equality_residual = 0.0;
  bool feasible = true;
  std::optional<IndexLabel> worst;
};

FeasibilityReport feasibility_check(const SipInstance& inst, std::span<const double> x,
                                    double tol = kFeasibilityTol);

struct ActiveSetReport {
  Vec point;
  double eps = 0.0;
  int level = 0;
  std::vector<EvaluatedIndex> evaluated;  // every index in T_eps or normalized T_eps
  std::vector<int> active;                // positions in `evaluated`
  std::vector<int> eps_active;
  std::vector<int> normalized;
  double gradient_bound = 0.0;            // over every materialized index
  double gradient_min = 0.0;
};

ActiveSetReport active_set(const PointEvaluation& ev, double eps);
ActiveSetReport active_set(const SipInstance& inst, std::span<const double> x, double eps);

struct GradientBound {
  double bound = 0.0;
  bool pass = true;
  bool normalization_advised = false;  // norms vary by at least 1e3
};

GradientBound gradient_bound_check(const ActiveSetReport& report);

struct UniformityModuli {
  Vec eta;
  Vec s;
  Vec r;
  std::vector<long long> samples;
};

UniformityModuli estimate_moduli(const SipInstance& inst, std::span<const double> x, const Vec& eta,
                                 int samples_per_eta, std::uint64_t seed = 12345);

}  // namespace sipcq
