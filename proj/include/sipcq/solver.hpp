#pragma once

// Exchange-method discretization solver for candidate local minimizers.

#include <cstdint>
#include <string>
#include <vector>

#include "sipcq/model.hpp"

namespace sipcq {

struct SolverConfig {
  int initial_working = 3;  // evenly spaced indices per family
  int max_outer = 50;
  double tol = 1e-9;        // violation tolerance
  int multistart = 8;
  double armijo = 1e-4;
  int max_inner = 4000;     // projected-gradient steps per subproblem
  std::uint64_t seed = 7;

  /// Keys initial_working, max_outer, tol, multistart, armijo, max_inner,
  /// seed from the instance [solver] section. Throws std::invalid_argument.
  static SolverConfig from_instance(const SipInstance& inst);
  void validate() const;
};

enum class SolverStatus { Converged, IterationLimit };

const char* to_string(SolverStatus s);

struct SolverIteration {
  std::vector<std::string> working_set;
  Vec x;
  double max_violation = 0.0;
  double cost = 0.0;
  bool accepted = false;
};

struct SolverTrace {
  std::vector<SolverIteration> iterations;
  SolverStatus status = SolverStatus::IterationLimit;
};

struct SolveResult {
  Vec x;
  SolverTrace trace;
};

struct ViolatedIndex {
  IndexLabel label;
  double violation = 0.0;
};

/// argmax of g_t(x) over materialized indices and closure limits. Interval
/// families get one local grid refinement around their argmax; ties go to
/// the lowest label.
ViolatedIndex most_violated_index(const SipInstance& inst, const Vec& x);

SolveResult solve(const SipInstance& inst, const SolverConfig& config);

}  // namespace sipcq
