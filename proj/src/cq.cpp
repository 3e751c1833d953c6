#include "sipcq/cq.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace sipcq {

const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::Holds:
      return "holds";
    case Verdict::Fails:
      return "fails";
    case Verdict::Unknown:
      return "unknown";
  }
  return "?";
}

PointAnalysis analyze_point(const SipInstance& inst, std::span<const double> x) {
  PointAnalysis pa;
  pa.point.assign(x.begin(), x.end());
  for (int l = 0; l <= inst.max_level(); ++l) pa.levels.push_back(evaluate_all(inst, x, l));
  pa.jacobian = equality_jacobian(inst, x);
  return pa;
}

namespace {

int jacobian_rank(const std::vector<Vec>& jac, int n) {
  if (jac.empty()) return 0;
  return rank_nullspace(Matrix::from_rows(jac, n)).rank;
}

bool is_interval_family(const SipInstance& inst, const IndexLabel& l) {
  const int s = inst.constraints[l.constraint].index_set;
  return s >= 0 && std::holds_alternative<IntervalIndex>(inst.index_sets[s].kind);
}

}  // namespace

EmfcqResult check_emfcq(const SipInstance& inst, const PointAnalysis& pa, const CqOptions& opt) {
  EmfcqResult r;
  r.m = static_cast<int>(pa.jacobian.size());
  r.rank = jacobian_rank(pa.jacobian, inst.n);
  const ActiveSetReport as = active_set(pa.finest(), 0.0);
  std::vector<Vec> g;
  for (int i : as.active) g.push_back(as.evaluated[i].gradient);
  r.active_count = static_cast<int>(g.size());
  MarginResult m = max_margin_direction(g, pa.jacobian, inst.n);
  r.witness = m.direction;
  r.margin = m.margin;
  if (m.status != LpStatus::Optimal) {
    r.verdict = Verdict::Unknown;
  } else {
    r.verdict = (r.rank == r.m && m.margin > opt.margin_tol) ? Verdict::Holds : Verdict::Fails;
  }
  return r;
}

PmfcqResult check_pmfcq(const SipInstance& inst, const PointAnalysis& pa, const CqOptions& opt) {
  PmfcqResult r;
  const int m = static_cast<int>(pa.jacobian.size());
  if (jacobian_rank(pa.jacobian, inst.n) != m) {
    r.verdict = Verdict::Fails;
    return r;
  }
  Vec schedule = opt.eps_schedule;
  std::sort(schedule.begin(), schedule.end(), std::greater<>());
  bool any_stable = false;
  bool all_failing = true;
  bool lp_trouble = false;
  for (double eps : schedule) {
    std::vector<double> margins;
    for (const auto& ev : pa.levels) {
      const ActiveSetReport as = active_set(ev, eps);
      std::vector<Vec> g;
      MarginSample s;
      s.eps = eps;
      s.level = ev.level;
      for (int i : as.eps_active) {
        g.push_back(as.evaluated[i].gradient);
        const auto& lab = as.evaluated[i].label;
        if (is_interval_family(inst, lab)) {
          const double t = std::fabs(lab.t);
          if (s.smallest_t == 0.0 || t < s.smallest_t) s.smallest_t = t;
        }
      }
      s.generators = static_cast<int>(g.size());
      MarginResult mr = max_margin_direction(g, pa.jacobian, inst.n);
      if (mr.status != LpStatus::Optimal) lp_trouble = true;
      s.margin = mr.margin;
      s.witness = mr.direction;
      margins.push_back(mr.margin);
      r.trace.push_back(std::move(s));
    }
    bool stable = std::all_of(margins.begin(), margins.end(), [&](double v) { return v > opt.margin_tol; });
    if (stable && margins.size() >= 2) {
      const double a = margins[margins.size() - 2];
      const double b = margins.back();
      if (std::isfinite(a) && std::isfinite(b) && b < 0.9 * a) stable = false;
    }
    bool failing = margins.back() <= opt.margin_tol;
    if (!failing && margins.size() >= 4) {
      failing = true;
      for (std::size_t k = margins.size() - 3; k < margins.size(); ++k) {
        if (!(margins[k] <= 0.75 * margins[k - 1])) failing = false;
      }
    }
    if (stable && !any_stable) {
      any_stable = true;
      r.stabilized_eps = eps;
      r.witness = r.trace.back().witness;
      r.margin = r.trace.back().margin;
    }
    all_failing = all_failing && failing;
  }
  if (lp_trouble) {
    r.verdict = Verdict::Unknown;
  } else if (any_stable) {
    r.verdict = Verdict::Holds;
  } else if (all_failing) {
    r.verdict = Verdict::Fails;
  } else {
    r.verdict = Verdict::Unknown;
  }
  if (r.verdict != Verdict::Holds && !r.trace.empty()) {
    r.witness = r.trace.back().witness;
    r.margin = r.trace.back().margin;
  }
  return r;
}

NfmcqResult check_nfmcq(const SipInstance& inst, const PointAnalysis& pa, const CqOptions& opt) {
  NfmcqResult r;
  r.inequality_part_only = !inst.equalities.components.empty();
  const auto aug = augmented_generators(inst, pa.finest());
  std::vector<Vec> gens;
  for (const auto& a : aug) gens.push_back(a.v);
  r.generators = static_cast<int>(gens.size());
  bool inconclusive = false;
  for (const auto& tail : family_tails(inst, pa.finest(), true)) {
    RayEstimate est = accumulation_rays(tail.terms, {}, tail.label);
    inconclusive = inconclusive || est.inconclusive;
    for (auto& ray : est.rays) r.rays.push_back(std::move(ray));
  }
  mark_attained(r.rays, gens);
  r.closedness = closedness_diagnostic(gens, r.rays, inst.all_finite(), opt.margin_tol);
  switch (r.closedness.status) {
    case Closedness::Closed:
      r.verdict = Verdict::Holds;
      break;
    case Closedness::NotClosed:
      r.verdict = Verdict::Fails;
      break;
    case Closedness::Unknown:
      r.verdict = Verdict::Unknown;
      break;
  }
  if (inconclusive && r.verdict == Verdict::Holds) {
    r.verdict = Verdict::Unknown;
    r.closedness.reason += "; ray extrapolation inconclusive";
  }
  return r;
}

double constraint_sup(const SipInstance& inst, std::span<const double> x) {
  const PointEvaluation ev = evaluate_all(inst, x, inst.max_level());
  double s = -kInf;
  for (const auto& e : ev.indices) s = std::max(s, e.value);
  for (const auto& e : ev.limits) s = std::max(s, e.value);
  return s;
}

namespace {

// Projection onto {x : A x = b} for affine equalities given as rows of A and
// values h(x) = A x - b.
Vec project_affine(const SipInstance& inst, Vec x) {
  if (inst.equalities.components.empty()) return x;
  for (int it = 0; it < 3; ++it) {
    const Vec h = equality_values(inst, x);
    const auto a = equality_jacobian(inst, x);
    const int m = static_cast<int>(a.size());
    // (A A^T) z = h, x -= A^T z.
    Matrix aat(m, m);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) aat(i, j) = dot(a[i], a[j]);
    const auto sol = solve_dense(aat, h);
    if (!sol) return x;
    const Vec& z = *sol;
    for (int i = 0; i < m; ++i)
      for (int k = 0; k < inst.n; ++k) x[k] -= z[i] * a[i][k];
  }
  return x;
}

struct SupEval {
  double value = -kInf;
  Vec subgradient;
};

SupEval sup_with_subgradient(const SipInstance& inst, const Vec& x) {
  SupEval s;
  const PointEvaluation ev = evaluate_all(inst, x, inst.max_level());
  for (const auto* list : {&ev.indices, &ev.limits}) {
    for (const auto& e : *list) {
      if (e.value > s.value) {
        s.value = e.value;
        s.subgradient = e.gradient;
      }
    }
  }
  return s;
}

// Projected subgradient descent on the sampled sup over the equality set.
std::optional<std::pair<Vec, double>> slater_search(const SipInstance& inst, const std::vector<Vec>& starts) {
  std::optional<std::pair<Vec, double>> best;
  for (const Vec& start : starts) {
    Vec x = project_affine(inst, start);
    SupEval s;
    try {
      s = sup_with_subgradient(inst, x);
    } catch (const DomainError&) {
      continue;
    }
    Vec best_x = x;
    double best_v = s.value;
    double step = 0.5;
    for (int it = 0; it < 60 && best_v >= -1e-9; ++it) {
      if (s.subgradient.empty()) break;
      const double gn = norm2(s.subgradient);
      if (gn == 0.0) break;
      Vec y = x;
      for (int k = 0; k < inst.n; ++k) y[k] -= step * s.subgradient[k] / gn;
      y = project_affine(inst, y);
      SupEval sy;
      try {
        sy = sup_with_subgradient(inst, y);
      } catch (const DomainError&) {
        step /= 2;
        continue;
      }
      x = y;
      s = sy;
      if (s.value < best_v) {
        best_v = s.value;
        best_x = x;
      } else {
        step /= 2;
      }
    }
    if (!best || best_v < best->second) best = std::make_pair(best_x, best_v);
    if (best->second < -1e-9) break;
  }
  return best;
}

}  // namespace

SscResult check_ssc(const SipInstance& inst, const std::optional<Vec>& candidate, const PmfcqResult* pmfcq,
                    const Vec& point, const CqOptions& opt) {
  SscResult r;
  if (!inst.convex) {
    r.reason = "instance not declared convex";
    return r;
  }
  if (!inst.equalities.components.empty() && !inst.equalities.affine) {
    r.reason = "equalities not declared affine";
    return r;
  }
  if (candidate) {
    r.slater_point = *candidate;
    for (double h : equality_values(inst, *candidate)) r.equality_residual = std::max(r.equality_residual, std::fabs(h));
    r.sup_value = constraint_sup(inst, *candidate);
    if (r.equality_residual <= kFeasibilityTol && r.sup_value < 0.0) {
      r.verdict = Verdict::Holds;
      r.reason = "supplied point verified";
      return r;
    }
    r.reason = "supplied point is not a Slater point";
  } else {
    std::vector<Vec> starts;
    if (pmfcq && !pmfcq->witness.empty()) {
      for (int k = 0; k <= 12; k += 2) {
        Vec s = point;
        for (int i = 0; i < inst.n; ++i) s[i] += std::ldexp(pmfcq->witness[i], -k);
        starts.push_back(std::move(s));
      }
    }
    starts.push_back(point);
    std::mt19937_64 rng(opt.seed);
    for (int k = 0; k < 8; ++k) {
      Vec s(inst.n);
      for (int i = 0; i < inst.n; ++i) {
        const double lo = inst.box.empty() ? point[i] - 1.0 : inst.box[i].first;
        const double hi = inst.box.empty() ? point[i] + 1.0 : inst.box[i].second;
        s[i] = std::uniform_real_distribution<double>(lo, hi)(rng);
      }
      starts.push_back(std::move(s));
    }
    auto found = slater_search(inst, starts);
    if (found && found->second < -1e-9) {
      r.slater_point = found->first;
      r.sup_value = found->second;
      for (double h : equality_values(inst, found->first)) {
        r.equality_residual = std::max(r.equality_residual, std::fabs(h));
      }
      if (r.equality_residual <= kFeasibilityTol) {
        r.verdict = Verdict::Holds;
        r.reason = "search found a Slater point";
        return r;
      }
    }
    r.reason = "search did not find a Slater point";
  }
  if (pmfcq && pmfcq->verdict == Verdict::Fails) {
    r.verdict = Verdict::Fails;
    r.reason += "; PMFCQ fails on a convex system";
  }
  return r;
}

CqReport cq_summary(const SipInstance& inst, const PointAnalysis& pa, const CqOptions& opt,
                    const std::optional<Vec>& slater_candidate) {
  CqReport rep;
  rep.emfcq = check_emfcq(inst, pa, opt);
  rep.pmfcq = check_pmfcq(inst, pa, opt);
  rep.nfmcq = check_nfmcq(inst, pa, opt);
  rep.ssc = check_ssc(inst, slater_candidate, &rep.pmfcq, pa.point, opt);

  if (rep.pmfcq.verdict == Verdict::Holds && rep.emfcq.verdict != Verdict::Holds) {
    rep.diagnostics.push_back("PMFCQ holds but EMFCQ does not; both downgraded");
    rep.pmfcq.verdict = Verdict::Unknown;
    rep.emfcq.verdict = Verdict::Unknown;
  }
  if (inst.all_finite() && rep.emfcq.verdict == Verdict::Holds && rep.nfmcq.verdict != Verdict::Holds) {
    rep.diagnostics.push_back("finite index set with MFCQ but NFMCQ not established; NFMCQ downgraded");
    rep.nfmcq.verdict = Verdict::Unknown;
  }
  if (rep.ssc.verdict != Verdict::Unknown && rep.pmfcq.verdict != Verdict::Unknown &&
      rep.ssc.verdict != rep.pmfcq.verdict) {
    rep.diagnostics.push_back("SSC and PMFCQ disagree on a convex system; both downgraded");
    rep.ssc.verdict = Verdict::Unknown;
    rep.pmfcq.verdict = Verdict::Unknown;
  }
  return rep;
}

CqReport cq_summary(const SipInstance& inst, std::span<const double> x, const CqOptions& opt,
                    const std::optional<Vec>& slater_candidate) {
  return cq_summary(inst, analyze_point(inst, x), opt, slater_candidate);
}

}  // namespace sipcq
