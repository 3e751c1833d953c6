#include "sipcq/optimality.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace sipcq {

const char* to_string(ConeVariant v) {
  switch (v) {
    case ConeVariant::Perturbed:
      return "perturbed";
    case ConeVariant::Unperturbed:
      return "unperturbed";
    case ConeVariant::Normalized:
      return "normalized";
  }
  return "?";
}

const char* to_string(Condition c) {
  switch (c) {
    case Condition::UnperturbedKKT:
      return "unperturbed_kkt";
    case Condition::PerturbedStationarity:
      return "perturbed_stationarity";
    case Condition::ConvexGlobal:
      return "convex_global";
  }
  return "?";
}

const char* to_string(Outcome o) {
  switch (o) {
    case Outcome::CertificateFound:
      return "certificate_found";
    case Outcome::Refuted:
      return "refuted";
    case Outcome::Inconclusive:
      return "inconclusive";
  }
  return "?";
}

namespace {

std::vector<Vec> lineality_basis(const PointAnalysis& pa) {
  std::vector<Vec> out;
  for (int i : independent_subset(pa.jacobian)) out.push_back(pa.jacobian[i]);
  return out;
}

void require_feasible(const SipInstance& inst, const PointAnalysis& pa) {
  const auto& ev = pa.finest();
  for (const auto* list : {&ev.indices, &ev.limits}) {
    for (const auto& e : *list) {
      if (e.value > kFeasibilityTol) {
        throw std::invalid_argument("point is infeasible: " + label_text(inst, e.label) + " = " +
                                    std::to_string(e.value));
      }
    }
  }
  for (double h : equality_values(inst, pa.point)) {
    if (std::fabs(h) > kFeasibilityTol) throw std::invalid_argument("point violates an equality");
  }
}

// Gradient limit rays with the closure value used to decide membership in
// a perturbed cone.
struct RayWithValue {
  LimitRay ray;
  double limit_value = 0.0;
  double limit_norm = 0.0;
};

std::vector<RayWithValue> gradient_rays(const SipInstance& inst, const PointEvaluation& ev) {
  std::vector<RayWithValue> out;
  for (const auto& tail : family_tails(inst, ev, false)) {
    RayEstimate est = accumulation_rays(tail.terms, tail.hints, tail.label);
    double value = -kInf;
    double norm = 0.0;
    bool found = false;
    for (const auto& l : ev.limits) {
      if (l.label == tail.limit) {
        value = l.value;
        norm = norm2(l.gradient);
        found = true;
      }
    }
    if (!found) {
      // Value at the materialized index nearest to the limit.
      const auto& d = inst.index_sets[inst.constraints[tail.limit.constraint].index_set];
      const bool countable = std::holds_alternative<CountableIndex>(d.kind);
      double best = kInf;
      for (const auto& e : ev.indices) {
        if (e.label.constraint != tail.limit.constraint) continue;
        const double h = countable ? 1.0 / e.label.t : std::fabs(e.label.t - tail.limit.t);
        if (h < best) {
          best = h;
          value = e.value;
          norm = norm2(e.gradient);
        }
      }
    }
    for (auto& r : est.rays) out.push_back({std::move(r), value, norm});
  }
  return out;
}

std::vector<Vec> cost_points(const SipInstance& inst, const Vec& x, Vec* weights_mask = nullptr) {
  const auto pieces = cost_pieces(inst, x);
  std::vector<Vec> out;
  double top = -kInf;
  for (const auto& p : pieces) top = std::max(top, p.value);
  if (weights_mask) weights_mask->assign(pieces.size(), 0.0);
  for (std::size_t i = 0; i < pieces.size(); ++i) {
    if (pieces[i].value >= top - 1e-9) {
      out.push_back(pieces[i].gradient);
      if (weights_mask) (*weights_mask)[i] = 1.0;
    }
  }
  return out;
}

GeneratedCone build_cone(const SipInstance& inst, const ActiveSetReport& as, const std::vector<int>& members,
                         const std::vector<Vec>& lineality, std::vector<LimitRay> rays) {
  GeneratedCone c;
  c.dimension = inst.n;
  for (int i : members) c.generators.push_back({label_text(inst, as.evaluated[i].label), as.evaluated[i].gradient});
  c.lineality = lineality;
  c.rays = std::move(rays);
  const auto gens = c.generator_vectors(false);
  mark_attained(c.rays, gens);
  if (gens.empty() && c.rays.empty()) {
    c.closedness = Closedness::Closed;
  } else {
    c.closedness = closedness_diagnostic(gens, c.rays, inst.all_finite()).status;
  }
  return c;
}

bool regular_at(const SipInstance& inst, const Vec& x, std::uint64_t seed) {
  const UniformityModuli m = estimate_moduli(inst, x, {1e-4, 1e-3, 1e-2}, 200, seed);
  const double small = m.r.front();
  const double large = m.r.back();
  // Rounding noise only: the data is affine near x.
  if (large <= 1e-9) return true;
  return small <= 1e-2 && small <= 0.1 * large + 1e-12;
}

bool compact_premise(const SipInstance& inst) {
  for (const auto& c : inst.constraints) {
    if (c.index_set < 0) continue;
    const auto& d = inst.index_sets[c.index_set];
    if (std::holds_alternative<CountableIndex>(d.kind)) return false;
    if (const auto* iv = std::get_if<IntervalIndex>(&d.kind)) {
      if (!iv->include_lower || !iv->include_upper) return false;
    }
  }
  return true;
}

}  // namespace

NormalConeRep normal_cone(const SipInstance& inst, const PointAnalysis& pa, const CqReport& cq, ConeVariant variant,
                          const OptimalityOptions& opt) {
  require_feasible(inst, pa);
  NormalConeRep rep;
  rep.point = pa.point;
  rep.variant = variant;
  const auto& ev = pa.finest();
  const auto lineality = lineality_basis(pa);
  const bool pmfcq = cq.pmfcq.verdict == Verdict::Holds;

  if (variant == ConeVariant::Unperturbed) {
    const ActiveSetReport as = active_set(ev, 0.0);
    EpsCone ec;
    ec.eps = 0.0;
    ec.cone = build_cone(inst, as, as.active, lineality, {});
    rep.cones.push_back(ec);
    rep.stabilized = ec.cone;
    const bool nfmcq = cq.nfmcq.verdict == Verdict::Holds;
    rep.valid = pmfcq && (nfmcq || compact_premise(inst));
    if (!rep.valid) {
      rep.warnings.push_back(nfmcq || compact_premise(inst)
                                 ? "PMFCQ not established; unperturbed representation not guaranteed"
                                 : "NFMCQ not established and index set not compact; unperturbed representation "
                                   "not guaranteed");
    }
  } else {
    Vec schedule = opt.cq.eps_schedule;
    std::sort(schedule.begin(), schedule.end(), std::greater<>());
    const auto rays = gradient_rays(inst, ev);
    for (double eps : schedule) {
      const ActiveSetReport as = active_set(ev, eps);
      std::vector<LimitRay> in;
      for (const auto& r : rays) {
        const double bound = variant == ConeVariant::Normalized ? eps * r.limit_norm : eps;
        if (r.limit_value >= -bound - kActivityTol) in.push_back(r.ray);
      }
      EpsCone ec;
      ec.eps = eps;
      ec.cone = build_cone(inst, as, variant == ConeVariant::Normalized ? as.normalized : as.eps_active, lineality,
                           std::move(in));
      rep.cones.push_back(std::move(ec));
    }
    if (!rep.cones.empty()) rep.stabilized = rep.cones.back().cone;
    rep.valid = pmfcq;
    if (!rep.valid) rep.warnings.push_back("PMFCQ not established; perturbed representation not guaranteed");
  }

  rep.regular = regular_at(inst, pa.point, opt.cq.seed);
  if (rep.regular) {
    rep.limiting = rep.stabilized;
  } else {
    rep.warnings.push_back("uniform strict differentiability not detected; limiting representation omitted");
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Probe

NormalConeProbe::NormalConeProbe(const SipInstance& inst, const Vec& point, int samples, double radius,
                                 std::uint64_t seed)
    : samples_(samples) {
  const int n = inst.n;
  const Materialization m = materialize(inst, point, inst.max_level());
  // Check order: fixed constraints, closure limits, then families by
  // decreasing value at the base point.
  std::vector<std::pair<double, IndexLabel>> order;
  for (const auto& l : m.indices) {
    double v = 0.0;
    try {
      v = constraint_value(inst, l, point);
    } catch (const DomainError&) {
      v = kInf;
    }
    const bool fixed = inst.constraints[l.constraint].index_set < 0;
    order.push_back({fixed ? kInf : v, l});
  }
  std::stable_sort(order.begin(), order.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  std::vector<IndexLabel> limits;
  for (const auto& l : m.limits) {
    if (limit_value_gradient(inst, l, point)) limits.push_back(l);
  }

  std::vector<Vec> tangent;
  if (!inst.equalities.components.empty()) {
    tangent = rank_nullspace(Matrix::from_rows(equality_jacobian(inst, point), n)).basis;
  }

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double radii[3] = {radius, radius / 10.0, radius / 100.0};
  for (int s = 0; s < samples; ++s) {
    const double rad = radii[s % 3];
    Vec d(n, 0.0);
    if (tangent.empty() && inst.equalities.components.empty()) {
      for (auto& v : d) v = normal(rng);
    } else {
      for (const auto& b : tangent) {
        const double c = normal(rng);
        for (int i = 0; i < n; ++i) d[i] += c * b[i];
      }
    }
    const double len = norm2(d);
    if (len == 0.0) continue;
    const int dim = tangent.empty() && inst.equalities.components.empty() ? n : static_cast<int>(tangent.size());
    const double r = rad * std::pow(unif(rng), 1.0 / std::max(1, dim));
    Vec x(n);
    for (int i = 0; i < n; ++i) x[i] = point[i] + r * d[i] / len;
    if (!inst.equalities.components.empty()) {
      // Gauss-Newton back onto h = 0 along the row space.
      for (int it = 0; it < 5; ++it) {
        const Vec h = equality_values(inst, x);
        if (norm_inf(h) <= 1e-14) break;
        const auto jac = equality_jacobian(inst, x);
        for (std::size_t k = 0; k < jac.size(); ++k) {
          const double jj = dot(jac[k], jac[k]);
          if (jj == 0.0) continue;
          const double hk = equality_values(inst, x)[k];
          for (int i = 0; i < n; ++i) x[i] -= hk * jac[k][i] / jj;
        }
      }
      if (norm_inf(equality_values(inst, x)) > 1e-12) continue;
    }
    bool feasible = true;
    try {
      for (const auto& [v0, l] : order) {
        if (inst.constraints[l.constraint].index_set >= 0) break;
        if (constraint_value(inst, l, x) > 0.0) {
          feasible = false;
          break;
        }
      }
      if (feasible) {
        for (const auto& l : limits) {
          auto vg = limit_value_gradient(inst, l, x);
          if (vg && vg->value > 0.0) {
            feasible = false;
            break;
          }
        }
      }
      if (feasible) {
        for (const auto& [v0, l] : order) {
          if (inst.constraints[l.constraint].index_set < 0) continue;
          if (constraint_value(inst, l, x) > 0.0) {
            feasible = false;
            break;
          }
        }
      }
    } catch (const DomainError&) {
      feasible = false;
    }
    if (!feasible) continue;
    Vec off(n);
    for (int i = 0; i < n; ++i) off[i] = x[i] - point[i];
    const double nrm = norm2(off);
    if (nrm == 0.0) continue;
    for (double& v : off) v /= nrm;
    offsets_.push_back(std::move(off));
  }
}

ProbeResult NormalConeProbe::quotient(const Vec& v) const {
  ProbeResult r;
  r.samples = samples_;
  r.feasible_samples = static_cast<int>(offsets_.size());
  r.conclusive = r.feasible_samples >= 10;
  if (offsets_.empty()) return r;
  r.quotient = -kInf;
  for (const auto& o : offsets_) r.quotient = std::max(r.quotient, dot(v, o));
  if (norm_inf(v) == 0.0) r.quotient = 0.0;
  return r;
}

ProbeResult empirical_normal_cone_probe(const SipInstance& inst, const Vec& point, const Vec& v, int samples,
                                        double radius, std::uint64_t seed) {
  return NormalConeProbe(inst, point, samples, radius, seed).quotient(v);
}

// ---------------------------------------------------------------------------
// Stationarity

namespace {

StationarityReport stationarity_from(const SipInstance& inst, const std::vector<Vec>& p, const Vec& piece_mask,
                                     const std::vector<Vec>& g, const std::vector<IndexLabel>& labels,
                                     const std::vector<std::string>& names, const std::vector<Vec>& h,
                                     double tol, FeasibilityResult* raw = nullptr) {
  StationarityReport rep;
  FeasibilityResult f = stationarity_feasibility(p, g, h, inst.n, tol);
  if (raw) *raw = f;
  if (f.status == FeasibilityStatus::Member) {
    Vec v(inst.n, 0.0);
    for (std::size_t k = 0; k < p.size(); ++k)
      for (int i = 0; i < inst.n; ++i) v[i] -= f.certificate.weights[k] * p[k][i];
    FeasibilityCertificate red = caratheodory_reduce(f.certificate, g, h, v);
    KktCertificate cert;
    for (std::size_t k = 0; k < red.lambda.size(); ++k) {
      if (red.lambda[k] <= 0.0) continue;
      cert.lambda.push_back(red.lambda[k]);
      cert.support.push_back(names[k]);
      if (k < labels.size()) cert.support_labels.push_back(labels[k]);
    }
    cert.y = red.y;
    cert.residual = red.residual;
    std::size_t w = 0;
    for (double m : piece_mask) cert.cost_weights.push_back(m > 0 ? f.certificate.weights[w++] : 0.0);
    rep.outcome = cert.residual <= std::max(tol, 1e-9) ? Outcome::CertificateFound : Outcome::Inconclusive;
    if (rep.outcome == Outcome::Inconclusive) rep.note = "certificate residual above tolerance after reduction";
    rep.certificate = std::move(cert);
  } else if (f.status == FeasibilityStatus::Separated) {
    rep.outcome = Outcome::Refuted;
    rep.separator = f.separator;
    for (double& s : rep.separator) s = -s;
  } else {
    rep.outcome = Outcome::Inconclusive;
    rep.lp_failure = f.lp_status == LpStatus::IterationLimit;
    rep.note = std::string("LP ") + to_string(f.lp_status) + "; no verified separator";
  }
  return rep;
}

}  // namespace

StationarityReport verify_kkt(const SipInstance& inst, const PointAnalysis& pa, const OptimalityOptions& opt) {
  require_feasible(inst, pa);
  const ActiveSetReport as = active_set(pa.finest(), 0.0);
  std::vector<Vec> g;
  std::vector<IndexLabel> labels;
  std::vector<std::string> names;
  for (int i : as.active) {
    g.push_back(as.evaluated[i].gradient);
    labels.push_back(as.evaluated[i].label);
    names.push_back(label_text(inst, as.evaluated[i].label));
  }
  Vec mask;
  const auto p = cost_points(inst, pa.point, &mask);
  StationarityReport rep = stationarity_from(inst, p, mask, g, labels, names, lineality_basis(pa), opt.tol);
  rep.condition = Condition::UnperturbedKKT;
  return rep;
}

StationarityReport verify_perturbed_stationarity(const SipInstance& inst, const PointAnalysis& pa,
                                                 const OptimalityOptions& opt) {
  require_feasible(inst, pa);
  const auto& ev = pa.finest();
  Vec schedule = opt.cq.eps_schedule;
  std::sort(schedule.begin(), schedule.end(), std::greater<>());
  const auto rays = gradient_rays(inst, ev);
  const auto h = lineality_basis(pa);
  Vec mask;
  const auto p = cost_points(inst, pa.point, &mask);

  StationarityReport rep;
  rep.condition = Condition::PerturbedStationarity;
  bool all_member = true;
  std::optional<StationarityReport> refuted;
  std::optional<StationarityReport> last_member;
  for (double eps : schedule) {
    const ActiveSetReport as = active_set(ev, eps);
    std::vector<Vec> g;
    std::vector<IndexLabel> labels;
    std::vector<std::string> names;
    for (int i : as.eps_active) {
      g.push_back(as.evaluated[i].gradient);
      labels.push_back(as.evaluated[i].label);
      names.push_back(label_text(inst, as.evaluated[i].label));
    }
    for (const auto& r : rays) {
      if (r.limit_value >= -eps - kActivityTol) {
        g.push_back(r.ray.direction);
        names.push_back(r.ray.label + " [ray]");
      }
    }
    FeasibilityResult raw;
    StationarityReport one = stationarity_from(inst, p, mask, g, labels, names, h, opt.tol, &raw);
    rep.trace.push_back({eps, raw.status, raw.distance});
    rep.lp_failure = rep.lp_failure || one.lp_failure;
    if (one.outcome == Outcome::CertificateFound) {
      last_member = std::move(one);
    } else {
      all_member = false;
      if (one.outcome == Outcome::Refuted && !refuted) refuted = std::move(one);
    }
  }
  if (all_member && last_member) {
    rep.outcome = Outcome::CertificateFound;
    rep.certificate = last_member->certificate;
    rep.note = "membership holds at every scheduled eps";
  } else if (refuted) {
    rep.outcome = Outcome::Refuted;
    rep.separator = refuted->separator;
  } else {
    rep.outcome = Outcome::Inconclusive;
  }
  return rep;
}

StationarityReport convex_global_check(const SipInstance& inst, const PointAnalysis& pa, const CqReport& cq,
                                       const OptimalityOptions& opt) {
  StationarityReport rep;
  rep.condition = Condition::ConvexGlobal;
  if (!inst.convex) {
    rep.note = "instance not declared convex";
    return rep;
  }
  if (!inst.equalities.components.empty() && !inst.equalities.affine) {
    rep.note = "equalities not declared affine";
    return rep;
  }
  const bool unperturbed = cq.nfmcq.verdict == Verdict::Holds;
  StationarityReport base =
      unperturbed ? verify_kkt(inst, pa, opt) : verify_perturbed_stationarity(inst, pa, opt);
  rep.outcome = base.outcome;
  rep.certificate = base.certificate;
  rep.separator = base.separator;
  rep.trace = base.trace;
  rep.lp_failure = base.lp_failure;
  if (base.outcome == Outcome::CertificateFound) {
    rep.global = true;
    rep.note = "global minimizer";
  } else if (base.outcome == Outcome::Refuted) {
    if (cq.pmfcq.verdict == Verdict::Holds || cq.ssc.verdict == Verdict::Holds) {
      rep.note = "not a global minimizer";
    } else {
      rep.outcome = Outcome::Inconclusive;
      rep.note = "stationarity refuted but neither PMFCQ nor SSC holds";
    }
  } else {
    rep.note = base.note;
  }
  return rep;
}

NormalConeRep linear_specialization(const SipInstance& inst, const PointAnalysis& pa, const CqReport& cq,
                                    const OptimalityOptions& opt) {
  for (const auto& c : inst.constraints) {
    if (!is_affine_in_x(c.body)) throw std::invalid_argument("constraint " + c.name + " is not affine");
  }
  for (const auto& h : inst.equalities.components) {
    if (!is_affine_in_x(h)) throw std::invalid_argument("equalities are not affine");
  }
  SipInstance convex_copy = inst;
  convex_copy.convex = true;
  convex_copy.equalities.affine = true;
  CqReport local = cq;
  if (local.ssc.verdict == Verdict::Unknown) {
    local.ssc = check_ssc(convex_copy, std::nullopt, &local.pmfcq, pa.point, opt.cq);
  }
  if (local.nfmcq.verdict == Verdict::Holds && inst.equalities.components.empty()) {
    NormalConeRep rep = normal_cone(inst, pa, local, ConeVariant::Unperturbed, opt);
    rep.valid = true;
    rep.warnings.clear();
    if (!rep.regular) rep.limiting = rep.stabilized, rep.regular = true;
    return rep;
  }
  NormalConeRep rep = normal_cone(inst, pa, local, ConeVariant::Perturbed, opt);
  rep.valid = local.ssc.verdict == Verdict::Holds;
  rep.warnings.clear();
  if (!rep.valid) rep.warnings.push_back("SSC not established for the linear system; representation not guaranteed");
  if (!rep.regular) rep.limiting = rep.stabilized, rep.regular = true;
  return rep;
}

}  // namespace sipcq
