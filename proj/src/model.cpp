#include "sipcq/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

namespace sipcq {

namespace {

constexpr double kCountableTailCap = 1e9;
constexpr int kCountableLevels = 4;
constexpr int kOpenEndDepth = 19;
constexpr int kMaxLocalMaximizers = 8;
constexpr int kBisectionStepsPerLevel = 6;

std::string format_real(double v) {
  std::ostringstream os;
  os.precision(12);
  os << v;
  return os.str();
}

}  // namespace

SymbolTable SipInstance::symbols() const {
  SymbolTable s;
  s.variables = variables;
  return s;
}

bool SipInstance::all_finite() const {
  for (const auto& c : constraints) {
    if (c.index_set >= 0 && !index_sets[c.index_set].is_finite()) return false;
  }
  return true;
}

int SipInstance::max_level() const {
  int level = 0;
  for (const auto& c : constraints) {
    if (c.index_set < 0) continue;
    const auto& d = index_sets[c.index_set];
    if (const auto* iv = std::get_if<IntervalIndex>(&d.kind)) level = std::max(level, iv->refinement);
    if (std::holds_alternative<CountableIndex>(d.kind)) level = std::max(level, kCountableLevels);
  }
  return level;
}

void SipInstance::validate() const {
  if (n < 1 || n > kMaxDimension) {
    throw std::invalid_argument("dimension must be in [1, " + std::to_string(kMaxDimension) + "]");
  }
  if (static_cast<int>(variables.size()) != n) throw std::invalid_argument("variable list does not match dimension");
  if (cost.pieces.empty()) throw std::invalid_argument("missing cost");
  if (cost.kind == Cost::Kind::Smooth && cost.pieces.size() != 1) {
    throw std::invalid_argument("a smooth cost has exactly one expression");
  }
  auto check_expr = [&](const Expr& e, int slots, const std::string& where) {
    if (required_dimension(e) > n) throw std::invalid_argument(where + ": variable out of range");
    if (required_slots(e) > slots) throw std::invalid_argument(where + ": unbound index variable");
  };
  for (const auto& p : cost.pieces) check_expr(p, 0, "cost");
  for (const auto& c : constraints) {
    if (c.index_set >= static_cast<int>(index_sets.size())) {
      throw std::invalid_argument("constraint " + c.name + ": unknown index set");
    }
    check_expr(c.body, c.index_set >= 0 ? 1 : 0, "constraint " + c.name);
  }
  for (std::size_t i = 0; i < equalities.components.size(); ++i) {
    check_expr(equalities.components[i], 0, "equality");
  }
  if (static_cast<int>(equalities.components.size()) >= n && !equalities.components.empty()) {
    throw std::invalid_argument("equality count m must be smaller than the dimension n");
  }
  for (const auto& d : index_sets) {
    if (const auto* f = std::get_if<FiniteIndex>(&d.kind)) {
      if (f->values.empty()) throw std::invalid_argument("index set " + d.name + ": no values");
    } else if (const auto* iv = std::get_if<IntervalIndex>(&d.kind)) {
      if (!(iv->lower < iv->upper)) throw std::invalid_argument("index set " + d.name + ": need lower < upper");
      if (iv->resolution < 2) throw std::invalid_argument("index set " + d.name + ": resolution must be >= 2");
      if (iv->refinement < 0 || iv->refinement > 12) {
        throw std::invalid_argument("index set " + d.name + ": refinement must be in [0, 12]");
      }
    } else if (const auto* c = std::get_if<CountableIndex>(&d.kind)) {
      if (c->start < 0) throw std::invalid_argument("index set " + d.name + ": start must be >= 0");
      if (c->truncation < c->start) throw std::invalid_argument("index set " + d.name + ": truncation below start");
      if (c->truncation > 10000000) throw std::invalid_argument("index set " + d.name + ": truncation above 1e7");
      for (const auto& r : c->limit_rays) {
        if (static_cast<int>(r.size()) != n || norm2(r) == 0.0) {
          throw std::invalid_argument("index set " + d.name + ": limit ray must be a nonzero vector of length n");
        }
      }
    }
  }
  if (!box.empty() && static_cast<int>(box.size()) != n) throw std::invalid_argument("box must have n ranges");
  for (const auto& [lo, hi] : box) {
    if (!(lo < hi)) throw std::invalid_argument("box ranges need lower < upper");
  }
}

bool operator<(const IndexLabel& a, const IndexLabel& b) {
  if (a.constraint != b.constraint) return a.constraint < b.constraint;
  if (a.limit != b.limit) return !a.limit;
  if (a.limit) return a.end < b.end;
  return a.t < b.t;
}

std::string label_text(const SipInstance& inst, const IndexLabel& label) {
  const Constraint& c = inst.constraints.at(label.constraint);
  if (c.index_set < 0) return c.name;
  const auto& d = inst.index_sets[c.index_set];
  if (label.limit) {
    if (std::holds_alternative<CountableIndex>(d.kind)) return c.name + "(" + d.name + "->inf)";
    const auto& iv = std::get<IntervalIndex>(d.kind);
    return c.name + "(" + d.name + "->" + format_real(label.end < 0 ? iv.lower : iv.upper) + ")";
  }
  return c.name + "(" + d.name + "=" + format_real(label.t) + ")";
}

// ---------------------------------------------------------------------------
// Evaluation

namespace {

double eval_body(const Constraint& c, double t, std::span<const double> x) {
  const double idx[1] = {t};
  return eval(c.body, Bindings{x, std::span<const double>(idx, c.index_set >= 0 ? 1 : 0)});
}

ValueAndGradient eval_body_gradient(const Constraint& c, double t, std::span<const double> x) {
  const double idx[1] = {t};
  return eval_with_gradient(c.body, Bindings{x, std::span<const double>(idx, c.index_set >= 0 ? 1 : 0)});
}

struct TailPoint {
  double t;
  double h;
};

std::vector<long long> countable_points(const CountableIndex& c, int level) {
  const int l = std::clamp(level, 0, kCountableLevels);
  const long long dense_end = std::max(c.start, c.truncation >> (kCountableLevels - l));
  std::vector<long long> out;
  for (long long k = c.start; k <= dense_end; ++k) out.push_back(k);
  for (double v = static_cast<double>(c.truncation); v <= kCountableTailCap; v *= 2.0) {
    const auto k = static_cast<long long>(v);
    if (k > dense_end) out.push_back(k);
    if (c.truncation == 0) break;
  }
  return out;
}

double interval_step(const IntervalIndex& iv) { return (iv.upper - iv.lower) / (iv.resolution - 1); }

// Three deepest tail points of a limit label, ordered so h decreases.
std::vector<TailPoint> tail_probe_points(const SipInstance& inst, const IndexLabel& label) {
  const auto& d = inst.index_sets[inst.constraints[label.constraint].index_set];
  std::vector<TailPoint> out;
  if (const auto* c = std::get_if<CountableIndex>(&d.kind)) {
    auto pts = countable_points(*c, kCountableLevels);
    const std::size_t k = pts.size();
    for (std::size_t i = k >= 3 ? k - 3 : 0; i < k; ++i) {
      if (pts[i] > 0) out.push_back({static_cast<double>(pts[i]), 1.0 / static_cast<double>(pts[i])});
    }
    return out;
  }
  const auto& iv = std::get<IntervalIndex>(d.kind);
  const double h0 = interval_step(iv);
  const int depth = kOpenEndDepth + iv.refinement;
  const double e = label.end < 0 ? iv.lower : iv.upper;
  const double dir = label.end < 0 ? 1.0 : -1.0;
  for (int k = depth - 2; k <= depth; ++k) {
    const double h = std::ldexp(h0, -k);
    out.push_back({e + dir * h, h});
  }
  return out;
}

void interval_points(const SipInstance& inst, const Constraint& c, const IntervalIndex& iv,
                     std::span<const double> x, int level, std::vector<double>& out) {
  const int l = std::clamp(level, 0, iv.refinement);
  const double h0 = interval_step(iv);
  std::vector<double> base;
  for (int k = 0; k < iv.resolution; ++k) {
    const double t = k == iv.resolution - 1 ? iv.upper : iv.lower + k * h0;
    if (k == 0 && !iv.include_lower) continue;
    if (k == iv.resolution - 1 && !iv.include_upper) continue;
    base.push_back(t);
  }
  out.insert(out.end(), base.begin(), base.end());
  for (int k = 1; k <= kOpenEndDepth + l; ++k) {
    const double h = std::ldexp(h0, -k);
    if (!iv.include_lower) out.push_back(iv.lower + h);
    if (!iv.include_upper) out.push_back(iv.upper - h);
  }
  if (l == 0 || x.empty()) return;

  // Local maximizers of g_t(x) on the base grid, ties to the lowest t.
  std::vector<double> vals(base.size());
  for (std::size_t i = 0; i < base.size(); ++i) {
    try {
      vals[i] = eval_body(c, base[i], x);
    } catch (const DomainError&) {
      vals[i] = -kInf;
    }
  }
  std::vector<std::size_t> peaks;
  for (std::size_t i = 0; i < base.size(); ++i) {
    const bool left = i == 0 || vals[i] >= vals[i - 1];
    const bool right = i + 1 == base.size() || vals[i] >= vals[i + 1];
    if (left && right && std::isfinite(vals[i])) peaks.push_back(i);
  }
  std::stable_sort(peaks.begin(), peaks.end(), [&](std::size_t a, std::size_t b) { return vals[a] > vals[b]; });
  if (peaks.size() > static_cast<std::size_t>(kMaxLocalMaximizers)) peaks.resize(kMaxLocalMaximizers);
  (void)inst;

  const double lo = iv.lower;
  const double hi = iv.upper;
  for (std::size_t p : peaks) {
    double best_t = base[p];
    double best_v = vals[p];
    double delta = h0 / 2.0;
    for (int step = 0; step < kBisectionStepsPerLevel * l; ++step) {
      double next_t = best_t;
      double next_v = best_v;
      for (double cand : {best_t - delta, best_t + delta}) {
        if (cand <= lo || cand >= hi) continue;
        out.push_back(cand);
        double v;
        try {
          v = eval_body(c, cand, x);
        } catch (const DomainError&) {
          continue;
        }
        if (v > next_v) {
          next_v = v;
          next_t = cand;
        }
      }
      best_t = next_t;
      best_v = next_v;
      delta /= 2.0;
    }
  }
}

}  // namespace

std::vector<double> family_points(const SipInstance& inst, int constraint, std::span<const double> x, int level) {
  const Constraint& c = inst.constraints.at(constraint);
  std::vector<double> out;
  if (c.index_set < 0) return out;
  const auto& d = inst.index_sets[c.index_set];
  if (const auto* f = std::get_if<FiniteIndex>(&d.kind)) {
    out = f->values;
  } else if (const auto* cn = std::get_if<CountableIndex>(&d.kind)) {
    for (long long k : countable_points(*cn, level)) out.push_back(static_cast<double>(k));
  } else {
    interval_points(inst, c, std::get<IntervalIndex>(d.kind), x, level, out);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

Materialization materialize(const SipInstance& inst, std::span<const double> x, int level) {
  Materialization m;
  for (int ci = 0; ci < static_cast<int>(inst.constraints.size()); ++ci) {
    const Constraint& c = inst.constraints[ci];
    if (c.index_set < 0) {
      m.indices.push_back({ci, 0.0, false, 0});
      continue;
    }
    for (double t : family_points(inst, ci, x, level)) m.indices.push_back({ci, t, false, 0});
    const auto& d = inst.index_sets[c.index_set];
    if (std::holds_alternative<CountableIndex>(d.kind)) {
      m.limits.push_back({ci, 0.0, true, 1});
    } else if (const auto* iv = std::get_if<IntervalIndex>(&d.kind)) {
      if (!iv->include_lower) m.limits.push_back({ci, iv->lower, true, -1});
      if (!iv->include_upper) m.limits.push_back({ci, iv->upper, true, 1});
    }
  }
  return m;
}

double constraint_value(const SipInstance& inst, const IndexLabel& label, std::span<const double> x) {
  if (label.limit) {
    auto r = limit_value_gradient(inst, label, x);
    if (!r) throw std::invalid_argument("no closure limit for " + label_text(inst, label));
    return r->value;
  }
  return eval_body(inst.constraints.at(label.constraint), label.t, x);
}

ValueAndGradient constraint_value_gradient(const SipInstance& inst, const IndexLabel& label,
                                           std::span<const double> x) {
  if (label.limit) {
    auto r = limit_value_gradient(inst, label, x);
    if (!r) throw std::invalid_argument("no closure limit for " + label_text(inst, label));
    return *r;
  }
  return eval_body_gradient(inst.constraints.at(label.constraint), label.t, x);
}

std::optional<ValueAndGradient> limit_value_gradient(const SipInstance& inst, const IndexLabel& label,
                                                     std::span<const double> x) {
  const Constraint& c = inst.constraints.at(label.constraint);
  auto pts = tail_probe_points(inst, label);
  if (pts.size() < 3) return std::nullopt;
  std::vector<ValueAndGradient> vg;
  try {
    for (const auto& p : pts) vg.push_back(eval_body_gradient(c, p.t, x));
  } catch (const DomainError&) {
    return std::nullopt;
  }
  auto extrapolate = [](double f1, double f2, double h1, double h2) { return f2 - h2 * (f1 - f2) / (h1 - h2); };
  auto agree = [](double a, double b) { return std::fabs(a - b) <= 1e-6 * (1.0 + std::fabs(b)); };
  ValueAndGradient out;
  const double ea = extrapolate(vg[0].value, vg[1].value, pts[0].h, pts[1].h);
  out.value = extrapolate(vg[1].value, vg[2].value, pts[1].h, pts[2].h);
  if (!agree(ea, out.value)) return std::nullopt;
  out.gradient.resize(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double ga = extrapolate(vg[0].gradient[i], vg[1].gradient[i], pts[0].h, pts[1].h);
    out.gradient[i] = extrapolate(vg[1].gradient[i], vg[2].gradient[i], pts[1].h, pts[2].h);
    if (!agree(ga, out.gradient[i])) return std::nullopt;
  }
  return out;
}

double cost_value(const SipInstance& inst, std::span<const double> x) {
  double best = -kInf;
  for (const auto& p : inst.cost.pieces) best = std::max(best, eval(p, Bindings{x, {}}));
  return best;
}

std::vector<ValueAndGradient> cost_pieces(const SipInstance& inst, std::span<const double> x) {
  std::vector<ValueAndGradient> out;
  for (const auto& p : inst.cost.pieces) out.push_back(eval_with_gradient(p, Bindings{x, {}}));
  return out;
}

Vec equality_values(const SipInstance& inst, std::span<const double> x) {
  Vec out;
  for (const auto& h : inst.equalities.components) out.push_back(eval(h, Bindings{x, {}}));
  return out;
}

std::vector<Vec> equality_jacobian(const SipInstance& inst, std::span<const double> x) {
  std::vector<Vec> out;
  for (const auto& h : inst.equalities.components) out.push_back(grad_x(h, Bindings{x, {}}));
  return out;
}

PointEvaluation evaluate_all(const SipInstance& inst, std::span<const double> x, int level) {
  PointEvaluation ev;
  ev.point.assign(x.begin(), x.end());
  ev.level = level;
  Materialization m = materialize(inst, x, level);
  ev.indices.reserve(m.indices.size());
  for (const auto& l : m.indices) {
    auto vg = constraint_value_gradient(inst, l, x);
    ev.indices.push_back({l, vg.value, std::move(vg.gradient)});
  }
  for (const auto& l : m.limits) {
    if (auto vg = limit_value_gradient(inst, l, x)) ev.limits.push_back({l, vg->value, std::move(vg->gradient)});
  }
  return ev;
}

FeasibilityReport feasibility_check(const SipInstance& inst, std::span<const double> x, double tol) {
  if (static_cast<int>(x.size()) != inst.n) throw std::invalid_argument("point has wrong dimension");
  FeasibilityReport r;
  r.max_violation = -kInf;
  Materialization m = materialize(inst, x, inst.max_level());
  for (const auto& l : m.indices) {
    const double v = constraint_value(inst, l, x);
    if (v > r.max_violation) {
      r.max_violation = v;
      r.worst = l;
    }
  }
  for (const auto& l : m.limits) {
    auto vg = limit_value_gradient(inst, l, x);
    if (vg && vg->value > r.max_violation) {
      r.max_violation = vg->value;
      r.worst = l;
    }
  }
  if (m.indices.empty()) r.max_violation = 0.0;
  for (double h : equality_values(inst, x)) r.equality_residual = std::max(r.equality_residual, std::fabs(h));
  r.feasible = r.max_violation <= tol && r.equality_residual <= tol;
  return r;
}

ActiveSetReport active_set(const PointEvaluation& ev, double eps) {
  if (eps < 0) throw std::invalid_argument("eps must be nonnegative");
  ActiveSetReport r;
  r.point = ev.point;
  r.eps = eps;
  r.level = ev.level;
  r.gradient_min = kInf;
  for (const auto& e : ev.indices) {
    const double gn = norm2(e.gradient);
    r.gradient_bound = std::max(r.gradient_bound, gn);
    r.gradient_min = std::min(r.gradient_min, gn);
    const bool in_eps = e.value >= -eps - kActivityTol;
    const bool in_norm = e.value >= -eps * gn - kActivityTol;
    if (!in_eps && !in_norm) continue;
    const int pos = static_cast<int>(r.evaluated.size());
    r.evaluated.push_back(e);
    if (e.value >= -kActivityTol) r.active.push_back(pos);
    if (in_eps) r.eps_active.push_back(pos);
    if (in_norm) r.normalized.push_back(pos);
  }
  if (ev.indices.empty()) r.gradient_min = 0.0;
  return r;
}

ActiveSetReport active_set(const SipInstance& inst, std::span<const double> x, double eps) {
  return active_set(evaluate_all(inst, x, inst.max_level()), eps);
}

GradientBound gradient_bound_check(const ActiveSetReport& report) {
  GradientBound b;
  b.bound = report.gradient_bound;
  b.pass = std::isfinite(b.bound);
  b.normalization_advised = report.gradient_min > 0 ? report.gradient_bound / report.gradient_min >= 1e3
                                                    : report.gradient_bound > 0;
  return b;
}

// ---------------------------------------------------------------------------
// Moduli

namespace {

Vec sample_ball(std::mt19937_64& rng, std::span<const double> center, double radius) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const std::size_t n = center.size();
  Vec d(n);
  double len = 0.0;
  while (len == 0.0) {
    for (auto& v : d) v = normal(rng);
    len = norm2(d);
  }
  const double rad = radius * std::pow(unif(rng), 1.0 / static_cast<double>(n));
  Vec x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = center[i] + rad * d[i] / len;
  return x;
}

}  // namespace

UniformityModuli estimate_moduli(const SipInstance& inst, std::span<const double> x, const Vec& eta,
                                 int samples_per_eta, std::uint64_t seed) {
  UniformityModuli out;
  out.eta = eta;
  std::sort(out.eta.begin(), out.eta.end());
  const PointEvaluation ev = evaluate_all(inst, x, inst.max_level());
  const auto& pool = ev.indices;
  // Head of each family: the first entries, where curvature in t is largest.
  std::vector<int> head;
  for (int i = 0; i < static_cast<int>(pool.size()); ++i) {
    if (i < 16 || pool[i].label.constraint != pool[i - 16].label.constraint) head.push_back(i);
  }
  const std::size_t n = x.size();
  double s_run = 0.0;
  double r_run = 0.0;
  for (std::size_t k = 0; k < out.eta.size(); ++k) {
    std::mt19937_64 rng(seed ^ (0x9e3779b97f4a7c15ULL * (k + 1)));
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    long long count = 0;
    for (int s = 0; s < samples_per_eta && !pool.empty(); ++s) {
      const bool use_head = coin(rng) < 0.5;
      const int idx = use_head ? head[std::uniform_int_distribution<std::size_t>(0, head.size() - 1)(rng)]
                               : static_cast<int>(std::uniform_int_distribution<std::size_t>(0, pool.size() - 1)(rng));
      const auto& e = pool[idx];
      Vec a = sample_ball(rng, x, out.eta[k]);
      Vec b = sample_ball(rng, x, out.eta[k]);
      double ga, gb;
      try {
        ga = constraint_value(inst, e.label, a);
        gb = constraint_value(inst, e.label, b);
      } catch (const DomainError&) {
        continue;
      }
      ++count;
      Vec da(n), dab(n);
      for (std::size_t i = 0; i < n; ++i) {
        da[i] = a[i] - x[i];
        dab[i] = a[i] - b[i];
      }
      const double na = norm2(da);
      const double nab = norm2(dab);
      if (na > 0) {
        const double q = std::fabs(ga - e.value - dot(e.gradient, da)) / na;
        s_run = std::max(s_run, q);
        r_run = std::max(r_run, q);
      }
      if (nab > 0) r_run = std::max(r_run, std::fabs(ga - gb - dot(e.gradient, dab)) / nab);
    }
    out.s.push_back(s_run);
    out.r.push_back(r_run);
    out.samples.push_back(count);
  }
  return out;
}

}  // namespace sipcq
