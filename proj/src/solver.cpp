#include "sipcq/solver.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>
#include <stdexcept>

namespace sipcq {

const char* to_string(SolverStatus s) {
  return s == SolverStatus::Converged ? "converged" : "iteration_limit";
}

void SolverConfig::validate() const {
  if (initial_working <= 0 || max_outer <= 0 || multistart <= 0 || max_inner <= 0)
    throw std::invalid_argument("solver counts must be positive");
  if (!(tol > 0) || !(armijo > 0) || !(armijo < 1))
    throw std::invalid_argument("solver tol must be positive and armijo in (0,1)");
}

SolverConfig SolverConfig::from_instance(const SipInstance& inst) {
  SolverConfig c;
  for (const auto& [key, value] : inst.solver_options) {
    try {
      if (key == "initial_working") {
        c.initial_working = std::stoi(value);
      } else if (key == "max_outer") {
        c.max_outer = std::stoi(value);
      } else if (key == "tol") {
        c.tol = std::stod(value);
      } else if (key == "multistart") {
        c.multistart = std::stoi(value);
      } else if (key == "armijo") {
        c.armijo = std::stod(value);
      } else if (key == "max_inner") {
        c.max_inner = std::stoi(value);
      } else if (key == "seed") {
        c.seed = std::stoull(value);
      } else {
        throw std::invalid_argument("unknown solver option '" + key + "'");
      }
    } catch (const std::logic_error& e) {
      if (dynamic_cast<const std::invalid_argument*>(&e) && std::string(e.what()).starts_with("unknown"))
        throw;
      throw std::invalid_argument("bad value for solver option '" + key + "': " + value);
    }
  }
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------
// most violated index

ViolatedIndex most_violated_index(const SipInstance& inst, const Vec& x) {
  const Materialization m = materialize(inst, x, inst.max_level());
  std::optional<ViolatedIndex> best;
  auto consider = [&](const IndexLabel& l, double v) {
    if (!best || v > best->violation || (v == best->violation && l < best->label)) best = ViolatedIndex{l, v};
  };
  // Best per interval family, refined afterwards.
  std::vector<std::optional<ViolatedIndex>> family_best(inst.constraints.size());
  for (const auto& l : m.indices) {
    double v;
    try {
      v = constraint_value(inst, l, x);
    } catch (const DomainError&) {
      v = kInf;
    }
    consider(l, v);
    auto& fb = family_best[l.constraint];
    if (!fb || v > fb->violation) fb = ViolatedIndex{l, v};
  }
  for (const auto& l : m.limits) {
    if (auto vg = limit_value_gradient(inst, l, x)) consider(l, vg->value);
  }
  for (std::size_t ci = 0; ci < inst.constraints.size(); ++ci) {
    const auto& c = inst.constraints[ci];
    if (c.index_set < 0 || !family_best[ci]) continue;
    const auto* iv = std::get_if<IntervalIndex>(&inst.index_sets[c.index_set].kind);
    if (!iv) continue;
    const double h = (iv->upper - iv->lower) / std::max(1, iv->resolution - 1);
    const double t0 = family_best[ci]->label.t;
    for (int k = -16; k <= 16; ++k) {
      const double t = t0 + k * h / 16.0;
      if (t < iv->lower || t > iv->upper) continue;
      if ((t == iv->lower && !iv->include_lower) || (t == iv->upper && !iv->include_upper)) continue;
      const IndexLabel l{static_cast<int>(ci), t, false, 0};
      double v;
      try {
        v = constraint_value(inst, l, x);
      } catch (const DomainError&) {
        v = kInf;
      }
      if (v > best->violation) best = ViolatedIndex{l, v};
    }
  }
  if (!best) return {IndexLabel{}, -kInf};
  return *best;
}

// ---------------------------------------------------------------------------
// Finite subproblem

namespace {

// Subproblem over z = x, or z = (x, s) for a max-type cost in epigraph form.
struct Subproblem {
  const SipInstance* inst = nullptr;
  int nz = 0;
  bool epigraph = false;
  std::vector<IndexLabel> working;
  Vec lower, upper;

  std::span<const double> xpart(const Vec& z) const { return {z.data(), static_cast<std::size_t>(inst->n)}; }

  int inequality_count() const {
    return static_cast<int>(working.size()) + (epigraph ? static_cast<int>(inst->cost.pieces.size()) : 0);
  }

  ValueAndGradient objective(const Vec& z) const {
    if (epigraph) {
      ValueAndGradient out{z[nz - 1], Vec(nz, 0.0)};
      out.gradient[nz - 1] = 1.0;
      return out;
    }
    return cost_pieces(*inst, xpart(z)).front();
  }

  // Inequalities; limits without a detected value are reported as -inf.
  std::vector<ValueAndGradient> inequalities(const Vec& z) const {
    std::vector<ValueAndGradient> out;
    out.reserve(inequality_count());
    for (const auto& l : working) {
      ValueAndGradient vg;
      if (l.limit) {
        auto lv = limit_value_gradient(*inst, l, xpart(z));
        vg = lv ? *lv : ValueAndGradient{-kInf, Vec(inst->n, 0.0)};
      } else {
        vg = constraint_value_gradient(*inst, l, xpart(z));
      }
      vg.gradient.resize(nz, 0.0);
      out.push_back(std::move(vg));
    }
    if (epigraph) {
      for (auto& p : cost_pieces(*inst, xpart(z))) {
        p.value -= z[nz - 1];
        p.gradient.resize(nz, 0.0);
        p.gradient[nz - 1] = -1.0;
        out.push_back(std::move(p));
      }
    }
    return out;
  }

  Vec equalities(const Vec& z) const { return equality_values(*inst, xpart(z)); }

  std::vector<Vec> equality_rows(const Vec& z) const {
    auto rows = equality_jacobian(*inst, xpart(z));
    for (auto& r : rows) r.resize(nz, 0.0);
    return rows;
  }

  Vec project(Vec z) const {
    for (int i = 0; i < nz; ++i) z[i] = std::clamp(z[i], lower[i], upper[i]);
    return z;
  }

  double violation(const Vec& z) const {
    double v = 0.0;
    for (const auto& g : inequalities(z)) v = std::max(v, g.value);
    for (double h : equalities(z)) v = std::max(v, std::fabs(h));
    return v;
  }

  double cost(const Vec& z) const { return epigraph ? cost_value(*inst, xpart(z)) : objective(z).value; }
};

struct Merit {
  double value = 0.0;
  Vec gradient;
};

std::optional<Merit> al_merit(const Subproblem& sp, const Vec& z, const Vec& mu, const Vec& nu, double rho) {
  try {
    const auto f = sp.objective(z);
    Merit m{f.value, f.gradient};
    const auto g = sp.inequalities(z);
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (std::isinf(g[i].value)) continue;
      const double a = std::max(0.0, mu[i] + rho * g[i].value);
      m.value += (a * a - mu[i] * mu[i]) / (2.0 * rho);
      if (a > 0)
        for (int k = 0; k < sp.nz; ++k) m.gradient[k] += a * g[i].gradient[k];
    }
    const Vec h = sp.equalities(z);
    if (!h.empty()) {
      const auto rows = sp.equality_rows(z);
      for (std::size_t j = 0; j < h.size(); ++j) {
        m.value += nu[j] * h[j] + 0.5 * rho * h[j] * h[j];
        const double a = nu[j] + rho * h[j];
        for (int k = 0; k < sp.nz; ++k) m.gradient[k] += a * rows[j][k];
      }
    }
    if (!std::isfinite(m.value)) return std::nullopt;
    return m;
  } catch (const DomainError&) {
    return std::nullopt;
  }
}

// Projected gradient with Barzilai-Borwein trial steps and Armijo
// backtracking by halving.
Vec minimize_merit(const Subproblem& sp, Vec z, const Vec& mu, const Vec& nu, double rho, const SolverConfig& cfg) {
  auto cur = al_merit(sp, z, mu, nu, rho);
  if (!cur) return z;
  double step = 1.0 / std::max(1.0, norm_inf(cur->gradient));
  Vec prev_z, prev_g;
  int stalled = 0;  // consecutive steps with negligible merit decrease
  for (int it = 0; it < cfg.max_inner; ++it) {
    Vec pg(sp.nz);
    {
      Vec t(sp.nz);
      for (int k = 0; k < sp.nz; ++k) t[k] = z[k] - cur->gradient[k];
      t = sp.project(t);
      for (int k = 0; k < sp.nz; ++k) pg[k] = t[k] - z[k];
    }
    if (norm_inf(pg) <= 1e-12 * std::max(1.0, norm_inf(z))) break;
    if (stalled >= 8) break;
    if (!prev_z.empty()) {
      double ss = 0, sy = 0;
      for (int k = 0; k < sp.nz; ++k) {
        const double s = z[k] - prev_z[k];
        const double y = cur->gradient[k] - prev_g[k];
        ss += s * s;
        sy += s * y;
      }
      if (sy > 0) step = std::clamp(ss / sy, 1e-12, 1e12);
    }
    bool moved = false;
    for (int bt = 0; bt < 60; ++bt) {
      Vec trial(sp.nz);
      for (int k = 0; k < sp.nz; ++k) trial[k] = z[k] - step * cur->gradient[k];
      trial = sp.project(trial);
      double decrease = 0.0;
      for (int k = 0; k < sp.nz; ++k) decrease += cur->gradient[k] * (trial[k] - z[k]);
      auto next = al_merit(sp, trial, mu, nu, rho);
      if (next && next->value <= cur->value + cfg.armijo * decrease) {
        prev_z = z;
        prev_g = cur->gradient;
        stalled = cur->value - next->value <= 1e-15 * (1.0 + std::fabs(cur->value)) ? stalled + 1 : 0;
        z = std::move(trial);
        cur = std::move(next);
        moved = true;
        break;
      }
      step *= 0.5;
    }
    if (!moved) break;
  }
  return z;
}

Vec augmented_lagrangian(const Subproblem& sp, Vec z, const SolverConfig& cfg) {
  Vec mu(sp.inequality_count(), 0.0);
  Vec nu(sp.equalities(z).size(), 0.0);
  double rho = 10.0;
  double last_violation = kInf;
  for (int outer = 0; outer < 40; ++outer) {
    const Vec before = z;
    z = minimize_merit(sp, z, mu, nu, rho, cfg);
    double violation;
    try {
      const auto g = sp.inequalities(z);
      for (std::size_t i = 0; i < g.size(); ++i)
        if (std::isfinite(g[i].value)) mu[i] = std::max(0.0, mu[i] + rho * g[i].value);
      const Vec h = sp.equalities(z);
      for (std::size_t j = 0; j < h.size(); ++j) nu[j] += rho * h[j];
      violation = sp.violation(z);
    } catch (const DomainError&) {
      return before;
    }
    double moved = 0.0;
    for (int k = 0; k < sp.nz; ++k) moved = std::max(moved, std::fabs(z[k] - before[k]));
    if (violation <= 1e-12 && moved <= 1e-12) break;
    if (violation > 0.25 * last_violation) rho = std::min(rho * 2.0, 1e12);
    last_violation = violation;
  }
  return z;
}

// Newton iteration on the KKT system of the nearly active constraints.
std::optional<Vec> newton_polish(const Subproblem& sp, const Vec& z0, double tol) {
  std::vector<ValueAndGradient> g0;
  try {
    g0 = sp.inequalities(z0);
  } catch (const DomainError&) {
    return std::nullopt;
  }
  std::vector<int> candidates;
  for (int i = 0; i < static_cast<int>(g0.size()); ++i)
    if (g0[i].value >= -1e-6) candidates.push_back(i);
  std::stable_sort(candidates.begin(), candidates.end(),
                   [&](int a, int b) { return g0[a].value > g0[b].value; });
  const auto eq_rows = sp.equality_rows(z0);
  const int me = static_cast<int>(eq_rows.size());
  std::vector<Vec> stack = eq_rows;
  for (int i : candidates) stack.push_back(g0[i].gradient);
  std::vector<int> active;
  for (int pos : independent_subset(stack, 1e-6)) {
    if (pos >= me) active.push_back(candidates[pos - me]);
  }

  for (int attempt = 0; attempt < 8; ++attempt) {
    const int ka = static_cast<int>(active.size());
    const int dim = sp.nz + ka + me;
    Vec z = z0;
    Vec lam(ka, 0.0), y(me, 0.0);
    bool ok = false;
    try {
      auto lagrangian_gradient = [&](const Vec& zz) {
        Vec gl = sp.objective(zz).gradient;
        const auto g = sp.inequalities(zz);
        for (int a = 0; a < ka; ++a)
          for (int k = 0; k < sp.nz; ++k) gl[k] += lam[a] * g[active[a]].gradient[k];
        const auto rows = sp.equality_rows(zz);
        for (int j = 0; j < me; ++j)
          for (int k = 0; k < sp.nz; ++k) gl[k] += y[j] * rows[j][k];
        return gl;
      };
      // Multiplier estimate by least squares on the stationarity rows.
      {
        Matrix a(dim - sp.nz, dim - sp.nz, 0.0);
        Vec rhs(dim - sp.nz, 0.0);
        std::vector<Vec> cols;
        const auto g = sp.inequalities(z);
        for (int a2 = 0; a2 < ka; ++a2) cols.push_back(g[active[a2]].gradient);
        for (const auto& r : sp.equality_rows(z)) cols.push_back(r);
        const Vec fg = sp.objective(z).gradient;
        for (std::size_t i = 0; i < cols.size(); ++i) {
          for (std::size_t j = 0; j < cols.size(); ++j) a(i, j) = dot(cols[i], cols[j]);
          rhs[i] = -dot(cols[i], fg);
        }
        if (!cols.empty()) {
          if (auto sol = solve_dense(a, rhs, 1e-12)) {
            for (int i = 0; i < ka; ++i) lam[i] = (*sol)[i];
            for (int j = 0; j < me; ++j) y[j] = (*sol)[ka + j];
          }
        }
      }
      for (int it = 0; it < 30; ++it) {
        const Vec gl = lagrangian_gradient(z);
        const auto g = sp.inequalities(z);
        const Vec h = sp.equalities(z);
        const auto rows = sp.equality_rows(z);
        Vec f(dim);
        for (int k = 0; k < sp.nz; ++k) f[k] = gl[k];
        for (int a = 0; a < ka; ++a) f[sp.nz + a] = g[active[a]].value;
        for (int j = 0; j < me; ++j) f[sp.nz + ka + j] = h[j];
        if (norm_inf(f) <= 1e-14 * std::max(1.0, norm_inf(z))) {
          ok = true;
          break;
        }
        Matrix jac(dim, dim, 0.0);
        for (int c = 0; c < sp.nz; ++c) {
          const double d = 1e-6 * std::max(1.0, std::fabs(z[c]));
          Vec zp = z, zm = z;
          zp[c] += d;
          zm[c] -= d;
          const Vec gp = lagrangian_gradient(zp);
          const Vec gm = lagrangian_gradient(zm);
          for (int r = 0; r < sp.nz; ++r) jac(r, c) = (gp[r] - gm[r]) / (2 * d);
        }
        for (int r = 0; r < sp.nz; ++r)
          for (int c = r + 1; c < sp.nz; ++c) jac(r, c) = jac(c, r) = 0.5 * (jac(r, c) + jac(c, r));
        for (int a = 0; a < ka; ++a)
          for (int k = 0; k < sp.nz; ++k) jac(k, sp.nz + a) = jac(sp.nz + a, k) = g[active[a]].gradient[k];
        for (int j = 0; j < me; ++j)
          for (int k = 0; k < sp.nz; ++k) jac(k, sp.nz + ka + j) = jac(sp.nz + ka + j, k) = rows[j][k];
        for (double& v : f) v = -v;
        auto step = solve_dense(jac, f, 1e-14);
        if (!step) break;
        double size = 0.0;
        for (int k = 0; k < sp.nz; ++k) size = std::max(size, std::fabs((*step)[k]));
        for (int k = 0; k < sp.nz; ++k) z[k] += (*step)[k];
        for (int a = 0; a < ka; ++a) lam[a] += (*step)[sp.nz + a];
        for (int j = 0; j < me; ++j) y[j] += (*step)[sp.nz + ka + j];
        if (size <= 1e-15 * std::max(1.0, norm_inf(z))) {
          ok = true;
          break;
        }
      }
      if (!ok) {
        // Accept a stalled iteration when the residual is at round-off.
        const Vec gl = lagrangian_gradient(z);
        ok = norm_inf(gl) <= 1e-10 && sp.violation(z) <= tol;
      }
    } catch (const DomainError&) {
      return std::nullopt;
    }
    if (!ok) return std::nullopt;
    int worst = -1;
    for (int a = 0; a < ka; ++a)
      if (lam[a] < -1e-10 && (worst < 0 || lam[a] < lam[worst])) worst = a;
    if (worst >= 0) {
      active.erase(active.begin() + worst);
      continue;
    }
    double drift = 0.0;
    for (int k = 0; k < sp.nz; ++k) drift = std::max(drift, std::fabs(z[k] - z0[k]));
    if (drift > 1e-2) return std::nullopt;
    for (int k = 0; k < sp.nz; ++k)
      if (z[k] < sp.lower[k] || z[k] > sp.upper[k]) return std::nullopt;
    try {
      if (sp.violation(z) > tol) return std::nullopt;
    } catch (const DomainError&) {
      return std::nullopt;
    }
    return z;
  }
  return std::nullopt;
}

struct Candidate {
  Vec z;
  double violation = kInf;
  double cost = kInf;
};

bool better(const Candidate& a, const Candidate& b, double tol) {
  const bool fa = a.violation <= tol, fb = b.violation <= tol;
  if (fa != fb) return fa;
  if (!fa) return a.violation < b.violation;
  if (a.cost != b.cost) return a.cost < b.cost;
  return a.z < b.z;
}

Candidate solve_subproblem(const Subproblem& sp, const std::vector<Vec>& starts, const SolverConfig& cfg) {
  Candidate best;
  bool have = false;
  for (const auto& s : starts) {
    Candidate c;
    try {
      c.z = augmented_lagrangian(sp, sp.project(s), cfg);
      if (auto pol = newton_polish(sp, c.z, cfg.tol)) {
        // Keep the polished point unless it is worse than the raw one.
        const double raw_cost = sp.cost(c.z);
        const double raw_violation = sp.violation(c.z);
        if (raw_violation > cfg.tol || sp.cost(*pol) <= raw_cost + 1e-8) c.z = *pol;
      }
      c.violation = sp.violation(c.z);
      c.cost = sp.cost(c.z);
    } catch (const DomainError&) {
      continue;
    }
    if (!std::isfinite(c.cost)) continue;
    if (!have || better(c, best, cfg.tol)) {
      best = std::move(c);
      have = true;
    }
  }
  return best;
}

std::vector<IndexLabel> initial_working_set(const SipInstance& inst, const Vec& x0, int per_family) {
  std::vector<IndexLabel> w;
  const Materialization m = materialize(inst, x0, 0);
  for (int ci = 0; ci < static_cast<int>(inst.constraints.size()); ++ci) {
    const auto& c = inst.constraints[ci];
    if (c.index_set < 0) {
      w.push_back({ci, 0.0, false, 0});
      continue;
    }
    std::vector<IndexLabel> fam;
    for (const auto& l : m.indices)
      if (l.constraint == ci) fam.push_back(l);
    const int k = static_cast<int>(fam.size());
    if (k == 0) continue;
    const int take = std::min(per_family, k);
    for (int j = 0; j < take; ++j) {
      const int pos = take == 1 ? 0 : static_cast<int>(std::llround(static_cast<double>(j) * (k - 1) / (take - 1)));
      if (std::find(w.begin(), w.end(), fam[pos]) == w.end()) w.push_back(fam[pos]);
    }
  }
  for (const auto& l : m.limits) w.push_back(l);
  return w;
}

}  // namespace

SolveResult solve(const SipInstance& inst, const SolverConfig& cfg) {
  inst.validate();
  cfg.validate();
  Subproblem sp;
  sp.inst = &inst;
  sp.epigraph = inst.cost.kind == Cost::Kind::ConvexMax;
  sp.nz = inst.n + (sp.epigraph ? 1 : 0);
  sp.lower.assign(sp.nz, -kInf);
  sp.upper.assign(sp.nz, kInf);
  Vec center(inst.n, 0.0);
  for (int i = 0; i < inst.n && i < static_cast<int>(inst.box.size()); ++i) {
    sp.lower[i] = inst.box[i].first;
    sp.upper[i] = inst.box[i].second;
    center[i] = 0.5 * (inst.box[i].first + inst.box[i].second);
  }

  auto lift = [&](const Vec& x) {
    Vec z = x;
    if (sp.epigraph) {
      double s = 0.0;
      try {
        s = cost_value(inst, x);
      } catch (const DomainError&) {
      }
      z.push_back(std::isfinite(s) ? s : 0.0);
    }
    return z;
  };

  SolveResult result;
  sp.working = initial_working_set(inst, center, cfg.initial_working);
  Vec x = center;
  double best_accepted = kInf;
  for (int outer = 0; outer < cfg.max_outer; ++outer) {
    std::mt19937_64 rng(cfg.seed + 0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(outer + 1));
    // Full multistart on the first subproblem; afterwards the warm start
    // plus two random starts.
    std::vector<Vec> starts{lift(x)};
    const int count = outer == 0 ? cfg.multistart : std::min(cfg.multistart, 3);
    for (int s = 1; s < count; ++s) {
      Vec p(inst.n);
      for (int i = 0; i < inst.n; ++i) {
        if (std::isfinite(sp.lower[i]) && std::isfinite(sp.upper[i])) {
          p[i] = std::uniform_real_distribution<double>(sp.lower[i], sp.upper[i])(rng);
        } else {
          p[i] = center[i] + std::normal_distribution<double>(0.0, 1.0)(rng);
        }
      }
      starts.push_back(lift(p));
    }
    const Candidate cand = solve_subproblem(sp, starts, cfg);
    if (cand.z.empty()) break;
    x.assign(cand.z.begin(), cand.z.begin() + inst.n);
    const ViolatedIndex mv = most_violated_index(inst, x);
    const double eq = norm_inf(equality_values(inst, x));
    SolverIteration rec;
    for (const auto& l : sp.working) rec.working_set.push_back(label_text(inst, l));
    rec.x = x;
    rec.max_violation = std::max({mv.violation, eq, 0.0});
    rec.cost = cost_value(inst, x);
    rec.accepted = rec.max_violation <= best_accepted;
    if (rec.accepted) best_accepted = rec.max_violation;
    result.trace.iterations.push_back(rec);
    if (rec.max_violation <= cfg.tol) {
      result.trace.status = SolverStatus::Converged;
      result.x = x;
      return result;
    }
    if (std::find(sp.working.begin(), sp.working.end(), mv.label) == sp.working.end()) {
      sp.working.push_back(mv.label);
    }
  }
  result.x = x;
  result.trace.status = SolverStatus::IterationLimit;
  return result;
}

}  // namespace sipcq
