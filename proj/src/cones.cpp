#include "sipcq/cones.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sipcq {

const char* to_string(Closedness c) {
  switch (c) {
    case Closedness::Closed:
      return "closed";
    case Closedness::NotClosed:
      return "not_closed";
    case Closedness::Unknown:
      return "unknown";
  }
  return "?";
}

const char* to_string(RayOrigin o) { return o == RayOrigin::Declared ? "declared" : "extrapolated"; }

std::vector<Vec> GeneratedCone::generator_vectors(bool with_rays) const {
  std::vector<Vec> out;
  out.reserve(generators.size() + rays.size());
  for (const auto& g : generators) out.push_back(g.v);
  if (with_rays) {
    for (const auto& r : rays) out.push_back(r.direction);
  }
  return out;
}

FeasibilityResult membership(const GeneratedCone& c, const Vec& v, double tol, bool use_rays) {
  if (static_cast<int>(v.size()) != c.dimension) throw std::invalid_argument("membership: dimension mismatch");
  return cone_feasibility(c.generator_vectors(use_rays), c.lineality, v, tol);
}

FeasibilityCertificate caratheodory_reduce(const FeasibilityCertificate& cert, const std::vector<Vec>& generators,
                                           const std::vector<Vec>& lineality, const Vec& v) {
  const int d = static_cast<int>(v.size());
  FeasibilityCertificate out = cert;
  if (out.lambda.size() != generators.size()) throw std::invalid_argument("caratheodory_reduce: size mismatch");
  for (double& l : out.lambda) l = std::max(0.0, l);

  for (int guard = 0; guard < static_cast<int>(generators.size()) + 1; ++guard) {
    std::vector<int> support;
    for (int i = 0; i < static_cast<int>(out.lambda.size()); ++i) {
      if (out.lambda[i] > 0.0) support.push_back(i);
    }
    if (static_cast<int>(support.size()) <= 1) break;
    std::vector<Vec> cols;
    for (int i : support) cols.push_back(generators[i]);
    for (const auto& h : lineality) cols.push_back(h);
    const RankNullspace rn = rank_nullspace(Matrix::from_columns(cols, d), 1e-10);
    if (static_cast<int>(support.size()) <= d + 1 && rn.rank == static_cast<int>(cols.size())) break;
    // A null vector with a nonzero generator part.
    const Vec* z = nullptr;
    for (const auto& b : rn.basis) {
      double m = 0.0;
      for (std::size_t k = 0; k < support.size(); ++k) m = std::max(m, std::fabs(b[k]));
      if (m > 1e-9) {
        z = &b;
        break;
      }
    }
    if (!z) break;
    Vec dir = *z;
    double pos = 0.0;
    double neg = 0.0;
    for (std::size_t k = 0; k < support.size(); ++k) {
      pos = std::max(pos, dir[k]);
      neg = std::max(neg, -dir[k]);
    }
    if (pos < neg) {
      for (double& x : dir) x = -x;
    }
    double theta = kInf;
    int hit = -1;
    for (std::size_t k = 0; k < support.size(); ++k) {
      if (dir[k] <= 1e-12) continue;
      const double r = out.lambda[support[k]] / dir[k];
      if (r < theta) {
        theta = r;
        hit = static_cast<int>(k);
      }
    }
    if (hit < 0) break;
    for (std::size_t k = 0; k < support.size(); ++k) {
      double& l = out.lambda[support[k]];
      l -= theta * dir[k];
      if (l < 1e-15 * (1.0 + theta)) l = 0.0;
    }
    out.lambda[support[hit]] = 0.0;
    for (std::size_t j = 0; j < lineality.size(); ++j) out.y[j] -= theta * dir[support.size() + j];
  }

  Vec r(d, 0.0);
  for (int i = 0; i < d; ++i) r[i] = -v[i];
  for (std::size_t k = 0; k < generators.size(); ++k)
    for (int i = 0; i < d; ++i) r[i] += out.lambda[k] * generators[k][i];
  for (std::size_t k = 0; k < lineality.size(); ++k)
    for (int i = 0; i < d; ++i) r[i] += out.y[k] * lineality[k][i];
  out.residual = norm_inf(r);
  return out;
}

namespace {

Vec unit(const Vec& v) {
  const double n = norm2(v);
  Vec u = v;
  if (n > 0) {
    for (double& x : u) x /= n;
  }
  return u;
}

double angle(const Vec& a, const Vec& b) { return std::acos(std::clamp(dot(a, b), -1.0, 1.0)); }

}  // namespace

RayEstimate accumulation_rays(const std::vector<TailTerm>& tail, const std::vector<Vec>& hints,
                              const std::string& label) {
  RayEstimate out;
  if (!hints.empty()) {
    for (const auto& h : hints) {
      LimitRay r;
      r.label = label;
      r.direction = unit(h);
      r.origin = RayOrigin::Declared;
      out.rays.push_back(std::move(r));
    }
    return out;
  }
  std::vector<TailTerm> terms;
  for (const auto& t : tail) {
    if (norm2(t.v) > 0.0 && t.h > 0.0) terms.push_back({t.h, unit(t.v)});
  }
  std::stable_sort(terms.begin(), terms.end(), [](const TailTerm& a, const TailTerm& b) { return a.h > b.h; });
  if (terms.size() > static_cast<std::size_t>(kTailTerms)) terms.erase(terms.begin(), terms.end() - kTailTerms);
  if (terms.size() < 8) {
    out.inconclusive = true;
    return out;
  }
  // Clusters seeded in order of decreasing h.
  std::vector<std::vector<const TailTerm*>> clusters;
  std::vector<Vec> seeds;
  for (const auto& t : terms) {
    bool placed = false;
    for (std::size_t c = 0; c < clusters.size(); ++c) {
      if (angle(seeds[c], t.v) <= kAngleTol) {
        clusters[c].push_back(&t);
        placed = true;
        break;
      }
    }
    if (!placed) {
      clusters.push_back({&t});
      seeds.push_back(t.v);
    }
  }
  for (const auto& cl : clusters) {
    if (cl.size() < 3) {
      out.inconclusive = true;
      continue;
    }
    // Least squares u(h) = u0 + h u1, componentwise.
    const double m = static_cast<double>(cl.size());
    double sh = 0.0, shh = 0.0;
    for (const auto* t : cl) {
      sh += t->h;
      shh += t->h * t->h;
    }
    const double det = m * shh - sh * sh;
    const std::size_t d = cl.front()->v.size();
    Vec u0(d), u1(d);
    for (std::size_t i = 0; i < d; ++i) {
      double su = 0.0, shu = 0.0;
      for (const auto* t : cl) {
        su += t->v[i];
        shu += t->h * t->v[i];
      }
      if (std::fabs(det) <= 1e-300) {
        u0[i] = su / m;
        u1[i] = 0.0;
      } else {
        u0[i] = (shh * su - sh * shu) / det;
        u1[i] = (m * shu - sh * su) / det;
      }
    }
    double residual = 0.0;
    for (const auto* t : cl) {
      for (std::size_t i = 0; i < d; ++i) residual = std::max(residual, std::fabs(u0[i] + t->h * u1[i] - t->v[i]));
    }
    if (residual > 1e-6 || norm2(u0) == 0.0) {
      out.inconclusive = true;
      continue;
    }
    LimitRay r;
    r.label = label;
    r.direction = unit(u0);
    r.origin = RayOrigin::Extrapolated;
    r.residual = residual;
    out.rays.push_back(std::move(r));
  }
  return out;
}

void mark_attained(std::vector<LimitRay>& rays, const std::vector<Vec>& generators) {
  for (auto& r : rays) {
    r.attained = false;
    for (const auto& g : generators) {
      const Vec u = unit(g);
      if (u.empty() || norm2(g) == 0.0) continue;
      double dist = 0.0;
      for (std::size_t i = 0; i < u.size(); ++i) dist = std::max(dist, std::fabs(u[i] - r.direction[i]));
      if (dist <= 1e-12) {
        r.attained = true;
        break;
      }
    }
  }
}

std::vector<LabeledVector> augmented_generators(const SipInstance& inst, const PointEvaluation& ev) {
  std::vector<LabeledVector> out;
  out.reserve(ev.indices.size());
  for (const auto& e : ev.indices) {
    Vec v = e.gradient;
    v.push_back(dot(e.gradient, ev.point) - e.value);
    out.push_back({label_text(inst, e.label), std::move(v)});
  }
  return out;
}

std::vector<LabeledVector> augmented_generators(const SipInstance& inst, std::span<const double> x) {
  return augmented_generators(inst, evaluate_all(inst, x, inst.max_level()));
}

ClosednessVerdict closedness_diagnostic(const std::vector<Vec>& generators, const std::vector<LimitRay>& rays,
                                        bool exhaustive, double tol) {
  ClosednessVerdict out;
  std::vector<Vec> units;
  double lo = kInf, hi = 0.0;
  for (const auto& g : generators) {
    const double n = norm2(g);
    if (n == 0.0) continue;
    lo = std::min(lo, n);
    hi = std::max(hi, n);
    units.push_back(unit(g));
  }
  out.min_norm = units.empty() ? 0.0 : lo;
  out.norm_ratio = units.empty() ? 1.0 : hi / lo;
  out.band_ok = !units.empty() && out.norm_ratio <= 1e3 && lo >= 1e-6;

  if (exhaustive) {
    out.status = Closedness::Closed;
    out.reason = "finitely generated";
    return out;
  }
  if (units.empty() && rays.empty()) {
    out.status = Closedness::Closed;
    out.reason = "trivial cone";
    return out;
  }
  const int d = static_cast<int>(units.empty() ? rays.front().direction.size() : units.front().size());

  bool all_rays_in_cone = true;
  for (const auto& ray : rays) {
    if (ray.attained) continue;
    const Vec& r = ray.direction;
    // Relative separator: a in r-perp strictly negative on every generator
    // not parallel to r. Then r is a limit of generator directions that no
    // conic combination reaches.
    std::vector<Vec> projected;
    for (const auto& u : units) {
      const double c = dot(u, r);
      Vec p = u;
      for (int i = 0; i < d; ++i) p[i] -= c * r[i];
      if (norm2(p) <= 1e-12) continue;
      projected.push_back(unit(p));
    }
    if (!projected.empty()) {
      MarginResult m = max_margin_direction(projected, {r}, d);
      if (m.status == LpStatus::Optimal && m.margin > tol) {
        // Verify against the raw generators.
        bool ok = std::fabs(dot(m.direction, r)) <= 1e-9;
        for (const auto& u : units) {
          const double c = dot(u, r);
          Vec p = u;
          for (int i = 0; i < d; ++i) p[i] -= c * r[i];
          if (norm2(p) <= 1e-12) {
            if (c > 0) ok = false;  // parallel generator: ray attained
            continue;
          }
          ok = ok && dot(m.direction, u) < 0.0;
        }
        if (ok) {
          out.status = Closedness::NotClosed;
          out.reason = "limit ray not attained";
          out.witness = ClosednessWitness{ray.label, r, m.direction, m.margin};
          return out;
        }
      }
    }
    FeasibilityResult f = cone_feasibility(units, {}, r, 1e-9);
    if (f.status != FeasibilityStatus::Member) all_rays_in_cone = false;
  }

  std::vector<Vec> compact = units;
  for (const auto& r : rays) compact.push_back(r.direction);
  MarginResult m = max_margin_direction(compact, {}, d);
  out.margin = m.margin;
  if (m.status != LpStatus::Optimal) {
    out.status = Closedness::Unknown;
    out.reason = "lp failure";
    return out;
  }
  if (!all_rays_in_cone) {
    out.status = Closedness::Unknown;
    out.reason = "limit ray neither attained nor separated";
    return out;
  }
  if (m.margin > tol) {
    out.status = Closedness::Closed;
    out.reason = "0 outside the convex hull of the normalized generators";
    return out;
  }
  out.status = Closedness::Unknown;
  out.reason = "0 in the convex hull of the normalized generators";
  return out;
}

std::vector<FamilyTail> family_tails(const SipInstance& inst, const PointEvaluation& ev, bool augmented) {
  std::vector<FamilyTail> out;
  for (int ci = 0; ci < static_cast<int>(inst.constraints.size()); ++ci) {
    const Constraint& c = inst.constraints[ci];
    if (c.index_set < 0) continue;
    const auto& d = inst.index_sets[c.index_set];
    std::vector<std::pair<IndexLabel, double>> ends;  // limit label, endpoint
    if (std::holds_alternative<CountableIndex>(d.kind)) {
      ends.push_back({IndexLabel{ci, 0.0, true, 1}, kInf});
    } else if (const auto* iv = std::get_if<IntervalIndex>(&d.kind)) {
      if (!iv->include_lower) ends.push_back({IndexLabel{ci, iv->lower, true, -1}, iv->lower});
      if (!iv->include_upper) ends.push_back({IndexLabel{ci, iv->upper, true, 1}, iv->upper});
    }
    for (const auto& [lab, e] : ends) {
      FamilyTail ft;
      ft.limit = lab;
      ft.label = label_text(inst, lab);
      for (const auto& idx : ev.indices) {
        if (idx.label.constraint != ci || idx.label.limit) continue;
        double h;
        if (std::isinf(e)) {
          if (idx.label.t <= 0) continue;
          h = 1.0 / idx.label.t;
        } else {
          h = std::fabs(idx.label.t - e);
          const auto& iv = std::get<IntervalIndex>(d.kind);
          if (h > (iv.upper - iv.lower) / 2) continue;
        }
        Vec v = idx.gradient;
        if (augmented) v.push_back(dot(idx.gradient, ev.point) - idx.value);
        ft.terms.push_back({h, std::move(v)});
      }
      if (!augmented) {
        if (const auto* cn = std::get_if<CountableIndex>(&d.kind)) ft.hints = cn->limit_rays;
      }
      out.push_back(std::move(ft));
    }
  }
  return out;
}

}  // namespace sipcq
