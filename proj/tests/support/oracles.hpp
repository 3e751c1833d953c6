#pragma once

// Independent reference computations for the test suites. Nothing here
// calls into the library code under test except to build inputs.

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "sipcq/expr.hpp"
#include "sipcq/instance_io.hpp"

namespace oracle {

using Vec = std::vector<double>;

inline std::string data_file(const std::string& name) { return std::string(SIPCQ_DATA_DIR) + "/" + name; }

// ---------------------------------------------------------------------------
// Random expressions, well defined on [-2,2]^n by construction.

inline sipcq::Expr random_expr(std::mt19937_64& rng, int n, int depth) {
  using sipcq::Expr;
  using sipcq::ExprKind;
  std::uniform_int_distribution<int> pick(0, 11);
  std::uniform_real_distribution<double> coef(-2.0, 2.0);
  auto positive = [&](Expr e) {
    return Expr::binary(ExprKind::Add, Expr::constant(0.5 + std::fabs(coef(rng))),
                        Expr::binary(ExprKind::Mul, e, e));
  };
  if (depth == 0) {
    if (std::uniform_int_distribution<int>(0, 3)(rng) == 0) return Expr::constant(coef(rng));
    return Expr::variable(std::uniform_int_distribution<int>(0, n - 1)(rng));
  }
  const Expr a = random_expr(rng, n, depth - 1);
  switch (pick(rng)) {
    case 0:
      return Expr::binary(ExprKind::Add, a, random_expr(rng, n, depth - 1));
    case 1:
      return Expr::binary(ExprKind::Sub, a, random_expr(rng, n, depth - 1));
    case 2:
    case 3:
      return Expr::binary(ExprKind::Mul, a, random_expr(rng, n, depth - 1));
    case 4:
      return Expr::binary(ExprKind::Div, a, positive(random_expr(rng, n, depth - 1)));
    case 5:
      return Expr::binary(ExprKind::Pow, a, Expr::constant(std::uniform_int_distribution<int>(2, 3)(rng)));
    case 6:
      return Expr::binary(ExprKind::Pow, positive(a), Expr::constant(0.5 + std::fabs(coef(rng)) / 2));
    case 7:
      return Expr::unary(ExprKind::Sin, a);
    case 8:
      return Expr::unary(ExprKind::Cos, a);
    case 9:
      return Expr::unary(ExprKind::Exp, Expr::unary(ExprKind::Sin, a));
    case 10:
      return Expr::unary(ExprKind::Log, positive(a));
    default:
      return Expr::unary(ExprKind::Sqrt, positive(a));
  }
}

/// Richardson-extrapolated central difference of f along coordinate i.
inline double central_difference(const std::function<double(const Vec&)>& f, Vec x, int i) {
  const double h = 1e-3 * std::max(1.0, std::fabs(x[i]));
  auto d = [&](double s) {
    Vec p = x, m = x;
    p[i] += s;
    m[i] -= s;
    return (f(p) - f(m)) / (2 * s);
  };
  return (4.0 * d(h / 2) - d(h)) / 3.0;
}

// ---------------------------------------------------------------------------
// LP by brute-force vertex enumeration: min c'x s.t. A x <= b (rows), with
// A containing enough rows to make the feasible set bounded.

inline std::optional<Vec> solve_square(std::vector<Vec> a, Vec b) {
  const int n = static_cast<int>(b.size());
  for (int c = 0; c < n; ++c) {
    int p = c;
    for (int i = c + 1; i < n; ++i)
      if (std::fabs(a[i][c]) > std::fabs(a[p][c])) p = i;
    if (std::fabs(a[p][c]) < 1e-12) return std::nullopt;
    std::swap(a[c], a[p]);
    std::swap(b[c], b[p]);
    for (int i = 0; i < n; ++i) {
      if (i == c) continue;
      const double f = a[i][c] / a[c][c];
      for (int j = c; j < n; ++j) a[i][j] -= f * a[c][j];
      b[i] -= f * b[c];
    }
  }
  Vec x(n);
  for (int i = 0; i < n; ++i) x[i] = b[i] / a[i][i];
  return x;
}

struct VertexOptimum {
  bool feasible = false;
  double objective = 0.0;
  Vec x;
};

inline VertexOptimum vertex_enumeration(const Vec& c, const std::vector<Vec>& a, const Vec& b) {
  const int m = static_cast<int>(a.size());
  const int n = static_cast<int>(c.size());
  VertexOptimum best;
  std::vector<int> pick(n);
  std::function<void(int, int)> rec = [&](int start, int depth) {
    if (depth == n) {
      std::vector<Vec> rows;
      Vec rhs;
      for (int k : pick) {
        rows.push_back(a[k]);
        rhs.push_back(b[k]);
      }
      auto x = solve_square(rows, rhs);
      if (!x) return;
      for (int i = 0; i < m; ++i) {
        double s = 0;
        for (int j = 0; j < n; ++j) s += a[i][j] * (*x)[j];
        if (s > b[i] + 1e-9 * (1 + std::fabs(b[i]))) return;
      }
      double obj = 0;
      for (int j = 0; j < n; ++j) obj += c[j] * (*x)[j];
      if (!best.feasible || obj < best.objective) best = {true, obj, *x};
      return;
    }
    for (int k = start; k < m; ++k) {
      pick[depth] = k;
      rec(k + 1, depth + 1);
    }
  };
  rec(0, 0);
  return best;
}

// ---------------------------------------------------------------------------
// Random convex interval families g_t(x) = alpha(t)|x|^2 + <a(t),x> + b(t),
// written as instance text with the reference point x = 0 feasible.

struct ConvexFamily {
  std::string text;
  int n = 2;
};

inline std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

inline std::string term(double c, const std::string& factor) {
  std::string s = c < 0 ? " - " : " + ";
  return s + fmt(std::fabs(c)) + (factor.empty() ? "" : "*" + factor);
}

inline ConvexFamily random_convex_family(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const int n = 2;
  const int kind = static_cast<int>(seed % 5);
  double a0 = std::fabs(u(rng)), a1 = std::fabs(u(rng));
  Vec p0(n), p1(n);
  for (int i = 0; i < n; ++i) {
    p0[i] = u(rng);
    p1[i] = u(rng);
  }
  double b0 = u(rng), b1 = u(rng), b2 = u(rng);
  bool open_lower = u(rng) > 0;
  switch (kind) {
    case 1:  // Omega = {0}: no Slater point, zero gradients at 0
      p0 = p1 = Vec(n, 0.0);
      b0 = b1 = b2 = 0.0;
      a0 += 0.1;
      break;
    case 2:  // opposing linear parts through 0
      a0 = a1 = 0.0;
      p1 = Vec(n, 0.0);
      for (int i = 0; i < n; ++i) p1[i] = -2.0 * p0[i];
      b0 = b1 = b2 = 0.0;
      break;
    case 3:  // sup approached only in the limit t -> 0
      a0 = 0.0;
      p0 = p1 = Vec(n, 0.0);
      b0 = 0.0;
      b1 = -std::fabs(b1) - 0.1;
      b2 = 0.0;
      open_lower = true;
      break;
    default:
      break;
  }
  // Shift b so that max_t b(t) is 0 (active) or slightly negative.
  auto bq = [&](double t) { return b0 + b1 * t + b2 * t * t; };
  double top = std::max(bq(0.0), bq(1.0));
  if (b2 < 0) {
    const double tv = -b1 / (2 * b2);
    if (tv > 0 && tv < 1) top = std::max(top, bq(tv));
  }
  if (kind == 0 || kind == 4) b0 -= top + (kind == 4 ? 0.25 : 0.0);

  std::string body = fmt(a0) + "*(x1^2 + x2^2)" + term(a1, "t^2*(x1^2 + x2^2)");
  for (int i = 0; i < n; ++i) {
    const std::string x = "x" + std::to_string(i + 1);
    body += term(p0[i], x) + term(p1[i], "t*" + x);
  }
  body += term(b0, "") + term(b1, "t") + term(b2, "t^2");

  std::ostringstream os;
  os << "[problem]\nvars = x1 x2\nminimize = x1^2 + x2^2\nconvex = true\nbox = -2 2 ; -2 2\n\n";
  os << "[index t]\nkind = interval\nlower = 0\nupper = 1\n";
  os << "include_lower = " << (open_lower ? "false" : "true") << "\nresolution = 65\nrefinement = 3\n\n";
  os << "[constraints]\ng(t) = " << body << "\n";
  return {os.str(), n};
}

/// K fixed smooth constraints, every other one active at x = 0, all
/// gradients at 0 strictly descending along one common direction.
inline std::string random_finite_mfcq(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const int k = 3 + static_cast<int>(seed % 4);
  Vec d{u(rng), u(rng)};
  const double len = std::hypot(d[0], d[1]) + 1e-3;
  d[0] /= len;
  d[1] /= len;
  std::ostringstream os;
  os << "[problem]\nvars = x1 x2\nminimize = x1 + x2\n\n[constraints]\n";
  for (int i = 1; i <= k; ++i) {
    // Gradient g with <g, d> <= -0.2.
    Vec g{u(rng), u(rng)};
    const double shift = g[0] * d[0] + g[1] * d[1] + 0.2 + std::fabs(u(rng));
    g[0] -= shift * d[0];
    g[1] -= shift * d[1];
    const double off = i % 2 == 0 ? 0.0 : -std::fabs(u(rng)) - 0.05;
    os << "g" << i << " = " << fmt(g[0]) << "*x1" << term(g[1], "x2") << term(u(rng), "x1^2") << term(off, "")
       << "\n";
  }
  return os.str();
}

}  // namespace oracle
