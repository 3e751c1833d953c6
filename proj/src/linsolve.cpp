#include "sipcq/linsolve.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sipcq {

Matrix::Matrix(int rows, int cols, double fill)
    : rows_(rows), cols_(cols), data_(static_cast<std::size_t>(rows) * cols, fill) {
  if (rows < 0 || cols < 0) throw std::invalid_argument("Matrix: negative size");
}

Matrix Matrix::from_rows(const std::vector<Vec>& rows, int cols) {
  const int c = cols >= 0 ? cols : (rows.empty() ? 0 : static_cast<int>(rows.front().size()));
  Matrix m(static_cast<int>(rows.size()), c);
  for (int i = 0; i < m.rows_; ++i) {
    if (static_cast<int>(rows[i].size()) != c) throw std::invalid_argument("Matrix::from_rows: ragged rows");
    for (int j = 0; j < c; ++j) m(i, j) = rows[i][j];
  }
  return m;
}

Matrix Matrix::from_columns(const std::vector<Vec>& cols, int rows) {
  const int r = rows >= 0 ? rows : (cols.empty() ? 0 : static_cast<int>(cols.front().size()));
  Matrix m(r, static_cast<int>(cols.size()));
  for (int j = 0; j < m.cols_; ++j) {
    if (static_cast<int>(cols[j].size()) != r) throw std::invalid_argument("Matrix::from_columns: ragged columns");
    for (int i = 0; i < r; ++i) m(i, j) = cols[j][i];
  }
  return m;
}

Vec Matrix::row(int i) const { return Vec(data_.begin() + static_cast<std::ptrdiff_t>(i) * cols_, data_.begin() + static_cast<std::ptrdiff_t>(i + 1) * cols_); }

Vec Matrix::column(int j) const {
  Vec out(rows_);
  for (int i = 0; i < rows_; ++i) out[i] = (*this)(i, j);
  return out;
}

Vec Matrix::multiply(const Vec& v) const {
  Vec out(rows_, 0.0);
  for (int i = 0; i < rows_; ++i) {
    double s = 0.0;
    for (int j = 0; j < cols_; ++j) s += (*this)(i, j) * v[j];
    out[i] = s;
  }
  return out;
}

double Matrix::norm_inf() const {
  double best = 0.0;
  for (int i = 0; i < rows_; ++i) {
    double s = 0.0;
    for (int j = 0; j < cols_; ++j) s += std::fabs((*this)(i, j));
    best = std::max(best, s);
  }
  return best;
}

double dot(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm2(const Vec& v) { return std::sqrt(dot(v, v)); }

double norm_inf(const Vec& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::fabs(x));
  return m;
}

namespace {

// Modified Gram-Schmidt against `basis`, applied twice.
Vec orthogonalize(Vec v, const std::vector<Vec>& basis) {
  for (int pass = 0; pass < 2; ++pass) {
    for (const auto& q : basis) {
      const double c = dot(q, v);
      for (std::size_t i = 0; i < v.size(); ++i) v[i] -= c * q[i];
    }
  }
  return v;
}

}  // namespace

RankNullspace rank_nullspace(const Matrix& m, double tol) {
  if (!(tol > 0)) throw std::invalid_argument("rank_nullspace: tol must be positive");
  const int rows = m.rows();
  const int cols = m.cols();
  Matrix r = m;
  double scale = 0.0;
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) scale = std::max(scale, std::fabs(r(i, j)));
  const double threshold = tol * scale;

  std::vector<int> pivot_cols;
  int prow = 0;
  for (int c = 0; c < cols && prow < rows; ++c) {
    int best = prow;
    for (int i = prow + 1; i < rows; ++i)
      if (std::fabs(r(i, c)) > std::fabs(r(best, c))) best = i;
    if (!(std::fabs(r(best, c)) > threshold)) continue;
    for (int j = 0; j < cols; ++j) std::swap(r(prow, j), r(best, j));
    const double p = r(prow, c);
    for (int j = 0; j < cols; ++j) r(prow, j) /= p;
    for (int i = 0; i < rows; ++i) {
      if (i == prow) continue;
      const double f = r(i, c);
      if (f == 0.0) continue;
      for (int j = 0; j < cols; ++j) r(i, j) -= f * r(prow, j);
    }
    pivot_cols.push_back(c);
    ++prow;
  }

  RankNullspace out;
  out.rank = static_cast<int>(pivot_cols.size());
  std::vector<bool> is_pivot(cols, false);
  for (int c : pivot_cols) is_pivot[c] = true;
  for (int f = 0; f < cols; ++f) {
    if (is_pivot[f]) continue;
    Vec v(cols, 0.0);
    v[f] = 1.0;
    for (int k = 0; k < out.rank; ++k) v[pivot_cols[k]] = -r(k, f);
    v = orthogonalize(std::move(v), out.basis);
    const double n = norm2(v);
    if (n == 0.0) continue;
    for (double& x : v) x /= n;
    out.basis.push_back(std::move(v));
  }
  return out;
}

std::vector<int> independent_subset(const std::vector<Vec>& vectors, double tol) {
  std::vector<int> chosen;
  std::vector<Vec> basis;
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    const double n0 = norm2(vectors[i]);
    if (n0 == 0.0) continue;
    Vec r = orthogonalize(vectors[i], basis);
    const double n = norm2(r);
    if (n <= tol * n0) continue;
    for (double& x : r) x /= n;
    basis.push_back(std::move(r));
    chosen.push_back(static_cast<int>(i));
  }
  return chosen;
}

const char* to_string(LpStatus s) {
  switch (s) {
    case LpStatus::Optimal:
      return "optimal";
    case LpStatus::Infeasible:
      return "infeasible";
    case LpStatus::Unbounded:
      return "unbounded";
    case LpStatus::IterationLimit:
      return "iteration_limit";
  }
  return "?";
}

const char* to_string(FeasibilityStatus s) {
  switch (s) {
    case FeasibilityStatus::Member:
      return "member";
    case FeasibilityStatus::Separated:
      return "separated";
    case FeasibilityStatus::Failed:
      return "failed";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Simplex

namespace {

constexpr double kPivotTol = 1e-9;
constexpr double kCostTol = 1e-10;

// How an original variable is recovered from standard-form columns.
struct VarMap {
  enum Kind { Shift, Reflect, Split } kind = Shift;
  int col = -1;
  int col2 = -1;
  double offset = 0.0;
};

class Tableau {
 public:
  Tableau(int rows, int cols) : rows_(rows), width_(cols + 1), t_(static_cast<std::size_t>(rows + 1) * (cols + 1), 0.0) {}

  double& at(int i, int j) { return t_[static_cast<std::size_t>(i) * width_ + j]; }
  double at(int i, int j) const { return t_[static_cast<std::size_t>(i) * width_ + j]; }
  double& rhs(int i) { return at(i, width_ - 1); }
  double& obj(int j) { return at(rows_, j); }
  int rows() const { return rows_; }
  int cols() const { return width_ - 1; }

  void pivot(int pr, int pc) {
    const double p = at(pr, pc);
    double* prow = &t_[static_cast<std::size_t>(pr) * width_];
    for (int j = 0; j < width_; ++j) prow[j] /= p;
    prow[pc] = 1.0;
    for (int i = 0; i <= rows_; ++i) {
      if (i == pr) continue;
      double* row = &t_[static_cast<std::size_t>(i) * width_];
      const double f = row[pc];
      if (f == 0.0) continue;
      for (int j = 0; j < width_; ++j) {
        if (prow[j] != 0.0) row[j] -= f * prow[j];
      }
      row[pc] = 0.0;
    }
  }

 private:
  int rows_;
  int width_;
  std::vector<double> t_;
};

// Dantzig pricing; after a run of degenerate pivots it falls back to
// Bland's rule until the objective moves again. Columns >= limit never enter.
LpStatus iterate(Tableau& t, std::vector<int>& basis, int limit, int& iterations, int max_iterations) {
  int degenerate_run = 0;
  for (;;) {
    int enter = -1;
    const bool bland = degenerate_run >= 50;
    double most = -kCostTol;
    for (int j = 0; j < limit; ++j) {
      if (t.obj(j) < most) {
        enter = j;
        if (bland) break;
        most = t.obj(j);
      }
    }
    if (enter < 0) return LpStatus::Optimal;
    if (iterations >= max_iterations) return LpStatus::IterationLimit;
    double best = kInf;
    for (int i = 0; i < t.rows(); ++i) {
      const double a = t.at(i, enter);
      if (a > kPivotTol) best = std::min(best, t.rhs(i) / a);
    }
    if (best == kInf) return LpStatus::Unbounded;
    int leave = -1;
    const double slack = 1e-12 * (1.0 + std::fabs(best));
    for (int i = 0; i < t.rows(); ++i) {
      const double a = t.at(i, enter);
      if (a <= kPivotTol || t.rhs(i) / a > best + slack) continue;
      if (leave < 0 || basis[i] < basis[leave]) leave = i;
    }
    degenerate_run = best <= 1e-12 ? degenerate_run + 1 : 0;
    t.pivot(leave, enter);
    basis[leave] = enter;
    ++iterations;
  }
}

}  // namespace

std::optional<Vec> solve_dense(Matrix a, Vec b, double tol) {
  const int m = a.rows();
  if (a.cols() != m || static_cast<int>(b.size()) != m) throw std::invalid_argument("solve_dense: shape mismatch");
  const double scale = std::max(a.norm_inf(), 1e-300);
  for (int c = 0; c < m; ++c) {
    int p = c;
    for (int i = c + 1; i < m; ++i)
      if (std::fabs(a(i, c)) > std::fabs(a(p, c))) p = i;
    if (std::fabs(a(p, c)) <= tol * scale) return std::nullopt;
    if (p != c) {
      for (int j = 0; j < m; ++j) std::swap(a(c, j), a(p, j));
      std::swap(b[c], b[p]);
    }
    for (int i = c + 1; i < m; ++i) {
      const double f = a(i, c) / a(c, c);
      if (f == 0.0) continue;
      for (int j = c; j < m; ++j) a(i, j) -= f * a(c, j);
      b[i] -= f * b[c];
    }
  }
  for (int c = m - 1; c >= 0; --c) {
    for (int j = c + 1; j < m; ++j) b[c] -= a(c, j) * b[j];
    b[c] /= a(c, c);
  }
  return b;
}

LpSolution simplex_solve(const LpProblem& p, int max_iterations) {
  const int n = static_cast<int>(p.objective.size());
  const int m = p.a.rows();
  if (p.a.cols() != n && !(m == 0)) throw std::invalid_argument("simplex_solve: A has wrong column count");
  if (static_cast<int>(p.b.size()) != m) throw std::invalid_argument("simplex_solve: b has wrong length");
  Vec lower = p.lower.empty() ? Vec(n, 0.0) : p.lower;
  Vec upper = p.upper.empty() ? Vec(n, kInf) : p.upper;
  if (static_cast<int>(lower.size()) != n || static_cast<int>(upper.size()) != n)
    throw std::invalid_argument("simplex_solve: bound vectors have wrong length");
  for (int j = 0; j < n; ++j) {
    if (lower[j] > upper[j]) {
      LpSolution s;
      s.status = LpStatus::Infeasible;
      return s;
    }
  }

  // Standard form columns.
  std::vector<VarMap> map(n);
  std::vector<Vec> cols;
  Vec cost;
  Vec b = p.b;
  struct UpperRow {
    int col;
    double bound;
  };
  std::vector<UpperRow> upper_rows;
  auto column_of = [&](int j, double sign) {
    Vec c(m);
    for (int i = 0; i < m; ++i) c[i] = sign * p.a(i, j);
    return c;
  };
  for (int j = 0; j < n; ++j) {
    if (std::isfinite(lower[j])) {
      map[j] = {VarMap::Shift, static_cast<int>(cols.size()), -1, lower[j]};
      for (int i = 0; i < m; ++i) b[i] -= p.a(i, j) * lower[j];
      if (std::isfinite(upper[j])) upper_rows.push_back({static_cast<int>(cols.size()), upper[j] - lower[j]});
      cols.push_back(column_of(j, 1.0));
      cost.push_back(p.objective[j]);
    } else if (std::isfinite(upper[j])) {
      map[j] = {VarMap::Reflect, static_cast<int>(cols.size()), -1, upper[j]};
      for (int i = 0; i < m; ++i) b[i] -= p.a(i, j) * upper[j];
      cols.push_back(column_of(j, -1.0));
      cost.push_back(-p.objective[j]);
    } else {
      map[j] = {VarMap::Split, static_cast<int>(cols.size()), static_cast<int>(cols.size()) + 1, 0.0};
      cols.push_back(column_of(j, 1.0));
      cost.push_back(p.objective[j]);
      cols.push_back(column_of(j, -1.0));
      cost.push_back(-p.objective[j]);
    }
  }
  const int structural = static_cast<int>(cols.size());
  const int slacks = static_cast<int>(upper_rows.size());
  const int rows = m + slacks;
  const int ncols = structural + slacks;  // before artificials
  const int total = ncols + rows;

  Tableau t(rows, total);
  Vec flip(rows, 1.0);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < structural; ++j) t.at(i, j) = cols[j][i];
    t.rhs(i) = b[i];
  }
  for (int k = 0; k < slacks; ++k) {
    const int i = m + k;
    t.at(i, upper_rows[k].col) = 1.0;
    t.at(i, structural + k) = 1.0;
    t.rhs(i) = upper_rows[k].bound;
  }
  for (int i = 0; i < rows; ++i) {
    if (t.rhs(i) < 0) {
      flip[i] = -1.0;
      for (int j = 0; j < ncols; ++j) t.at(i, j) = -t.at(i, j);
      t.rhs(i) = -t.rhs(i);
    }
    t.at(i, ncols + i) = 1.0;
  }
  cost.resize(total, 0.0);

  std::vector<int> basis(rows);
  for (int i = 0; i < rows; ++i) basis[i] = ncols + i;

  // Phase 1: minimize the sum of artificials.
  double bscale = 1.0;
  for (int i = 0; i < rows; ++i) {
    bscale = std::max(bscale, std::fabs(t.rhs(i)));
    for (int j = 0; j < ncols; ++j) t.obj(j) -= t.at(i, j);
    t.obj(total) -= t.rhs(i);
  }
  LpSolution sol;
  LpStatus st = iterate(t, basis, ncols, sol.iterations, max_iterations);
  if (st == LpStatus::IterationLimit) {
    sol.status = st;
    return sol;
  }
  if (-t.obj(total) > 1e-9 * bscale) {
    sol.status = LpStatus::Infeasible;
    return sol;
  }
  // Drive remaining artificials out of the basis where possible.
  for (int i = 0; i < rows; ++i) {
    if (basis[i] < ncols) continue;
    int best = -1;
    for (int j = 0; j < ncols; ++j) {
      if (std::fabs(t.at(i, j)) > kPivotTol && (best < 0 || std::fabs(t.at(i, j)) > std::fabs(t.at(i, best)) * 10.0)) {
        best = j;
      }
    }
    if (best >= 0) {
      t.pivot(i, best);
      basis[i] = best;
    }
  }

  // Phase 2.
  for (int j = 0; j <= total; ++j) t.obj(j) = 0.0;
  for (int j = 0; j < total; ++j) t.obj(j) = cost[j];
  for (int i = 0; i < rows; ++i) {
    const double cb = cost[basis[i]];
    if (cb == 0.0) continue;
    for (int j = 0; j <= total; ++j) t.obj(j) -= cb * t.at(i, j);
  }
  st = iterate(t, basis, ncols, sol.iterations, max_iterations);
  sol.status = st;
  if (st != LpStatus::Optimal) return sol;

  Vec z(total, 0.0);
  for (int i = 0; i < rows; ++i) z[basis[i]] = std::max(0.0, t.rhs(i));
  sol.x.assign(n, 0.0);
  for (int j = 0; j < n; ++j) {
    const VarMap& v = map[j];
    switch (v.kind) {
      case VarMap::Shift:
        sol.x[j] = v.offset + z[v.col];
        break;
      case VarMap::Reflect:
        sol.x[j] = v.offset - z[v.col];
        break;
      case VarMap::Split:
        sol.x[j] = z[v.col] - z[v.col2];
        break;
    }
  }
  sol.objective = 0.0;
  for (int j = 0; j < n; ++j) sol.objective += p.objective[j] * sol.x[j];
  sol.duals.assign(m, 0.0);
  for (int i = 0; i < m; ++i) sol.duals[i] = -t.obj(ncols + i) * flip[i];
  return sol;
}

// ---------------------------------------------------------------------------
// Cone queries

namespace {

// minimize sum(alpha + beta)
// subject to  sum_i w_i p_i + G lambda + H y + alpha - beta = 0,  sum w = 1.
// Variable order: w, lambda, y, alpha, beta.
LpSolution distance_lp(const std::vector<Vec>& p, const std::vector<Vec>& g, const std::vector<Vec>& h, int d) {
  const int np = static_cast<int>(p.size());
  const int ng = static_cast<int>(g.size());
  const int nh = static_cast<int>(h.size());
  const int nvar = np + ng + nh + 2 * d;
  const int rows = d + (np > 0 ? 1 : 0);
  LpProblem lp;
  lp.objective.assign(nvar, 0.0);
  lp.a = Matrix(rows, nvar);
  lp.b.assign(rows, 0.0);
  lp.lower.assign(nvar, 0.0);
  lp.upper.assign(nvar, kInf);
  int c = 0;
  for (int k = 0; k < np; ++k, ++c) {
    for (int i = 0; i < d; ++i) lp.a(i, c) = p[k][i];
    lp.a(d, c) = 1.0;
  }
  for (int k = 0; k < ng; ++k, ++c)
    for (int i = 0; i < d; ++i) lp.a(i, c) = g[k][i];
  for (int k = 0; k < nh; ++k, ++c) {
    for (int i = 0; i < d; ++i) lp.a(i, c) = h[k][i];
    lp.lower[c] = -kInf;
  }
  for (int i = 0; i < d; ++i) {
    lp.a(i, c + i) = 1.0;
    lp.a(i, c + d + i) = -1.0;
    lp.objective[c + i] = 1.0;
    lp.objective[c + d + i] = 1.0;
  }
  if (np > 0) lp.b[d] = 1.0;
  return simplex_solve(lp);
}

void check_dimensions(const std::vector<Vec>& vs, int d, const char* what) {
  for (const auto& v : vs) {
    if (static_cast<int>(v.size()) != d) throw std::invalid_argument(std::string(what) + ": dimension mismatch");
  }
}

}  // namespace

FeasibilityResult stationarity_feasibility(const std::vector<Vec>& p, const std::vector<Vec>& g,
                                           const std::vector<Vec>& h, int d, double tol) {
  check_dimensions(p, d, "stationarity_feasibility");
  check_dimensions(g, d, "stationarity_feasibility");
  check_dimensions(h, d, "stationarity_feasibility");
  FeasibilityResult out;
  const int np = static_cast<int>(p.size());
  const int ng = static_cast<int>(g.size());
  const int nh = static_cast<int>(h.size());

  // A zero point is a trivial certificate.
  for (int k = 0; k < np; ++k) {
    if (norm_inf(p[k]) == 0.0) {
      out.status = FeasibilityStatus::Member;
      out.certificate.weights.assign(np, 0.0);
      out.certificate.weights[k] = 1.0;
      out.certificate.lambda.assign(ng, 0.0);
      out.certificate.y.assign(nh, 0.0);
      return out;
    }
  }

  LpSolution s = distance_lp(p, g, h, d);
  out.lp_status = s.status;
  if (s.status != LpStatus::Optimal) return out;
  out.distance = s.objective;

  FeasibilityCertificate& cert = out.certificate;
  cert.weights.assign(s.x.begin(), s.x.begin() + np);
  cert.lambda.assign(s.x.begin() + np, s.x.begin() + np + ng);
  cert.y.assign(s.x.begin() + np + ng, s.x.begin() + np + ng + nh);
  for (double& l : cert.lambda) l = std::max(0.0, l);
  for (double& w : cert.weights) w = std::max(0.0, w);
  Vec r(d, 0.0);
  for (int k = 0; k < np; ++k)
    for (int i = 0; i < d; ++i) r[i] += cert.weights[k] * p[k][i];
  for (int k = 0; k < ng; ++k)
    for (int i = 0; i < d; ++i) r[i] += cert.lambda[k] * g[k][i];
  for (int k = 0; k < nh; ++k)
    for (int i = 0; i < d; ++i) r[i] += cert.y[k] * h[k][i];
  cert.residual = norm_inf(r);
  if (cert.residual <= tol) {
    out.status = FeasibilityStatus::Member;
    return out;
  }

  Vec a(s.duals.begin(), s.duals.begin() + d);
  const double scale = norm_inf(a);
  if (scale == 0.0) return out;
  for (double& x : a) x /= scale;
  double worst_p = -kInf;
  for (const auto& pk : p) worst_p = std::max(worst_p, dot(a, pk));
  bool ok = worst_p < 0.0;
  for (const auto& gk : g) ok = ok && dot(a, gk) <= 1e-9 * std::max(1.0, norm_inf(gk));
  for (const auto& hk : h) ok = ok && std::fabs(dot(a, hk)) <= 1e-9 * std::max(1.0, norm_inf(hk));
  if (!ok) return out;
  out.status = FeasibilityStatus::Separated;
  out.separator = std::move(a);
  out.gap = -worst_p;
  return out;
}

FeasibilityResult cone_feasibility(const std::vector<Vec>& g, const std::vector<Vec>& h, const Vec& v,
                                   double tol) {
  const int d = static_cast<int>(v.size());
  Vec neg(d);
  for (int i = 0; i < d; ++i) neg[i] = -v[i];
  FeasibilityResult r = stationarity_feasibility({neg}, g, h, d, tol);
  r.certificate.weights.clear();
  return r;
}

MarginResult max_margin_direction(const std::vector<Vec>& g, const std::vector<Vec>& h, int d) {
  check_dimensions(g, d, "max_margin_direction");
  check_dimensions(h, d, "max_margin_direction");
  MarginResult out;
  out.direction.assign(d, 0.0);
  if (g.empty()) {
    out.margin = kInf;
    return out;
  }
  LpSolution s = distance_lp(g, {}, h, d);
  out.status = s.status;
  if (s.status != LpStatus::Optimal) {
    out.margin = 0.0;
    return out;
  }
  for (int i = 0; i < d; ++i) out.direction[i] = std::clamp(s.duals[i], -1.0, 1.0);
  double worst = -kInf;
  for (const auto& gk : g) worst = std::max(worst, dot(gk, out.direction));
  out.margin = -worst;
  return out;
}

}  // namespace sipcq
