#pragma once

// Dense linear algebra and the LP kernel behind every cone and CQ query.

#include <cstddef>
#include <limits>
#include <optional>
#include <vector>

namespace sipcq {

using Vec = std::vector<double>;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

class Matrix {
 public:
  Matrix() = default;
  Matrix(int rows, int cols, double fill = 0.0);

  /// Rows given as vectors of equal length.
  static Matrix from_rows(const std::vector<Vec>& rows, int cols = -1);
  /// Columns given as vectors of equal length.
  static Matrix from_columns(const std::vector<Vec>& cols, int rows = -1);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  double& operator()(int i, int j) { return data_[static_cast<std::size_t>(i) * cols_ + j]; }
  double operator()(int i, int j) const { return data_[static_cast<std::size_t>(i) * cols_ + j]; }

  Vec row(int i) const;
  Vec column(int j) const;
  Vec multiply(const Vec& v) const;
  /// Maximum absolute row sum.
  double norm_inf() const;

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> data_;
};

double dot(const Vec& a, const Vec& b);
double norm2(const Vec& v);
double norm_inf(const Vec& v);

struct RankNullspace {
  int rank = 0;
  std::vector<Vec> basis;  // orthonormal
};

/// Gaussian elimination with partial pivoting; a pivot counts when its
/// magnitude exceeds tol * max|M_ij|.
RankNullspace rank_nullspace(const Matrix& m, double tol = 1e-9);

/// Indices of a maximal linearly independent subset of `vectors`, chosen
/// greedily in the given order.
std::vector<int> independent_subset(const std::vector<Vec>& vectors, double tol = 1e-9);

/// Square solve by Gaussian elimination with partial pivoting. Empty when a
/// pivot falls below `tol` times the largest entry.
std::optional<Vec> solve_dense(Matrix a, Vec b, double tol = 1e-14);

enum class LpStatus { Optimal, Infeasible, Unbounded, IterationLimit };

const char* to_string(LpStatus s);

/// minimize c'x  subject to  A x = b,  lower <= x <= upper.
struct LpProblem {
  Vec objective;
  Matrix a;
  Vec b;
  Vec lower;  // empty means all 0
  Vec upper;  // empty means all +inf
};

struct LpSolution {
  LpStatus status = LpStatus::Infeasible;
  Vec x;
  double objective = 0.0;
  Vec duals;  // one per equality row; reduced costs c - A'y
  int iterations = 0;
};

/// Dense two-phase tableau simplex; Dantzig pricing with a Bland fallback on
/// degenerate stalls.
LpSolution simplex_solve(const LpProblem& p, int max_iterations = 200000);

struct FeasibilityCertificate {
  Vec weights;  // convex weights over the P points (empty for plain membership)
  Vec lambda;   // over generators, >= 0
  Vec y;        // over lineality vectors
  double residual = 0.0;
};

enum class FeasibilityStatus { Member, Separated, Failed };

const char* to_string(FeasibilityStatus s);

struct FeasibilityResult {
  FeasibilityStatus status = FeasibilityStatus::Failed;
  FeasibilityCertificate certificate;
  /// When Separated: a with |a|_inf = 1, <a,p> <= -gap for every P point,
  /// <a,g> <= 0 for every generator and <a,h> = 0 for every lineality vector.
  Vec separator;
  double gap = 0.0;
  /// l1 distance reported by the LP.
  double distance = 0.0;
  LpStatus lp_status = LpStatus::Optimal;
};

/// Decides 0 in co(P) + cone(G) + span(H) by an l1-distance LP.
FeasibilityResult stationarity_feasibility(const std::vector<Vec>& p, const std::vector<Vec>& g,
                                           const std::vector<Vec>& h, int dimension, double tol);

/// v in cone(G) + span(H). A separator satisfies <a,v> > 0 >= <a,g>.
FeasibilityResult cone_feasibility(const std::vector<Vec>& g, const std::vector<Vec>& h, const Vec& v,
                                   double tol);

struct MarginResult {
  LpStatus status = LpStatus::Optimal;
  Vec direction;
  double margin = 0.0;  // +inf for an empty generator set
};

/// max s  subject to  <g_i,x> <= -s,  <h_j,x> = 0,  |x|_inf <= 1.
MarginResult max_margin_direction(const std::vector<Vec>& g, const std::vector<Vec>& h, int dimension);

}  // namespace sipcq
