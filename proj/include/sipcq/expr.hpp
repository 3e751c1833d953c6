#pragma once

// Expression language for instance files: parsing, canonical printing,
// evaluation and forward-mode gradients with respect to the decision
// variables. Index variables are bound parameters and are never
// differentiated.

#include <array>
#include <cstddef>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace sipcq {

/// Largest supported decision dimension.
inline constexpr int kMaxDimension = 16;

struct SourceLocation {
  int line = 1;
  int column = 1;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& message, SourceLocation where);

  SourceLocation where() const { return where_; }

 private:
  SourceLocation where_;
};

/// Raised when evaluation leaves the domain of an operation (log of a
/// nonpositive value, division by zero, non-integer power of a nonpositive
/// base, non-finite result). `subexpression()` is the canonical text of the
/// offending node.
class DomainError : public std::runtime_error {
 public:
  DomainError(const std::string& message, std::string subexpression);

  const std::string& subexpression() const { return subexpression_; }

 private:
  std::string subexpression_;
};

enum class ExprKind {
  Constant,
  Variable,
  IndexVariable,
  Neg,
  Add,
  Sub,
  Mul,
  Div,
  Pow,
  Sin,
  Cos,
  Exp,
  Log,
  Sqrt,
};

/// Names visible to the parser. Decision variables map to positions
/// 0..n-1 (printed with their declared names), index variables to slots.
struct SymbolTable {
  std::vector<std::string> variables;
  std::vector<std::string> indices;

  /// Variables named x1..xn and no index variables.
  static SymbolTable standard(int dimension);
  static SymbolTable standard(int dimension, std::vector<std::string> indices);
};

/// Immutable expression tree. Copies share nodes.
class Expr {
 public:
  Expr();

  static Expr constant(double value);
  static Expr variable(int position);
  static Expr index(int slot);
  static Expr unary(ExprKind kind, Expr operand);
  static Expr binary(ExprKind kind, Expr lhs, Expr rhs);

  ExprKind kind() const;
  double value() const;   // Constant
  int position() const;   // Variable (0-based)
  int slot() const;       // IndexVariable
  std::span<const Expr> children() const;

  /// Structural equality.
  friend bool operator==(const Expr& a, const Expr& b);

 private:
  struct Node;
  explicit Expr(std::shared_ptr<const Node> node);
  std::shared_ptr<const Node> node_;
};

/// Parses `source` against `symbols`. Grammar (lowest to highest):
///   expr  := term (('+' | '-') term)*
///   term  := unary (('*' | '/') unary)*
///   unary := '-' unary | power
///   power := primary ('^' unary)?          right-associative
///   primary := number | name | func '(' expr ')' | '(' expr ')'
Expr parse(std::string_view source, const SymbolTable& symbols);

/// Fully parenthesized canonical form; parse(print(e)) == e.
std::string print(const Expr& expr, const SymbolTable& symbols);

/// Values for evaluation. `index` is indexed by SymbolTable slot.
struct Bindings {
  std::span<const double> x;
  std::span<const double> index;
};

double eval(const Expr& expr, const Bindings& bindings);

/// Gradient in the decision variables (length bindings.x.size()).
std::vector<double> grad_x(const Expr& expr, const Bindings& bindings);

struct ValueAndGradient {
  double value = 0.0;
  std::vector<double> gradient;
};

ValueAndGradient eval_with_gradient(const Expr& expr, const Bindings& bindings);

/// Largest decision-variable position referenced plus one (0 if none).
int required_dimension(const Expr& expr);

/// Largest index slot referenced plus one (0 if none).
int required_slots(const Expr& expr);

bool depends_on_x(const Expr& expr);

/// Structural affinity test in x: index variables and x-free subtrees are
/// treated as constants.
bool is_affine_in_x(const Expr& expr);

}  // namespace sipcq
