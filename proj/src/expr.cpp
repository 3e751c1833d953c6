#include "sipcq/expr.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <optional>
#include <utility>

namespace sipcq {

ParseError::ParseError(const std::string& message, SourceLocation where)
    : std::runtime_error(std::to_string(where.line) + ":" + std::to_string(where.column) + ": " +
                         message),
      where_(where) {}

DomainError::DomainError(const std::string& message, std::string subexpression)
    : std::runtime_error(message + " in '" + subexpression + "'"),
      subexpression_(std::move(subexpression)) {}

SymbolTable SymbolTable::standard(int dimension) { return standard(dimension, {}); }

SymbolTable SymbolTable::standard(int dimension, std::vector<std::string> indices) {
  SymbolTable table;
  for (int i = 1; i <= dimension; ++i) table.variables.push_back("x" + std::to_string(i));
  table.indices = std::move(indices);
  return table;
}

// ---------------------------------------------------------------------------
// Tree

struct Expr::Node {
  ExprKind kind = ExprKind::Constant;
  double value = 0.0;
  int position = 0;  // variable position or index slot
  std::vector<Expr> args;
  bool x_free = true;
  bool affine = true;
};

namespace {

bool is_unary(ExprKind k) {
  switch (k) {
    case ExprKind::Neg:
    case ExprKind::Sin:
    case ExprKind::Cos:
    case ExprKind::Exp:
    case ExprKind::Log:
    case ExprKind::Sqrt:
      return true;
    default:
      return false;
  }
}

bool is_binary(ExprKind k) {
  switch (k) {
    case ExprKind::Add:
    case ExprKind::Sub:
    case ExprKind::Mul:
    case ExprKind::Div:
    case ExprKind::Pow:
      return true;
    default:
      return false;
  }
}

}  // namespace

Expr::Expr() : Expr(Expr::constant(0.0)) {}

Expr::Expr(std::shared_ptr<const Node> node) : node_(std::move(node)) {}

Expr Expr::constant(double value) {
  auto n = std::make_shared<Node>();
  n->kind = ExprKind::Constant;
  n->value = value == 0.0 ? 0.0 : value;  // drop negative zero
  return Expr(std::move(n));
}

Expr Expr::variable(int position) {
  auto n = std::make_shared<Node>();
  n->kind = ExprKind::Variable;
  n->position = position;
  n->x_free = false;
  return Expr(std::move(n));
}

Expr Expr::index(int slot) {
  auto n = std::make_shared<Node>();
  n->kind = ExprKind::IndexVariable;
  n->position = slot;
  return Expr(std::move(n));
}

Expr Expr::unary(ExprKind kind, Expr operand) {
  if (!is_unary(kind)) throw std::invalid_argument("Expr::unary: not a unary kind");
  auto n = std::make_shared<Node>();
  n->kind = kind;
  n->x_free = operand.node_->x_free;
  n->affine = kind == ExprKind::Neg ? operand.node_->affine : n->x_free;
  n->args.push_back(std::move(operand));
  return Expr(std::move(n));
}

Expr Expr::binary(ExprKind kind, Expr lhs, Expr rhs) {
  if (!is_binary(kind)) throw std::invalid_argument("Expr::binary: not a binary kind");
  auto n = std::make_shared<Node>();
  n->kind = kind;
  const Node& a = *lhs.node_;
  const Node& b = *rhs.node_;
  n->x_free = a.x_free && b.x_free;
  switch (kind) {
    case ExprKind::Add:
    case ExprKind::Sub:
      n->affine = a.affine && b.affine;
      break;
    case ExprKind::Mul:
      n->affine = (a.x_free && b.affine) || (b.x_free && a.affine);
      break;
    case ExprKind::Div:
      n->affine = a.affine && b.x_free;
      break;
    case ExprKind::Pow:
      n->affine = n->x_free ||
                  (a.affine && b.kind == ExprKind::Constant && (b.value == 1.0 || b.value == 0.0));
      break;
    default:
      break;
  }
  n->args.push_back(std::move(lhs));
  n->args.push_back(std::move(rhs));
  return Expr(std::move(n));
}

ExprKind Expr::kind() const { return node_->kind; }
double Expr::value() const { return node_->value; }
int Expr::position() const { return node_->position; }
int Expr::slot() const { return node_->position; }
std::span<const Expr> Expr::children() const { return node_->args; }

bool operator==(const Expr& a, const Expr& b) {
  if (a.node_ == b.node_) return true;
  const auto& x = *a.node_;
  const auto& y = *b.node_;
  if (x.kind != y.kind || x.args.size() != y.args.size()) return false;
  switch (x.kind) {
    case ExprKind::Constant:
      return x.value == y.value;
    case ExprKind::Variable:
    case ExprKind::IndexVariable:
      return x.position == y.position;
    default:
      break;
  }
  for (std::size_t i = 0; i < x.args.size(); ++i) {
    if (!(x.args[i] == y.args[i])) return false;
  }
  return true;
}

int required_dimension(const Expr& e) {
  int best = e.kind() == ExprKind::Variable ? e.position() + 1 : 0;
  for (const auto& c : e.children()) best = std::max(best, required_dimension(c));
  return best;
}

int required_slots(const Expr& e) {
  int best = e.kind() == ExprKind::IndexVariable ? e.slot() + 1 : 0;
  for (const auto& c : e.children()) best = std::max(best, required_slots(c));
  return best;
}

bool depends_on_x(const Expr& e) {
  if (e.kind() == ExprKind::Variable) return true;
  return std::any_of(e.children().begin(), e.children().end(),
                     [](const Expr& c) { return depends_on_x(c); });
}

bool is_affine_in_x(const Expr& e) {
  switch (e.kind()) {
    case ExprKind::Constant:
    case ExprKind::Variable:
    case ExprKind::IndexVariable:
      return true;
    case ExprKind::Neg:
      return is_affine_in_x(e.children()[0]);
    case ExprKind::Add:
    case ExprKind::Sub:
      return is_affine_in_x(e.children()[0]) && is_affine_in_x(e.children()[1]);
    case ExprKind::Mul: {
      const auto& a = e.children()[0];
      const auto& b = e.children()[1];
      return (!depends_on_x(a) && is_affine_in_x(b)) || (!depends_on_x(b) && is_affine_in_x(a));
    }
    case ExprKind::Div:
      return is_affine_in_x(e.children()[0]) && !depends_on_x(e.children()[1]);
    case ExprKind::Pow: {
      const auto& a = e.children()[0];
      const auto& b = e.children()[1];
      if (!depends_on_x(a) && !depends_on_x(b)) return true;
      return is_affine_in_x(a) && b.kind() == ExprKind::Constant &&
             (b.value() == 1.0 || b.value() == 0.0);
    }
    default:
      return !depends_on_x(e);
  }
}

// ---------------------------------------------------------------------------
// Printing

namespace {

std::string format_number(double v) {
  std::array<char, 64> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  if (ec != std::errc()) return std::to_string(v);
  return std::string(buf.data(), end);
}

const char* function_name(ExprKind k) {
  switch (k) {
    case ExprKind::Sin:
      return "sin";
    case ExprKind::Cos:
      return "cos";
    case ExprKind::Exp:
      return "exp";
    case ExprKind::Log:
      return "log";
    case ExprKind::Sqrt:
      return "sqrt";
    default:
      return "";
  }
}

const char* operator_text(ExprKind k) {
  switch (k) {
    case ExprKind::Add:
      return " + ";
    case ExprKind::Sub:
      return " - ";
    case ExprKind::Mul:
      return " * ";
    case ExprKind::Div:
      return " / ";
    case ExprKind::Pow:
      return "^";
    default:
      return "";
  }
}

void print_into(std::string& out, const Expr& e, const SymbolTable& s) {
  switch (e.kind()) {
    case ExprKind::Constant:
      // A parenthesized negative literal re-parses as a single constant.
      if (e.value() < 0) {
        out += "(-" + format_number(-e.value()) + ")";
      } else {
        out += format_number(e.value());
      }
      return;
    case ExprKind::Variable:
      if (e.position() < static_cast<int>(s.variables.size())) {
        out += s.variables[e.position()];
      } else {
        out += "x" + std::to_string(e.position() + 1);
      }
      return;
    case ExprKind::IndexVariable:
      if (e.slot() < static_cast<int>(s.indices.size())) {
        out += s.indices[e.slot()];
      } else {
        out += e.slot() == 0 ? std::string("t") : "t" + std::to_string(e.slot());
      }
      return;
    case ExprKind::Neg:
      out += "(-(";
      print_into(out, e.children()[0], s);
      out += "))";
      return;
    case ExprKind::Sin:
    case ExprKind::Cos:
    case ExprKind::Exp:
    case ExprKind::Log:
    case ExprKind::Sqrt:
      out += function_name(e.kind());
      out += "(";
      print_into(out, e.children()[0], s);
      out += ")";
      return;
    default:
      out += "(";
      print_into(out, e.children()[0], s);
      out += operator_text(e.kind());
      print_into(out, e.children()[1], s);
      out += ")";
      return;
  }
}

}  // namespace

std::string print(const Expr& expr, const SymbolTable& symbols) {
  std::string out;
  print_into(out, expr, symbols);
  return out;
}

// ---------------------------------------------------------------------------
// Parsing

namespace {

enum class Tok { Number, Name, Plus, Minus, Star, Slash, Caret, LParen, RParen, Comma, End };

struct Token {
  Tok kind = Tok::End;
  std::string text;
  double number = 0.0;
  SourceLocation where;
};

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  std::vector<Token> run() {
    std::vector<Token> out;
    for (;;) {
      skip_space();
      Token t;
      t.where = {line_, col_};
      if (pos_ >= src_.size()) {
        t.kind = Tok::End;
        out.push_back(t);
        return out;
      }
      char c = src_[pos_];
      if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
        t.kind = Tok::Number;
        t.text = read_number(t.where);
        const char* first = t.text.data();
        auto [ptr, ec] = std::from_chars(first, first + t.text.size(), t.number);
        if (ec != std::errc() || ptr != first + t.text.size() || !std::isfinite(t.number)) {
          throw ParseError("malformed number '" + t.text + "'", t.where);
        }
      } else if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
        t.kind = Tok::Name;
        while (pos_ < src_.size() &&
               (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_')) {
          t.text += advance();
        }
      } else {
        switch (c) {
          case '+': t.kind = Tok::Plus; break;
          case '-': t.kind = Tok::Minus; break;
          case '*': t.kind = Tok::Star; break;
          case '/': t.kind = Tok::Slash; break;
          case '^': t.kind = Tok::Caret; break;
          case '(': t.kind = Tok::LParen; break;
          case ')': t.kind = Tok::RParen; break;
          case ',': t.kind = Tok::Comma; break;
          default:
            throw ParseError(std::string("unexpected character '") + c + "'", t.where);
        }
        t.text = std::string(1, advance());
      }
      out.push_back(std::move(t));
    }
  }

 private:
  char advance() {
    char c = src_[pos_++];
    if (c == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    return c;
  }

  void skip_space() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) advance();
  }

  std::string read_number(SourceLocation where) {
    std::string s;
    auto digits = [&] {
      while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) s += advance();
    };
    digits();
    if (pos_ < src_.size() && src_[pos_] == '.') {
      s += advance();
      digits();
    }
    if (s == ".") throw ParseError("malformed number '.'", where);
    if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
      std::size_t save = pos_;
      int save_col = col_;
      std::string exp(1, advance());
      if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) exp += advance();
      if (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
        s += exp;
        digits();
      } else {
        pos_ = save;
        col_ = save_col;
      }
    }
    return s;
  }

  std::string_view src_;
  std::size_t pos_ = 0;
  int line_ = 1;
  int col_ = 1;
};

class Parser {
 public:
  Parser(std::vector<Token> tokens, const SymbolTable& symbols)
      : toks_(std::move(tokens)), syms_(symbols) {}

  Expr run() {
    Expr e = expression();
    if (peek().kind != Tok::End) fail("unexpected '" + peek().text + "'");
    return e;
  }

 private:
  const Token& peek(std::size_t ahead = 0) const {
    return toks_[std::min(pos_ + ahead, toks_.size() - 1)];
  }
  const Token& next() { return toks_[std::min(pos_++, toks_.size() - 1)]; }

  [[noreturn]] void fail(const std::string& msg) const {
    const Token& t = peek();
    throw ParseError(t.kind == Tok::End ? msg + " at end of input" : msg, t.where);
  }

  void expect(Tok kind, const char* what) {
    if (peek().kind != kind) {
      fail(std::string("expected ") + what + (peek().kind == Tok::End ? "" : " before '" + peek().text + "'"));
    }
    next();
  }

  Expr expression() {
    Expr lhs = term();
    while (peek().kind == Tok::Plus || peek().kind == Tok::Minus) {
      ExprKind k = next().kind == Tok::Plus ? ExprKind::Add : ExprKind::Sub;
      lhs = Expr::binary(k, lhs, term());
    }
    return lhs;
  }

  Expr term() {
    Expr lhs = unary();
    while (peek().kind == Tok::Star || peek().kind == Tok::Slash) {
      ExprKind k = next().kind == Tok::Star ? ExprKind::Mul : ExprKind::Div;
      lhs = Expr::binary(k, lhs, unary());
    }
    return lhs;
  }

  Expr unary() {
    if (peek().kind == Tok::Minus) {
      next();
      return Expr::unary(ExprKind::Neg, unary());
    }
    return power();
  }

  Expr power() {
    Expr base = primary();
    if (peek().kind == Tok::Caret) {
      next();
      return Expr::binary(ExprKind::Pow, base, unary());
    }
    return base;
  }

  Expr primary() {
    const Token& t = peek();
    switch (t.kind) {
      case Tok::Number:
        next();
        return Expr::constant(t.number);
      case Tok::Name:
        return name();
      case Tok::LParen: {
        // "(-c)" is the canonical spelling of a negative constant.
        if (peek(1).kind == Tok::Minus && peek(2).kind == Tok::Number && peek(3).kind == Tok::RParen) {
          double v = peek(2).number;
          pos_ += 4;
          return Expr::constant(-v);
        }
        next();
        Expr inner = expression();
        expect(Tok::RParen, "')'");
        return inner;
      }
      default:
        fail(t.kind == Tok::End ? "expected operand" : "expected operand before '" + t.text + "'");
    }
  }

  Expr name() {
    const Token t = next();
    static constexpr std::pair<const char*, ExprKind> kFunctions[] = {
        {"sin", ExprKind::Sin}, {"cos", ExprKind::Cos},   {"exp", ExprKind::Exp},
        {"log", ExprKind::Log}, {"sqrt", ExprKind::Sqrt},
    };
    for (const auto& [fname, kind] : kFunctions) {
      if (t.text != fname) continue;
      if (peek().kind != Tok::LParen) {
        throw ParseError("function '" + t.text + "' requires an argument list", t.where);
      }
      next();
      std::vector<Expr> args;
      if (peek().kind != Tok::RParen) {
        args.push_back(expression());
        while (peek().kind == Tok::Comma) {
          next();
          args.push_back(expression());
        }
      }
      expect(Tok::RParen, "')'");
      if (args.size() != 1) {
        throw ParseError("function '" + t.text + "' takes 1 argument, got " + std::to_string(args.size()),
                         t.where);
      }
      return Expr::unary(kind, std::move(args.front()));
    }
    for (std::size_t i = 0; i < syms_.variables.size(); ++i) {
      if (syms_.variables[i] == t.text) return Expr::variable(static_cast<int>(i));
    }
    for (std::size_t i = 0; i < syms_.indices.size(); ++i) {
      if (syms_.indices[i] == t.text) return Expr::index(static_cast<int>(i));
    }
    throw ParseError("unknown identifier '" + t.text + "'", t.where);
  }

  std::vector<Token> toks_;
  const SymbolTable& syms_;
  std::size_t pos_ = 0;
};

}  // namespace

Expr parse(std::string_view source, const SymbolTable& symbols) {
  return Parser(Lexer(source).run(), symbols).run();
}

// ---------------------------------------------------------------------------
// Evaluation

namespace {

struct Dual {
  double v = 0.0;
  std::array<double, kMaxDimension> d{};
  int n = 0;
};

Dual make_constant(double v, int n) {
  Dual r;
  r.v = v;
  r.n = n;
  return r;
}

// Scales the tangent of `a` by `k` and stores value `v`.
Dual chain(const Dual& a, double v, double k) {
  Dual r;
  r.v = v;
  r.n = a.n;
  for (int i = 0; i < a.n; ++i) r.d[i] = k * a.d[i];
  return r;
}

double ipow(double base, long long k) {
  double result = 1.0;
  double b = base;
  unsigned long long e = static_cast<unsigned long long>(k);
  while (e) {
    if (e & 1ULL) result *= b;
    b *= b;
    e >>= 1ULL;
  }
  return result;
}

std::optional<long long> integral_exponent(double v) {
  if (std::floor(v) == v && std::fabs(v) <= 1e9) return static_cast<long long>(v);
  return std::nullopt;
}

std::string node_text(const Expr& e) { return print(e, SymbolTable{}); }

[[noreturn]] void domain_fail(const std::string& what, const Expr& e) { throw DomainError(what, node_text(e)); }

double checked(double v, const Expr& e) {
  if (!std::isfinite(v)) domain_fail("non-finite result", e);
  return v;
}

struct DoubleOps {
  using Num = double;
  int n;
  std::span<const double> x;
  std::span<const double> idx;

  Num constant(double v) const { return v; }
  Num variable(int p) const { return x[p]; }
  static double value(const Num& a) { return a; }
  Num neg(const Num& a) const { return -a; }
  Num add(const Num& a, const Num& b) const { return a + b; }
  Num sub(const Num& a, const Num& b) const { return a - b; }
  Num mul(const Num& a, const Num& b) const { return a * b; }
  Num div(const Num& a, const Num& b) const { return a / b; }
  Num powi(const Num& a, long long k) const {
    return k >= 0 ? ipow(a, k) : 1.0 / ipow(a, -k);
  }
  Num pow_const(const Num& a, double p) const { return std::pow(a, p); }
  Num pow_general(const Num& a, const Num& b) const { return std::exp(b * std::log(a)); }
  Num sin(const Num& a) const { return std::sin(a); }
  Num cos(const Num& a) const { return std::cos(a); }
  Num exp(const Num& a) const { return std::exp(a); }
  Num log(const Num& a) const { return std::log(a); }
  Num sqrt(const Num& a) const { return std::sqrt(a); }
  static constexpr bool kTangent = false;
};

struct DualOps {
  using Num = Dual;
  int n;
  std::span<const double> x;
  std::span<const double> idx;

  Num constant(double v) const { return make_constant(v, n); }
  Num variable(int p) const {
    Dual r = make_constant(x[p], n);
    r.d[p] = 1.0;
    return r;
  }
  static double value(const Num& a) { return a.v; }
  Num neg(const Num& a) const { return chain(a, -a.v, -1.0); }
  Num add(const Num& a, const Num& b) const {
    Dual r = a;
    r.v += b.v;
    for (int i = 0; i < n; ++i) r.d[i] += b.d[i];
    return r;
  }
  Num sub(const Num& a, const Num& b) const {
    Dual r = a;
    r.v -= b.v;
    for (int i = 0; i < n; ++i) r.d[i] -= b.d[i];
    return r;
  }
  Num mul(const Num& a, const Num& b) const {
    Dual r = make_constant(a.v * b.v, n);
    for (int i = 0; i < n; ++i) r.d[i] = a.d[i] * b.v + a.v * b.d[i];
    return r;
  }
  Num div(const Num& a, const Num& b) const {
    Dual r = make_constant(a.v / b.v, n);
    const double inv = 1.0 / b.v;
    for (int i = 0; i < n; ++i) r.d[i] = (a.d[i] - r.v * b.d[i]) * inv;
    return r;
  }
  Num powi(const Num& a, long long k) const {
    if (k == 0) return make_constant(1.0, n);
    const double v = k >= 0 ? ipow(a.v, k) : 1.0 / ipow(a.v, -k);
    const double km1 = (k - 1) >= 0 ? ipow(a.v, k - 1) : 1.0 / ipow(a.v, -(k - 1));
    return chain(a, v, static_cast<double>(k) * km1);
  }
  Num pow_const(const Num& a, double p) const {
    const double v = std::pow(a.v, p);
    return chain(a, v, p * v / a.v);
  }
  Num pow_general(const Num& a, const Num& b) const {
    const double la = std::log(a.v);
    const double v = std::exp(b.v * la);
    Dual r = make_constant(v, n);
    for (int i = 0; i < n; ++i) r.d[i] = v * (b.d[i] * la + b.v * a.d[i] / a.v);
    return r;
  }
  Num sin(const Num& a) const { return chain(a, std::sin(a.v), std::cos(a.v)); }
  Num cos(const Num& a) const { return chain(a, std::cos(a.v), -std::sin(a.v)); }
  Num exp(const Num& a) const {
    const double v = std::exp(a.v);
    return chain(a, v, v);
  }
  Num log(const Num& a) const { return chain(a, std::log(a.v), 1.0 / a.v); }
  Num sqrt(const Num& a) const {
    const double v = std::sqrt(a.v);
    return chain(a, v, 0.5 / v);
  }
  static constexpr bool kTangent = true;
};

double eval_x_free(const Expr& e, std::span<const double> idx);

template <class Ops>
typename Ops::Num walk(const Expr& e, const Ops& ops) {
  using Num = typename Ops::Num;
  switch (e.kind()) {
    case ExprKind::Constant:
      return ops.constant(e.value());
    case ExprKind::Variable:
      return ops.variable(e.position());
    case ExprKind::IndexVariable:
      return ops.constant(ops.idx[e.slot()]);
    case ExprKind::Neg:
      return ops.neg(walk(e.children()[0], ops));
    case ExprKind::Add:
      return ops.add(walk(e.children()[0], ops), walk(e.children()[1], ops));
    case ExprKind::Sub:
      return ops.sub(walk(e.children()[0], ops), walk(e.children()[1], ops));
    case ExprKind::Mul:
      return ops.mul(walk(e.children()[0], ops), walk(e.children()[1], ops));
    case ExprKind::Div: {
      Num a = walk(e.children()[0], ops);
      Num b = walk(e.children()[1], ops);
      if (Ops::value(b) == 0.0) domain_fail("division by zero", e);
      Num r = ops.div(a, b);
      checked(Ops::value(r), e);
      return r;
    }
    case ExprKind::Pow: {
      const Expr& base = e.children()[0];
      const Expr& expo = e.children()[1];
      Num a = walk(base, ops);
      if (!depends_on_x(expo)) {
        const double p = eval_x_free(expo, ops.idx);
        if (auto k = integral_exponent(p)) {
          if (*k < 0 && Ops::value(a) == 0.0) domain_fail("negative power of zero", e);
          Num r = ops.powi(a, *k);
          checked(Ops::value(r), e);
          return r;
        }
        if (Ops::value(a) <= 0.0) domain_fail("non-integer power of a nonpositive base", e);
        Num r = ops.pow_const(a, p);
        checked(Ops::value(r), e);
        return r;
      }
      Num b = walk(expo, ops);
      if (Ops::value(a) <= 0.0) domain_fail("variable power of a nonpositive base", e);
      Num r = ops.pow_general(a, b);
      checked(Ops::value(r), e);
      return r;
    }
    case ExprKind::Sin:
      return ops.sin(walk(e.children()[0], ops));
    case ExprKind::Cos:
      return ops.cos(walk(e.children()[0], ops));
    case ExprKind::Exp: {
      Num r = ops.exp(walk(e.children()[0], ops));
      checked(Ops::value(r), e);
      return r;
    }
    case ExprKind::Log: {
      Num a = walk(e.children()[0], ops);
      if (Ops::value(a) <= 0.0) domain_fail("log of a nonpositive value", e);
      return ops.log(a);
    }
    case ExprKind::Sqrt: {
      Num a = walk(e.children()[0], ops);
      if (Ops::value(a) < 0.0) domain_fail("sqrt of a negative value", e);
      if (Ops::kTangent && Ops::value(a) == 0.0) domain_fail("sqrt is not differentiable at 0", e);
      return ops.sqrt(a);
    }
  }
  return ops.constant(0.0);
}

double eval_x_free(const Expr& e, std::span<const double> idx) {
  DoubleOps ops{0, {}, idx};
  return walk(e, ops);
}

void check_bindings(const Expr& e, const Bindings& b) {
  if (b.x.size() > static_cast<std::size_t>(kMaxDimension)) {
    throw std::invalid_argument("decision dimension exceeds " + std::to_string(kMaxDimension));
  }
  if (required_dimension(e) > static_cast<int>(b.x.size())) {
    throw std::invalid_argument("expression references a variable beyond the bound dimension");
  }
  if (required_slots(e) > static_cast<int>(b.index.size())) {
    throw std::invalid_argument("expression references an unbound index variable");
  }
}

}  // namespace

double eval(const Expr& expr, const Bindings& b) {
  check_bindings(expr, b);
  DoubleOps ops{static_cast<int>(b.x.size()), b.x, b.index};
  return checked(walk(expr, ops), expr);
}

ValueAndGradient eval_with_gradient(const Expr& expr, const Bindings& b) {
  check_bindings(expr, b);
  const int n = static_cast<int>(b.x.size());
  DualOps ops{n, b.x, b.index};
  Dual r = walk(expr, ops);
  checked(r.v, expr);
  ValueAndGradient out;
  out.value = r.v;
  out.gradient.assign(r.d.begin(), r.d.begin() + n);
  for (double g : out.gradient) {
    if (!std::isfinite(g)) domain_fail("non-finite derivative", expr);
  }
  return out;
}

std::vector<double> grad_x(const Expr& expr, const Bindings& b) {
  return eval_with_gradient(expr, b).gradient;
}

}  // namespace sipcq
